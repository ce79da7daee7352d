"""Levenberg-Marquardt descent for ``F(x) = 1/2 ||r(x)||^2``.

Only steps that strictly decrease ``F`` are accepted, so the recorded
objective history is non-increasing.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class OptimizerConfig:
    max_iter: int = 5000
    gtol: float = 1e-8
    ftol: float = 1e-12
    xtol: float = 1e-14
    # slack allowed when comparing against a reference point's objective
    tolerance: float = 1e-10


@dataclass
class LMResult:
    x: np.ndarray
    fun: float
    iterations: int
    converged: bool
    message: str
    history: list = field(default_factory=list)


def levenberg_marquardt(residuals: Callable, x0: np.ndarray, config: OptimizerConfig = OptimizerConfig()) -> LMResult:
    """Minimize half the squared norm of ``residuals(x) -> (r, J)``.

    Uses Marquardt diagonal scaling (running maximum of ``diag(J^T J)``) and
    the Nielsen damping update. Stops when ``||J^T r||_inf <= gtol``, when an
    accepted step changes ``F`` by at most ``ftol`` relatively, when the step
    is negligible, or after ``max_iter`` iterations.
    """
    x = np.array(x0, dtype=float)
    r, jac = residuals(x)
    f = 0.5 * float(r @ r)
    g = jac.T @ r
    diag = np.sum(jac * jac, axis=0)
    scale = np.maximum(diag, 1e-12 * max(diag.max(initial=0.0), 1e-300))
    mu = 1e-3 * max(diag.max(initial=0.0), 1e-300)
    nu = 2.0
    history = [f]
    converged, message = False, "maximum number of iterations reached"
    it = 0
    while it < config.max_iter:
        if np.max(np.abs(g), initial=0.0) <= config.gtol:
            converged, message = True, "gradient below tolerance"
            break
        it += 1
        aug = np.vstack([jac, np.diag(np.sqrt(mu * scale))])
        rhs = np.concatenate([-r, np.zeros(x.size)])
        step = np.linalg.lstsq(aug, rhs, rcond=None)[0]
        if np.linalg.norm(step) <= config.xtol * (np.linalg.norm(x) + config.xtol):
            converged, message = True, "step below tolerance"
            break
        x_new = x + step
        try:
            r_new, jac_new = residuals(x_new)
            f_new = 0.5 * float(r_new @ r_new)
        except (FloatingPointError, np.linalg.LinAlgError):
            f_new = np.inf
        predicted = 0.5 * float(step @ (mu * scale * step - g))
        if np.isfinite(f_new) and f_new < f:
            gain = (f - f_new) / predicted if predicted > 0 else 0.0
            rel = (f - f_new) / max(f, 1e-300)
            x, r, jac, f = x_new, r_new, jac_new, f_new
            g = jac.T @ r
            scale = np.maximum(scale, np.sum(jac * jac, axis=0))
            mu *= max(1.0 / 3.0, 1.0 - (2.0 * gain - 1.0) ** 3)
            nu = 2.0
            history.append(f)
            if rel <= config.ftol:
                converged, message = True, "relative objective change below tolerance"
                break
        else:
            mu *= nu
            nu *= 2.0
            if mu > 1e300 or not np.isfinite(mu):
                converged, message = False, "damping overflow; no descent direction found"
                break
    return LMResult(x, f, it, converged, message, history)
