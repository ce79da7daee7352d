"""Regularized self-consistent estimation of a full gate set.

The estimate minimizes ``L(p(Id, s), f_N) + r * R(s, target)`` over physical
gate sets, where ``L`` is the mean half squared distance between outcome
distributions and ``R`` the weighted squared distance between gate-set
components. Physicality holds at every iterate because the search runs over
:class:`~rscqt.parametrization.PhysicalParameterization`.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .design import FiducialDesign, SequenceSet, measured_effect_vectors
from .exceptions import DegenerateDesignError
from .optimize import LMResult, OptimizerConfig, levenberg_marquardt
from .parametrization import PhysicalParameterization
from .qops import GateSet, choi_from_hs, devectorize, hs_from_choi, partial_trace_output, vectorize
from .simulator import DistributionTable, loss_values, probabilities

log = logging.getLogger(__name__)

INTERIOR_EPS = 1e-4


def regularization(s: GateSet, s_prime: GateSet) -> float:
    """Weighted squared distance between two gate sets of the same shape."""
    if not s.compatible_with(s_prime):
        raise ValueError("gate sets differ in dimension, outcomes or number of gates")
    d2 = s.state.size
    r = 0.5 * np.sum((s.state - s_prime.state) ** 2)
    r += 0.5 * np.sum((s.effects - s_prime.effects) ** 2) / len(s.outcomes)
    r += 0.5 * np.sum((s.gates - s_prime.gates) ** 2) / d2
    return float(r)


def _loss_against(s: GateSet, f: DistributionTable, ids: SequenceSet) -> float:
    if s.outcomes != f.outcomes:
        raise ValueError("gate set and table outcome labels differ")
    return loss_values(probabilities(s, ids).values, f.rows_for(ids))


def objective(s: GateSet, f: DistributionTable, ids: SequenceSet, target: GateSet, r: float) -> float:
    if r <= 0:
        raise ValueError("regularization parameter must be positive")
    return _loss_against(s, f, ids) + r * regularization(s, target)


@dataclass(frozen=True)
class RegularizationConfig:
    """How ``r_N`` is chosen.

    ``schedule`` is ``"fixed"`` (use ``r``), ``"c_over_N"`` (``r = c / N``) or
    ``"cross_validated"`` (``c`` picked from ``grid`` by ``folds``-fold cross
    validation, then ``r = c / N``).
    """

    schedule: str = "c_over_N"
    r: Optional[float] = None
    c: float = 1.0
    folds: int = 5
    grid: tuple = (1e-2, 1e-1, 1.0, 10.0, 100.0)
    seed: int = 0

    def __post_init__(self):
        if self.schedule not in ("fixed", "c_over_N", "cross_validated"):
            raise ValueError(f"unknown regularization schedule {self.schedule!r}")
        if self.schedule == "fixed" and (self.r is None or self.r <= 0):
            raise ValueError("a fixed schedule needs r > 0")
        if self.c <= 0:
            raise ValueError("c must be positive")
        if self.schedule == "cross_validated":
            if self.folds < 2:
                raise ValueError("cross validation needs at least 2 folds")
            if not self.grid or min(self.grid) <= 0:
                raise ValueError("candidate grid must be non-empty and positive")

    def to_json(self) -> dict:
        return {"schedule": self.schedule, "r": self.r, "c": self.c, "folds": self.folds,
                "grid": list(self.grid), "seed": self.seed}

    @classmethod
    def from_json(cls, obj: dict) -> "RegularizationConfig":
        obj = dict(obj)
        if "grid" in obj:
            obj["grid"] = tuple(obj["grid"])
        return cls(**obj)


@dataclass
class EstimateResult:
    estimate: GateSet
    loss_value: float
    reg_value: float
    objective_value: float
    r_used: float
    iterations: int
    converged: bool
    initial_point: str
    c_used: Optional[float] = None
    history: list = field(default_factory=list, repr=False)

    def to_json(self) -> dict:
        return {"loss": self.loss_value, "regularization": self.reg_value,
                "objective": self.objective_value, "r_used": self.r_used, "c_used": self.c_used,
                "iterations": self.iterations, "converged": self.converged,
                "initial_point": self.initial_point}


class RegularizedObjective:
    """Residual form of the estimator objective over a physical parameterization.

    ``F = 1/2 ||res||^2`` with ``res = [(p - f)/sqrt(|Id|), sqrt(r) * (s - target)_weighted]``.
    """

    def __init__(self, f: DistributionTable, ids: SequenceSet, target: GateSet, r: float):
        if r <= 0:
            raise ValueError("regularization parameter must be positive")
        if f.outcomes != target.outcomes:
            raise ValueError("data and target outcome labels differ")
        ids.check_range(target.n_gates)
        self.ids = ids
        self.data = f.rows_for(ids)
        self.target = target
        self.r = float(r)
        self.param = PhysicalParameterization.like(target)
        d2 = target.state.size
        n_out = len(target.outcomes)
        self._m_target = np.concatenate([target.state, target.effects.ravel(), target.gates.ravel()])
        self._reg_weights = np.concatenate([
            np.ones(d2), np.full(n_out * d2, 1.0 / np.sqrt(n_out)),
            np.full(target.gates.size, 1.0 / np.sqrt(d2))])

    def _probabilities(self, m: np.ndarray, jac: bool):
        t = self.target
        d2 = t.state.size
        n_out = len(t.outcomes)
        state = m[:d2]
        effects = m[d2:d2 + n_out * d2].reshape(n_out, d2)
        gates = m[d2 + n_out * d2:].reshape(t.n_gates, d2, d2)
        g_off = d2 + n_out * d2
        n_seq = len(self.ids)
        p = np.empty((n_seq, n_out))
        dp = np.zeros((n_seq, n_out, m.size)) if jac else None
        cache = {(): state}
        for row, seq in enumerate(self.ids):
            states = [state]
            for j, idx in enumerate(seq):
                key = seq[: j + 1]
                v = cache.get(key)
                if v is None:
                    v = gates[idx - 1] @ states[-1]
                    cache[key] = v
                states.append(v)
            p[row] = effects @ states[-1]
            if not jac:
                continue
            block = dp[row]
            for w in range(n_out):
                block[w, d2 + w * d2: d2 + (w + 1) * d2] = states[-1]
            u = effects
            for pos in range(len(seq) - 1, -1, -1):
                g = seq[pos] - 1
                sl = slice(g_off + g * d2 * d2, g_off + (g + 1) * d2 * d2)
                block[:, sl] += np.einsum("wa,b->wab", u, states[pos]).reshape(n_out, -1)
                u = u @ gates[g]
            block[:, :d2] = u
        return p, dp

    def residuals_from_model(self, m: np.ndarray, dm: Optional[np.ndarray] = None):
        p, dp = self._probabilities(m, dm is not None)
        scale = 1.0 / np.sqrt(len(self.ids))
        sr = np.sqrt(self.r)
        res = np.concatenate([scale * (p - self.data).ravel(), sr * self._reg_weights * (m - self._m_target)])
        if dm is None:
            return res, None
        jm = np.vstack([scale * dp.reshape(-1, m.size), np.diag(sr * self._reg_weights)])
        return res, jm @ dm

    def residuals(self, theta: np.ndarray):
        m, dm = self.param.model(theta, jac=True)
        return self.residuals_from_model(m, dm)

    def parts(self, s: GateSet):
        """``(loss, regularization)`` evaluated directly on a gate set."""
        m = np.concatenate([s.state, s.effects.ravel(), s.gates.ravel()])
        p, _ = self._probabilities(m, False)
        return loss_values(p, self.data), regularization(s, self.target)


def _psd_project_trace_one(m: np.ndarray) -> np.ndarray:
    """Nearest unit-trace PSD matrix in Frobenius norm (eigenvalue simplex projection)."""
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    u = np.sort(w)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.nonzero(u - css / np.arange(1, u.size + 1) > 0)[0][-1]
    w = np.clip(w - css[k] / (k + 1), 0.0, None)
    return (v * w) @ v.conj().T


def _inv_sqrt(q: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (q + q.conj().T))
    w = np.clip(w, 1e-12 * max(w.max(), 1e-300), None)
    return (v / np.sqrt(w)) @ v.conj().T


def project_physical(s: GateSet) -> GateSet:
    """Map an arbitrary gate set onto the physical set, component by component.

    Density matrix: eigenvalues projected onto the simplex. Effects: negative
    eigenvalues clipped, then the sum renormalized to the identity. Gates:
    negative Choi eigenvalues clipped, then the input marginal renormalized
    to the identity.
    """
    d = s.dim
    rho = _psd_project_trace_one(s.rho)
    effects = []
    for e in s.povm.values():
        w, v = np.linalg.eigh(0.5 * (e + e.conj().T))
        effects.append((v * np.clip(w, 0.0, None)) @ v.conj().T)
    m = _inv_sqrt(sum(effects))
    effects = [m @ e @ m for e in effects]
    gates = []
    for hs in s.gates:
        j = choi_from_hs(hs)
        w, v = np.linalg.eigh(0.5 * (j + j.conj().T))
        j = (v * np.clip(w, 0.0, None)) @ v.conj().T
        k = np.kron(np.eye(d), _inv_sqrt(partial_trace_output(j)))
        g = hs_from_choi(k @ j @ k)
        g[0] = 0.0
        g[0, 0] = 1.0
        gates.append(g)
    effects = [0.5 * (e + e.conj().T) for e in effects]
    return GateSet.from_matrices(0.5 * (rho + rho.conj().T), dict(zip(s.outcomes, effects)), gates, s.gate_names)


def interior_point(s: GateSet, eps: float = INTERIOR_EPS) -> GateSet:
    """Mix every component of a physical ``s`` with its maximally mixed counterpart."""
    d2 = s.state.size
    mixed_state = np.zeros(d2)
    mixed_state[0] = 1.0 / np.sqrt(s.dim)
    n_out = len(s.outcomes)
    mixed_effects = np.zeros_like(s.effects)
    mixed_effects[:, 0] = np.sqrt(s.dim) / n_out
    dep = np.zeros((d2, d2))
    dep[0, 0] = 1.0
    return s.replace(state=(1 - eps) * s.state + eps * mixed_state,
                     effects=(1 - eps) * s.effects + eps * mixed_effects,
                     gates=(1 - eps) * s.gates + eps * dep[None])


def _lookup_rows(f: DistributionTable, seqs) -> np.ndarray:
    try:
        return np.array([f.values[f.sequences.index(q)] for q in seqs])
    except KeyError as exc:
        raise ValueError(f"data has no row for fiducial sequence {exc.args[0]}") from None


def linear_inversion(f: DistributionTable, fd: FiducialDesign, target: GateSet, rank_tol: float = 1e-8) -> GateSet:
    """Linear-inversion gate set in the target's measurement frame (possibly unphysical)."""
    d2 = target.state.size
    n_out = len(target.outcomes)
    prep, meas = list(fd.prep), list(fd.meas)

    def gram(middle):
        # rows: (meas fiducial, outcome); columns: prep fiducial
        cols = [_lookup_rows(f, [ps + middle + ms for ms in meas]).reshape(-1) for ps in prep]
        return np.array(cols).T

    p0 = gram(())
    u, sv, _ = np.linalg.svd(p0)
    if sv.size < d2 or sv[d2 - 1] <= rank_tol * sv[0]:
        raise DegenerateDesignError(f"fiducial Gram matrix has rank below {d2}: singular values {sv}")
    uk = u[:, :d2]
    e_target = measured_effect_vectors(target, fd.meas)
    x = uk.T @ e_target
    if np.linalg.cond(x) > 1.0 / rank_tol:
        raise DegenerateDesignError("target measurement frame is degenerate for these fiducials")
    e_est = uk @ x
    r_est = np.linalg.solve(x, uk.T @ p0)
    e_pinv = np.linalg.pinv(e_est)
    r_pinv = np.linalg.pinv(r_est)
    gates = np.array([e_pinv @ gram((g,)) @ r_pinv for g in range(1, target.n_gates + 1)])

    def word(seq):
        out = np.eye(d2)
        for idx in seq:
            out = gates[idx - 1] @ out
        return out

    ps0 = prep[0]
    state = r_est[:, 0] if not ps0 else np.linalg.lstsq(word(ps0), r_est[:, 0], rcond=None)[0]
    ms0 = meas[0]
    eff_rows = e_est[:n_out]
    effects = eff_rows if not ms0 else np.linalg.lstsq(word(ms0).T, eff_rows.T, rcond=None)[0].T
    return GateSet(state, effects, gates, target.outcomes, target.gate_names)


def linear_inversion_init(f: DistributionTable, fd: FiducialDesign, target: GateSet,
                          rank_tol: float = 1e-8) -> GateSet:
    """Linear inversion followed by projection onto the physical set."""
    return project_physical(linear_inversion(f, fd, target, rank_tol))


def _has_rows(f: DistributionTable, fd: FiducialDesign) -> bool:
    from .design import scic_sequences

    return all(q in f.sequences for q in scic_sequences(fd))


def resolve_r(cfg: RegularizationConfig, shots: Optional[int]):
    """``(r, c)`` for a non-cross-validated schedule."""
    if cfg.schedule == "fixed":
        return float(cfg.r), None
    if shots is None:
        raise ValueError("the c/N schedule needs the repetition count of the data")
    return cfg.c / shots, cfg.c


def estimate(f: DistributionTable, ids: SequenceSet, target: GateSet,
             cfg: RegularizationConfig = RegularizationConfig(), opt: OptimizerConfig = OptimizerConfig(),
             fiducials: Optional[FiducialDesign] = None,
             starts: Sequence = ()) -> EstimateResult:
    """Regularized self-consistent estimate from frequencies ``f`` on ``ids``.

    Multi-start: linear inversion (when ``fiducials`` are given and the data
    covers them), the target itself, plus any extra ``(tag, GateSet)`` starts.
    Each start is nudged into the interior before descent; the unmodified
    starts are also kept as candidates, so the result is never worse than any
    of them. Best objective wins, ties go to the smaller distance to target.
    """
    c_used = None
    if cfg.schedule == "cross_validated":
        c_used = select_r(f, ids, target, cfg.grid, cfg.folds, cfg.seed, opt=opt)
        r = c_used / f.shots
    else:
        r, c_used = resolve_r(cfg, f.shots)
    obj = RegularizedObjective(f, ids, target, r)

    start_points = []
    if fiducials is not None and _has_rows(f, fiducials):
        try:
            start_points.append(("linear_inversion", linear_inversion_init(f, fiducials, target)))
        except (DegenerateDesignError, np.linalg.LinAlgError) as exc:
            log.warning("linear inversion start skipped: %s", exc)
    start_points.append(("target", target))
    start_points.extend(starts)

    candidates = []
    for tag, s0 in start_points:
        loss0, reg0 = obj.parts(s0)
        candidates.append((loss0 + r * reg0, reg0, loss0, tag + ":raw", s0, None))
        theta0 = obj.param.encode(interior_point(s0))
        run: LMResult = levenberg_marquardt(obj.residuals, theta0, opt)
        s_hat = obj.param.decode(run.x)
        lo, re = obj.parts(s_hat)
        candidates.append((lo + r * re, re, lo, tag, s_hat, run))

    best_f = min(c[0] for c in candidates)
    tied = [c for c in candidates if c[0] <= best_f + 1e-15 * max(1.0, abs(best_f))]
    f_val, reg_val, loss_val, tag, s_best, run = min(tied, key=lambda c: c[1])
    runs = [c[5] for c in candidates if c[5] is not None]
    if run is None:
        best_run = min(runs, key=lambda x: x.fun)
        iterations, converged, history = 0, best_run.converged, []
    else:
        iterations, converged, history = run.iterations, run.converged, run.history
    if not converged:
        log.warning("estimate did not converge (start %s)", tag)
    return EstimateResult(s_best, loss_val, reg_val, loss_val + r * reg_val, r, iterations, converged, tag,
                          c_used, history)


def cross_validation_scores(f: DistributionTable, ids: SequenceSet, target: GateSet, grid: Sequence[float],
                            folds: int, seed: int, opt: OptimizerConfig = OptimizerConfig(),
                            shots: Optional[int] = None) -> dict:
    """Mean held-out loss for every ``c`` in ``grid`` (``r = c / N``).

    Folds split the sequences of ``ids`` by a seeded permutation. Each training
    fit starts from the target only, since the folds generally lack the rows
    needed for linear inversion.
    """
    grid = sorted(float(c) for c in grid)
    if not grid or grid[0] <= 0:
        raise ValueError("candidate grid must be non-empty and positive")
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if len(ids) < folds:
        raise ValueError(f"cannot split {len(ids)} sequences into {folds} folds")
    shots = shots if shots is not None else f.shots
    if shots is None:
        raise ValueError("repetition count is required to turn c into r")
    perm = np.random.default_rng(seed).permutation(len(ids))
    parts = np.array_split(perm, folds)
    splits = []
    for k in range(folds):
        test = ids.subset(sorted(parts[k]))
        train = ids.subset(sorted(np.concatenate([parts[j] for j in range(folds) if j != k])))
        splits.append((train, test))
    scores = {}
    for c in grid:
        held_out = []
        for train, test in splits:
            fit = estimate(f, train, target, RegularizationConfig("fixed", r=c / shots), opt)
            held_out.append(_loss_against(fit.estimate, f, test))
        scores[c] = float(np.mean(held_out))
        log.info("cross validation: c=%g held-out loss=%.6g", c, scores[c])
    return scores


def select_r(f: DistributionTable, ids: SequenceSet, target: GateSet, grid: Sequence[float], folds: int,
             seed: int, opt: OptimizerConfig = OptimizerConfig(), shots: Optional[int] = None) -> float:
    """Pick ``c`` in ``r = c / N`` by K-fold cross validation over sequences; ties go to the smaller ``c``."""
    grid = [float(c) for c in grid]
    if len(grid) == 1:
        if grid[0] <= 0:
            raise ValueError("candidate grid must be non-empty and positive")
        if folds < 2 or len(ids) < folds:
            raise ValueError("invalid fold count for this sequence set")
        return grid[0]
    scores = cross_validation_scores(f, ids, target, grid, folds, seed, opt, shots)
    best = min(scores.values())
    return min(c for c, v in scores.items() if v == best)
