"""Linear gauge freedom: transforms, matching, orbit distance and indistinguishability."""
from __future__ import annotations

import itertools
import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
from scipy.optimize import least_squares

from .design import FiducialDesign, SequenceSet, measured_effect_vectors, prepared_state_vectors
from .estimator import regularization
from .exceptions import DegenerateDesignError, NoLinearGaugeError
from .qops import GateSet, raw_probabilities, validate

log = logging.getLogger(__name__)

SINGULAR_COND = 1e12
SINGULAR_GATE_TOL = 1e-10


@dataclass(frozen=True)
class GaugeTransform:
    """Invertible real matrix acting on coefficient vectors."""

    a: np.ndarray
    condition_number: float = field(default=None)

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("gauge matrix must be square")
        if not np.all(np.isfinite(a)):
            raise ValueError("gauge matrix has non-finite entries")
        cond = float(np.linalg.cond(a))
        if not np.isfinite(cond) or cond > SINGULAR_COND:
            raise ValueError(f"gauge matrix is singular (condition number {cond:.3g})")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "condition_number", cond)

    @classmethod
    def identity(cls, n: int) -> "GaugeTransform":
        return cls(np.eye(n))

    @property
    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.a)

    def then(self, other: "GaugeTransform") -> "GaugeTransform":
        """Apply ``self`` first, then ``other``."""
        return GaugeTransform(other.a @ self.a)


@dataclass(frozen=True, eq=False)
class GaugedGateSet(GateSet):
    """Gauge image of a gate set together with its physicality flag."""

    physical: Optional[bool] = None

    def __post_init__(self):
        super().__post_init__()
        if self.physical is None:
            object.__setattr__(self, "physical", validate(self).ok)


def apply_gauge(s: GateSet, t: GaugeTransform) -> GaugedGateSet:
    """``rho -> A rho``, ``<<Pi| -> <<Pi| A^-1``, ``G -> A G A^-1``."""
    a = t.a if isinstance(t, GaugeTransform) else GaugeTransform(t).a
    if a.shape[0] != s.state.size:
        raise ValueError(f"gauge matrix of size {a.shape[0]} does not match gate set dimension {s.dim}")
    a_inv = np.linalg.inv(a)
    return GaugedGateSet(a @ s.state, s.effects @ a_inv, a @ s.gates @ a_inv, s.outcomes, s.gate_names)


@dataclass(frozen=True)
class GaugeMatch:
    transform: GaugeTransform
    residual: float


def _independent_rows(m: np.ndarray, n: int, rank_tol: float) -> np.ndarray:
    """Indices of ``n`` rows of ``m`` chosen by column-pivoted QR of ``m^T``."""
    _, r, piv = scipy.linalg.qr(m.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size < n or diag[n - 1] <= rank_tol * diag[0]:
        raise DegenerateDesignError(f"fiducial frame has rank below {n}")
    return np.sort(piv[:n])


def _relative(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.max(np.abs(x - y)) / max(1.0, np.max(np.abs(y))))


def linear_gauge_match(s: GateSet, s_tilde: GateSet, fd: FiducialDesign, rank_tol: float = 1e-8,
                       residual_tol: float = 1e-7) -> GaugeMatch:
    """Reconstruct ``A`` with ``s_tilde = T_A(s)`` from the prepared fiducial states.

    ``A`` is fixed by ``d**2`` independent prepared states; every other
    component (state, effects, gates and all fiducial states and effects) is
    then checked against it. A residual above ``residual_tol`` means the two
    sets are not related by any linear gauge.
    """
    if not s.compatible_with(s_tilde):
        raise ValueError("gate sets differ in dimension, outcomes or number of gates")
    n = s.state.size
    p, pt = prepared_state_vectors(s, fd.prep), prepared_state_vectors(s_tilde, fd.prep)
    sel = _independent_rows(p, n, rank_tol)
    _independent_rows(pt, n, rank_tol)
    # A p_k = pt_k for the selected fiducials
    a = np.linalg.solve(p[sel], pt[sel]).T
    try:
        t = GaugeTransform(a)
    except ValueError as exc:
        raise NoLinearGaugeError(str(exc)) from None
    a_inv = np.linalg.inv(a)
    e, et = measured_effect_vectors(s, fd.meas), measured_effect_vectors(s_tilde, fd.meas)
    residual = max(
        _relative(p @ a.T, pt),
        _relative(e @ a_inv, et),
        _relative(a @ s.state, s_tilde.state),
        _relative(s.effects @ a_inv, s_tilde.effects),
        _relative(a @ s.gates @ a_inv, s_tilde.gates),
    )
    if residual > residual_tol:
        raise NoLinearGaugeError(f"no linear gauge relates the two sets (residual {residual:.3g})")
    return GaugeMatch(t, residual)


@dataclass
class GaugeDistanceResult:
    distance: float
    transform: GaugeTransform
    residual: float
    converged: bool
    start: str

    def to_json(self) -> dict:
        return {"distance": self.distance, "transform": self.transform.a.tolist(),
                "residual": self.residual, "converged": self.converged, "start": self.start}


def _weighted_difference(s: GateSet, ref: GateSet, a: np.ndarray) -> np.ndarray:
    a_inv = np.linalg.inv(a)
    n_out = len(s.outcomes)
    d = s.dim
    return np.concatenate([
        s.state - a @ ref.state,
        (s.effects - ref.effects @ a_inv).ravel() / np.sqrt(n_out),
        (s.gates - a @ ref.gates @ a_inv).ravel() / d,
    ])


def _word_frame(s: GateSet, max_len: int = 2) -> np.ndarray:
    words = [w for k in range(max_len + 1) for w in itertools.product(range(1, s.n_gates + 1), repeat=k)]
    return prepared_state_vectors(s, SequenceSet(words))


def _frame_start(s: GateSet, ref: GateSet, fd: Optional[FiducialDesign]) -> Optional[np.ndarray]:
    if fd is not None:
        p, ps = prepared_state_vectors(ref, fd.prep), prepared_state_vectors(s, fd.prep)
    else:
        p, ps = _word_frame(ref), _word_frame(s)
    a = np.linalg.lstsq(p, ps, rcond=None)[0].T
    if not np.all(np.isfinite(a)) or np.linalg.cond(a) > 1e8:
        return None
    return a


def gauge_optimize(s: GateSet, s_ref: GateSet, fd: Optional[FiducialDesign] = None,
                   tol: float = 1e-15, max_nfev: int = 2000) -> GaugeDistanceResult:
    """Minimize ``regularization(s, T_A(s_ref))`` over invertible ``A``.

    ``A = A0 expm(M)`` with ``M`` unconstrained and several anchors ``A0``:
    the identity, the exact linear match (when one exists) and a frame-based
    least-squares fit. The identity itself is always a candidate, so the
    result never exceeds ``regularization(s, s_ref)``.
    """
    if not s.compatible_with(s_ref):
        raise ValueError("gate sets differ in dimension, outcomes or number of gates")
    n = s.state.size
    anchors = [("identity", np.eye(n))]
    if fd is not None:
        try:
            anchors.append(("linear_match", linear_gauge_match(s_ref, s, fd).transform.a))
        except (DegenerateDesignError, NoLinearGaugeError, np.linalg.LinAlgError):
            pass
    a_frame = _frame_start(s, s_ref, fd)
    if a_frame is not None:
        anchors.append(("frame", a_frame))

    candidates = [(regularization(s, s_ref), "identity:raw", np.eye(n), True)]
    for tag, a0 in anchors:
        def fun(m, a0=a0):
            return _weighted_difference(s, s_ref, a0 @ scipy.linalg.expm(m.reshape(n, n)))
        try:
            sol = least_squares(fun, np.zeros(n * n), method="lm", jac="2-point", xtol=tol, ftol=tol,
                                gtol=tol, max_nfev=max_nfev)
        except (np.linalg.LinAlgError, ValueError) as exc:
            log.debug("gauge descent from %s failed: %s", tag, exc)
            continue
        a = a0 @ scipy.linalg.expm(sol.x.reshape(n, n))
        try:
            GaugeTransform(a)
        except ValueError:
            continue
        candidates.append((0.5 * float(sol.fun @ sol.fun), tag, a, bool(sol.status > 0)))
    dist, tag, a, ok = min(candidates, key=lambda c: c[0])
    return GaugeDistanceResult(dist, GaugeTransform(a), float(np.sqrt(2.0 * dist)), ok, tag)


def gauge_distance(s: GateSet, s_ref: GateSet, fd: Optional[FiducialDesign] = None) -> float:
    """Squared distance from ``s`` to the gauge orbit of ``s_ref``."""
    return gauge_optimize(s, s_ref, fd).distance


def singular_gates(s: GateSet, tol: float = SINGULAR_GATE_TOL) -> list:
    """Names of gates whose HS matrix has a singular value below ``tol``."""
    return [name for name, g in zip(s.gate_names, s.gates)
            if np.linalg.svd(g, compute_uv=False)[-1] < tol]


def max_probability_gap(s: GateSet, s_tilde: GateSet, ids) -> float:
    ids.check_range(s.n_gates)
    ids.check_range(s_tilde.n_gates)
    return float(np.max(np.abs(raw_probabilities(s, list(ids)) - raw_probabilities(s_tilde, list(ids)))))


def indistinguishable(s: GateSet, s_tilde: GateSet, ids, tol: float = 1e-9) -> bool:
    """True iff every outcome probability agrees within ``tol`` on every sequence of ``ids``."""
    if s.outcomes != s_tilde.outcomes:
        raise ValueError("gate sets have different outcome labels")
    for label, g in (("first", s), ("second", s_tilde)):
        bad = singular_gates(g)
        if bad:
            warnings.warn(f"{label} gate set has numerically singular gates {bad}; indistinguishability "
                          "need not imply a linear gauge relation", RuntimeWarning, stacklevel=2)
    return max_probability_gap(s, s_tilde, ids) <= tol
