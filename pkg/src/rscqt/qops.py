"""Quantum operations in matrix and superoperator form.

States and POVM effects are stored as real coefficient vectors in an
orthonormal Hermitian operator basis, and gates as real Hilbert-Schmidt
(Pauli-transfer) matrices in the same basis. With ``B_0 = I/sqrt(d)`` the
trace-preservation condition on a gate is simply ``hs[0] == e_0``.

The Choi matrix convention is output (x) input::

    J = sum_ab G(|a><b|) (x) |a><b|

so the identity channel has ``J = d |Phi+><Phi+|`` and a trace-preserving map
has ``Tr_out J = I``.
"""
from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

TOL_PSD = 1e-9
TOL_TRACE = 1e-9
HERMITIAN_TOL = 1e-10
CLAMP_TOL = 1e-10

_PAULIS = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


@dataclass(frozen=True, eq=False)
class MatrixBasis:
    """Orthonormal Hermitian basis of the d x d operator space.

    ``elements`` has shape ``(d**2, d, d)`` and ``elements[0]`` is ``I/sqrt(d)``.
    """

    dim: int
    elements: np.ndarray
    name: str = "pauli"

    def __post_init__(self):
        self.elements.setflags(write=False)

    @property
    def size(self) -> int:
        return self.dim ** 2

    def gram(self) -> np.ndarray:
        """Hilbert-Schmidt Gram matrix ``Tr[B_j^dag B_k]``."""
        b = self.elements
        return np.einsum("jab,kab->jk", b.conj(), b)


def _is_power_of_two(d: int) -> bool:
    return d >= 1 and (d & (d - 1)) == 0


def _gell_mann(d: int) -> np.ndarray:
    mats = [np.eye(d, dtype=complex) / np.sqrt(d)]
    for j in range(d):
        for k in range(j + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = m[k, j] = 1 / np.sqrt(2)
            mats.append(m)
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = -1j / np.sqrt(2)
            m[k, j] = 1j / np.sqrt(2)
            mats.append(m)
    for l in range(1, d):
        diag = np.zeros(d)
        diag[:l] = 1.0
        diag[l] = -l
        mats.append(np.diag(diag / np.sqrt(l * (l + 1))).astype(complex))
    return np.array(mats)


@functools.lru_cache(maxsize=None)
def pauli_basis(dim: int) -> MatrixBasis:
    """Normalized Pauli tensor basis for ``dim = 2**n``.

    Elements are ordered lexicographically in (I, X, Y, Z) with the first
    qubit most significant. For other dimensions a normalized generalized
    Gell-Mann basis is returned instead (still with ``B_0 = I/sqrt(d)``).
    """
    if dim < 1:
        raise ValueError(f"dimension must be positive, got {dim}")
    if not _is_power_of_two(dim) or dim == 1:
        return MatrixBasis(dim, _gell_mann(dim), name="gell-mann")
    n = dim.bit_length() - 1
    mats = []
    for labels in itertools.product(range(4), repeat=n):
        m = np.array([[1.0 + 0j]])
        for k in labels:
            m = np.kron(m, _PAULIS[k])
        mats.append(m / np.sqrt(dim))
    return MatrixBasis(dim, np.array(mats), name="pauli")


def _basis_for(dim: int, basis: MatrixBasis | None) -> MatrixBasis:
    if basis is None:
        return pauli_basis(dim)
    if basis.dim != dim:
        raise ValueError(f"basis dimension {basis.dim} does not match operator dimension {dim}")
    return basis


def vectorize(m: np.ndarray, basis: MatrixBasis | None = None) -> np.ndarray:
    """Real coefficient vector ``v_k = Tr[B_k^dag m]`` of a Hermitian matrix."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    basis = _basis_for(m.shape[0], basis)
    if np.max(np.abs(m - m.conj().T), initial=0.0) > HERMITIAN_TOL:
        raise ValueError("matrix is not Hermitian")
    return np.einsum("kab,ab->k", basis.elements.conj(), m).real


def devectorize(v: np.ndarray, basis: MatrixBasis | None = None) -> np.ndarray:
    """Inverse of :func:`vectorize`: ``sum_k v_k B_k``."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-d vector, got shape {v.shape}")
    d = int(round(np.sqrt(v.size)))
    if basis is not None:
        if v.size != basis.size:
            raise ValueError(f"vector of length {v.size} does not match basis of size {basis.size}")
        d = basis.dim
    elif d * d != v.size or d == 0:
        raise ValueError(f"vector length {v.size} is not a perfect square")
    basis = _basis_for(d, basis)
    return np.einsum("k,kab->ab", v, basis.elements)


def hs_from_kraus(kraus: Sequence[np.ndarray], basis: MatrixBasis | None = None) -> np.ndarray:
    """Hilbert-Schmidt matrix ``hs[j, k] = Tr[B_j^dag sum_i K_i B_k K_i^dag]``.

    Raises ``ValueError`` when the Kraus operators are not trace preserving.
    """
    ks = np.array([np.asarray(k, dtype=complex) for k in kraus])
    if ks.ndim != 3 or ks.shape[1] != ks.shape[2]:
        raise ValueError("Kraus operators must be square matrices of equal size")
    d = ks.shape[1]
    basis = _basis_for(d, basis)
    if np.max(np.abs(np.einsum("iba,ibc->ac", ks.conj(), ks) - np.eye(d))) > HERMITIAN_TOL:
        raise ValueError("Kraus operators are not trace preserving")
    b = basis.elements
    images = np.einsum("iab,kbc,idc->kad", ks, b, ks.conj())
    hs = np.einsum("jba,kba->jk", b.conj(), images)
    if np.max(np.abs(hs.imag)) > HERMITIAN_TOL:
        raise ValueError("Hilbert-Schmidt matrix has a non-negligible imaginary part")
    return hs.real


def hs_from_unitary(u: np.ndarray, basis: MatrixBasis | None = None) -> np.ndarray:
    return hs_from_kraus([u], basis)


def choi_from_hs(hs: np.ndarray, basis: MatrixBasis | None = None) -> np.ndarray:
    """Choi matrix ``J = sum_jk hs[j, k] B_j (x) B_k^T`` (output (x) input)."""
    hs = np.asarray(hs, dtype=float)
    d = int(round(np.sqrt(hs.shape[0])))
    if hs.ndim != 2 or hs.shape != (d * d, d * d):
        raise ValueError(f"expected a d^2 x d^2 matrix, got shape {hs.shape}")
    b = _basis_for(d, basis).elements
    j4 = np.einsum("jk,jab,kdc->acbd", hs, b, b)
    return j4.reshape(d * d, d * d)


def hs_from_choi(choi: np.ndarray, basis: MatrixBasis | None = None) -> np.ndarray:
    choi = np.asarray(choi, dtype=complex)
    d = int(round(np.sqrt(choi.shape[0])))
    if choi.shape != (d * d, d * d):
        raise ValueError(f"expected a d^2 x d^2 Choi matrix, got shape {choi.shape}")
    b = _basis_for(d, basis).elements
    j4 = choi.reshape(d, d, d, d)
    return np.einsum("jab,kdc,acbd->jk", b.conj(), b.conj(), j4).real


def partial_trace_output(choi: np.ndarray) -> np.ndarray:
    """Trace out the output (first) factor of a Choi matrix."""
    d = int(round(np.sqrt(choi.shape[0])))
    return np.einsum("acad->cd", choi.reshape(d, d, d, d))


@dataclass(frozen=True, eq=False)
class GateSet:
    """A state preparation, a POVM and ``n_g`` gates, all in superoperator form.

    Parameters
    ----------
    state : ndarray, shape (d**2,)
        Coefficient vector of the density matrix.
    effects : ndarray, shape (n_outcomes, d**2)
        Coefficient vectors of the POVM effects, one row per outcome.
    gates : ndarray, shape (n_g, d**2, d**2)
        Hilbert-Schmidt matrices of the gates. Gate ``k`` is addressed by the
        1-based index ``k + 1`` in gate sequences.
    outcomes : tuple of str
        Outcome labels in lexicographic order.
    gate_names : tuple of str

    A ``GateSet`` is only checked for structure on construction; gauge images
    are allowed to be unphysical. Use :func:`validate` for physicality.
    """

    state: np.ndarray
    effects: np.ndarray
    gates: np.ndarray
    outcomes: tuple = ("0", "1")
    gate_names: tuple = field(default=None)

    def __post_init__(self):
        state = np.array(self.state, dtype=float)
        effects = np.array(self.effects, dtype=float)
        gates = np.array(self.gates, dtype=float)
        if state.ndim != 1:
            raise ValueError("state must be a coefficient vector")
        n = state.size
        d = int(round(np.sqrt(n)))
        if d * d != n:
            raise ValueError(f"state vector length {n} is not a perfect square")
        if effects.ndim != 2 or effects.shape[1] != n:
            raise ValueError(f"effects must have shape (n_outcomes, {n})")
        if gates.ndim != 3 or gates.shape[1:] != (n, n) or gates.shape[0] < 1:
            raise ValueError(f"gates must have shape (n_g >= 1, {n}, {n})")
        outcomes = tuple(str(o) for o in self.outcomes)
        if len(outcomes) != effects.shape[0]:
            raise ValueError("number of outcome labels does not match number of effects")
        if list(outcomes) != sorted(set(outcomes)):
            raise ValueError("outcome labels must be unique and in lexicographic order")
        names = self.gate_names
        if names is None:
            names = tuple(f"G{k + 1}" for k in range(gates.shape[0]))
        names = tuple(str(x) for x in names)
        if len(names) != gates.shape[0]:
            raise ValueError("number of gate names does not match number of gates")
        for arr in (state, effects, gates):
            if not np.all(np.isfinite(arr)):
                raise ValueError("gate set contains non-finite entries")
            arr.setflags(write=False)
        object.__setattr__(self, "state", state)
        object.__setattr__(self, "effects", effects)
        object.__setattr__(self, "gates", gates)
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "gate_names", names)

    @classmethod
    def from_matrices(
        cls,
        rho: np.ndarray,
        povm: Mapping[str, np.ndarray],
        gates: Sequence[np.ndarray],
        gate_names: Sequence[str] | None = None,
    ) -> "GateSet":
        """Build from a density matrix, a ``{label: effect}`` map and HS matrices."""
        rho = np.asarray(rho, dtype=complex)
        basis = pauli_basis(rho.shape[0])
        labels = sorted(str(k) for k in povm)
        by_label = {str(k): v for k, v in povm.items()}
        effects = np.array([vectorize(by_label[k], basis) for k in labels])
        return cls(vectorize(rho, basis), effects, np.array(gates, dtype=float), tuple(labels),
                   None if gate_names is None else tuple(gate_names))

    @property
    def dim(self) -> int:
        return int(round(np.sqrt(self.state.size)))

    @property
    def n_gates(self) -> int:
        return self.gates.shape[0]

    @property
    def rho(self) -> np.ndarray:
        return devectorize(self.state)

    @property
    def povm(self) -> dict:
        return {w: devectorize(e) for w, e in zip(self.outcomes, self.effects)}

    def replace(self, state=None, effects=None, gates=None) -> "GateSet":
        return GateSet(
            self.state if state is None else state,
            self.effects if effects is None else effects,
            self.gates if gates is None else gates,
            self.outcomes,
            self.gate_names,
        )

    def compatible_with(self, other: "GateSet") -> bool:
        return (self.state.shape == other.state.shape
                and self.outcomes == other.outcomes
                and self.gates.shape == other.gates.shape)

    def sequence_superoperator(self, seq: Sequence[int]) -> np.ndarray:
        """Product ``G_{i_L} ... G_{i_1}`` for a 1-based index sequence."""
        out = np.eye(self.state.size)
        for idx in seq:
            out = self.gates[idx - 1] @ out
        return out

    def check_indices(self, seq: Sequence[int]) -> None:
        for idx in seq:
            if not 1 <= idx <= self.n_gates:
                raise ValueError(f"gate index {idx} out of range 1..{self.n_gates}")


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    violation: float


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def worst_violation(self) -> float:
        return max((c.violation for c in self.checks), default=0.0)

    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def summary(self) -> str:
        bad = self.failures()
        if not bad:
            return "all physicality checks passed"
        return "; ".join(f"{c.name} violated by {c.violation:.3g}" for c in bad)


def _psd_violation(m: np.ndarray) -> float:
    m = 0.5 * (m + m.conj().T)
    return max(0.0, -float(np.linalg.eigvalsh(m)[0]))


def validate(s: GateSet, tol_psd: float = TOL_PSD, tol_trace: float = TOL_TRACE) -> ValidationReport:
    """Check membership of ``s`` in the physical set, constraint by constraint."""
    checks = []
    rho = s.rho
    v = _psd_violation(rho)
    checks.append(Check("rho.psd", v <= tol_psd, v))
    v = abs(float(np.trace(rho).real) - 1.0)
    checks.append(Check("rho.trace", v <= tol_trace, v))
    povm = s.povm
    for w, eff in povm.items():
        v = _psd_violation(eff)
        checks.append(Check(f"povm[{w}].psd", v <= tol_psd, v))
    total = sum(povm.values())
    v = float(np.linalg.norm(total - np.eye(s.dim), 2))
    checks.append(Check("povm.completeness", v <= tol_trace, v))
    e0 = np.zeros(s.state.size)
    e0[0] = 1.0
    for k, hs in enumerate(s.gates):
        name = s.gate_names[k]
        v = _psd_violation(choi_from_hs(hs))
        checks.append(Check(f"gate[{name}].cp", v <= tol_psd, v))
        v = float(np.max(np.abs(hs[0] - e0)))
        checks.append(Check(f"gate[{name}].tp", v <= tol_trace, v))
    return ValidationReport(tuple(checks))


def clean_distribution(p: np.ndarray) -> np.ndarray:
    """Clamp float noise out of a probability vector.

    Entries in ``(-1e-10, 0)`` are set to zero and the vector renormalized;
    anything more negative (or above ``1 + 1e-10``) is a ``ValueError``.
    """
    p = np.asarray(p, dtype=float)
    if p.min(initial=0.0) < -CLAMP_TOL or p.max(initial=0.0) > 1 + CLAMP_TOL:
        raise ValueError(f"probabilities outside [0, 1] beyond tolerance: {p}")
    if np.any(p < 0) or np.any(p > 1):
        p = np.clip(p, 0.0, 1.0)
        p = p / p.sum()
    return p


def evolve_state(s: GateSet, seq: Sequence[int]) -> np.ndarray:
    """``|G_{i_L} ... G_{i_1} rho>>`` as a coefficient vector."""
    v = s.state
    for idx in seq:
        v = s.gates[idx - 1] @ v
    return v


def evolve_effects(s: GateSet, seq: Sequence[int]) -> np.ndarray:
    """Rows ``<<Pi_w| G_{i_L} ... G_{i_1}``, i.e. effects pulled back through the adjoint maps."""
    e = s.effects
    for idx in reversed(seq):
        e = e @ s.gates[idx - 1]
    return e


def born_probability(s: GateSet, seq: Sequence[int]) -> dict:
    """Outcome distribution ``{w: <<Pi_w| G_{i_L} ... G_{i_1} |rho>>}``."""
    seq = tuple(seq)
    s.check_indices(seq)
    p = clean_distribution(s.effects @ evolve_state(s, seq))
    return dict(zip(s.outcomes, p))


def raw_probabilities(s: GateSet, sequences: Sequence[Sequence[int]]) -> np.ndarray:
    """Unclamped probability array of shape ``(len(sequences), n_outcomes)``."""
    out = np.empty((len(sequences), len(s.outcomes)))
    cache = {(): s.state}
    for row, seq in enumerate(sequences):
        seq = tuple(seq)
        # reuse the longest cached prefix; designs share prefixes heavily
        k = len(seq)
        while seq[:k] not in cache:
            k -= 1
        v = cache[seq[:k]]
        for j in range(k, len(seq)):
            v = s.gates[seq[j] - 1] @ v
            cache[seq[: j + 1]] = v
        out[row] = s.effects @ v
    return out
