"""Standard gate sets, the benchmark noise model and random generators."""
from __future__ import annotations

import numpy as np
from scipy.linalg import expm
from scipy.stats import ortho_group

from .qops import GateSet, hs_from_kraus, hs_from_unitary, pauli_basis, vectorize

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def rotation(axis: np.ndarray, angle: float) -> np.ndarray:
    return expm(-0.5j * angle * axis)


def depolarizing_hs(p: float, dim: int = 2) -> np.ndarray:
    """HS matrix ``diag(1, 1 - p, ..., 1 - p)`` of the depolarizing channel."""
    return np.diag([1.0] + [1.0 - p] * (dim * dim - 1))


def depolarizing_kraus(p: float) -> list:
    return [np.sqrt(1 - 3 * p / 4) * np.eye(2), np.sqrt(p / 4) * PAULI_X,
            np.sqrt(p / 4) * PAULI_Y, np.sqrt(p / 4) * PAULI_Z]


def ideal_qubit_set(gates=("I", "X", "Y")) -> GateSet:
    """``|0><0|``, a Z measurement and ideal gates named from {"I", "X", "Y", "Xpi", "Ypi"}.

    ``"X"``/``"Y"`` are pi/2 rotations, ``"Xpi"``/``"Ypi"`` pi rotations.
    """
    table = {
        "I": np.eye(2),
        "X": rotation(PAULI_X, np.pi / 2),
        "Y": rotation(PAULI_Y, np.pi / 2),
        "Xpi": rotation(PAULI_X, np.pi),
        "Ypi": rotation(PAULI_Y, np.pi),
    }
    hs = [hs_from_unitary(table[g]) for g in gates]
    names = {"I": "Gi", "X": "Gxpi2", "Y": "Gypi2", "Xpi": "Gxpi", "Ypi": "Gypi"}
    return GateSet.from_matrices(np.diag([1.0, 0.0]), {"0": np.diag([1.0, 0.0]), "1": np.diag([0.0, 1.0])},
                                 hs, [names[g] for g in gates])


def benchmark_target() -> GateSet:
    return ideal_qubit_set(("I", "X", "Y"))


def benchmark_true(depolarization: float = 0.05, over_rotation_deg: float = 2.0,
                   state_error: float = 0.01, readout_error: float = 0.01) -> GateSet:
    """Target set with depolarized gates, an over-rotated X_{pi/2} and SPAM errors."""
    dep = depolarizing_hs(depolarization)
    over = np.deg2rad(over_rotation_deg)
    unitaries = [np.eye(2), rotation(PAULI_X, np.pi / 2 + over), rotation(PAULI_Y, np.pi / 2)]
    gates = [dep @ hs_from_unitary(u) for u in unitaries]
    rho = np.diag([1 - state_error, state_error])
    e0 = np.diag([1 - readout_error, readout_error])
    return GateSet.from_matrices(rho, {"0": e0, "1": np.eye(2) - e0}, gates, ["Gi", "Gxpi2", "Gypi2"])


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    g = rng.normal(size=(dim, rank or dim)) + 1j * rng.normal(size=(dim, rank or dim))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_povm(dim: int, n_outcomes: int, rng: np.random.Generator) -> list:
    es = []
    for _ in range(n_outcomes):
        g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        es.append(g @ g.conj().T)
    w, v = np.linalg.eigh(sum(es))
    m = v @ np.diag(w ** -0.5) @ v.conj().T
    return [m @ e @ m for e in es]


def random_kraus(dim: int, rng: np.random.Generator, n_kraus: int | None = None) -> np.ndarray:
    """Kraus operators from a Haar-ish random isometry (Stinespring dilation)."""
    n_kraus = n_kraus or dim * dim
    g = rng.normal(size=(n_kraus * dim, dim)) + 1j * rng.normal(size=(n_kraus * dim, dim))
    q, r = np.linalg.qr(g)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    return q.reshape(n_kraus, dim, dim)


def random_cptp_hs(dim: int, rng: np.random.Generator, n_kraus: int | None = None) -> np.ndarray:
    return hs_from_kraus(random_kraus(dim, rng, n_kraus))


def random_gate_set(dim: int, n_gates: int, rng: np.random.Generator, n_outcomes: int | None = None) -> GateSet:
    n_outcomes = n_outcomes or dim
    basis = pauli_basis(dim)
    rho = random_density_matrix(dim, rng)
    povm = random_povm(dim, n_outcomes, rng)
    labels = [str(k) for k in range(n_outcomes)]
    gates = [random_cptp_hs(dim, rng) for _ in range(n_gates)]
    return GateSet(vectorize(rho, basis), np.array([vectorize(e, basis) for e in povm]), np.array(gates),
                   tuple(sorted(labels)))


def noisy_unitary_set(base: GateSet, rng: np.random.Generator, noise: float = 0.05) -> GateSet:
    """Perturb ``base`` by small random CPTP noise on every component (stays physical)."""
    d = base.dim
    rho = (1 - noise) * base.rho + noise * random_density_matrix(d, rng)
    povm = base.povm
    mix = random_povm(d, len(povm), rng)
    effects = [(1 - noise) * povm[w] + noise * m for w, m in zip(base.outcomes, mix)]
    gates = [(1 - noise) * g + noise * random_cptp_hs(d, rng) for g in base.gates]
    return GateSet.from_matrices(rho, dict(zip(base.outcomes, effects)), gates, base.gate_names)


def random_gauge_matrix(dim: int, rng: np.random.Generator, max_condition: float = 100.0) -> np.ndarray:
    """Random real ``d^2 x d^2`` matrix with condition number at most ``max_condition``."""
    n = dim * dim
    u = ortho_group.rvs(n, random_state=rng)
    v = ortho_group.rvs(n, random_state=rng)
    sv = np.exp(rng.uniform(0, np.log(max_condition), size=n))
    sv[0], sv[-1] = 1.0, max_condition ** rng.uniform(0, 1)
    return u @ np.diag(sv) @ v
