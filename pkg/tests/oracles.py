"""Reference computations that avoid the superoperator machinery under test.

Everything here works on plain density matrices and Kraus operators.
"""
import itertools

import numpy as np
from scipy.linalg import expm

X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
I2 = np.eye(2, dtype=complex)


def rot(axis, angle):
    return expm(-0.5j * angle * axis)


def depolarizing_kraus(p):
    return [np.sqrt(1 - 3 * p / 4) * I2, np.sqrt(p / 4) * X, np.sqrt(p / 4) * Y, np.sqrt(p / 4) * Z]


def compose_kraus(first, second):
    """Kraus set of ``second o first``."""
    return [b @ a for a in first for b in second]


def apply_kraus(kraus, rho):
    return sum(k @ rho @ k.conj().T for k in kraus)


def evolve_probabilities(rho, povm, kraus_gates, seq):
    """Born probabilities by explicit density-matrix evolution; ``seq`` is 1-based."""
    for idx in seq:
        rho = apply_kraus(kraus_gates[idx - 1], rho)
    return np.array([np.trace(povm[w] @ rho).real for w in sorted(povm)])


def choi_from_kraus(kraus):
    """Output-by-input Choi matrix ``sum_ab E(|a><b|) (x) |a><b|``."""
    d = kraus[0].shape[0]
    j = np.zeros((d * d, d * d), dtype=complex)
    for a in range(d):
        for b in range(d):
            eab = np.zeros((d, d))
            eab[a, b] = 1.0
            j += np.kron(apply_kraus(kraus, eab), eab)
    return j


def benchmark_kraus(depolarization=0.05, over_rotation_deg=2.0):
    dep = depolarizing_kraus(depolarization)
    over = np.deg2rad(over_rotation_deg)
    us = [I2, rot(X, np.pi / 2 + over), rot(Y, np.pi / 2)]
    return [compose_kraus([u], dep) for u in us]


def benchmark_spam(state_error=0.01, readout_error=0.01):
    rho = np.diag([1 - state_error, state_error]).astype(complex)
    e0 = np.diag([1 - readout_error, readout_error]).astype(complex)
    return rho, {"0": e0, "1": I2 - e0}


def scic_by_enumeration(prep, meas, n_gates):
    """Set of all prep+meas and prep+gate+meas concatenations."""
    out = {tuple(a) + tuple(b) for a, b in itertools.product(prep, meas)}
    out |= {tuple(a) + (g,) + tuple(b) for a, g, b in itertools.product(prep, range(1, n_gates + 1), meas)}
    return out
