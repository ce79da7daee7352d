"""Smooth real parameterization of physical gate sets.

Every parameter vector decodes to a physical gate set:

* state:  ``rho = T T^dag / Tr[T T^dag]``
* POVM:   ``E_w = T_w T_w^dag``, ``Pi_w = S^{-1/2} E_w S^{-1/2}`` with ``S = sum_w E_w``
* gates:  ``J = L L^dag`` then ``J <- (I (x) Q^{-1/2}) J (I (x) Q^{-1/2})`` with ``Q = Tr_out J``

All factors are lower triangular with a real diagonal, so an ``n x n`` factor
uses exactly ``n**2`` real parameters. The Jacobian of the decoded model
vector is computed in forward mode; the derivative of the inverse square root
uses the divided-difference (Daleckii-Krein) form, which stays finite when
eigenvalues coincide.
"""
from __future__ import annotations

import functools

import numpy as np

from .qops import GateSet, pauli_basis


@functools.lru_cache(maxsize=None)
def _tri_layout(n: int):
    rows, cols = np.tril_indices(n, -1)
    dirs = np.zeros((n * n, n, n), dtype=complex)
    for k in range(n):
        dirs[k, k, k] = 1.0
    m = rows.size
    dirs[n + np.arange(m), rows, cols] = 1.0
    dirs[n + m + np.arange(m), rows, cols] = 1j
    dirs.setflags(write=False)
    return rows, cols, dirs


def unpack_tri(theta: np.ndarray, n: int) -> np.ndarray:
    rows, cols, _ = _tri_layout(n)
    m = rows.size
    t = np.zeros((n, n), dtype=complex)
    t[np.arange(n), np.arange(n)] = theta[:n]
    t[rows, cols] = theta[n:n + m] + 1j * theta[n + m:n + 2 * m]
    return t


def pack_tri(t: np.ndarray) -> np.ndarray:
    n = t.shape[0]
    rows, cols, _ = _tri_layout(n)
    off = t[rows, cols]
    return np.concatenate([np.diag(t).real, off.real, off.imag])


def psd_factor(m: np.ndarray) -> np.ndarray:
    """Lower-triangular ``T`` with real non-negative diagonal and ``T T^dag = m``.

    Works for singular ``m`` (LQ decomposition of an eigen-factor), so boundary
    points such as pure states or unitary channels encode exactly. Negative
    eigenvalues are clipped.
    """
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    f = v * np.sqrt(np.clip(w, 0.0, None))
    q, r = np.linalg.qr(f.conj().T)
    t = r.conj().T
    diag = np.diag(t)
    phase = np.where(np.abs(diag) > 0, diag / np.where(np.abs(diag) > 0, np.abs(diag), 1.0), 1.0)
    t = t * phase.conj()[None, :]
    return np.tril(t)


def _inv_sqrt_and_divided_differences(q: np.ndarray):
    w, u = np.linalg.eigh(q)
    if w[0] <= 0:
        raise FloatingPointError("normalization matrix is not positive definite")
    sw = np.sqrt(w)
    m = (u / sw) @ u.conj().T
    # divided differences of x -> x^{-1/2}
    f = -1.0 / (np.outer(sw, sw) * (sw[:, None] + sw[None, :]))
    return m, u, f


def _dk(u: np.ndarray, f: np.ndarray, dq: np.ndarray) -> np.ndarray:
    """Batched directional derivative ``U (F o (U^dag dQ U)) U^dag``."""
    ud = u.conj().T
    return u @ (f * (ud @ dq @ u)) @ ud


@functools.lru_cache(maxsize=None)
def _basis_maps(dim: int):
    b = pauli_basis(dim).elements
    # vec(X)_k = Re sum_ab conj(B_k[a, b]) X[a, b]
    vec_map = b.conj().reshape(dim * dim, -1)
    # hs[j, k] = Re sum conj(B_j[a, b]) conj(B_k[e, c]) J[(a, c), (b, e)]
    phi = np.einsum("jab,kec->jkacbe", b.conj(), b.conj()).reshape(dim ** 4, dim ** 4)
    return vec_map, phi


class PhysicalParameterization:
    """Maps real vectors to physical gate sets of a fixed shape."""

    def __init__(self, dim: int, outcomes, n_gates: int, gate_names=None):
        self.dim = dim
        self.outcomes = tuple(outcomes)
        self.n_gates = n_gates
        self.gate_names = None if gate_names is None else tuple(gate_names)
        d2 = dim * dim
        self.n_state = d2
        self.n_povm = len(self.outcomes) * d2
        self.n_gate = d2 * d2
        self.n_params = self.n_state + self.n_povm + n_gates * self.n_gate

    @classmethod
    def like(cls, s: GateSet) -> "PhysicalParameterization":
        return cls(s.dim, s.outcomes, s.n_gates, s.gate_names)

    def _split(self, theta: np.ndarray):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got shape {theta.shape}")
        if not np.all(np.isfinite(theta)):
            raise ValueError("parameters must be finite")
        d, d2 = self.dim, self.dim ** 2
        t_rho = unpack_tri(theta[:d2], d)
        off = self.n_state
        t_povm = [unpack_tri(theta[off + k * d2: off + (k + 1) * d2], d) for k in range(len(self.outcomes))]
        off += self.n_povm
        t_gates = [unpack_tri(theta[off + g * self.n_gate: off + (g + 1) * self.n_gate], d2)
                   for g in range(self.n_gates)]
        return t_rho, t_povm, t_gates

    # -- forward maps --------------------------------------------------------

    def _state(self, t, jac):
        vec_map, _ = _basis_maps(self.dim)
        x = t @ t.conj().T
        tr = np.trace(x).real
        rho = x / tr
        v = (vec_map @ rho.ravel()).real
        if not jac:
            return v, None
        _, _, dirs = _tri_layout(self.dim)
        dx = dirs @ t.conj().T
        dx = dx + dx.conj().transpose(0, 2, 1)
        dtr = np.trace(dx, axis1=1, axis2=2).real
        drho = dx / tr - x[None] * (dtr / tr ** 2)[:, None, None]
        return v, (drho.reshape(len(dirs), -1) @ vec_map.T).real.T

    def _povm(self, ts, jac):
        vec_map, _ = _basis_maps(self.dim)
        es = np.array([t @ t.conj().T for t in ts])
        m, u, f = _inv_sqrt_and_divided_differences(es.sum(axis=0))
        pis = m @ es @ m
        v = (pis.reshape(len(ts), -1) @ vec_map.T).real
        if not jac:
            return v.ravel(), None
        _, _, dirs = _tri_layout(self.dim)
        n_dir = len(dirs)
        cols = []
        for k, t in enumerate(ts):
            de = dirs @ t.conj().T
            de = de + de.conj().transpose(0, 2, 1)
            dm = _dk(u, f, de)
            dpis = (dm[:, None] @ es[None] @ m + m @ es[None] @ dm[:, None])
            dpis[:, k] += m @ de @ m
            # (n_dir, n_out, d, d) -> columns
            dv = (dpis.reshape(n_dir, len(ts), -1) @ vec_map.T).real
            cols.append(dv.reshape(n_dir, -1).T)
        return v.ravel(), np.concatenate(cols, axis=1)

    def _gate(self, l, jac):
        d = self.dim
        _, phi = _basis_maps(d)
        j = l @ l.conj().T
        q = np.einsum("acad->cd", j.reshape(d, d, d, d))
        m, u, f = _inv_sqrt_and_divided_differences(q)
        k = np.kron(np.eye(d), m)
        jp = k @ j @ k
        hs = (phi @ jp.ravel()).real
        if not jac:
            return hs, None
        _, _, dirs = _tri_layout(d * d)
        dj = dirs @ l.conj().T
        dj = dj + dj.conj().transpose(0, 2, 1)
        dq = np.einsum("nacad->ncd", dj.reshape(-1, d, d, d, d))
        dm = _dk(u, f, dq)
        dk = np.einsum("ab,ncd->nacbd", np.eye(d), dm).reshape(-1, d * d, d * d)
        djp = dk @ j @ k + k @ dj @ k + k @ j @ dk
        dhs = (djp.reshape(len(dirs), -1) @ phi.T).real
        return hs, dhs.T

    def model(self, theta: np.ndarray, jac: bool = False):
        """Concatenated (state, effects, gates) vector and optionally its Jacobian."""
        t_rho, t_povm, t_gates = self._split(theta)
        blocks = [self._state(t_rho, jac), self._povm(t_povm, jac)] + [self._gate(l, jac) for l in t_gates]
        m = np.concatenate([b[0] for b in blocks])
        if not jac:
            return m, None
        dm = np.zeros((m.size, self.n_params))
        off = 0
        for _, block in blocks:
            n = block.shape[0]
            dm[off:off + n, off:off + n] = block
            off += n
        return m, dm

    def gate_set_from_model(self, m: np.ndarray) -> GateSet:
        d2 = self.dim ** 2
        n_out = len(self.outcomes)
        state = m[:d2]
        effects = m[d2:d2 + n_out * d2].reshape(n_out, d2)
        gates = m[d2 + n_out * d2:].reshape(self.n_gates, d2, d2).copy()
        # trace preservation holds exactly by construction; remove rounding noise
        gates[:, 0, :] = 0.0
        gates[:, 0, 0] = 1.0
        return GateSet(state, effects, gates, self.outcomes, self.gate_names)

    def decode(self, theta: np.ndarray) -> GateSet:
        return self.gate_set_from_model(self.model(theta)[0])

    def encode(self, s: GateSet) -> np.ndarray:
        """Parameters reproducing ``s`` (``s`` must be physical; PSD parts are clipped)."""
        from .qops import choi_from_hs

        if (s.dim, s.outcomes, s.n_gates) != (self.dim, self.outcomes, self.n_gates):
            raise ValueError("gate set shape does not match this parameterization")
        parts = [pack_tri(psd_factor(s.rho))]
        povm = s.povm
        parts += [pack_tri(psd_factor(povm[w])) for w in self.outcomes]
        parts += [pack_tri(psd_factor(choi_from_hs(g))) for g in s.gates]
        return np.concatenate(parts)
