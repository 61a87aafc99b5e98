"""Brute-force reference: the doubled Hamiltonian on a truncated Fock space.

Basis order is qubit (x) mode_1 (x) ... (x) mode_K with the qubit as the
slowest index; |+> is the first qubit basis state.
"""
from __future__ import annotations

import logging
import time as _time
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply
from scipy.special import gammainc, gammaln

from .dynamics import Trajectory

__all__ = [
    "FockConfig",
    "DimensionError",
    "TailError",
    "fock_hamiltonian",
    "exact_propagate",
    "coherent_state_embed",
    "fock_expectations",
]

log = logging.getLogger(__name__)

DIM_CAP = 200_000


class DimensionError(ValueError):
    pass


class TailError(ValueError):
    pass


@dataclass(frozen=True)
class FockConfig:
    n_max: int
    frequencies: np.ndarray
    couplings: np.ndarray
    tilde: np.ndarray
    omega0: float = 1.0
    qubit_init: str = "up"
    dt: float = 0.01
    t_final: float = 10.0
    dim_cap: int = DIM_CAP
    certify_tol: float = 1e-4

    @property
    def n_modes(self):
        return len(self.frequencies)

    @property
    def dimension(self):
        return 2 * (self.n_max + 1) ** self.n_modes

    @classmethod
    def from_hamiltonian(cls, h, n_max=4, **kw):
        return cls(n_max, h.frequencies, h.couplings, h.tilde_mask, omega0=h.omega0, **kw)


def _check_dim(n_max, n_modes, cap):
    dim = 2 * (n_max + 1) ** n_modes
    if dim > cap:
        raise DimensionError(f"Fock dimension {dim} exceeds cap {cap} "
                             f"(n_max={n_max}, {n_modes} modes)")
    return dim


def fock_hamiltonian(frequencies, couplings, omega0, n_max):
    """Sparse H = w0/2 sz + sum_k w_k n_k + sx sum_k c_k (a_k + a_k^+)."""
    K = len(frequencies)
    d = n_max + 1
    a = sp.diags(np.sqrt(np.arange(1, d, dtype=float)), 1, format="csr")
    num = sp.diags(np.arange(d, dtype=float), 0, format="csr")
    x = (a + a.T).tocsr()
    eye_b = sp.identity(d ** K, format="csr")
    sz = sp.diags([1.0, -1.0], 0, format="csr")
    sx = sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]))

    def embed(op, k):
        left = sp.identity(d ** k, format="csr")
        right = sp.identity(d ** (K - k - 1), format="csr")
        return sp.kron(sp.kron(left, op, format="csr"), right, format="csr")

    hb = sp.csr_matrix((d ** K, d ** K))
    xb = sp.csr_matrix((d ** K, d ** K))
    for k in range(K):
        hb = hb + frequencies[k] * embed(num, k)
        xb = xb + couplings[k] * embed(x, k)
    H = 0.5 * omega0 * sp.kron(sz, eye_b) + sp.kron(sp.identity(2), hb) + sp.kron(sx, xb)
    return H.tocsr()


def _qubit_vector(qubit_init):
    return {"up": np.array([1.0, 0.0]), "down": np.array([0.0, 1.0]),
            "plus_x": np.array([1.0, 1.0]) / np.sqrt(2)}[qubit_init]


def _run_fixed(cfg):
    dim = _check_dim(cfg.n_max, cfg.n_modes, cfg.dim_cap)
    H = fock_hamiltonian(cfg.frequencies, cfg.couplings, cfg.omega0, cfg.n_max)
    psi = np.zeros(dim, complex)
    half = dim // 2
    q = _qubit_vector(cfg.qubit_init)
    psi[0], psi[half] = q[0], q[1]
    n_steps = int(round(cfg.t_final / cfg.dt))
    out = np.empty((n_steps + 1, 3))
    sz_diag = np.concatenate([np.ones(half), -np.ones(half)])

    def obs(v):
        n = np.vdot(v, v).real
        return (np.vdot(v, sz_diag * v).real / n, n, np.vdot(v, H @ v).real / n)

    out[0] = obs(psi)
    k = 0
    chunk = 50
    while k < n_steps:
        m = min(chunk, n_steps - k)
        vs = expm_multiply(-1j * H, psi, start=0.0, stop=m * cfg.dt, num=m + 1, endpoint=True)
        for r in range(1, m + 1):
            out[k + r] = obs(vs[r])
        psi = vs[m]
        k += m
    times = np.arange(n_steps + 1) * cfg.dt
    return times, out


def exact_propagate(cfg):
    """Propagate qubit (x) vacuum, doubling n_max until sigma_z moves by less
    than ``certify_tol``. If the dimension cap stops the doubling, the last
    affordable cutoff is returned with ``certified = False``."""
    started = _time.perf_counter()
    times, prev = _run_fixed(cfg)
    n = cfg.n_max
    bound = float("inf")
    certified = False
    while True:
        nxt = 2 * n
        try:
            _check_dim(nxt, cfg.n_modes, cfg.dim_cap)
        except DimensionError:
            log.warning("Fock cutoff not certified: n_max=%d, last change %.3g", n, bound)
            break
        _, cur = _run_fixed(replace(cfg, n_max=nxt))
        bound = float(np.max(np.abs(cur[:, 0] - prev[:, 0])))
        n, prev = nxt, cur
        if bound < cfg.certify_tol:
            certified = True
            break
    meta = {"oracle": "fock", "n_max": n, "cutoff_change": bound, "certified": certified,
            "n_modes": cfg.n_modes, "wall_time": _time.perf_counter() - started}
    nan = np.full(len(times), np.nan)
    return Trajectory(times, prev[:, 0], prev[:, 1], prev[:, 2], nan, meta)


def coherent_vector(z, n_max):
    n = np.arange(n_max + 1)
    if z == 0:
        v = np.zeros(n_max + 1, complex)
        v[0] = 1.0
        return v
    logmag = n * np.log(abs(z)) - 0.5 * gammaln(n + 1) - 0.5 * abs(z) ** 2
    return np.exp(logmag + 1j * n * np.angle(z))


def coherent_state_embed(state, n_max, dim_cap=DIM_CAP, tail_tol=1e-12):
    """Fock vector of an MD2State (modes in block order f, f~, g, g~)."""
    Z = state.displacements
    M, K = Z.shape
    _check_dim(n_max, K, dim_cap)
    tails = gammainc(n_max + 1, np.abs(Z) ** 2)
    worst = np.unravel_index(np.argmax(tails), tails.shape)
    if tails[worst] >= tail_tol:
        raise TailError(f"coherent tail {tails[worst]:.3e} at configuration {worst[0]}, "
                        f"mode {worst[1]} exceeds {tail_tol:g}; raise n_max")
    d = (n_max + 1) ** K
    psi = np.zeros(2 * d, complex)
    for i in range(M):
        v = np.ones(1, complex)
        for k in range(K):
            v = np.kron(v, coherent_vector(Z[i, k], n_max))
        psi[:d] += state.A[i] * v
        psi[d:] += state.B[i] * v
    return psi


def fock_expectations(psi, h, n_max):
    """(norm, sigma_z, <H>, <H^2>) with the latter three normalized."""
    H = fock_hamiltonian(h.frequencies, h.couplings, h.omega0, n_max)
    half = len(psi) // 2
    n = np.vdot(psi, psi).real
    sz = (np.vdot(psi[:half], psi[:half]).real - np.vdot(psi[half:], psi[half:]).real) / n
    hp = H @ psi
    return n, sz, np.vdot(psi, hp).real / n, np.vdot(hp, hp).real / n
