"""Multi-D2 variational state: M coherent-state configurations, each carrying
a qubit spinor (A_i, B_i) and displacements on the four thermofield mode
blocks (left real f, left tilde f~, right real g, right tilde g~).

Pair arrays X[j, i] put the bra index first.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels

__all__ = [
    "MD2State",
    "OverlapTable",
    "SpectrumTable",
    "debye_waller",
    "norm_squared",
    "sigma_z_expectation",
    "hamiltonian_expectation",
    "overlap",
    "trajectory_spectrum",
    "save_state",
    "load_state",
]

BLOCKS = ("f", "f_tilde", "g", "g_tilde")


@dataclass(frozen=True, eq=False)
class MD2State:
    A: np.ndarray
    B: np.ndarray
    f: np.ndarray
    f_tilde: np.ndarray
    g: np.ndarray
    g_tilde: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        for name in ("A", "B", *BLOCKS):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=complex))
        M = self.A.shape[0]
        if M < 1 or self.A.shape != (M,) or self.B.shape != (M,):
            raise ValueError("A and B must be 1-d of equal length >= 1")
        if self.f.shape != self.f_tilde.shape or self.g.shape != self.g_tilde.shape:
            raise ValueError("real and tilde blocks of one bath must have equal shapes")
        if self.f.ndim != 2 or self.g.ndim != 2 or self.f.shape[0] != M or self.g.shape[0] != M:
            raise ValueError("displacement blocks must be M x N arrays")

    @property
    def M(self):
        return self.A.shape[0]

    @property
    def N_l(self):
        return self.f.shape[1]

    @property
    def N_r(self):
        return self.g.shape[1]

    @property
    def displacements(self):
        """All displacements as one M x K array in block order."""
        return np.concatenate([self.f, self.f_tilde, self.g, self.g_tilde], axis=1)

    @classmethod
    def from_packed(cls, A, B, Z, n_l, n_r, time=0.0):
        a, b = n_l, 2 * n_l
        c = b + n_r
        return cls(A, B, Z[:, :a], Z[:, a:b], Z[:, b:c], Z[:, c:], time=time)

    def with_time(self, time):
        return MD2State(self.A, self.B, self.f, self.f_tilde, self.g, self.g_tilde, time=time)

    def is_finite(self):
        return bool(np.isfinite(self.A).all() and np.isfinite(self.B).all()
                    and np.isfinite(self.displacements).all())

    def norm_squared(self):
        return norm_squared(self)


@dataclass(frozen=True)
class OverlapTable:
    S: np.ndarray
    log_blocks: dict = field(default_factory=dict)


def _log_overlap(Za, Zb):
    """log <Za_j|Zb_i> for normalized multimode coherent states."""
    cross = Za.conj() @ Zb.T
    na = np.einsum("jn,jn->j", Za.conj(), Za).real
    nb = np.einsum("in,in->i", Zb.conj(), Zb).real
    return cross - 0.5 * (na[:, None] + nb[None, :])


def log_overlap_matrix(Z):
    """log S for one packed displacement array, exact zeros on the diagonal."""
    L = _log_overlap(Z, Z)
    np.fill_diagonal(L, 0.0)
    return L


def debye_waller(state):
    logs = {name: _log_overlap(getattr(state, name), getattr(state, name)) for name in BLOCKS}
    total = sum(logs.values())
    np.fill_diagonal(total, 0.0)
    S = np.exp(total)
    # Hermitian by construction up to rounding; make it exact
    S = 0.5 * (S + S.conj().T)
    np.fill_diagonal(S, 1.0)
    return OverlapTable(S=S, log_blocks=logs)


def spin_forms(A, B):
    """(rho, s, sigma) pair weights for identity, sigma_z and sigma_x."""
    Ac, Bc = A.conj(), B.conj()
    aa = np.outer(Ac, A)
    bb = np.outer(Bc, B)
    rho = aa + bb
    s = aa - bb
    sigma = np.outer(Ac, B) + np.outer(Bc, A)
    return rho, s, sigma


def _real_checked(value, scale, what):
    if abs(value.imag) > 1e-10 * max(abs(scale), 1e-300):
        raise FloatingPointError(f"{what} has imaginary residue {value.imag:.3e}")
    return float(value.real)


def norm_squared(state):
    S = debye_waller(state).S
    rho, _, _ = spin_forms(state.A, state.B)
    v = np.sum(S * rho)
    return _real_checked(v, abs(v), "norm")


def sigma_z_expectation(state):
    S = debye_waller(state).S
    rho, s, _ = spin_forms(state.A, state.B)
    n = np.sum(S * rho).real
    if not n > 0:
        raise ZeroDivisionError("state has zero norm")
    v = np.sum(S * s)
    return _real_checked(v, n, "sigma_z") / n


def _check_dims(state, h):
    if state.N_l != h.n_left or state.N_r != h.n_right:
        raise ValueError(f"state has ({state.N_l}, {state.N_r}) modes per bath, "
                         f"Hamiltonian has ({h.n_left}, {h.n_right})")


def hamiltonian_expectation(state, h):
    _check_dims(state, h)
    Z = state.displacements
    w, c = h.frequencies, h.couplings
    S = debye_waller(state).S
    rho, s, sigma = spin_forms(state.A, state.B)
    _, E, y = _kernels.pair_sums(Z, w, c)
    V = y[None, :] + y.conj()[:, None]
    n = np.sum(S * rho).real
    v = np.sum(S * (0.5 * h.omega0 * s + rho * E + sigma * V))
    return _real_checked(v, abs(v) + n, "energy") / n


def overlap(a, b):
    """<a|b> between two states on the same mode space."""
    Za, Zb = a.displacements, b.displacements
    if Za.shape[1] != Zb.shape[1]:
        raise ValueError("states live on different mode spaces")
    S = np.exp(_log_overlap(Za, Zb))
    spin = np.outer(a.A.conj(), b.A) + np.outer(a.B.conj(), b.B)
    return complex(np.sum(spin * S))


@dataclass(frozen=True)
class SpectrumTable:
    omega: np.ndarray
    amplitude: np.ndarray
    dt: float
    n_samples: int


def trajectory_spectrum(series, values=None):
    """Single-sided amplitude spectrum of a mean-subtracted sigma_z series.

    ``series`` is a Trajectory, or a time array together with ``values``.
    A pure cosine of unit amplitude on a bin gives a peak of height 1.
    """
    if values is None:
        times, values = series.times, series.sigma_z
    else:
        times = series
    times = np.asarray(times, float)
    values = np.asarray(values, float)
    if len(times) < 2 or len(times) != len(values):
        raise ValueError("need at least two samples with matching times")
    steps = np.diff(times)
    dt = float(np.mean(steps))
    if np.max(np.abs(steps - dt)) > 1e-8 * dt:
        raise ValueError("series is not uniformly sampled")
    n = len(values)
    amp = np.abs(np.fft.rfft(values - values.mean())) * 2.0 / n
    omega = 2 * np.pi * np.fft.rfftfreq(n, dt)
    return SpectrumTable(omega, amp, dt, n)


def save_state(state, path):
    """Text checkpoint: a header with the shape and time, then one
    'real imag' row per parameter in the order A, B, f, f~, g, g~."""
    flat = np.concatenate([state.A, state.B, state.displacements.ravel()])
    header = f"md2-state M={state.M} N_l={state.N_l} N_r={state.N_r} time={state.time!r}"
    np.savetxt(path, np.column_stack([flat.real, flat.imag]), fmt="%.17g", header=header)


def load_state(path):
    path = Path(path)
    with path.open() as fh:
        first = fh.readline().lstrip("#").split()
    if not first or first[0] != "md2-state":
        raise ValueError(f"{path}: not a state checkpoint")
    meta = dict(item.split("=", 1) for item in first[1:])
    M, n_l, n_r = int(meta["M"]), int(meta["N_l"]), int(meta["N_r"])
    data = np.loadtxt(path, ndmin=2)
    flat = data[:, 0] + 1j * data[:, 1]
    K = 2 * (n_l + n_r)
    if flat.size != 2 * M + M * K:
        raise ValueError(f"{path}: expected {2 * M + M * K} parameters, found {flat.size}")
    Z = flat[2 * M:].reshape(M, K)
    return MD2State.from_packed(flat[:M], flat[M:2 * M], Z, n_l, n_r, time=float(meta["time"]))
