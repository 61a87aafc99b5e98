"""Thermofield doubling of the two baths.

Each real mode (w, lambda) acquires a tilde partner at frequency -w. After
the Bogoliubov rotation the qubit couples to the real mode with
lambda cosh(theta) and to the tilde mode with lambda sinh(theta), where
theta = arctanh(exp(-beta w / 2)), and the thermal bath state becomes the
doubled vacuum.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ansatz import MD2State
from .bath import DomainError

__all__ = [
    "ThermalBathPair",
    "EffectiveHamiltonian",
    "bogoliubov_angles",
    "build_effective_hamiltonian",
    "initial_state_spec",
    "QUBIT_INITS",
]

QUBIT_INITS = ("up", "down", "plus_x")


def bogoliubov_angles(bath, beta):
    freqs = np.asarray(bath.frequencies if hasattr(bath, "frequencies") else bath, dtype=float)
    if not beta > 0:
        raise DomainError(f"beta must be positive, got {beta}")
    bad = np.flatnonzero(freqs <= 0)
    if bad.size:
        k = int(bad[0])
        raise DomainError(
            f"mode {k} has nonpositive frequency {freqs[k]:.6g}; the thermal "
            "rotation is undefined there (discretize with paired=True)")
    if math.isinf(beta):
        return np.zeros_like(freqs)
    return np.arctanh(np.exp(-0.5 * beta * freqs))


@dataclass(frozen=True)
class ThermalBathPair:
    beta_left: float
    beta_right: float
    theta_left: np.ndarray
    theta_right: np.ndarray

    @classmethod
    def from_baths(cls, bath_l, bath_r, beta_l=None, beta_r=None):
        beta_l = bath_l.beta if beta_l is None else beta_l
        beta_r = bath_r.beta if beta_r is None else beta_r
        return cls(beta_l, beta_r,
                   bogoliubov_angles(bath_l, beta_l),
                   bogoliubov_angles(bath_r, beta_r))


@dataclass(frozen=True)
class EffectiveHamiltonian:
    """Coefficients of the doubled Hamiltonian

    H = w0/2 sz + sum_r sum_k w_rk (b+b - bt+bt)
        + sx sum_r sum_k lam_rk [cosh(th) (b + b+) + sinh(th) (bt + bt+)]

    ``frequencies`` and ``couplings`` are the flattened mode axis in block
    order [left real, left tilde, right real, right tilde].
    """
    omega0: float
    left_frequencies: np.ndarray
    left_real_couplings: np.ndarray
    left_tilde_couplings: np.ndarray
    right_frequencies: np.ndarray
    right_real_couplings: np.ndarray
    right_tilde_couplings: np.ndarray

    @property
    def n_left(self):
        return len(self.left_frequencies)

    @property
    def n_right(self):
        return len(self.right_frequencies)

    @property
    def n_modes(self):
        return 2 * (self.n_left + self.n_right)

    @property
    def frequencies(self):
        wl, wr = self.left_frequencies, self.right_frequencies
        return np.concatenate([wl, -wl, wr, -wr])

    @property
    def couplings(self):
        return np.concatenate([self.left_real_couplings, self.left_tilde_couplings,
                               self.right_real_couplings, self.right_tilde_couplings])

    @property
    def tilde_mask(self):
        nl, nr = self.n_left, self.n_right
        return np.concatenate([np.zeros(nl, bool), np.ones(nl, bool),
                               np.zeros(nr, bool), np.ones(nr, bool)])

    @classmethod
    def from_modes(cls, omega0, w_left, lam_left, theta_left, w_right, lam_right, theta_right):
        """Direct construction from bare couplings and angles."""
        arrs = [np.asarray(x, dtype=float) for x in
                (w_left, lam_left, theta_left, w_right, lam_right, theta_right)]
        wl, ll, tl, wr, lr, tr = arrs
        if not (len(wl) == len(ll) == len(tl)) or not (len(wr) == len(lr) == len(tr)):
            raise ValueError("mode, coupling and angle sequences differ in length")
        return cls(float(omega0), wl.copy(), ll * np.cosh(tl), ll * np.sinh(tl),
                   wr.copy(), lr * np.cosh(tr), lr * np.sinh(tr))


def build_effective_hamiltonian(bath_l, bath_r, thermal, omega0=1.0, delta=0.0):
    if delta != 0.0:
        raise ValueError("only delta = 0 is supported: the equations of motion "
                         "are derived without a tunneling term")
    for name, bath, theta in (("left", bath_l, thermal.theta_left),
                              ("right", bath_r, thermal.theta_right)):
        if len(theta) != bath.n_modes:
            raise ValueError(f"{name} bath has {bath.n_modes} modes but "
                             f"{len(theta)} angles")
        if not bath.paired:
            raise DomainError(f"{name} bath is unpaired; thermal doubling needs "
                              "positive paired modes")
    # the stored couplings already carry cosh(theta) of their own temperature
    lam_l = bath_l.couplings / np.cosh(bogoliubov_angles(bath_l, bath_l.beta))
    lam_r = bath_r.couplings / np.cosh(bogoliubov_angles(bath_r, bath_r.beta))
    return EffectiveHamiltonian.from_modes(omega0, bath_l.frequencies, lam_l, thermal.theta_left,
                                           bath_r.frequencies, lam_r, thermal.theta_right)


def initial_state_spec(qubit_init, M, bath_sizes, noise=1e-4, seed=0):
    """Thermal-vacuum initial state with small symmetry-breaking noise.

    The dominant coherent state (index 0) carries the qubit state; the other
    amplitudes of the same spin component and every displacement get
    independent complex noise of modulus at most ``noise``.
    """
    if qubit_init not in QUBIT_INITS:
        raise ValueError(f"qubit_init must be one of {QUBIT_INITS}, got {qubit_init!r}")
    if M < 1:
        raise ValueError("M must be at least 1")
    n_l, n_r = bath_sizes
    rng = np.random.default_rng(seed)

    def draw(*shape):
        r = rng.uniform(0.0, noise, size=shape)
        return r * np.exp(2j * np.pi * rng.uniform(size=shape))

    A = np.zeros(M, complex)
    B = np.zeros(M, complex)
    tail_a, tail_b = draw(M - 1), draw(M - 1)
    if qubit_init in ("up", "plus_x"):
        A[0], A[1:] = 1.0, tail_a
    if qubit_init in ("down", "plus_x"):
        B[0], B[1:] = 1.0, tail_b
    blocks = [draw(M, n_l), draw(M, n_l), draw(M, n_r), draw(M, n_r)]
    state = MD2State(A, B, *blocks, time=0.0)
    scale = 1.0 / math.sqrt(state.norm_squared())
    return MD2State(A * scale, B * scale, *blocks, time=0.0)
