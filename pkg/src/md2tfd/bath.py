"""Drude-Lorentz bath: spectral density, thermal noise spectrum, correlation
function and certified discrete representations.

Frequencies are in units of the qubit splitting, times in units of its
inverse. ``beta`` may be ``math.inf`` for a zero-temperature bath.

A discretized bath is *paired* by default: each mode at a positive
frequency ``w_k`` stands for the thermofield pair ``(+w_k, -w_k)``, so its
contribution to the correlation function is
``z_k [S(w_k) exp(-i w_k t) + S(-w_k) exp(+i w_k t)]``. This is the form
consumed by :mod:`md2tfd.tfd`. An unpaired bath keeps each selected
frequency literally (negative frequencies included).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.optimize

__all__ = [
    "DomainError",
    "NNLSConvergenceError",
    "SpectralDensity",
    "DiscretizedBath",
    "BcfGrid",
    "spectral_density_value",
    "quantum_noise_spectrum",
    "bath_correlation_function",
    "discretize_id",
    "discretize_log",
    "save_bath",
    "load_bath",
]

BATH_HEADER = "# omega_k  z_k  g_k  beta  cert_err"


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class NNLSConvergenceError(RuntimeError):
    """The nonnegative least-squares solve hit its iteration cap."""

    def __init__(self, message, residual):
        super().__init__(f"{message} (best residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class SpectralDensity:
    """J(w) = 2 alpha omega_c w / (w^2 + omega_c^2)."""

    alpha: float
    omega_c: float
    form: str = "drude_lorentz"

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError(f"alpha must be positive, got {self.alpha}")
        if not self.omega_c > 0:
            raise DomainError(f"omega_c must be positive, got {self.omega_c}")
        if self.form != "drude_lorentz":
            raise DomainError(f"unsupported spectral density form {self.form!r}")

    def __call__(self, omega):
        return spectral_density_value(self, omega)

    def odd(self, omega):
        """Antisymmetric extension J(-w) = -J(w), valid for any real w."""
        omega = np.asarray(omega, dtype=float)
        return 2.0 * self.alpha * self.omega_c * omega / (omega**2 + self.omega_c**2)


def spectral_density_value(sd, omega):
    omega_arr = np.asarray(omega, dtype=float)
    if np.any(omega_arr < 0):
        raise DomainError("spectral density is defined for omega >= 0")
    out = sd.odd(omega_arr)
    return float(out) if out.ndim == 0 else out


def _bose_factor(x):
    # x / (1 - exp(-x)), stable for either sign and filled in at x = 0
    x = np.asarray(x, dtype=float)
    out = np.ones_like(x)
    pos = x > 1e-12
    neg = x < -1e-12
    out[pos] = x[pos] / -np.expm1(-x[pos])
    with np.errstate(over="ignore", under="ignore"):
        out[neg] = x[neg] * np.exp(x[neg]) / np.expm1(x[neg])
    return out


def quantum_noise_spectrum(sd, beta, omega):
    """S_beta(w) = J(w) [coth(beta w / 2) + 1] / (2 pi), for any real w.

    Evaluated as J(w) / (pi (1 - exp(-beta w))) so the negative-frequency
    branch does not cancel.
    """
    if not beta > 0:
        raise DomainError(f"beta must be positive, got {beta}")
    omega = np.asarray(omega, dtype=float)
    lorentz = 2.0 * sd.alpha * sd.omega_c / (omega**2 + sd.omega_c**2)
    if math.isinf(beta):
        w_bose = np.maximum(omega, 0.0)
    else:
        w_bose = _bose_factor(beta * omega) / beta
    out = lorentz * w_bose / np.pi
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class BcfGrid:
    times: np.ndarray
    values: np.ndarray


def _gauss_panels(omega_max, n_panels, order):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(-omega_max, omega_max, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def bath_correlation_function(sd, beta, omega_max=None, times=(0.0,), n_panels=None,
                              order=24):
    """Reference C(t) = int_{-W}^{W} S_beta(w) exp(-i w t) dw by composite
    Gauss-Legendre quadrature (at least 10^4 nodes)."""
    if omega_max is None:
        omega_max = 10.0 * sd.omega_c
    if not omega_max > 0:
        raise DomainError("omega_max must be positive")
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if times.size == 0:
        raise DomainError("times must be nonempty")
    if np.any(np.diff(times) < 0):
        raise DomainError("times must be sorted")
    if n_panels is None:
        t_max = float(np.max(np.abs(times)))
        # <= 1 rad of phase per panel; even count puts a panel edge at w = 0
        n_panels = max(512, int(math.ceil(2.0 * omega_max * t_max)))
        n_panels += n_panels % 2
    nodes, weights = _gauss_panels(omega_max, n_panels, order)
    sw = quantum_noise_spectrum(sd, beta, nodes) * weights
    values = np.empty(times.size, dtype=complex)
    chunk = max(1, 2_000_000 // nodes.size)
    for lo in range(0, times.size, chunk):
        t = times[lo:lo + chunk]
        values[lo:lo + chunk] = np.exp(-1j * np.outer(t, nodes)) @ sw
    return BcfGrid(times=times, values=values)


@dataclass(frozen=True)
class DiscretizedBath:
    frequencies: np.ndarray
    couplings: np.ndarray
    weights: np.ndarray
    beta: float
    certification_error: float
    paired: bool = True
    spectral: SpectralDensity | None = field(default=None, compare=False)

    def __post_init__(self):
        n = len(self.frequencies)
        if n < 1 or len(self.couplings) != n or len(self.weights) != n:
            raise DomainError("frequencies, couplings and weights must share a length >= 1")
        if np.any(np.asarray(self.weights) < 0):
            raise DomainError("quadrature weights must be nonnegative")
        if np.any(np.asarray(self.couplings) < 0):
            raise DomainError("couplings must be nonnegative")
        if self.paired and np.any(np.asarray(self.frequencies) <= 0):
            raise DomainError("a paired bath needs strictly positive frequencies")

    @property
    def n_modes(self):
        return len(self.frequencies)

    @property
    def has_negative_modes(self):
        return bool(np.any(self.frequencies <= 0))

    def mode_columns(self, times):
        """Per-mode BCF contributions (len(times) x n_modes) before weighting."""
        times = np.asarray(times, dtype=float)
        return _columns(self.spectral, self.beta, self.frequencies, times, self.paired)

    def reconstruct_bcf(self, times):
        return self.mode_columns(times) @ self.weights

    def bare_couplings(self):
        """Zero-temperature couplings lambda_k = sqrt(z_k J(w_k) / pi).

        For a paired bath lambda_k cosh(theta_k) reproduces ``couplings``.
        """
        if not self.paired:
            raise DomainError("bare couplings are only defined for a paired bath")
        return np.sqrt(self.weights * self.spectral(self.frequencies) / np.pi)


def _columns(sd, beta, freqs, times, paired):
    phase = np.exp(-1j * np.outer(times, freqs))
    cols = phase * quantum_noise_spectrum(sd, beta, freqs)
    if paired:
        cols = cols + np.conj(phase) * quantum_noise_spectrum(sd, beta, -freqs)
    return cols


def _certify(sd, beta, freqs, weights, times, reference, paired):
    approx = _columns(sd, beta, freqs, times, paired) @ weights
    return float(np.max(np.abs(approx - reference)) / np.max(np.abs(reference)))


def _nnls(basis, target, maxiter):
    try:
        z, _ = scipy.optimize.nnls(basis, target, maxiter=maxiter)
    except RuntimeError:
        best = scipy.optimize.lsq_linear(basis, target, bounds=(0.0, np.inf))
        raise NNLSConvergenceError(
            "NNLS did not converge", float(np.linalg.norm(basis @ best.x - target))
        ) from None
    return z


def discretize_id(sd, beta, omega_max=None, horizon=10.0, tolerance=1e-4,
                  n_freq_candidates=2000, m_time_samples=400, max_modes=None,
                  paired=True):
    """Interpolative-decomposition discretization with NNLS weights.

    Candidate frequencies are equispaced on (0, W] for a paired bath and on
    [-W, W] otherwise. Columns of the stacked real/imaginary BCF matrix are
    chosen by column-pivoted QR; the rank is the number of pivots with
    |R_kk| > tolerance |R_00|, raised until the reconstructed BCF is within
    ``tolerance`` of the reference (relative max error on the sample grid)
    or the numerical rank is exhausted.
    ``max_modes`` caps the rank instead; certification is then only recorded.
    """
    if not tolerance > 0:
        raise DomainError("tolerance must be positive")
    if omega_max is None:
        omega_max = 10.0 * sd.omega_c
    if paired:
        cand = omega_max * np.arange(1, n_freq_candidates + 1) / n_freq_candidates
    else:
        cand = np.linspace(-omega_max, omega_max, n_freq_candidates)
    times = np.linspace(0.0, horizon, m_time_samples)
    cols = _columns(sd, beta, cand, times, paired)
    f_real = np.vstack([cols.real, cols.imag])
    reference = bath_correlation_function(sd, beta, omega_max, times).values
    target = np.concatenate([reference.real, reference.imag])

    _, r_fac, piv = scipy.linalg.qr(f_real, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r_fac))
    if diag.size == 0 or diag[0] == 0:
        raise DomainError("empty pivot set: the BCF matrix vanishes")
    full_rank = int(np.count_nonzero(diag > 1e-15 * diag[0]))
    if max_modes is not None:
        rank = min(int(max_modes), full_rank)
    else:
        rank = max(1, int(np.count_nonzero(diag > tolerance * diag[0])))
    maxiter = 10 * n_freq_candidates

    while True:
        sel = np.sort(piv[:rank])
        z = _nnls(f_real[:, sel], target, maxiter)
        err = _certify(sd, beta, cand[sel], z, times, reference, paired)
        if max_modes is not None or err <= tolerance or rank >= full_rank:
            break
        # unit steps keep the mode count monotone in the tolerance
        rank += 1

    freqs = cand[sel]
    g = np.sqrt(z * quantum_noise_spectrum(sd, beta, freqs))
    return DiscretizedBath(freqs, g, z, float(beta), err, paired, sd)


def discretize_log(sd, beta, omega_max=None, n_modes=60, omega_min=None, horizon=10.0,
                   m_time_samples=400, paired=True):
    """Logarithmic grid on [omega_min, omega_max]; weights are interval widths
    and frequencies the geometric interval midpoints."""
    if n_modes < 1:
        raise DomainError("n_modes must be >= 1")
    if omega_max is None:
        omega_max = 10.0 * sd.omega_c
    if omega_min is None:
        omega_min = 1e-3 * omega_max
    edges = np.geomspace(omega_min, omega_max, n_modes + 1)
    freqs = np.sqrt(edges[1:] * edges[:-1])
    z = np.diff(edges)
    times = np.linspace(0.0, horizon, m_time_samples)
    reference = bath_correlation_function(sd, beta, omega_max, times).values
    err = _certify(sd, beta, freqs, z, times, reference, paired)
    g = np.sqrt(z * quantum_noise_spectrum(sd, beta, freqs))
    return DiscretizedBath(freqs, g, z, float(beta), err, paired, sd)


def save_bath(bath, path):
    lines = [BATH_HEADER]
    for w, z, g in zip(bath.frequencies, bath.weights, bath.couplings):
        lines.append(
            f"{w:.17g}  {z:.17g}  {g:.17g}  {bath.beta:.17g}  {bath.certification_error:.17g}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def load_bath(path, spectral=None, paired=None):
    """Read a bath written by :func:`save_bath`.

    ``paired`` defaults to True unless a nonpositive frequency is present.
    """
    text = Path(path).read_text().splitlines()
    if not text or text[0].split() != BATH_HEADER.split():
        raise ValueError(f"{path}: missing bath header {BATH_HEADER!r}")
    rows = np.array([[float(v) for v in ln.split()] for ln in text[1:] if ln.strip()])
    if rows.ndim != 2 or rows.shape[1] != 5:
        raise ValueError(f"{path}: expected 5 columns per row")
    freqs = rows[:, 0]
    if paired is None:
        paired = bool(np.all(freqs > 0))
    return DiscretizedBath(freqs, rows[:, 2], rows[:, 1], float(rows[0, 3]),
                           float(rows[0, 4]), paired, spectral)
