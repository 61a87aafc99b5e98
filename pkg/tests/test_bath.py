import math

import numpy as np
import pytest

from md2tfd.bath import (
    DiscretizedBath,
    DomainError,
    SpectralDensity,
    bath_correlation_function,
    discretize_id,
    discretize_log,
    load_bath,
    quantum_noise_spectrum,
    save_bath,
    spectral_density_value,
)

SD = SpectralDensity(0.015, 1.5)

# mpmath at 50 digits: J (coth(beta w / 2) + 1) / (2 pi)
S_REF_PLUS = 0.011201298814371679709   # w = +1, beta = 0.5
S_REF_MINUS = 0.0067939311595191934878  # w = -1

# scipy.integrate.quad with sine/cosine weights, T = 0, W = 15:
# Im C(t) = -int_0^W J/pi sin(wt) dw, Re C(t) = int_0^W J/pi cos(wt) dw
ZERO_T_BCF = {
    0.5: complex(0.002718956017196722, -0.009778240844441665),
    1.0: complex(-0.0014095109117600601, -0.005693641069281811),
    3.0: complex(-0.0006214255888269042, -7.872215316475397e-05),
}


@pytest.fixture(scope="module")
def id_bath():
    return discretize_id(SD, 0.5, horizon=10.0, tolerance=1e-4)


def test_spectral_density_values():
    assert spectral_density_value(SD, 0.0) == 0.0
    sd = SpectralDensity(0.3, 2.0)
    assert spectral_density_value(sd, 2.0) == pytest.approx(0.3, rel=1e-15)
    assert spectral_density_value(SpectralDensity(0.2, 1.0), 3.0) == pytest.approx(0.12, rel=1e-14)


def test_spectral_density_domain():
    with pytest.raises(DomainError):
        spectral_density_value(SD, -0.1)
    with pytest.raises(DomainError):
        SpectralDensity(0.0, 1.0)
    with pytest.raises(DomainError):
        SpectralDensity(0.1, -1.0)


def test_noise_spectrum_reference_values():
    assert quantum_noise_spectrum(SD, 0.5, 1.0) == pytest.approx(S_REF_PLUS, rel=1e-13)
    assert quantum_noise_spectrum(SD, 0.5, -1.0) == pytest.approx(S_REF_MINUS, rel=1e-13)


@pytest.mark.parametrize("beta", [0.05, 0.5, 5.0, 50.0])
@pytest.mark.parametrize("w", [1e-3, 0.3, 1.0, 4.0, 12.0])
def test_detailed_balance(beta, w):
    plus = quantum_noise_spectrum(SD, beta, w)
    minus = quantum_noise_spectrum(SD, beta, -w)
    assert minus >= 0
    assert minus == pytest.approx(math.exp(-beta * w) * plus, rel=1e-10, abs=1e-300)


def test_noise_spectrum_zero_frequency_limit():
    beta = 0.7
    limit = 2 * SD.alpha / SD.omega_c / beta / math.pi
    assert quantum_noise_spectrum(SD, beta, 0.0) == pytest.approx(limit, rel=1e-14)
    assert quantum_noise_spectrum(SD, beta, 1e-7) == pytest.approx(limit, rel=1e-6)


def test_noise_spectrum_cold_limit():
    assert quantum_noise_spectrum(SD, 1e3, 1.0) == pytest.approx(SD(1.0) / math.pi, rel=1e-12)
    assert quantum_noise_spectrum(SD, math.inf, -1.0) == 0.0


def test_noise_spectrum_rejects_bad_beta():
    with pytest.raises(DomainError):
        quantum_noise_spectrum(SD, 0.0, 1.0)


def test_bcf_at_zero_is_real_positive():
    c0 = bath_correlation_function(SD, 0.5, times=[0.0]).values[0]
    assert c0.real > 0
    assert abs(c0.imag) < 1e-10 * c0.real


def test_bcf_hermiticity():
    t = np.linspace(0, 8, 17)
    fwd = bath_correlation_function(SD, 0.5, times=t).values
    back = bath_correlation_function(SD, 0.5, times=-t[::-1]).values[::-1]
    assert np.max(np.abs(back - fwd.conj())) < 1e-10


def test_bcf_self_convergence():
    t = np.linspace(0, 10, 41)
    a = bath_correlation_function(SD, 0.5, times=t).values
    b = bath_correlation_function(SD, 0.5, times=t, n_panels=2048).values
    assert np.max(np.abs(a - b)) / np.max(np.abs(b)) < 1e-8


def test_bcf_zero_temperature_against_quad():
    t = np.array(sorted(ZERO_T_BCF))
    vals = bath_correlation_function(SD, 1e6, omega_max=15.0, times=t).values
    for ti, v in zip(t, vals):
        assert v.imag == pytest.approx(ZERO_T_BCF[ti].imag, abs=1e-11)
        assert v.real == pytest.approx(ZERO_T_BCF[ti].real, abs=1e-11)


def test_bcf_domain_checks():
    with pytest.raises(DomainError):
        bath_correlation_function(SD, 0.5, times=[1.0, 0.0])
    with pytest.raises(DomainError):
        bath_correlation_function(SD, 0.5, omega_max=-1.0)


def test_id_certified(id_bath):
    assert id_bath.certification_error <= 1e-4
    assert np.all(id_bath.weights >= 0)
    assert np.all(np.diff(id_bath.frequencies) > 0)
    t = np.linspace(0, 10, 400)
    ref = bath_correlation_function(SD, 0.5, times=t).values
    err = np.max(np.abs(id_bath.reconstruct_bcf(t) - ref)) / np.max(np.abs(ref))
    assert err == pytest.approx(id_bath.certification_error, rel=1e-9)


def test_id_coupling_identity(id_bath):
    g2 = id_bath.weights * quantum_noise_spectrum(SD, 0.5, id_bath.frequencies)
    np.testing.assert_allclose(id_bath.couplings ** 2, g2, rtol=1e-12)


def test_id_monotone_in_tolerance():
    counts = [discretize_id(SD, 0.5, tolerance=tol).n_modes for tol in (0.5, 1e-2, 1e-4)]
    assert counts == sorted(counts)
    loose = discretize_id(SD, 0.5, tolerance=0.5)
    assert loose.certification_error <= 0.5


def test_unpaired_id_flags_negative_modes():
    b = discretize_id(SD, 0.5, tolerance=1e-3, paired=False)
    assert not b.paired
    assert b.certification_error <= 1e-3
    assert b.has_negative_modes == bool(np.any(b.frequencies <= 0))


def test_log_error_decreases():
    errs = [discretize_log(SD, 0.5, n_modes=n).certification_error for n in (30, 60, 120)]
    assert errs[0] > errs[1] > errs[2]


def test_log_single_mode():
    b = discretize_log(SD, 0.5, n_modes=1, omega_min=0.15, omega_max=15.0)
    assert b.n_modes == 1
    assert b.frequencies[0] == pytest.approx(math.sqrt(0.15 * 15.0))
    assert b.certification_error == pytest.approx(
        np.max(np.abs(b.reconstruct_bcf(np.linspace(0, 10, 400))
                      - bath_correlation_function(SD, 0.5, times=np.linspace(0, 10, 400)).values))
        / np.max(np.abs(bath_correlation_function(SD, 0.5, times=np.linspace(0, 10, 400)).values)))


def test_bare_couplings_undo_thermal_factor(id_bath):
    from md2tfd.tfd import bogoliubov_angles
    th = bogoliubov_angles(id_bath, id_bath.beta)
    np.testing.assert_allclose(id_bath.bare_couplings() * np.cosh(th), id_bath.couplings,
                               rtol=1e-12)


def test_bath_roundtrip(tmp_path, id_bath):
    p = tmp_path / "bath.txt"
    save_bath(id_bath, p)
    assert p.read_text().splitlines()[0] == "# omega_k  z_k  g_k  beta  cert_err"
    back = load_bath(p, spectral=SD)
    np.testing.assert_array_equal(back.frequencies, id_bath.frequencies)
    np.testing.assert_array_equal(back.couplings, id_bath.couplings)
    np.testing.assert_array_equal(back.weights, id_bath.weights)
    assert back.certification_error == id_bath.certification_error


def test_discretized_bath_validation():
    with pytest.raises(DomainError):
        DiscretizedBath(np.array([1.0]), np.array([0.1]), np.array([-1.0]), 1.0, 0.0)
    with pytest.raises(DomainError):
        DiscretizedBath(np.array([1.0, 2.0]), np.array([0.1]), np.array([1.0]), 1.0, 0.0)
    with pytest.raises(DomainError):
        DiscretizedBath(np.array([-1.0]), np.array([0.1]), np.array([1.0]), 1.0, 0.0)
