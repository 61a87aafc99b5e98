import cmath
import math

import numpy as np
import pytest

from md2tfd.ansatz import (
    MD2State,
    debye_waller,
    hamiltonian_expectation,
    load_state,
    norm_squared,
    overlap,
    save_state,
    sigma_z_expectation,
    trajectory_spectrum,
)
from md2tfd.oracle import coherent_state_embed, fock_expectations
from md2tfd.tfd import EffectiveHamiltonian


def random_state(rng, M, nl, nr, scale=0.4):
    c = lambda *s: rng.normal(size=s) + 1j * rng.normal(size=s)
    return MD2State(c(M) * 0.5, c(M) * 0.5, c(M, nl) * scale, c(M, nl) * scale,
                    c(M, nr) * scale, c(M, nr) * scale)


def random_ham(rng, nl, nr):
    return EffectiveHamiltonian.from_modes(
        1.0, rng.uniform(0.3, 2.0, nl), rng.uniform(0.05, 0.4, nl), rng.uniform(0, 1, nl),
        rng.uniform(0.3, 2.0, nr), rng.uniform(0.05, 0.4, nr), rng.uniform(0, 1, nr))


def vacuum_state(A, B, nl=1, nr=1):
    M = len(A)
    z = lambda n: np.zeros((M, n))
    return MD2State(A, B, z(nl), z(nl), z(nr), z(nr))


@pytest.mark.parametrize("seed", range(5))
def test_overlap_table_properties(seed):
    rng = np.random.default_rng(seed)
    st = random_state(rng, 4, 3, 2)
    S = debye_waller(st).S
    assert np.all(S.diagonal() == 1.0)
    assert np.array_equal(S, S.conj().T)
    assert np.all(np.abs(S) <= 1.0 + 1e-15)


def test_dwf_single_mode():
    st = MD2State([1, 0], [0, 0], [[1.0], [0.0]], np.zeros((2, 1)), np.zeros((2, 0)),
                  np.zeros((2, 0)))
    S = debye_waller(st).S
    assert S[0, 1] == pytest.approx(math.exp(-0.5), rel=1e-15)
    assert set(debye_waller(st).log_blocks) == {"f", "f_tilde", "g", "g_tilde"}


def test_dwf_phase_covariance():
    rng = np.random.default_rng(2)
    st = random_state(rng, 3, 2, 2)
    ph = cmath.exp(0.7j)
    rot = MD2State(st.A, st.B, st.f * ph, st.f_tilde * ph, st.g * ph, st.g_tilde * ph)
    np.testing.assert_allclose(np.abs(debye_waller(rot).S), np.abs(debye_waller(st).S),
                               rtol=1e-13)


def test_trivial_observables():
    st = vacuum_state([1.0], [0.0])
    assert norm_squared(st) == 1.0
    assert sigma_z_expectation(st) == 1.0
    h = EffectiveHamiltonian.from_modes(1.0, [0.7], [0.2], [0.3], [1.1], [0.1], [0.0])
    assert hamiltonian_expectation(st, h) == pytest.approx(0.5, abs=1e-15)
    eq = vacuum_state([1 / math.sqrt(2)], [1 / math.sqrt(2)])
    assert abs(sigma_z_expectation(eq)) < 1e-15


def test_coherent_energy():
    c = 0.8
    st = MD2State([1.0], [0.0], [[c]], [[0.0]], np.zeros((1, 1)), np.zeros((1, 1)))
    w = 1.3
    h = EffectiveHamiltonian.from_modes(1.0, [w], [0.0], [0.0], [2.0], [0.0], [0.0])
    assert hamiltonian_expectation(st, h) == pytest.approx(0.5 + w * c * c, rel=1e-14)
    tilde = MD2State([1.0], [0.0], [[0.0]], [[c]], np.zeros((1, 1)), np.zeros((1, 1)))
    assert hamiltonian_expectation(tilde, h) == pytest.approx(0.5 - w * c * c, rel=1e-14)


def test_norm_scaling():
    rng = np.random.default_rng(5)
    st = random_state(rng, 3, 2, 1)
    k = 1.7 - 0.4j
    scaled = MD2State(st.A * k, st.B * k, st.f, st.f_tilde, st.g, st.g_tilde)
    assert norm_squared(scaled) == pytest.approx(abs(k) ** 2 * norm_squared(st), rel=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_global_phase_invariance(seed):
    rng = np.random.default_rng(10 + seed)
    st = random_state(rng, 3, 2, 2)
    h = random_ham(rng, 2, 2)
    ph = cmath.exp(1j * rng.uniform(0, 2 * math.pi))
    rot = MD2State(st.A * ph, st.B * ph, st.f, st.f_tilde, st.g, st.g_tilde)
    assert norm_squared(rot) == pytest.approx(norm_squared(st), rel=1e-12)
    assert sigma_z_expectation(rot) == pytest.approx(sigma_z_expectation(st), abs=1e-12)
    assert hamiltonian_expectation(rot, h) == pytest.approx(hamiltonian_expectation(st, h),
                                                            abs=1e-12)


@pytest.mark.parametrize("M,nl,nr", [(1, 1, 0), (2, 1, 0), (3, 1, 0), (2, 0, 1)])
def test_brute_force_equivalence(M, nl, nr):
    # two thermofield modes at most keeps the Fock space small
    rng = np.random.default_rng(M * 7 + nl)
    st = random_state(rng, M, nl, nr, scale=0.5)
    h = random_ham(rng, nl, nr)
    n_max = 40
    psi = coherent_state_embed(st, n_max)
    n, sz, en, _ = fock_expectations(psi, h, n_max)
    assert n == pytest.approx(norm_squared(st), rel=1e-9)
    assert sz == pytest.approx(sigma_z_expectation(st), abs=1e-9)
    assert en == pytest.approx(hamiltonian_expectation(st, h), abs=1e-9)


def test_overlap_matches_fock():
    rng = np.random.default_rng(3)
    a = random_state(rng, 2, 1, 0, 0.6)
    b = random_state(rng, 2, 1, 0, 0.6)
    pa, pb = coherent_state_embed(a, 40), coherent_state_embed(b, 40)
    assert overlap(a, b) == pytest.approx(np.vdot(pa, pb), abs=1e-9)
    assert overlap(a, a).real == pytest.approx(norm_squared(a), rel=1e-12)


def test_dimension_mismatch():
    st = vacuum_state([1.0], [0.0], 2, 1)
    h = EffectiveHamiltonian.from_modes(1.0, [0.7], [0.2], [0.3], [1.1], [0.1], [0.0])
    with pytest.raises(ValueError):
        hamiltonian_expectation(st, h)


def test_zero_norm_rejected():
    with pytest.raises(ZeroDivisionError):
        sigma_z_expectation(vacuum_state([0.0], [0.0]))


def test_spectrum_of_cosine():
    t = np.arange(2000) * 0.05
    w1 = 2 * math.pi * 40 / (2000 * 0.05)
    sp = trajectory_spectrum(t, np.cos(w1 * t))
    k = np.argmax(sp.amplitude)
    assert sp.omega[k] == pytest.approx(w1, rel=1e-12)
    assert sp.amplitude[k] == pytest.approx(1.0, rel=1e-9)
    assert sp.n_samples == 2000 and sp.dt == pytest.approx(0.05)


def test_spectrum_constant_and_nonuniform():
    t = np.linspace(0, 10, 101)
    sp = trajectory_spectrum(t, np.full(101, 0.3))
    assert np.all(sp.amplitude[1:] < 1e-12)
    t2 = t.copy()
    t2[50] += 0.01
    with pytest.raises(ValueError, match="uniform"):
        trajectory_spectrum(t2, np.ones(101))


def test_state_checkpoint_roundtrip(tmp_path):
    rng = np.random.default_rng(8)
    st = random_state(rng, 3, 2, 4).with_time(1.25)
    save_state(st, tmp_path / "s.txt")
    back = load_state(tmp_path / "s.txt")
    assert (back.M, back.N_l, back.N_r, back.time) == (3, 2, 4, 1.25)
    np.testing.assert_array_equal(back.displacements, st.displacements)
    np.testing.assert_array_equal(back.A, st.A)
    np.testing.assert_array_equal(back.B, st.B)


def test_state_shape_validation():
    with pytest.raises(ValueError):
        MD2State([1.0, 0.0], [0.0], np.zeros((2, 1)), np.zeros((2, 1)), np.zeros((2, 1)),
                 np.zeros((2, 1)))
    with pytest.raises(ValueError):
        MD2State([1.0], [0.0], np.zeros((1, 2)), np.zeros((1, 1)), np.zeros((1, 1)),
                 np.zeros((1, 1)))
