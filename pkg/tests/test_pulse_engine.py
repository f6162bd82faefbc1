import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from conftest import random_density
from spinmech.errors import InvalidInputError
from spinmech.pulse_engine import (
    GreenPump,
    Microwave,
    PulseSequence,
    RelaxationParams,
    Wait,
    apply_microwave,
    echo_amplitude,
    echo_decay_time,
    free_evolve,
    polarize,
    pure_state,
    rabi_trace,
    run_sequence,
    t1_population_at_pulse,
    thermal_state,
)
from spinmech.spin_core import IDX_MINUS, IDX_ZERO, check_density_matrix

RABI = 5e6


def test_polarize(rng):
    rho = random_density(rng)
    np.testing.assert_allclose(polarize(rho, 1.0), pure_state(IDX_ZERO), atol=1e-15)
    out = polarize(rho, 0.0)
    np.testing.assert_allclose(np.diag(out), np.diag(rho), atol=1e-15)
    assert np.count_nonzero(out - np.diag(np.diag(out))) == 0
    assert polarize(thermal_state(), 0.8)[IDX_ZERO, IDX_ZERO].real == pytest.approx(0.8 + 0.2 / 3, abs=1e-12)
    with pytest.raises(InvalidInputError):
        polarize(rho, 1.2)


def test_pi_pulse_and_rabi_formula():
    rho = pure_state(IDX_ZERO)
    out = apply_microwave(rho, Microwave(2.5e9, RABI, 1 / (2 * RABI)), 2.5e9)
    assert out[IDX_MINUS, IDX_MINUS].real == pytest.approx(1.0, abs=1e-9)
    for t in np.linspace(0, 1e-6, 37):
        p = apply_microwave(rho, Microwave(2.5e9, RABI, t), 2.5e9)[IDX_MINUS, IDX_MINUS].real
        assert p == pytest.approx(np.sin(np.pi * RABI * t) ** 2, abs=1e-9)


def _expm_population(rabi, detuning, phase, t):
    # rotating-frame generator on (|0>, |target>) in Hz, exponentiated directly
    sx = np.array([[0, 1], [1, 0]])
    sy = np.array([[0, -1j], [1j, 0]])
    sz = np.diag([1.0, -1.0])
    h = 0.5 * detuning * sz + 0.5 * rabi * (np.cos(phase) * sx + np.sin(phase) * sy)
    u = expm(-2j * np.pi * h * t)
    return abs(u[1, 0]) ** 2


@pytest.mark.parametrize("detuning", [0.0, 1e6, RABI, -3 * RABI])
def test_detuned_pulse_matches_expm(detuning):
    t_pi = 1 / (2 * RABI)
    p = apply_microwave(pure_state(IDX_ZERO), Microwave(2.5e9 + detuning, RABI, t_pi, 0.3), 2.5e9)
    assert p[IDX_MINUS, IDX_MINUS].real == pytest.approx(_expm_population(RABI, detuning, 0.3, t_pi), abs=1e-9)


def test_detuned_pi_time_closed_form():
    # generalized Rabi: Omega^2/(Omega^2+Delta^2) sin^2(pi sqrt(Omega^2+Delta^2) t)
    t_pi = 1 / (2 * RABI)
    p = apply_microwave(pure_state(IDX_ZERO), Microwave(2.5e9 + RABI, RABI, t_pi), 2.5e9)
    expect = 0.5 * np.sin(np.pi * np.sqrt(2) * RABI * t_pi) ** 2
    assert p[IDX_MINUS, IDX_MINUS].real == pytest.approx(expect, abs=1e-9)


@given(st.integers(0, 2**32 - 1))
def test_inverse_pulse(seed):
    rng = np.random.default_rng(seed)
    rho = random_density(rng)
    t, ph = rng.uniform(0, 1e-6), rng.uniform(0, 2 * np.pi)
    fwd = Microwave(2.5e9, RABI, t, ph, "plus")
    # the inverse of exp(-i a n.sigma) at zero detuning is the pulse with phase + pi
    back = Microwave(2.5e9, RABI, t, ph + np.pi, "plus")
    out = apply_microwave(apply_microwave(rho, fwd, 2.5e9), back, 2.5e9)
    np.testing.assert_allclose(out, rho, atol=1e-9)


def test_free_evolve():
    rho = pure_state(IDX_MINUS)
    relax = RelaxationParams(t1=1e-3, t2=1e-6, t2_star=1e-7)
    np.testing.assert_array_equal(free_evolve(rho, 0.0, relax), rho)
    assert free_evolve(rho, 1e-3, relax)[IDX_MINUS, IDX_MINUS].real == pytest.approx(1 / 3 + 2 / 3 * np.exp(-1), abs=1e-12)
    np.testing.assert_allclose(free_evolve(rho, np.inf, relax), thermal_state(), atol=1e-9)
    np.testing.assert_allclose(free_evolve(rho, 1.0, relax), thermal_state(), atol=1e-9)
    with pytest.raises(InvalidInputError):
        free_evolve(rho, -1.0, relax)


def test_relaxation_validation():
    with pytest.raises(InvalidInputError):
        RelaxationParams(t1=1e-3)  # infinite t2 exceeds 2 t1
    with pytest.raises(InvalidInputError):
        RelaxationParams(t1=1.0, t2=1e-6, t2_star=1e-5)


def test_rabi_trace():
    t = np.linspace(0, 2e-6, 101)
    np.testing.assert_allclose(rabi_trace(t, RABI), np.sin(np.pi * RABI * t) ** 2, atol=1e-12)
    # linear in the initial polarisation: p = 1/6 + 0.5 sin^2
    np.testing.assert_allclose(rabi_trace(t, RABI, pump_efficiency=0.5), 1 / 6 + 0.5 * np.sin(np.pi * RABI * t) ** 2, atol=1e-12)
    np.testing.assert_allclose(rabi_trace(t, 0.0), 0.0, atol=1e-15)
    shifted = rabi_trace(t + 1 / RABI, RABI)
    np.testing.assert_allclose(shifted, rabi_trace(t, RABI), atol=1e-9)


def test_rabi_trace_with_relaxation_damps():
    relax = RelaxationParams(t1=1e-3, t2=1e-6, t2_star=1e-7)
    t = np.linspace(0, 3e-6, 31)
    p = rabi_trace(t, RABI, relax)
    assert np.all((p >= -1e-12) & (p <= 1 + 1e-12))
    # late oscillations shrink toward 1/2 under dephasing
    assert np.ptp(p[-5:]) < np.ptp(p[:5]) + 1e-12


def test_echo():
    relax = RelaxationParams(t1=1e-3, t2=1.22e-6, t2_star=1e-7)
    assert echo_amplitude(0.0, relax) == pytest.approx(1.0, abs=1e-9)
    free = RelaxationParams()
    assert echo_amplitude(5e-6, free, detuning_sigma=1e8, n_samples=64) == pytest.approx(1.0, abs=1e-9)
    taus = np.linspace(0, 2e-6, 21)
    amps = [echo_amplitude(t, relax, detuning_sigma=3e6, n_samples=32) for t in taus]
    assert echo_decay_time(taus, amps) == pytest.approx(1.22e-6, rel=0.05)
    assert echo_amplitude(0.61e-6, relax) == pytest.approx(np.exp(-1), rel=1e-9)


@given(st.lists(st.floats(0, 5e-6), min_size=2, max_size=10))
def test_echo_monotone(taus):
    relax = RelaxationParams(t1=1e-3, t2=1.22e-6, t2_star=1e-7)
    amps = [echo_amplitude(t, relax) for t in sorted(taus)]
    assert np.all(np.diff(amps) <= 1e-12)


def test_t1_population():
    relax = RelaxationParams(t1=0.6e-3, t2=1e-6, t2_star=1e-7)
    assert t1_population_at_pulse(0.0, relax) == pytest.approx(1.0, abs=1e-15)
    assert t1_population_at_pulse(0.6e-3, relax) == pytest.approx(1 / 3 + 2 / 3 * np.exp(-1), abs=1e-12)
    assert t1_population_at_pulse(1.0, relax) == pytest.approx(1 / 3, abs=1e-9)


events = st.one_of(
    st.builds(GreenPump, st.floats(0, 1e-6), st.floats(0, 1)),
    st.builds(
        Microwave,
        st.floats(2.4e9, 2.6e9),
        st.floats(0, 1e7),
        st.floats(0, 1e-6),
        st.floats(0, 6.3),
        st.sampled_from(["minus", "plus"]),
    ),
    st.builds(Wait, st.floats(0, 1e-3)),
)


@given(st.lists(events, min_size=1, max_size=12), st.integers(0, 2**32 - 1))
def test_sequences_preserve_density_matrices(evs, seed):
    rho = random_density(np.random.default_rng(seed))
    relax = RelaxationParams(t1=1e-3, t2=1e-6, t2_star=1e-7)
    out = run_sequence(rho, PulseSequence(tuple(evs)), (2.5e9, 3.2e9), relax)
    check_density_matrix(out, tol=1e-10)
