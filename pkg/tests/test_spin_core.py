import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.constants import hbar

from conftest import random_density, random_unit
from spinmech.errors import DegenerateLabelingError, InvalidInputError
from spinmech.spin_core import (
    DEFAULT_CONSTANTS,
    SZ,
    build_hamiltonian,
    check_density_matrix,
    per_spin_torque_scale,
    spin_torque,
    spin_torque_numeric,
    transition_frequencies,
)
from spinmech.vector3 import rotation_matrix

D = DEFAULT_CONSTANTS.d_zfs
G = DEFAULT_CONSTANTS.gamma_e
Z = np.array([0.0, 0.0, 1.0])


def _field_at(angle, b):
    return b * np.array([np.sin(angle), 0.0, np.cos(angle)])


def test_zero_field_spectrum():
    w = np.linalg.eigvalsh(build_hamiltonian([0, 0, 0], Z))
    np.testing.assert_allclose(w, [0, D, D], atol=1e-3)
    assert transition_frequencies(build_hamiltonian([0, 0, 0], Z)) == pytest.approx((D, D), abs=1e-3)


def test_on_axis_zeeman():
    w = np.linalg.eigvalsh(build_hamiltonian([0, 0, 0.01], Z))
    np.testing.assert_allclose(w, [0, D - 2.8e8, D + 2.8e8], atol=1e-3)
    fm, fp = transition_frequencies(build_hamiltonian([0, 0, 0.01], Z))
    assert fm == pytest.approx(D - 2.8e8, abs=1e-3)
    assert fp == pytest.approx(D + 2.8e8, abs=1e-3)


def test_off_axis_matches_dense_oracle():
    # independent construction: spin-1 matrices from ladder operators
    sp = np.sqrt(2.0) * np.array([[0, 1, 0], [0, 0, 1], [0, 0, 0]], dtype=complex)
    sx, sy = (sp + sp.T) / 2, (sp - sp.T) / 2j
    sz = np.diag([1.0, 0.0, -1.0])
    b = _field_at(np.pi / 4, 0.02715)
    h = D * sz @ sz + G * (b[0] * sx + b[1] * sy + b[2] * sz)
    ref = np.linalg.eigvalsh(h)
    got = np.linalg.eigvalsh(build_hamiltonian(b, Z))
    np.testing.assert_allclose(got, ref, rtol=1e-6)


@given(st.integers(0, 2**32 - 1))
def test_trace_invariance(seed):
    rng = np.random.default_rng(seed)
    h = build_hamiltonian(rng.uniform(0, 0.05) * random_unit(rng), random_unit(rng))
    assert np.sum(np.linalg.eigvalsh(h)) == pytest.approx(2 * D, rel=1e-6)


@given(st.integers(0, 2**32 - 1))
def test_spectrum_depends_only_on_field_angle(seed):
    rng = np.random.default_rng(seed)
    b = rng.uniform(0, 0.05) * random_unit(rng)
    n = random_unit(rng)
    r = rotation_matrix(random_unit(rng), rng.uniform(0, 2 * np.pi))
    w1 = np.linalg.eigvalsh(build_hamiltonian(b, n))
    w2 = np.linalg.eigvalsh(build_hamiltonian(r @ b, r @ n))
    np.testing.assert_allclose(w1, w2, rtol=1e-9, atol=1e-9 * D)


def test_transition_frequencies_continuous(rng):
    b = _field_at(0.7, 0.02715)
    for _ in range(50):
        n = random_unit(rng)
        f0 = np.array(transition_frequencies(build_hamiltonian(b, n)))
        kick = rotation_matrix(random_unit(rng), 1e-4)
        f1 = np.array(transition_frequencies(build_hamiltonian(b, kick @ n)))
        # a 1e-4 rad tilt moves a line by at most ~ gamma B * 1e-4 plus mixing
        assert np.max(np.abs(f1 - f0)) < 1e6


def test_labeling_clash_raises():
    v1 = np.array([0.5, np.sqrt(0.5), 0.5])
    v2 = np.array([0.5, -np.sqrt(0.5), 0.5])
    v3 = np.array([1.0, 0.0, -1.0]) / np.sqrt(2)
    u = np.column_stack([v1, v2, v3]).astype(complex)
    h = u @ np.diag([0.0, 1e9, 2e9]) @ u.conj().T
    with pytest.raises(DegenerateLabelingError):
        transition_frequencies(h)


def test_torque_zero_cases():
    minus = np.diag([0, 0, 1]).astype(complex)
    u = np.array([0.0, 1.0, 0.0])
    assert abs(spin_torque(minus, [0, 0, 0.03], Z, u)) < 1e-20
    assert abs(spin_torque(np.eye(3) / 3, _field_at(0.8, 0.03), Z, u)) < 1e-20


@pytest.mark.parametrize("phi", [0.2, np.pi / 4, 1.0, 1.4])
def test_torque_magnitude_matches_moment_law(phi):
    b = 0.02715
    minus = np.diag([0, 0, 1]).astype(complex)
    u = np.array([0.0, 1.0, 0.0])
    tq = spin_torque(minus, _field_at(phi, b), Z, u)
    law = hbar * 2 * np.pi * G * b * np.sin(phi)
    assert abs(tq) == pytest.approx(law, rel=0.02)
    assert tq == pytest.approx(spin_torque_numeric(minus, _field_at(phi, b), Z, u), rel=1e-6)


def test_torque_analytic_matches_numeric(rng):
    for _ in range(100):
        rho = random_density(rng)
        b = rng.uniform(0.001, 0.05) * random_unit(rng)
        n, u = random_unit(rng), random_unit(rng)
        a = spin_torque(rho, b, n, u)
        num = spin_torque_numeric(rho, b, n, u)
        assert a == pytest.approx(num, rel=1e-4, abs=1e-30)


def test_per_spin_scale():
    assert per_spin_torque_scale(0.0) == 0.0
    assert per_spin_torque_scale(0.02715) == pytest.approx(5.0e-25, rel=0.02)
    assert 5.65e-17 / per_spin_torque_scale(0.02715) == pytest.approx(1.1e8, rel=0.10)
    with pytest.raises(InvalidInputError):
        per_spin_torque_scale(-1.0)


def test_input_validation():
    with pytest.raises(InvalidInputError):
        build_hamiltonian([0, 0, 1e-3], [0, 0, 2])
    with pytest.raises(InvalidInputError):
        build_hamiltonian([0, np.nan, 0], Z)
    with pytest.raises(InvalidInputError):
        check_density_matrix(np.diag([1.5, -0.5, 0.0]))
    with pytest.raises(InvalidInputError):
        check_density_matrix(SZ)
