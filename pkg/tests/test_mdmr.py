import io
import itertools
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spinmech.errors import InvalidInputError
from spinmech.libration import SpinTorqueModel, TrapParams, moment_of_inertia, spins_from_torque
from spinmech.mdmr import (
    CUBIC_AXES,
    CrystalOrientation,
    FitResult,
    _assign,
    angle_frequency_calibration,
    axis_field_angles,
    calibration_to_csv,
    class_for_line,
    crystal_rotation,
    find_peaks_in_spectrum,
    fit_to_json,
    fit_vector_field,
    forward_spectrum,
    nv_axes,
    nv_axes_for_rotation,
    orientation_error,
    pump_probe_simulate,
    read_spectrum_text,
)
from spinmech.pulse_engine import RelaxationParams
from spinmech.spin_core import DEFAULT_CONSTANTS
from spinmech.vector3 import rotation_matrix

B_FIT = 0.02715
ORIENT = CrystalOrientation.from_degrees(225.0, 292.98)
FIT = FitResult(B_FIT, ORIENT, 0.0, [])

angles = st.floats(0, 2 * np.pi, allow_nan=False)


def orientation_with_field(c):
    """Orientation whose lab field direction reads ``c`` in crystal coordinates.

    With R = R_y(t) R_z(p) Q, R^T z = Q^T w and
    w = (-sin t cos p, sin t sin p, cos t).
    """
    q = crystal_rotation(CrystalOrientation(0.0, 0.0))
    w = q @ (np.asarray(c, dtype=float) / np.linalg.norm(c))
    t = np.arccos(np.clip(w[2], -1, 1))
    p = np.arctan2(w[1], -w[0])
    return CrystalOrientation(t, p)


def test_identity_axes():
    axes = nv_axes_for_rotation(np.eye(3))
    np.testing.assert_allclose(np.abs(axes) * np.sqrt(3), 1.0, atol=1e-15)
    assert np.all(np.prod(np.sign(axes), axis=1) > 0)
    assert {tuple(np.sign(a).astype(int)) for a in axes} == {
        s for s in itertools.product([1, -1], repeat=3) if np.prod(s) > 0
    }


@given(angles, angles)
def test_axes_tetrahedral(t, p):
    axes = nv_axes(CrystalOrientation(t, p))
    g = axes @ axes.T
    np.testing.assert_allclose(g[~np.eye(4, dtype=bool)], -1 / 3, atol=1e-12)
    np.testing.assert_allclose(np.diag(g), 1.0, atol=1e-12)


def test_orientation_helper():
    rng = np.random.default_rng(0)
    for _ in range(20):
        c = rng.normal(size=3)
        o = orientation_with_field(c)
        np.testing.assert_allclose(crystal_rotation(o).T @ [0, 0, 1], c / np.linalg.norm(c), atol=1e-12)


def test_fig4_geometry():
    assert np.min(np.abs(np.degrees(axis_field_angles(ORIENT)) - 45.0)) < 5.0
    peaks, _ = forward_spectrum(B_FIT, ORIENT)
    assert np.min(np.abs(peaks.centers[0::2] - 2498e6)) < 10e6


def test_zero_field_lines():
    peaks, _ = forward_spectrum(0.0, ORIENT)
    np.testing.assert_allclose(peaks.centers, DEFAULT_CONSTANTS.d_zfs, atol=1e-3)


def test_symmetric_classes_coincide():
    # field along a cube edge makes every class 54.7 deg from B
    peaks, _ = forward_spectrum(B_FIT, orientation_with_field([1, 0, 0]))
    np.testing.assert_allclose(peaks.centers[0::2], peaks.centers[0], atol=1e-3)
    np.testing.assert_allclose(peaks.centers[1::2], peaks.centers[1], atol=1e-3)
    # field in a {110} plane: two classes share the same angle
    peaks, _ = forward_spectrum(B_FIT, orientation_with_field([1, 1, 0.3]))
    minus = np.sort(peaks.centers[0::2])
    assert np.min(np.diff(minus)) < 1e-3


@given(st.integers(0, 2**32 - 1))
def test_spectrum_invariant_under_point_group(seed):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=3)
    perm = rng.permutation(3)
    signs = rng.choice([-1.0, 1.0], size=3)
    g = np.diag(signs) @ np.eye(3)[perm]
    o1, o2 = orientation_with_field(c), orientation_with_field(g @ c)
    p1, _ = forward_spectrum(B_FIT, o1)
    p2, _ = forward_spectrum(B_FIT, o2)
    np.testing.assert_allclose(np.sort(p1.centers), np.sort(p2.centers), atol=1.0)
    assert orientation_error(o1, o2) < 1e-6


def test_orientation_error_detects_real_tilt():
    c = np.array([0.3, 0.5, 0.8])
    tilt = rotation_matrix(np.cross(c, [1, -0.2, 0.4]), np.radians(2.0)) @ c
    err = orientation_error(orientation_with_field(c), orientation_with_field(tilt))
    assert err == pytest.approx(np.radians(2.0), abs=1e-9)


def test_fit_round_trip_noise_free():
    peaks, _ = forward_spectrum(B_FIT, ORIENT)
    fit = fit_vector_field(peaks.centers)
    assert fit.converged
    assert abs(fit.b_magnitude - B_FIT) < 0.2e-4
    assert np.degrees(orientation_error(fit.orientation, ORIENT)) < 0.5
    assert fit.residual < 1e3
    # every measured line assigned exactly once
    assert sorted(a[0] for a in fit.assignment) == list(range(8))


def test_fit_shuffled_input_assignment():
    peaks, _ = forward_spectrum(B_FIT, ORIENT)
    order = np.random.default_rng(1).permutation(8)
    fit = fit_vector_field(peaks.centers[order])
    model, _ = forward_spectrum(fit.b_magnitude, fit.orientation)
    for meas_idx, cls, branch in fit.assignment:
        line = model.centers[2 * cls + (0 if branch == "minus" else 1)]
        assert abs(line - peaks.centers[order][meas_idx]) < 1e4


def test_fit_with_missing_lines():
    peaks, _ = forward_spectrum(B_FIT, ORIENT)
    fit = fit_vector_field(np.delete(peaks.centers, [2, 5]))
    assert fit.converged
    assert fit.residual < 1e5
    model, _ = forward_spectrum(fit.b_magnitude, fit.orientation)
    for c in np.delete(peaks.centers, [2, 5]):
        assert np.min(np.abs(model.centers - c)) < 1e5


def test_fit_degenerate_and_invalid():
    fit = fit_vector_field([DEFAULT_CONSTANTS.d_zfs] * 8)
    assert not fit.converged
    with pytest.raises(InvalidInputError):
        fit_vector_field([2.8e9, 2.9e9, 3.0e9])
    with pytest.raises(InvalidInputError):
        fit_vector_field(np.linspace(2.5e9, 3.2e9, 9))


def test_assignment_never_worse_than_greedy():
    rng = np.random.default_rng(3)
    for _ in range(200):
        model = np.sort(rng.uniform(2.4e9, 3.4e9, 8))
        meas = rng.uniform(2.4e9, 3.4e9, rng.integers(4, 9))
        _, _, rms = _assign(model, meas)
        free = list(range(8))
        greedy = []
        for m in meas:
            k = min(free, key=lambda i: abs(model[i] - m))
            free.remove(k)
            greedy.append((model[k] - m) ** 2)
        assert rms <= np.sqrt(np.mean(greedy)) * (1 + 1e-12)


def test_calibration():
    k = class_for_line(FIT, 2498e6)
    cal = angle_frequency_calibration(FIT, k)
    peaks, _ = forward_spectrum(B_FIT, ORIENT)
    f0 = cal.frequency[cal.theta_d == 0.0][0]
    assert f0 == peaks.centers[2 * k]
    d = np.diff(cal.frequency)
    assert np.all(d > 0) or np.all(d < 0)
    shift = np.interp(0.07, cal.theta_d, cal.frequency) - f0
    assert abs(shift) > 50e6
    probe = np.linspace(cal.theta_d[0], cal.theta_d[-1], 97)
    freq = np.interp(probe, cal.theta_d, cal.frequency)
    exact = np.array([cal.frequency[np.argmin(np.abs(cal.theta_d - t))] for t in cal.theta_d])
    np.testing.assert_allclose(cal.inverse(exact), cal.theta_d, atol=1e-6)
    assert np.all(np.isfinite(cal.inverse(freq)))
    with pytest.raises(InvalidInputError):
        cal.inverse(cal.frequency.max() + 1e8)
    with pytest.raises(InvalidInputError):
        angle_frequency_calibration(FIT, k, (-np.radians(10.0), np.radians(60.0)))


def _pump_probe(t_d):
    k = class_for_line(FIT, 2498e6)
    inertia = moment_of_inertia(5e-6, shape="cube_average")
    n = spins_from_torque(5.65e-17, B_FIT) / np.sin(np.pi / 4)
    torque = SpinTorqueModel(n, B_FIT, np.pi / 4, t1=0.6e-3)
    trap = TrapParams(inertia, 2300.0, 6280.0)
    relax = RelaxationParams(t1=0.6e-3, t2=1.22e-6, t2_star=1e-7)
    f2 = np.linspace(2.38e9, 2.52e9, 281)
    return pump_probe_simulate(FIT, trap, torque, relax, t_d, f2, target_class=k)


def test_pump_probe():
    t_d = np.linspace(0, 300e-6, 16)
    res = _pump_probe(t_d)
    assert res.f2[np.argmax(res.contrast[0])] == pytest.approx(res.line_true[0], abs=np.diff(res.f2)[0])
    assert res.contrast.max() == res.contrast[0].max()
    np.testing.assert_allclose(res.peak_amplitude, np.exp(-t_d / 0.6e-3), rtol=0.05)
    assert abs(res.peak_center[-1] - res.peak_center[0]) > 50e6
    assert 2.18e6 / 2 < res.quadratic_coefficient < 2.18e6 * 2
    with pytest.raises(InvalidInputError):
        _pump_probe(np.array([-1e-6, 1e-5]))


def test_io_round_trip(tmp_path):
    f = np.linspace(2.3e9, 3.7e9, 7001)
    _, curve = forward_spectrum(B_FIT, ORIENT, widths=3e6, frequencies=f)
    text = "# freq signal\n" + "\n".join(f"{float(a)!r}, {float(b)!r}" for a, b in zip(f, curve))
    path = tmp_path / "spec.txt"
    path.write_text(text)
    f_read, s_read = read_spectrum_text(str(path))
    np.testing.assert_array_equal(f_read, f)
    centers = find_peaks_in_spectrum(f_read, s_read)
    peaks, _ = forward_spectrum(B_FIT, ORIENT)
    np.testing.assert_allclose(np.sort(centers), np.sort(peaks.centers), atol=0.5e6)
    with pytest.raises(InvalidInputError):
        read_spectrum_text(io.StringIO("1 2 3\n"))

    doc = json.loads(fit_to_json(FIT))
    assert doc["b_magnitude_T"] == B_FIT
    cal = angle_frequency_calibration(FIT, 0, n_points=11)
    lines = calibration_to_csv(cal).splitlines()
    assert lines[0] == "theta_d_rad,frequency_Hz"
    assert len(lines) == cal.theta_d.size + 1
