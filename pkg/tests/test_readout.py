import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spinmech.errors import InvalidInputError
from spinmech.libration import LibrationTrajectory
from spinmech.readout import (
    DetectionParams,
    PhotonTrace,
    bin_average,
    expected_counts,
    sample_trace,
    smc_contrast,
    t1_signal_integral,
)


def _flat(duration=1.0):
    t = np.array([0.0, duration])
    return LibrationTrajectory(t, np.zeros(2), np.zeros(2))


def _step(theta1, t_on=1e-3, ramp=1e-4, duration=4e-3):
    # theta1 on [0, t_on], linear ramp to 0, then at rest
    t = np.array([0.0, t_on, t_on + ramp, duration])
    return LibrationTrajectory(t, np.array([theta1, theta1, 0.0, 0.0]), np.zeros(4))


def test_flat_poisson_statistics():
    det = DetectionParams(base_rate=1e11, attenuation=1e4, bin_width=1e-4)
    tr = sample_trace(_flat(1.0), det, seed=1)
    lam = 1e11 / 1e4 * 1e-4
    assert tr.counts.size == 10000
    assert abs(tr.counts.mean() - lam) < 3 * np.sqrt(lam / tr.counts.size)
    assert 0.9 < tr.counts.var() / tr.counts.mean() < 1.1


def test_photons_per_millisecond():
    det = DetectionParams(base_rate=1e7 * 1e4, attenuation=1e4, bin_width=1e-3)
    _, lam = expected_counts(_flat(10e-3), det)
    np.testing.assert_allclose(lam, 1e4, rtol=1e-12)


def test_validation():
    with pytest.raises(InvalidInputError):
        DetectionParams(base_rate=1.0, bin_width=0.0)
    with pytest.raises(InvalidInputError):
        DetectionParams(base_rate=1.0, attenuation=0.5)
    with pytest.raises(InvalidInputError):
        PhotonTrace([0, 1, 2], [1])
    det = DetectionParams(base_rate=1e6, bin_width=3e-4)
    with pytest.raises(InvalidInputError):
        expected_counts(_flat(1e-3), det)


def test_seeded_and_shots():
    det = DetectionParams(base_rate=1e9, bin_width=1e-4)
    a = sample_trace(_flat(1e-2), det, seed=5)
    b = sample_trace(_flat(1e-2), det, seed=5)
    np.testing.assert_array_equal(a.counts, b.counts)
    many = sample_trace(_flat(1e-2), det, seed=5, n_shots=10)
    assert many.counts.mean() == pytest.approx(10 * a.counts.mean(), rel=0.05)


@given(st.integers(2, 20), st.floats(-1e-3, 1e-3))
def test_rebinning_consistency(factor, theta1):
    traj = _step(theta1)
    coarse = DetectionParams(base_rate=1e10, slope=3e12, bin_width=2e-4)
    fine = DetectionParams(base_rate=1e10, slope=3e12, bin_width=2e-4 / factor)
    _, lc = expected_counts(traj, coarse)
    _, lf = expected_counts(traj, fine)
    np.testing.assert_allclose(lf.reshape(-1, factor).sum(axis=1), lc, rtol=1e-9)


def test_bin_average_exact_for_linear():
    t = np.linspace(0, 1, 11)
    edges = np.linspace(0, 1, 4)
    np.testing.assert_allclose(bin_average(t, 3 * t + 1, edges), 3 * (edges[1:] + edges[:-1]) / 2 + 1, rtol=1e-12)


def test_expectation_contrast_is_exact():
    base, slope, theta1 = 1e11, -2e13, 3e-3
    det = DetectionParams(base_rate=base, slope=slope, bin_width=1e-4)
    edges, lam = expected_counts(_step(theta1), det)
    c = smc_contrast(PhotonTrace(edges, lam), (0.0, 1e-3), (2e-3, 3e-3))
    assert c == pytest.approx(-slope * theta1 / base, rel=1e-12)


def _window_trace(early_rate, late_rate, seed, width=1e-4, n=200):
    rng = np.random.default_rng(seed)
    edges = width * np.arange(2 * n + 1)
    lam = np.r_[np.full(n, early_rate * width), np.full(n, late_rate * width)]
    return PhotonTrace(edges, rng.poisson(lam)), n * width


def test_smc_contrast_statistics():
    late = 1e7
    flat, half = _window_trace(late, late, 0)
    sigma_flat = np.sqrt(2 / (late * half))
    assert abs(smc_contrast(flat, (0, half), (half, 2 * half))) < 3 * sigma_flat

    tr, half = _window_trace(0.27 * late, late, 1)
    # C = 1 - E/L; var from Poisson counts in each window
    ne, nl = 0.27 * late * half, late * half
    sigma = 0.27 * np.sqrt(1 / ne + 1 / nl)
    assert abs(smc_contrast(tr, (0, half), (half, 2 * half)) - 0.73) < 3 * sigma

    swapped, half = _window_trace(1.73 * late, late, 2)
    sigma = 1.73 * np.sqrt(1 / (1.73 * nl) + 1 / nl)
    assert abs(smc_contrast(swapped, (0, half), (half, 2 * half)) + 0.73) < 3 * sigma


def test_smc_contrast_rejects_bad_windows():
    tr, half = _window_trace(1e7, 1e7, 0)
    with pytest.raises(InvalidInputError):
        smc_contrast(tr, (0, half), (half / 2, 2 * half))
    with pytest.raises(InvalidInputError):
        smc_contrast(tr, (0, 1e-5), (half, 2 * half))


def test_signal_integral():
    det = DetectionParams(base_rate=1e11, bin_width=1e-4)
    flat = sample_trace(_flat(10e-3), det, seed=3)
    f = t1_signal_integral(flat, 1e-3, 5e-3)
    # 40 bins in the window, baseline from the 10 bins before it
    lam = 1e7 * 1e-4
    sigma = np.sqrt(40 * lam + 40**2 * lam / 10)
    assert abs(f) < 3 * sigma
    with pytest.raises(InvalidInputError):
        t1_signal_integral(flat, 1e-3, 20e-3)

    edges, lam1 = expected_counts(_step(1e-3, t_on=3e-3, duration=10e-3), DetectionParams(1e11, -5e13, bin_width=1e-4))
    edges, lam2 = expected_counts(_step(2e-3, t_on=3e-3, duration=10e-3), DetectionParams(1e11, -5e13, bin_width=1e-4))
    tr0 = PhotonTrace(edges, lam1)
    base = 1e11 / 1e4
    f1 = t1_signal_integral(tr0, 0.0, 5e-3, baseline=base)
    f2 = t1_signal_integral(PhotonTrace(edges, lam2), 0.0, 5e-3, baseline=base)
    assert f2 == pytest.approx(2 * f1, rel=1e-9)
