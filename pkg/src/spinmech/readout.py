"""Photon-count readout of the libration angle and the derived SMC quantities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .libration import LibrationTrajectory

__all__ = [
    "DetectionParams",
    "PhotonTrace",
    "bin_average",
    "expected_counts",
    "sample_trace",
    "smc_contrast",
    "t1_signal_integral",
]


@dataclass(frozen=True)
class DetectionParams:
    """Linear angle-to-count-rate model.

    ``base_rate`` and ``slope`` are rates at the particle (before the
    attenuator); detected counts are divided by ``attenuation``.
    """

    base_rate: float
    slope: float = 0.0
    attenuation: float = 1e4
    bin_width: float = 1e-4
    linear_range: float = np.inf
    theta_ref: float = 0.0

    def __post_init__(self):
        if self.base_rate < 0:
            raise InvalidInputError("base_rate must be non-negative")
        if not self.bin_width > 0:
            raise InvalidInputError("bin_width must be positive")
        if self.attenuation < 1:
            raise InvalidInputError("attenuation must be >= 1")
        if not self.linear_range > 0:
            raise InvalidInputError("linear_range must be positive")


@dataclass
class PhotonTrace:
    bin_edges: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        self.bin_edges = np.asarray(self.bin_edges, dtype=float)
        self.counts = np.asarray(self.counts)
        if self.counts.shape != (self.bin_edges.size - 1,):
            raise InvalidInputError("need one count per bin")
        if np.any(np.diff(self.bin_edges) <= 0):
            raise InvalidInputError("bin edges must be strictly increasing")
        if np.any(self.counts < 0):
            raise InvalidInputError("counts must be non-negative")

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.bin_edges)

    @property
    def rates(self) -> np.ndarray:
        """Detected count rate per bin, counts/s."""
        return self.counts / self.widths

    def window_mask(self, window) -> np.ndarray:
        lo, hi = window
        return (self.bin_edges[:-1] >= lo - 1e-15) & (self.bin_edges[1:] <= hi + 1e-15)


def bin_average(times, values, edges) -> np.ndarray:
    """Exact bin means of the piecewise-linear interpolant of ``values``."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    edges = np.asarray(edges, dtype=float)
    if edges[0] < times[0] - 1e-15 or edges[-1] > times[-1] + 1e-15:
        raise InvalidInputError("trajectory does not cover all bins")
    knots = np.union1d(times, edges)
    knots = knots[(knots >= edges[0]) & (knots <= edges[-1])]
    vals = np.interp(knots, times, values)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (vals[1:] + vals[:-1]) * np.diff(knots))])
    at_edges = np.interp(edges, knots, cum)
    return np.diff(at_edges) / np.diff(edges)


def _edges(t_start, t_stop, width):
    n = int(round((t_stop - t_start) / width))
    if n < 1 or abs(n * width - (t_stop - t_start)) > 1e-9 * width:
        raise InvalidInputError("trace span must be a whole number of bins")
    return t_start + width * np.arange(n + 1)


def expected_counts(trajectory: LibrationTrajectory, detection: DetectionParams, t_start=None, t_stop=None):
    """Bin edges and noise-free expected counts for a trajectory."""
    t_start = trajectory.times[0] if t_start is None else t_start
    t_stop = trajectory.times[-1] if t_stop is None else t_stop
    edges = _edges(t_start, t_stop, detection.bin_width)
    theta_bar = bin_average(trajectory.times, trajectory.theta, edges)
    dev = np.clip(theta_bar - detection.theta_ref, -detection.linear_range, detection.linear_range)
    rate = np.clip(detection.base_rate + detection.slope * dev, 0.0, None)
    return edges, rate * np.diff(edges) / detection.attenuation


def sample_trace(
    trajectory: LibrationTrajectory,
    detection: DetectionParams,
    seed: int,
    t_start: float | None = None,
    t_stop: float | None = None,
    n_shots: int = 1,
) -> PhotonTrace:
    """Poisson-sampled photon trace summed over ``n_shots`` repetitions.

    The same seed gives the same counts.
    """
    if n_shots < 1:
        raise InvalidInputError("n_shots must be at least 1")
    edges, lam = expected_counts(trajectory, detection, t_start, t_stop)
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    return PhotonTrace(edges, rng.poisson(lam * n_shots))


def _window_rate(trace: PhotonTrace, window) -> float:
    m = trace.window_mask(window)
    if not np.any(m):
        raise InvalidInputError(f"window {window} contains no complete bins")
    return float(trace.counts[m].sum() / trace.widths[m].sum())


def smc_contrast(trace: PhotonTrace, early_window, late_window) -> float:
    """``(S_late - S_early) / S_late`` from the mean count rate in each window."""
    (e0, e1), (l0, l1) = early_window, late_window
    if not (e1 <= l0 or l1 <= e0):
        raise InvalidInputError("windows must be disjoint")
    if min(e0, l0) < trace.bin_edges[0] - 1e-15 or max(e1, l1) > trace.bin_edges[-1] + 1e-15:
        raise InvalidInputError("windows must lie inside the trace")
    early = _window_rate(trace, early_window)
    late = _window_rate(trace, late_window)
    if late == 0:
        raise InvalidInputError("late window has zero counts")
    return (late - early) / late


def t1_signal_integral(
    trace: PhotonTrace,
    start: float,
    end: float = 5e-3,
    baseline: float | None = None,
    baseline_window=None,
) -> float:
    """Trapezoidal integral of the baseline-subtracted count rate over [start, end].

    The baseline is ``baseline`` if given, else the mean rate in
    ``baseline_window``, else the mean rate of all bins ending before ``start``.
    """
    if not start < end:
        raise InvalidInputError("start must precede end")
    if start < trace.bin_edges[0] - 1e-15 or end > trace.bin_edges[-1] + 1e-15:
        raise InvalidInputError("integration window lies outside the trace")
    if baseline is None:
        window = baseline_window if baseline_window is not None else (trace.bin_edges[0], start)
        baseline = _window_rate(trace, window)
    centers = trace.centers
    rate = trace.rates - baseline
    # integrate the piecewise-linear rate through bin centres, clamped at the ends
    knots = np.concatenate([[start], centers[(centers > start) & (centers < end)], [end]])
    vals = np.interp(knots, centers, rate)
    return float(np.trapezoid(vals, knots))
