"""End-to-end pulse protocols read out through the particle motion."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.optimize import curve_fit

from .errors import FitError, InvalidInputError
from .libration import LibrationState, LibrationTrajectory, SpinTorqueModel, TrapParams, deterministic_evolve
from .pulse_engine import RelaxationParams, excess_polarization, t1_population_at_pulse
from .readout import DetectionParams, PhotonTrace, expected_counts, sample_trace, t1_signal_integral

__all__ = ["T1ProtocolResult", "t1_protocol_trace", "t1_protocol", "fit_exponential_decay"]


@dataclass
class T1ProtocolResult:
    delays: np.ndarray
    integrals: np.ndarray
    fitted_t1: float
    fitted_amplitude: float
    traces: list


def _padded_trajectory(traj: LibrationTrajectory, pre: float) -> LibrationTrajectory:
    # particle at rest before the pump
    if pre <= 0:
        return traj
    return LibrationTrajectory(
        np.concatenate([[-pre], traj.times]),
        np.concatenate([[traj.theta[0]], traj.theta]),
        np.concatenate([[traj.theta_dot[0]], traj.theta_dot]),
    )


def t1_protocol_trace(
    delay: float,
    trap: TrapParams,
    torque: SpinTorqueModel,
    relax: RelaxationParams,
    detection: DetectionParams,
    seed: int,
    pump_efficiency: float = 1.0,
    pre: float = 1e-3,
    duration: float = 10e-3,
    sample_step: float = 5e-6,
    n_shots: int = 1,
) -> PhotonTrace:
    """Photon trace for pump at t = 0, pi pulse at ``delay``.

    The torque amplitude scales with the magnetisation the pulse creates,
    ``excess_polarization(p0(delay))``. Counts are summed over ``n_shots``
    identical repetitions; ``n_shots = 0`` returns the noise-free
    expectation for one shot.
    """
    if not 0 <= delay < duration:
        raise InvalidInputError("delay must lie in [0, duration)")
    p0 = t1_population_at_pulse(delay, relax, pump_efficiency)
    tq = replace(torque, onset_time=delay, polarization=torque.polarization * excess_polarization(p0))
    n = int(round(duration / sample_step))
    grid = np.linspace(0.0, duration, n + 1)
    traj = deterministic_evolve(LibrationState(), trap, tq, grid)
    padded = _padded_trajectory(traj, pre)
    if n_shots == 0:
        edges, lam = expected_counts(padded, detection, -pre, duration)
        return PhotonTrace(edges, lam)
    if n_shots < 0:
        raise InvalidInputError("n_shots must be non-negative")
    return sample_trace(padded, detection, seed, -pre, duration, n_shots=n_shots)


def fit_exponential_decay(x, y) -> tuple[float, float]:
    """Fit ``A exp(-x / T)``; returns ``(A, T)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3:
        raise InvalidInputError("need at least 3 points")
    pos = y > 0
    if np.count_nonzero(pos) >= 2:
        slope = np.polyfit(x[pos], np.log(y[pos]), 1)[0]
        t_guess = -1.0 / slope if slope < 0 else float(np.ptp(x))
    else:
        t_guess = float(np.ptp(x))
    try:
        popt, _ = curve_fit(lambda t, a, tau: a * np.exp(-t / tau), x, y, p0=(y[0], t_guess), maxfev=10000)
    except RuntimeError as exc:
        raise FitError(f"exponential fit failed: {exc}") from exc
    return float(popt[0]), float(popt[1])


def t1_protocol(
    delays: Sequence[float],
    trap: TrapParams,
    torque: SpinTorqueModel,
    relax: RelaxationParams,
    detection: DetectionParams,
    seed: int,
    pump_efficiency: float = 1.0,
    integral_end: float = 5e-3,
    pre: float = 1e-3,
    duration: float = 10e-3,
    n_shots: int = 1,
) -> T1ProtocolResult:
    """Signal integral F(T) over [T, integral_end] for each delay, and its T1 fit.

    The baseline is the pre-pump mean rate. Each delay draws from its own
    seed ``(seed, index)``.
    """
    delays = np.asarray(delays, dtype=float)
    if np.any(delays >= integral_end):
        raise InvalidInputError("every delay must precede integral_end")
    traces, integrals = [], []
    for k, d in enumerate(delays):
        tr = t1_protocol_trace(
            d, trap, torque, relax, detection, seed=_child_seed(seed, k),
            pump_efficiency=pump_efficiency, pre=pre, duration=duration, n_shots=n_shots,
        )
        traces.append(tr)
        integrals.append(t1_signal_integral(tr, d, integral_end, baseline_window=(-pre, 0.0)))
    integrals = np.array(integrals)
    amp, t1 = fit_exponential_decay(delays, integrals)
    return T1ProtocolResult(delays, integrals, t1, amp, traces)


def _child_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1, dtype=np.uint64)[0] >> 1)
