"""Ensemble-averaged density-matrix evolution under pump, microwave and wait events.

Microwave pulses act in the rotating frame of the addressed transition as a
two-level rotation on ``{|0>, |target>}``; the third level is a spectator.
Relaxation is phenomenological: populations relax towards the fully mixed
state with ``t1`` and coherences decay with ``t2`` (optionally stretched).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence, Union

import numpy as np

from .errors import InvalidInputError
from .spin_core import IDX_MINUS, IDX_PLUS, IDX_ZERO, check_density_matrix

__all__ = [
    "RelaxationParams",
    "GreenPump",
    "Microwave",
    "Wait",
    "PulseSequence",
    "thermal_state",
    "pure_state",
    "polarize",
    "apply_microwave",
    "free_evolve",
    "run_sequence",
    "rabi_trace",
    "echo_amplitude",
    "echo_decay_time",
    "t1_population_at_pulse",
    "excess_polarization",
]

Transition = Literal["minus", "plus"]
_TARGET_INDEX = {"minus": IDX_MINUS, "plus": IDX_PLUS}


@dataclass(frozen=True)
class RelaxationParams:
    t1: float = np.inf
    t2: float = np.inf
    t2_star: float = np.inf
    stretch: float = 1.0

    def __post_init__(self):
        if not (self.t1 > 0 and self.t2 > 0 and self.t2_star > 0):
            raise InvalidInputError("relaxation times must be positive")
        if not self.t2_star <= self.t2 <= 2 * self.t1:
            raise InvalidInputError("require t2_star <= t2 <= 2 t1")
        if self.stretch <= 0:
            raise InvalidInputError("stretch exponent must be positive")


NO_RELAXATION = RelaxationParams()


@dataclass(frozen=True)
class GreenPump:
    duration: float
    efficiency: float = 1.0

    def __post_init__(self):
        if self.duration < 0 or not 0.0 <= self.efficiency <= 1.0:
            raise InvalidInputError("pump needs duration >= 0 and 0 <= efficiency <= 1")


@dataclass(frozen=True)
class Microwave:
    frequency: float
    rabi_frequency: float
    duration: float
    phase: float = 0.0
    target_transition: Transition = "minus"

    def __post_init__(self):
        if self.duration < 0:
            raise InvalidInputError("pulse duration must be non-negative")
        if self.rabi_frequency < 0:
            raise InvalidInputError("Rabi frequency must be non-negative")
        if self.target_transition not in _TARGET_INDEX:
            raise InvalidInputError(f"unknown transition {self.target_transition!r}")


@dataclass(frozen=True)
class Wait:
    duration: float

    def __post_init__(self):
        if self.duration < 0:
            raise InvalidInputError("wait duration must be non-negative")


PulseEvent = Union[GreenPump, Microwave, Wait]


@dataclass(frozen=True)
class PulseSequence:
    events: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if len(self.events) == 0:
            raise InvalidInputError("a pulse sequence needs at least one event")


def thermal_state() -> np.ndarray:
    return np.eye(3, dtype=complex) / 3.0


def pure_state(index: int) -> np.ndarray:
    rho = np.zeros((3, 3), dtype=complex)
    rho[index, index] = 1.0
    return rho


def polarize(rho, efficiency: float) -> np.ndarray:
    """Optical pumping: mix a fraction ``efficiency`` into ``|0><0|``, dephase."""
    if not 0.0 <= efficiency <= 1.0:
        raise InvalidInputError("efficiency must lie in [0, 1]")
    r = check_density_matrix(rho, tol=1e-10)
    out = (1.0 - efficiency) * np.diag(np.diag(r))
    out[IDX_ZERO, IDX_ZERO] += efficiency
    return out


def _two_level_unitary(rabi: float, detuning: float, phase: float, duration: float) -> np.ndarray:
    """Rotating-frame propagator on (|0>, |target>), frequencies in Hz.

    H/h = (detuning/2) sz + (rabi/2)(cos(phase) sx + sin(phase) sy), so a
    resonant pulse transfers sin^2(pi * rabi * t) of the population.
    """
    omega_eff = np.hypot(rabi, detuning)
    if omega_eff == 0.0 or duration == 0.0:
        return np.eye(2, dtype=complex)
    a = np.pi * omega_eff * duration
    nx = rabi * np.cos(phase) / omega_eff
    ny = rabi * np.sin(phase) / omega_eff
    nz = detuning / omega_eff
    c, s = np.cos(a), np.sin(a)
    # exp(-i a n.sigma)
    return np.array(
        [[c - 1j * s * nz, -1j * s * (nx - 1j * ny)], [-1j * s * (nx + 1j * ny), c + 1j * s * nz]]
    )


def _embed(u2: np.ndarray, target: int) -> np.ndarray:
    u = np.eye(3, dtype=complex)
    idx = (IDX_ZERO, target)
    for i in range(2):
        for j in range(2):
            u[idx[i], idx[j]] = u2[i, j]
    return u


def apply_microwave(rho, pulse: Microwave, transition_frequency: float) -> np.ndarray:
    """Apply one rectangular microwave pulse (unitary, no relaxation)."""
    r = check_density_matrix(rho, tol=1e-10)
    detuning = pulse.frequency - transition_frequency
    u2 = _two_level_unitary(pulse.rabi_frequency, detuning, pulse.phase, pulse.duration)
    u = _embed(u2, _TARGET_INDEX[pulse.target_transition])
    return u @ r @ u.conj().T


def _coherence_decay(duration: float, relax: RelaxationParams) -> float:
    if np.isinf(relax.t2):
        return 1.0
    return float(np.exp(-((duration / relax.t2) ** relax.stretch)))


def free_evolve(rho, duration: float, relax: RelaxationParams = NO_RELAXATION, detunings=(0.0, 0.0)) -> np.ndarray:
    """Free precession plus relaxation for ``duration`` seconds.

    ``detunings`` are the rotating-frame offsets (Hz) of the 0 -> -1 and
    0 -> +1 transitions; the coherence between |0> and |m> picks up the phase
    of its own transition.
    """
    if duration < 0:
        raise InvalidInputError("duration must be non-negative")
    r = check_density_matrix(rho, tol=1e-10)
    if duration == 0:
        return r.copy()
    if np.isinf(duration):
        out = np.diag(np.diag(r)) if np.isinf(relax.t2) else np.zeros((3, 3), dtype=complex)
        if not np.isinf(relax.t1):
            out = thermal_state()
        return out
    d_minus, d_plus = detunings
    # rotating-frame level energies (Hz) relative to |0>
    energy = np.zeros(3)
    energy[IDX_MINUS] = d_minus
    energy[IDX_PLUS] = d_plus
    phase = np.exp(-2j * np.pi * (energy[:, None] - energy[None, :]) * duration)
    out = r * phase * _coherence_decay(duration, relax)

    pops = np.diag(r).real
    keep = 0.0 if np.isinf(duration / relax.t1) else np.exp(-duration / relax.t1)
    new_pops = 1.0 / 3.0 + (pops - 1.0 / 3.0) * keep
    out[np.diag_indices(3)] = new_pops
    return out


def run_sequence(rho, sequence: PulseSequence, transition_frequencies, relax: RelaxationParams = NO_RELAXATION):
    """Run a sequence; ``transition_frequencies`` = (f_minus, f_plus) in Hz."""
    f = {"minus": transition_frequencies[0], "plus": transition_frequencies[1]}
    r = check_density_matrix(rho, tol=1e-10)
    for ev in sequence.events:
        if isinstance(ev, GreenPump):
            r = polarize(r, ev.efficiency)
        elif isinstance(ev, Microwave):
            r = apply_microwave(r, ev, f[ev.target_transition])
        elif isinstance(ev, Wait):
            r = free_evolve(r, ev.duration, relax)
        else:
            raise InvalidInputError(f"unknown pulse event {ev!r}")
    return r


def _driven_with_relaxation(rho, rabi, duration, relax, target, n_steps=200):
    """Lie-Trotter split of a resonant pulse and relaxation."""
    dt = duration / n_steps
    u = _embed(_two_level_unitary(rabi, 0.0, 0.0, dt), target)
    r = rho
    for _ in range(n_steps):
        r = free_evolve(u @ r @ u.conj().T, dt, relax)
    return r


def rabi_trace(
    durations: Sequence[float],
    rabi_frequency: float,
    relax: RelaxationParams | None = None,
    pump_efficiency: float = 1.0,
    target_transition: Transition = "minus",
) -> np.ndarray:
    """Population of the target level after pump + resonant pulse of each duration."""
    durations = np.asarray(durations, dtype=float)
    if np.any(np.diff(durations) < 0):
        raise InvalidInputError("durations must be sorted ascending")
    target = _TARGET_INDEX[target_transition]
    rho0 = polarize(thermal_state(), pump_efficiency)
    ideal = relax is None or (np.isinf(relax.t1) and np.isinf(relax.t2))
    out = np.empty(durations.shape)
    for k, t in enumerate(durations):
        if ideal:
            pulse = Microwave(0.0, rabi_frequency, t, 0.0, target_transition)
            r = apply_microwave(rho0, pulse, 0.0)
        else:
            r = _driven_with_relaxation(rho0, rabi_frequency, t, relax, target)
        out[k] = r[target, target].real
    return out


def _hard_pulse(angle: float, phase: float = 0.0) -> np.ndarray:
    # a pulse of area `angle` in the limit of infinite Rabi frequency
    return _two_level_unitary(1.0, 0.0, phase, angle / (2.0 * np.pi))


def echo_amplitude(
    tau: float,
    relax: RelaxationParams,
    detuning_sigma: float = 0.0,
    n_samples: int = 256,
    seed: int = 0,
) -> float:
    """Hahn-echo amplitude ``P0 - P_target`` after pi/2 - tau - pi - tau - pi/2.

    Pulses are ideal and instantaneous. Static detunings are drawn from a
    Gaussian of width ``detuning_sigma`` (Hz) and averaged; each refocuses, so
    only the homogeneous ``t2`` envelope survives.
    """
    if tau < 0:
        raise InvalidInputError("tau must be non-negative")
    if n_samples < 1:
        raise InvalidInputError("n_samples must be at least 1")
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    deltas = rng.normal(0.0, detuning_sigma, size=n_samples) if detuning_sigma > 0 else np.zeros(1)

    target = IDX_MINUS
    half = _embed(_hard_pulse(np.pi / 2), target)
    full = _embed(_hard_pulse(np.pi), target)
    rho0 = pure_state(IDX_ZERO)
    amps = np.empty(deltas.size)
    for k, d in enumerate(deltas):
        r = half @ rho0 @ half.conj().T
        r = free_evolve(r, tau, relax, detunings=(d, 0.0))
        r = full @ r @ full.conj().T
        r = free_evolve(r, tau, relax, detunings=(d, 0.0))
        r = half @ r @ half.conj().T
        # the closing pi/2 completes a 2 pi rotation, returning |0> when coherent
        amps[k] = r[IDX_ZERO, IDX_ZERO].real - r[target, target].real
    return float(np.mean(amps))


def echo_decay_time(taus: Sequence[float], amplitudes: Sequence[float]) -> float:
    """Fit ``A exp(-2 tau / T2)`` and return T2."""
    from scipy.optimize import curve_fit

    taus = np.asarray(taus, dtype=float)
    amps = np.asarray(amplitudes, dtype=float)
    guess_t2 = max(float(2 * taus[len(taus) // 2]), 1e-12)

    def model(t, a, t2):
        return a * np.exp(-2.0 * t / t2)

    popt, _ = curve_fit(model, taus, amps, p0=(amps[0], guess_t2))
    return float(popt[1])


def t1_population_at_pulse(delay: float, relax: RelaxationParams, pump_efficiency: float = 1.0) -> float:
    """``m_S = 0`` population left ``delay`` seconds after the pump."""
    if delay < 0:
        raise InvalidInputError("delay must be non-negative")
    r = polarize(thermal_state(), pump_efficiency)
    r = free_evolve(r, delay, relax)
    return float(r[IDX_ZERO, IDX_ZERO].real)


def excess_polarization(p_zero: float) -> float:
    """Population difference a pi pulse converts into magnetisation.

    With the two non-addressed levels equally populated, swapping |0> and the
    target leaves ``p_target - p_other = p0 - (1 - p0)/2``.
    """
    return 1.5 * p_zero - 0.5

