"""Librational motion of the trapped particle under spin torque and gas noise.

Equation of motion, per unit inertia::

    theta'' = -gamma_g theta' - omega^2 (1 + depth cos(2 pi f_ac t + phase)) theta
              + N p tau_s exp(-(t - t_on)/T1) sin(phi - theta) / I + noise

where ``tau_s`` is the per-spin torque scale and ``p`` the fraction of
spins converted into magnetisation. The noise torque is white with
intensity ``2 gamma_g I k_B T``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from scipy.constants import k as K_B

from .errors import IntegrationError, InvalidInputError, StepSizeError
from .spin_core import DEFAULT_CONSTANTS, SpinConstants, per_spin_torque_scale

__all__ = [
    "K_B",
    "DIAMOND_DENSITY",
    "TrapDrive",
    "TrapParams",
    "SpinTorqueModel",
    "LibrationState",
    "LibrationTrajectory",
    "LangevinResult",
    "moment_of_inertia",
    "default_step",
    "deterministic_evolve",
    "langevin_ensemble",
    "kinematic_torque_fit",
    "spins_from_torque",
    "thermal_angle_variance",
]

DIAMOND_DENSITY = 3515.0  # kg/m^3

# RK4 on a harmonic oscillator is stable for omega*dt < 2*sqrt(2)
_RK4_LIMIT = 2.5


@dataclass(frozen=True)
class TrapDrive:
    """Optional parametric modulation of the trap stiffness."""

    f_ac: float
    depth: float
    phase: float = 0.0

    def __post_init__(self):
        if not abs(self.depth) < 1:
            raise InvalidInputError("drive depth must satisfy |depth| < 1")
        if self.f_ac < 0:
            raise InvalidInputError("drive frequency must be non-negative")


@dataclass(frozen=True)
class TrapParams:
    inertia: float
    omega: float
    gamma_g: float
    drive: TrapDrive | None = None

    def __post_init__(self):
        if not self.inertia > 0:
            raise InvalidInputError("inertia must be positive")
        if self.omega < 0 or self.gamma_g < 0:
            raise InvalidInputError("omega and gamma_g must be non-negative")

    def stiffness(self, t):
        w2 = self.omega**2
        if self.drive is None:
            return w2
        d = self.drive
        return w2 * (1.0 + d.depth * np.cos(2.0 * np.pi * d.f_ac * t + d.phase))


@dataclass(frozen=True)
class SpinTorqueModel:
    n_spins: float = 0.0
    field_magnitude: float = 0.0
    phi: float = 0.0
    t1: float = np.inf
    onset_time: float = 0.0
    polarization: float = 1.0
    constants: SpinConstants = DEFAULT_CONSTANTS

    def __post_init__(self):
        if self.n_spins < 0:
            raise InvalidInputError("n_spins must be non-negative")
        if not self.t1 > 0:
            raise InvalidInputError("t1 must be positive")

    @property
    def amplitude(self) -> float:
        """Peak torque magnitude, N m (before the sin factor)."""
        return self.n_spins * self.polarization * per_spin_torque_scale(self.field_magnitude, self.constants)

    def __call__(self, t: float, theta):
        if t < self.onset_time or self.n_spins == 0:
            return np.zeros_like(theta) if np.ndim(theta) else 0.0
        decay = math.exp(-(t - self.onset_time) / self.t1)
        return self.amplitude * decay * np.sin(self.phi - theta)


NO_TORQUE = SpinTorqueModel()


@dataclass(frozen=True)
class LibrationState:
    theta: float = 0.0
    theta_dot: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.theta) and math.isfinite(self.theta_dot)):
            raise InvalidInputError("state must be finite")


@dataclass
class LibrationTrajectory:
    times: np.ndarray
    theta: np.ndarray
    theta_dot: np.ndarray


@dataclass
class LangevinResult:
    times: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    n_traj: int
    mean_theta_dot: np.ndarray = field(default=None)

    @property
    def stderr(self) -> np.ndarray:
        return np.sqrt(self.variance / self.n_traj)


def moment_of_inertia(
    radius: float,
    density: float = DIAMOND_DENSITY,
    shape: Literal["sphere", "cube_average", "ellipsoid"] = "sphere",
    aspect: float = 1.0,
) -> float:
    """Moment of inertia in kg m^2.

    ``cube_average`` averages the sphere value with ``m r^2 / 6`` using the
    sphere mass. ``ellipsoid`` is a spheroid with semi-axes
    ``(aspect * radius, radius, radius)`` rotating about one of the long axes.
    """
    if not (radius > 0 and density > 0):
        raise InvalidInputError("radius and density must be positive")
    if shape == "sphere":
        m = 4.0 / 3.0 * np.pi * radius**3 * density
        return 0.4 * m * radius**2
    if shape == "cube_average":
        m = 4.0 / 3.0 * np.pi * radius**3 * density
        return 0.5 * (m * radius**2 / 6.0 + 0.4 * m * radius**2)
    if shape == "ellipsoid":
        if not aspect > 0:
            raise InvalidInputError("aspect must be positive")
        a = aspect * radius
        m = 4.0 / 3.0 * np.pi * a * radius * radius * density
        return m * (a**2 + radius**2) / 5.0
    raise InvalidInputError(f"unknown shape {shape!r}")


def default_step(trap: TrapParams, torque: SpinTorqueModel = NO_TORQUE) -> float:
    scales = [1.0 / x for x in (trap.omega, trap.gamma_g) if x > 0]
    if np.isfinite(torque.t1) and torque.n_spins > 0:
        scales.append(torque.t1)
    if trap.drive is not None and trap.drive.f_ac > 0:
        scales.append(1.0 / (2.0 * np.pi * trap.drive.f_ac))
    if not scales:
        return np.inf
    return min(scales) / 100.0


def _accel(t, theta, theta_dot, trap, torque, inv_i):
    return -trap.gamma_g * theta_dot - trap.stiffness(t) * theta + torque(t, theta) * inv_i


def _rk4_step(t, th, v, dt, trap, torque, inv_i):
    k1x = v
    k1v = _accel(t, th, v, trap, torque, inv_i)
    h = 0.5 * dt
    k2x = v + h * k1v
    k2v = _accel(t + h, th + h * k1x, k2x, trap, torque, inv_i)
    k3x = v + h * k2v
    k3v = _accel(t + h, th + h * k2x, k3x, trap, torque, inv_i)
    k4x = v + dt * k3v
    k4v = _accel(t + dt, th + dt * k3x, k4x, trap, torque, inv_i)
    th_new = th + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
    v_new = v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return th_new, v_new


def _check_grid(t_grid) -> np.ndarray:
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size < 1 or t[0] != 0.0 or np.any(np.diff(t) <= 0):
        raise InvalidInputError("t_grid must be strictly increasing and start at 0")
    return t


def _schedule(t_grid: np.ndarray, onset: float, max_step: float):
    """Integration intervals: (t_start, n_substeps, dt, output index or None).

    Output times and the torque onset are always step boundaries, so the
    switch-on never falls inside an RK4 stage.
    """
    nodes = list(t_grid)
    if 0.0 < onset < t_grid[-1] and onset not in nodes:
        nodes.append(onset)
    nodes = np.array(sorted(nodes))
    out_index = {float(t): k for k, t in enumerate(t_grid)}
    plan = []
    for a, b in zip(nodes[:-1], nodes[1:]):
        n = max(1, int(math.ceil((b - a) / max_step - 1e-9))) if np.isfinite(max_step) else 1
        plan.append((float(a), n, (b - a) / n, out_index.get(float(b))))
    return plan


def _validate_step(trap: TrapParams, dt: float) -> None:
    w_max = trap.omega * math.sqrt(1.0 + (abs(trap.drive.depth) if trap.drive else 0.0))
    if w_max * dt > _RK4_LIMIT or trap.gamma_g * dt > _RK4_LIMIT:
        raise StepSizeError(
            f"step {dt:.3g} s is unstable for omega={trap.omega:.3g}, gamma_g={trap.gamma_g:.3g}"
        )


def deterministic_evolve(
    state0: LibrationState,
    trap: TrapParams,
    torque: SpinTorqueModel,
    t_grid: Sequence[float],
    max_step: float | None = None,
) -> LibrationTrajectory:
    """Noiseless trajectory by fixed-step RK4, sampled at ``t_grid``."""
    t_grid = _check_grid(t_grid)
    dt_max = default_step(trap, torque) if max_step is None else float(max_step)
    if not np.isfinite(dt_max):
        dt_max = float(t_grid[-1]) if t_grid[-1] > 0 else 1.0
    inv_i = 1.0 / trap.inertia
    th = np.array([state0.theta], dtype=float)
    v = np.array([state0.theta_dot], dtype=float)
    thetas = np.empty(t_grid.size)
    vels = np.empty(t_grid.size)
    thetas[0], vels[0] = th[0], v[0]
    for t0, n, dt, k in _schedule(t_grid, torque.onset_time, dt_max):
        _validate_step(trap, dt)
        t = t0
        for _ in range(n):
            th, v = _rk4_step(t, th, v, dt, trap, torque, inv_i)
            t += dt
        if not (np.isfinite(th[0]) and np.isfinite(v[0])):
            raise IntegrationError(f"non-finite state at t = {t:.6g} s")
        if k is not None:
            thetas[k], vels[k] = th[0], v[0]
    return LibrationTrajectory(t_grid.copy(), thetas, vels)


def thermal_angle_variance(trap: TrapParams, temperature: float) -> float:
    """Equipartition variance k_B T / (I omega^2)."""
    return K_B * temperature / (trap.inertia * trap.omega**2)


def _run_block(block_index, size, state0, trap, torque, plan, temperature, seed, n_out):
    rng = np.random.Generator(np.random.Philox(key=[int(seed), int(block_index)]))
    inv_i = 1.0 / trap.inertia
    kick = math.sqrt(2.0 * trap.gamma_g * K_B * temperature * inv_i)
    th = np.full(size, state0.theta, dtype=float)
    v = np.full(size, state0.theta_dot, dtype=float)
    mean = np.empty(n_out)
    m2 = np.empty(n_out)
    vmean = np.empty(n_out)
    mean[0], m2[0], vmean[0] = th.mean(), 0.0, v.mean()
    for t0, n, dt, k in plan:
        t = t0
        sdt = kick * math.sqrt(dt)
        for _ in range(n):
            th, v = _rk4_step(t, th, v, dt, trap, torque, inv_i)
            if kick > 0.0:
                v = v + sdt * rng.standard_normal(size)
            t += dt
        if not (np.all(np.isfinite(th)) and np.all(np.isfinite(v))):
            raise IntegrationError(f"non-finite state in block {block_index} at t = {t:.6g} s")
        if k is not None:
            mu = th.mean()
            mean[k] = mu
            m2[k] = np.sum((th - mu) ** 2)
            vmean[k] = v.mean()
    return size, mean, m2, vmean


def langevin_ensemble(
    state0: LibrationState,
    trap: TrapParams,
    torque: SpinTorqueModel,
    t_grid: Sequence[float],
    temperature: float,
    n_traj: int,
    seed: int,
    workers: int = 1,
    block_size: int = 1024,
    max_step: float | None = None,
) -> LangevinResult:
    """Ensemble mean and variance of theta from seeded stochastic trajectories.

    Each step is an RK4 drift update followed by an Euler-Maruyama velocity
    kick ``sqrt(2 gamma_g k_B T / I) dW``; the noise is additive, so the
    scheme keeps weak order one while reducing to :func:`deterministic_evolve`
    exactly at zero temperature. Trajectories are split into fixed blocks,
    each with its own Philox stream keyed by ``(seed, block)``, and block
    statistics are merged in block order; results do not depend on
    ``workers``.
    """
    if n_traj < 1:
        raise InvalidInputError("n_traj must be at least 1")
    if temperature < 0:
        raise InvalidInputError("temperature must be non-negative")
    t_grid = _check_grid(t_grid)
    dt_max = default_step(trap, torque) if max_step is None else float(max_step)
    if not np.isfinite(dt_max):
        dt_max = float(t_grid[-1]) if t_grid[-1] > 0 else 1.0
    plan = _schedule(t_grid, torque.onset_time, dt_max)
    for _, _, dt, _ in plan:
        _validate_step(trap, dt)

    sizes = [block_size] * (n_traj // block_size)
    if n_traj % block_size:
        sizes.append(n_traj % block_size)
    args = [(b, s, state0, trap, torque, plan, temperature, seed, t_grid.size) for b, s in enumerate(sizes)]
    if workers > 1 and len(args) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(lambda a: _run_block(*a), args))
    else:
        blocks = [_run_block(*a) for a in args]

    # Chan et al. pairwise merge, strictly in block order
    n_tot, mean, m2, vmean = blocks[0]
    mean, m2, vmean = mean.copy(), m2.copy(), vmean.copy()
    for nb, mb, m2b, vb in blocks[1:]:
        n_new = n_tot + nb
        delta = mb - mean
        mean = mean + delta * (nb / n_new)
        m2 = m2 + m2b + delta**2 * (n_tot * nb / n_new)
        vmean = vmean + (vb - vmean) * (nb / n_new)
        n_tot = n_new
    var = m2 / (n_tot - 1) if n_tot > 1 else np.zeros_like(m2)
    return LangevinResult(t_grid.copy(), mean, var, n_tot, vmean)


def kinematic_torque_fit(times: Sequence[float], angles: Sequence[float], inertia: float) -> float:
    """Torque from a least-squares fit of ``theta = a t^2``: returns ``2 a I``."""
    t = np.asarray(times, dtype=float)
    th = np.asarray(angles, dtype=float)
    if t.shape != th.shape or t.size < 3:
        raise InvalidInputError("need at least 3 matching (time, angle) points")
    if np.ptp(t) == 0.0:
        raise InvalidInputError("ill-conditioned fit: all times are equal")
    t2 = t * t
    denom = float(t2 @ t2)
    if denom == 0.0:
        raise InvalidInputError("ill-conditioned fit: all times are zero")
    a = float(t2 @ th) / denom
    return 2.0 * a * inertia


def spins_from_torque(torque: float, field_magnitude: float, constants: SpinConstants = DEFAULT_CONSTANTS) -> float:
    if not field_magnitude > 0:
        raise InvalidInputError("field magnitude must be positive")
    return torque / per_spin_torque_scale(field_magnitude, constants)
