"""Phase-space Fokker-Planck solver for the libration coordinate.

Finite-volume discretisation on a uniform (theta, theta_dot) grid:

* theta transport: upwinded MUSCL reconstruction with a minmod limiter;
* theta_dot transport: central drift and diffusion (upwind drift only on
  faces whose cell Peclet number exceeds 2);
* forward Euler in time with a CFL-limited step;
* reflecting walls, so the discrete mass is conserved to rounding.

The diffusion coefficient is ``gamma_g k_B T / I``, matching the velocity
noise of :func:`spinmech.libration.langevin_ensemble`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

from .errors import BoundaryError, InvalidInputError, StepSizeError
from .libration import K_B, LibrationTrajectory, SpinTorqueModel, TrapParams

__all__ = [
    "PhaseSpacePdf",
    "FokkerPlanckResult",
    "gaussian_pdf",
    "boltzmann_pdf",
    "grid_around",
    "first_moment",
    "fokker_planck_evolve",
]

_LEAK_RIM = 2
_LEAK_TOL = 1e-3


@dataclass
class PhaseSpacePdf:
    theta_grid: np.ndarray
    theta_dot_grid: np.ndarray
    values: np.ndarray  # shape (len(theta_grid), len(theta_dot_grid))

    def __post_init__(self):
        self.theta_grid = np.asarray(self.theta_grid, dtype=float)
        self.theta_dot_grid = np.asarray(self.theta_dot_grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.theta_grid.size, self.theta_dot_grid.size):
            raise InvalidInputError("values shape must match (theta_grid, theta_dot_grid)")
        for g in (self.theta_grid, self.theta_dot_grid):
            d = np.diff(g)
            if g.size < 3 or np.any(d <= 0) or np.ptp(d) > 1e-9 * d[0]:
                raise InvalidInputError("grids must be uniform and increasing")

    @property
    def d_theta(self) -> float:
        return float(self.theta_grid[1] - self.theta_grid[0])

    @property
    def d_theta_dot(self) -> float:
        return float(self.theta_dot_grid[1] - self.theta_dot_grid[0])

    def total(self) -> float:
        """Trapezoidal integral of the density."""
        inner = np.trapezoid(self.values, self.theta_dot_grid, axis=1)
        return float(np.trapezoid(inner, self.theta_grid))

    def marginal_theta(self) -> np.ndarray:
        return np.trapezoid(self.values, self.theta_dot_grid, axis=1)

    def normalized(self) -> "PhaseSpacePdf":
        return PhaseSpacePdf(self.theta_grid, self.theta_dot_grid, self.values / self.total())


@dataclass
class FokkerPlanckResult:
    times: np.ndarray
    pdfs: list
    first_moments: np.ndarray
    mass: np.ndarray


def gaussian_pdf(theta_grid, theta_dot_grid, mean=(0.0, 0.0), sd=(1.0, 1.0)) -> PhaseSpacePdf:
    th = np.asarray(theta_grid, dtype=float)[:, None]
    v = np.asarray(theta_dot_grid, dtype=float)[None, :]
    vals = np.exp(-0.5 * ((th - mean[0]) / sd[0]) ** 2 - 0.5 * ((v - mean[1]) / sd[1]) ** 2)
    return PhaseSpacePdf(theta_grid, theta_dot_grid, vals).normalized()


def boltzmann_pdf(theta_grid, theta_dot_grid, trap: TrapParams, temperature: float) -> PhaseSpacePdf:
    """Stationary density ``exp(-(I v^2/2 + I omega^2 theta^2/2) / k_B T)``."""
    sd_theta = math.sqrt(K_B * temperature / (trap.inertia * trap.omega**2))
    sd_v = math.sqrt(K_B * temperature / trap.inertia)
    return gaussian_pdf(theta_grid, theta_dot_grid, (0.0, 0.0), (sd_theta, sd_v))


def grid_around(
    trajectory: LibrationTrajectory | None,
    trap: TrapParams,
    temperature: float,
    n_theta: int = 257,
    n_theta_dot: int = 257,
    n_sigma: float = 6.0,
):
    """Uniform grids spanning a mean path plus ``n_sigma`` thermal widths."""
    sd_theta = math.sqrt(K_B * temperature / (trap.inertia * trap.omega**2))
    sd_v = math.sqrt(K_B * temperature / trap.inertia)
    if trajectory is None:
        th_lo = th_hi = v_lo = v_hi = 0.0
    else:
        th_lo, th_hi = float(np.min(trajectory.theta)), float(np.max(trajectory.theta))
        v_lo, v_hi = float(np.min(trajectory.theta_dot)), float(np.max(trajectory.theta_dot))
    theta = np.linspace(th_lo - n_sigma * sd_theta, th_hi + n_sigma * sd_theta, n_theta)
    theta_dot = np.linspace(v_lo - n_sigma * sd_v, v_hi + n_sigma * sd_v, n_theta_dot)
    return theta, theta_dot


def first_moment(pdf: PhaseSpacePdf) -> float:
    """Mean angle by trapezoidal quadrature."""
    marg = pdf.marginal_theta()
    return float(np.trapezoid(pdf.theta_grid * marg, pdf.theta_grid) / np.trapezoid(marg, pdf.theta_grid))


@numba.njit(cache=True)
def _minmod(a, b):
    if a * b <= 0.0:
        return 0.0
    return a if abs(a) < abs(b) else b


@numba.njit(cache=True, inline="always")
def _theta_flux(p, k, j, vj, nth):
    # flux through the face between theta cells k-1 and k; walls carry none
    if k <= 0 or k >= nth:
        return 0.0
    if vj > 0.0:
        i = k - 1
        s = 0.0
        if i >= 1:
            s = _minmod(p[i, j] - p[i - 1, j], p[i + 1, j] - p[i, j])
        return vj * (p[i, j] + 0.5 * s)
    i = k
    s = 0.0
    if i <= nth - 2:
        s = _minmod(p[i, j] - p[i - 1, j], p[i + 1, j] - p[i, j])
    return vj * (p[i, j] - 0.5 * s)


@numba.njit(cache=True, inline="always")
def _vel_flux(p, i, k, v, b, gamma, diff, dv, nv):
    # flux through the face between theta_dot cells k-1 and k
    if k <= 0 or k >= nv:
        return 0.0
    a = b - gamma * 0.5 * (v[k - 1] + v[k])
    grad = diff * (p[i, k] - p[i, k - 1]) / dv
    if abs(a) * dv > 2.0 * diff:
        up = p[i, k - 1] if a > 0.0 else p[i, k]
        return a * up - grad
    return a * 0.5 * (p[i, k - 1] + p[i, k]) - grad


@numba.njit(cache=True)
def _euler_step(p, out, v, dth, dv, dt, base_accel, gamma, diff, f_lo, f_hi):
    """One explicit step. ``base_accel[i]`` is the velocity-independent drift.

    ``f_lo`` and ``f_hi`` are scratch rows holding theta-face fluxes.
    """
    nth, nv = p.shape
    rth = dt / dth
    rv = dt / dv
    for j in range(nv):
        f_lo[j] = 0.0
    for i in range(nth):
        b = base_accel[i]
        for j in range(nv):
            f_hi[j] = _theta_flux(p, i + 1, j, v[j], nth)
        g_lo = 0.0
        for j in range(nv):
            g_hi = _vel_flux(p, i, j + 1, v, b, gamma, diff, dv, nv)
            out[i, j] = p[i, j] - rth * (f_hi[j] - f_lo[j]) - rv * (g_hi - g_lo)
            g_lo = g_hi
        for j in range(nv):
            f_lo[j] = f_hi[j]


def _stable_step(theta, v, trap, torque, temperature, t_end, cfl):
    """Largest explicit step keeping every update a convex combination.

    Central velocity faces (cell Peclet <= 2) add only ``gamma_g`` to the
    diagonal; upwinded faces add ``|a| / dv``.
    """
    dth = theta[1] - theta[0]
    dv = v[1] - v[0]
    diff = trap.gamma_g * K_B * temperature / trap.inertia
    w2_max = trap.omega**2 * (1.0 + (abs(trap.drive.depth) if trap.drive else 0.0))
    a_max = trap.gamma_g * np.max(np.abs(v)) + w2_max * np.max(np.abs(theta)) + torque.amplitude / trap.inertia
    drift = a_max / dv if a_max * dv > 2.0 * diff else trap.gamma_g
    rate = 2.0 * np.max(np.abs(v)) / dth + drift + 2.0 * diff / dv**2
    return cfl / rate if rate > 0 else t_end


def fokker_planck_evolve(
    pdf0: PhaseSpacePdf,
    trap: TrapParams,
    torque: SpinTorqueModel,
    temperature: float,
    t_grid: Sequence[float],
    cfl: float = 0.4,
    dt: float | None = None,
) -> FokkerPlanckResult:
    """Evolve ``pdf0`` and return the density at each time in ``t_grid``."""
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid[0] != 0.0 or np.any(np.diff(t_grid) <= 0):
        raise InvalidInputError("t_grid must be strictly increasing and start at 0")
    if abs(pdf0.total() - 1.0) > 1e-6:
        raise InvalidInputError(f"initial pdf is not normalised (integral {pdf0.total():.8g})")
    if temperature < 0:
        raise InvalidInputError("temperature must be non-negative")
    theta, v = pdf0.theta_grid, pdf0.theta_dot_grid
    if temperature > 0:
        sd_theta = math.sqrt(K_B * temperature / (trap.inertia * trap.omega**2)) if trap.omega > 0 else 0.0
        sd_v = math.sqrt(K_B * temperature / trap.inertia)
        if np.ptp(theta) < 12 * sd_theta * (1 - 1e-9) or np.ptp(v) < 12 * sd_v * (1 - 1e-9):
            raise InvalidInputError("grid must span at least +-6 thermal standard deviations")

    dth, dv = pdf0.d_theta, pdf0.d_theta_dot
    diff = trap.gamma_g * K_B * temperature / trap.inertia
    dt_stable = _stable_step(theta, v, trap, torque, temperature, t_grid[-1], 1.0)
    if dt is None:
        dt_max = cfl * dt_stable
    else:
        dt_max = float(dt)
        if dt_max > cfl * dt_stable * (1 + 1e-12):
            raise StepSizeError(f"dt = {dt_max:.3g} s exceeds the CFL bound {cfl * dt_stable:.3g} s")

    inv_i = 1.0 / trap.inertia
    cell = dth * dv
    p = pdf0.values.copy()
    buf = np.empty_like(p)
    f_lo = np.empty(v.size)
    f_hi = np.empty(v.size)
    mass0 = p.sum() * cell
    pdfs = [PhaseSpacePdf(theta, v, p.copy())]
    moments = [first_moment(pdfs[0])]
    masses = [mass0]
    t = 0.0
    for t_next in t_grid[1:]:
        n = max(1, int(math.ceil((t_next - t) / dt_max - 1e-9)))
        h = (t_next - t) / n
        for _ in range(n):
            base = -trap.stiffness(t) * theta + torque(t, theta) * inv_i
            _euler_step(p, buf, v, dth, dv, h, np.asarray(base, dtype=float), trap.gamma_g, diff, f_lo, f_hi)
            p, buf = buf, p
            t += h
        if np.min(p) < -1e-12 * np.max(p):
            # negative undershoot beyond rounding means the scheme lost positivity
            raise StepSizeError(f"negative density {np.min(p):.3g} at t = {t:.6g} s")
        np.clip(p, 0.0, None, out=p)
        t = float(t_next)
        mass = p.sum() * cell
        rim = (
            p[:_LEAK_RIM].sum() + p[-_LEAK_RIM:].sum() + p[:, :_LEAK_RIM].sum() + p[:, -_LEAK_RIM:].sum()
        ) * cell
        if rim > _LEAK_TOL * mass:
            raise BoundaryError(f"probability mass {rim / mass:.3g} reached the grid edge at t = {t:.6g} s")
        pdf = PhaseSpacePdf(theta, v, p.copy())
        pdfs.append(pdf)
        moments.append(first_moment(pdf))
        masses.append(mass)
    return FokkerPlanckResult(t_grid.copy(), pdfs, np.array(moments), np.array(masses))
