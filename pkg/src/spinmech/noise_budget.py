"""Closed-form sensitivity estimates for spin-mechanical readout.

Conventions: ``gamma_e`` is in Hz/T. The photon shot-noise field formula
uses it without a 2 pi; torque formulas use the angular value
``2 pi gamma_e``. Every function returns per-root-hertz figures by
multiplying a single-shot uncertainty by ``sqrt(dead_time)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from scipy.constants import hbar, k as K_B

from .errors import InvalidInputError

__all__ = [
    "SensitivityInputs",
    "ramsey_signal",
    "mid_fringe_deviation",
    "shot_noise_field_sensitivity",
    "shot_noise_angle_sensitivity",
    "projection_torque_noise",
    "projection_angle_noise",
    "relative_projection_noise",
    "thermal_angle_noise",
    "resonant_torque_limit",
    "sensitivity_table",
]

GAMMA_E = 28.0e9


def _positive(**kw):
    for name, v in kw.items():
        if not v > 0:
            raise InvalidInputError(f"{name} must be positive, got {v!r}")


def ramsey_signal(delta_x, field_offset, time, gamma_e=GAMMA_E, linearized=False):
    """Counts ``delta_x cos^2(pi gamma_e dB t)``.

    With ``linearized`` the small-signal mid-fringe response
    ``delta_x pi gamma_e dB t`` is returned instead.
    """
    if time < 0:
        raise InvalidInputError("time must be non-negative")
    phase = math.pi * gamma_e * field_offset * time
    if linearized:
        return delta_x * phase
    return delta_x * math.cos(phase) ** 2


def mid_fringe_deviation(delta_x, field_offset, time, gamma_e=GAMMA_E):
    """Exact signal change when biased at the mid-fringe point."""
    phase = math.pi * gamma_e * field_offset * time
    return delta_x * 0.5 * math.sin(2.0 * phase)


def shot_noise_field_sensitivity(delta_x, ramsey_time, dead_time, gamma_e=GAMMA_E):
    """``sqrt(2 t_d / delta_x) / (gamma_e T)`` in T/sqrt(Hz)."""
    _positive(delta_x=delta_x, ramsey_time=ramsey_time, dead_time=dead_time, gamma_e=gamma_e)
    return math.sqrt(2.0 * dead_time / delta_x) / (gamma_e * ramsey_time)


def shot_noise_angle_sensitivity(x0, contrast, theta_span, dead_time):
    """Angle noise from photon shot noise at the mid-angle operating point.

    The count rate there is ``x0 (1 + C) / 2`` with Poisson spread
    ``sqrt(x0 (1 + C) / 2)``, and the slope is ``x0 (1 - C) / theta_span``.
    At C = 1/2 this reduces to ``theta_span sqrt(3 / x0)``.
    """
    _positive(x0=x0, dead_time=dead_time)
    if not 0.0 < contrast < 1.0:
        raise InvalidInputError("contrast must lie strictly between 0 and 1")
    if theta_span < 0:
        raise InvalidInputError("theta_span must be non-negative")
    if theta_span == 0:
        warnings.warn("theta_span is zero: angular sensitivity is degenerate", RuntimeWarning, stacklevel=2)
        return 0.0
    delta_s = math.sqrt(x0 * (1.0 + contrast) / 2.0)
    slope = x0 * (1.0 - contrast) / theta_span
    return delta_s / slope * math.sqrt(dead_time)


def projection_torque_noise(n_spins, field, dead_time, gamma_e=GAMMA_E):
    """Spin-projection torque noise, N m / sqrt(Hz)."""
    if n_spins < 0 or field < 0 or dead_time < 0:
        raise InvalidInputError("inputs must be non-negative")
    return hbar * 2.0 * math.pi * gamma_e * field * math.sqrt(n_spins / 2.0) * math.sqrt(dead_time)


def projection_angle_noise(n_spins, field, dead_time, inertia, conversion_time, gamma_e=GAMMA_E):
    """Angle noise after free rotation for ``conversion_time`` (theta = tau t^2 / 2I)."""
    _positive(inertia=inertia)
    if conversion_time < 0:
        raise InvalidInputError("conversion_time must be non-negative")
    tau = projection_torque_noise(n_spins, field, dead_time, gamma_e)
    return tau / inertia * conversion_time**2 / 2.0


def relative_projection_noise(n_spins):
    """``delta theta / theta = sqrt(2 / N)``."""
    _positive(n_spins=n_spins)
    return math.sqrt(2.0 / n_spins)


def thermal_angle_noise(gas_temp, inertia, omega0, dead_time):
    """Equipartition angle ``sqrt(k_B T / (I omega0^2))`` times sqrt(t_d)."""
    if gas_temp < 0:
        raise InvalidInputError("gas_temp must be non-negative")
    _positive(inertia=inertia, omega0=omega0, dead_time=dead_time)
    return math.sqrt(K_B * gas_temp / (inertia * omega0**2)) * math.sqrt(dead_time)


def resonant_torque_limit(gas_temp, inertia, gamma_g, measurement_time):
    """Thermal torque floor ``sqrt(4 k_B T I gamma_g / dt)``, N m."""
    if gas_temp < 0 or gamma_g < 0:
        raise InvalidInputError("gas_temp and gamma_g must be non-negative")
    _positive(inertia=inertia, measurement_time=measurement_time)
    if math.isinf(measurement_time):
        return 0.0
    return math.sqrt(4.0 * K_B * gas_temp * inertia * gamma_g / measurement_time)


@dataclass(frozen=True)
class SensitivityInputs:
    """Inputs of the sensitivity table.

    ``attenuation`` scales ``delta_x`` for the unattenuated row; the
    ``fast_*`` pair describes the improved Ramsey row. ``rotation_time`` is
    carried for bookkeeping only.
    """

    delta_x: float = 1e4
    x0: float = 1e4
    contrast: float = 0.5
    ramsey_time: float = 100e-9
    dead_time: float = 10e-3
    n_spins: float = 1e8
    field: float = 0.027
    inertia: float = 1e-23
    omega0: float = 2.0 * math.pi * 1e3
    gas_temp: float = 300.0
    gamma_g: float = 6280.0
    theta_span: float = math.radians(4.0)
    gamma_e: float = GAMMA_E
    attenuation: float = 1e4
    fast_ramsey_time: float = 1e-6
    fast_dead_time: float = 100e-6
    conversion_time: float = 100e-6
    measurement_time: float = 1.0
    rotation_time: float = 0.0

    def __post_init__(self):
        for name, v in self.__dict__.items():
            if not v >= 0:
                raise InvalidInputError(f"{name} must be non-negative")
        if self.delta_x > self.x0:
            raise InvalidInputError("delta_x cannot exceed x0")


def sensitivity_table(inp: SensitivityInputs) -> list[tuple[str, float, str]]:
    """Rows ``(quantity, value, unit)`` for every estimate."""
    ungated = inp.delta_x * inp.attenuation
    return [
        ("field_shot_noise", shot_noise_field_sensitivity(inp.delta_x, inp.ramsey_time, inp.dead_time, inp.gamma_e), "T/sqrt(Hz)"),
        ("field_shot_noise_unattenuated", shot_noise_field_sensitivity(ungated, inp.ramsey_time, inp.dead_time, inp.gamma_e), "T/sqrt(Hz)"),
        ("field_shot_noise_fast", shot_noise_field_sensitivity(ungated, inp.fast_ramsey_time, inp.fast_dead_time, inp.gamma_e), "T/sqrt(Hz)"),
        ("angle_shot_noise", shot_noise_angle_sensitivity(inp.x0, inp.contrast, inp.theta_span, inp.dead_time), "rad/sqrt(Hz)"),
        ("projection_torque", projection_torque_noise(inp.n_spins, inp.field, inp.dead_time, inp.gamma_e), "N m/sqrt(Hz)"),
        ("projection_angle", projection_angle_noise(inp.n_spins, inp.field, inp.dead_time, inp.inertia, inp.conversion_time, inp.gamma_e), "rad/sqrt(Hz)"),
        ("relative_projection", relative_projection_noise(inp.n_spins), "1"),
        ("thermal_angle", thermal_angle_noise(inp.gas_temp, inp.inertia, inp.omega0, inp.dead_time), "rad/sqrt(Hz)"),
        ("resonant_torque_limit", resonant_torque_limit(inp.gas_temp, inp.inertia, inp.gamma_g, inp.measurement_time), "N m"),
    ]
