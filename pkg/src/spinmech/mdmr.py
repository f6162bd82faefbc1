"""Eight-line MDMR spectra, vector-field fitting and the pump-probe simulation.

Geometry: the bias field points along lab z. A crystal orientation is two
angles ``(theta_nv, phi_k)``; the four cubic <111> axes are mapped to the lab
by ``R = R_y(theta_nv) R_z(phi_k) Q``, where ``Q`` puts [111] on z and the
[1-1-1] axis at zero azimuth.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import curve_fit, linear_sum_assignment, minimize

from .errors import FitError, InvalidInputError
from .libration import LibrationState, SpinTorqueModel, TrapParams, deterministic_evolve
from .pulse_engine import RelaxationParams
from .spin_core import DEFAULT_CONSTANTS, SpinConstants, build_hamiltonian, transition_frequencies
from .vector3 import eigvalsh3, rot_y, rot_z, rotation_matrix

__all__ = [
    "CUBIC_AXES",
    "FIELD_DIRECTION",
    "CrystalOrientation",
    "SpectrumPeaks",
    "FitResult",
    "CalibrationTable",
    "PumpProbeResult",
    "crystal_rotation",
    "nv_axes",
    "nv_axes_for_rotation",
    "axis_field_angles",
    "forward_spectrum",
    "lorentzian",
    "fit_vector_field",
    "orientation_error",
    "class_for_line",
    "angle_frequency_calibration",
    "pump_probe_simulate",
    "read_spectrum_text",
    "find_peaks_in_spectrum",
    "fit_to_json",
    "calibration_to_csv",
]

_TWO_PI = 2.0 * np.pi
FIELD_DIRECTION = np.array([0.0, 0.0, 1.0])

# even-parity cubic <111> set
CUBIC_AXES = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float) / np.sqrt(3.0)


def _standard_frame() -> np.ndarray:
    e3 = CUBIC_AXES[0]
    b1 = CUBIC_AXES[1] - (CUBIC_AXES[1] @ e3) * e3
    e1 = b1 / np.linalg.norm(b1)
    e2 = np.cross(e3, e1)
    return np.array([e1, e2, e3])


_Q = _standard_frame()

# the 48 signed permutation matrices: the cubic point group with inversion
_POINT_GROUP = np.array(
    [
        np.diag(s) @ np.eye(3)[list(p)]
        for p in ((0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0))
        for s in np.array(np.meshgrid([1, -1], [1, -1], [1, -1])).T.reshape(-1, 3)
    ]
)


@dataclass(frozen=True)
class CrystalOrientation:
    """Two orientation angles in radians, wrapped to [0, 2 pi)."""

    theta_nv: float
    phi_k: float

    def __post_init__(self):
        if not (math.isfinite(self.theta_nv) and math.isfinite(self.phi_k)):
            raise InvalidInputError("orientation angles must be finite")
        object.__setattr__(self, "theta_nv", float(self.theta_nv) % _TWO_PI)
        object.__setattr__(self, "phi_k", float(self.phi_k) % _TWO_PI)

    @classmethod
    def from_degrees(cls, theta_nv: float, phi_k: float) -> "CrystalOrientation":
        return cls(math.radians(theta_nv), math.radians(phi_k))

    def degrees(self) -> tuple[float, float]:
        return math.degrees(self.theta_nv), math.degrees(self.phi_k)


@dataclass
class SpectrumPeaks:
    """Line centres (Hz) ordered (class 0 minus, class 0 plus, class 1 minus, ...)."""

    centers: np.ndarray
    widths: np.ndarray
    amplitudes: np.ndarray
    labels: list = field(default_factory=list)

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=float)
        self.widths = np.broadcast_to(np.asarray(self.widths, dtype=float), self.centers.shape).copy()
        self.amplitudes = np.broadcast_to(np.asarray(self.amplitudes, dtype=float), self.centers.shape).copy()
        if np.any(self.widths <= 0):
            raise InvalidInputError("line widths must be positive")


@dataclass
class FitResult:
    b_magnitude: float
    orientation: CrystalOrientation
    residual: float
    assignment: list
    converged: bool = True
    message: str = ""
    n_starts: int = 0

    def as_dict(self) -> dict:
        th, ph = self.orientation.degrees()
        return {
            "b_magnitude_T": self.b_magnitude,
            "theta_nv_deg": th,
            "phi_k_deg": ph,
            "residual_Hz": self.residual,
            "converged": self.converged,
            "message": self.message,
            "assignment": [list(a) for a in self.assignment],
        }


def crystal_rotation(orientation: CrystalOrientation) -> np.ndarray:
    return rot_y(orientation.theta_nv) @ rot_z(orientation.phi_k) @ _Q


def nv_axes_for_rotation(rotation) -> np.ndarray:
    return (np.asarray(rotation, dtype=float) @ CUBIC_AXES.T).T


def nv_axes(orientation: CrystalOrientation) -> np.ndarray:
    """The four NV axes in the lab frame, shape (4, 3)."""
    return nv_axes_for_rotation(crystal_rotation(orientation))


def _field_aligned(axes: np.ndarray, direction=FIELD_DIRECTION) -> np.ndarray:
    # an axis and its reverse give the same spectrum; keep n . B >= 0
    s = np.where(axes @ direction < 0, -1.0, 1.0)
    return axes * s[:, None]


def axis_field_angles(orientation: CrystalOrientation) -> np.ndarray:
    """Folded angle (rad, in [0, pi/2]) between each axis and the field."""
    c = np.abs(nv_axes(orientation) @ FIELD_DIRECTION)
    return np.arccos(np.clip(c, 0.0, 1.0))


def lorentzian(f, center, fwhm):
    """Unit-height Lorentzian."""
    hw = 0.5 * fwhm
    return hw**2 / ((np.asarray(f) - center) ** 2 + hw**2)


def forward_spectrum(
    b_magnitude: float,
    orientation: CrystalOrientation,
    widths=5e6,
    amplitudes=0.05,
    frequencies=None,
    constants: SpinConstants = DEFAULT_CONSTANTS,
):
    """Line list and sampled curve ``1 + sum_k a_k L_k(f)``.

    Returns ``(SpectrumPeaks, curve)``; ``curve`` is None unless
    ``frequencies`` is given.
    """
    if not b_magnitude >= 0:
        raise InvalidInputError("b_magnitude must be non-negative")
    b = b_magnitude * FIELD_DIRECTION
    centers, labels = [], []
    for k, n in enumerate(_field_aligned(nv_axes(orientation))):
        f_minus, f_plus = transition_frequencies(build_hamiltonian(b, n / np.linalg.norm(n), constants))
        centers += [f_minus, f_plus]
        labels += [(k, "minus"), (k, "plus")]
    peaks = SpectrumPeaks(np.array(centers), widths, amplitudes, labels)
    if frequencies is None:
        return peaks, None
    f = np.asarray(frequencies, dtype=float)
    curve = np.ones_like(f)
    for c, w, a in zip(peaks.centers, peaks.widths, peaks.amplitudes):
        curve += a * lorentzian(f, c, w)
    return peaks, curve


# ---------------------------------------------------------------- fitting


def _model_lines(params: np.ndarray, constants: SpinConstants) -> np.ndarray:
    """Vectorised line positions for rows ``(B, theta_nv, phi_k)``; shape (M, 4, 2).

    Uses the fact that the spectrum of one axis depends only on |B| and the
    axis-field angle, so each Hamiltonian is built in its own axis frame.
    Lines are (lambda1 - lambda0, lambda2 - lambda0), valid below the
    anti-crossing.
    """
    params = np.atleast_2d(params)
    bmag, th, ph = params[:, 0], params[:, 1], params[:, 2]
    # z-row of R_y(th) R_z(ph) applied to Q n
    qn = CUBIC_AXES @ _Q.T  # (4, 3)
    ct, st, cp, sp = np.cos(th), np.sin(th), np.cos(ph), np.sin(ph)
    x = cp[:, None] * qn[None, :, 0] - sp[:, None] * qn[None, :, 1]
    z = -st[:, None] * x + ct[:, None] * qn[None, :, 2]
    c = np.clip(np.abs(z), 0.0, 1.0)
    s = np.sqrt(1.0 - c * c)
    g = constants.gamma_e * np.abs(bmag)[:, None]
    m = np.zeros(c.shape + (3, 3))
    r2 = 1.0 / np.sqrt(2.0)
    m[..., 0, 0] = constants.d_zfs + g * c
    m[..., 2, 2] = constants.d_zfs - g * c
    m[..., 0, 1] = m[..., 1, 0] = m[..., 1, 2] = m[..., 2, 1] = g * s * r2
    w = eigvalsh3(m)
    return np.stack([w[..., 1] - w[..., 0], w[..., 2] - w[..., 0]], axis=-1)


def _assign(model: np.ndarray, measured: np.ndarray):
    cost = (model[:, None] - measured[None, :]) ** 2
    rows, cols = linear_sum_assignment(cost)
    return rows, cols, float(np.sqrt(cost[rows, cols].mean()))


def _batch_cost(params, measured, constants):
    lines = _model_lines(params, constants).reshape(len(params), 8)
    return np.array([_assign(row, measured)[2] for row in lines])


def fit_vector_field(
    measured_centers: Sequence[float],
    grid: tuple[int, int, int] = (16, 16, 5),
    n_polish: int = 10,
    residual_threshold: float = 5e6,
    min_span: float = 1e6,
    constants: SpinConstants = DEFAULT_CONSTANTS,
) -> FitResult:
    """Recover ``(|B|, theta_nv, phi_k)`` from 4 to 8 measured line centres (Hz).

    A ``grid`` of starts (theta, phi, |B|) covers theta in [0, pi],
    phi in [0, 2 pi / 3) and five field values bracketing the measured span;
    the ``n_polish`` best starts are refined by Nelder-Mead. Missing lines
    are allowed: each measured centre is matched to one model line by an
    optimal assignment and the cost is the RMS over matched pairs.
    """
    raw = np.asarray(measured_centers, dtype=float)
    if raw.ndim != 1 or not 4 <= raw.size <= 8:
        raise InvalidInputError(f"need 4 to 8 measured centres, got {raw.size}")
    if not np.all(np.isfinite(raw)) or np.any(raw <= 0):
        raise InvalidInputError("measured centres must be positive and finite")
    input_order = np.argsort(raw, kind="stable")
    meas = raw[input_order]
    n_th, n_ph, n_b = grid
    if min(grid) < 1 or n_polish < 1:
        raise InvalidInputError("grid sizes and n_polish must be positive")

    span = float(np.ptp(meas))
    b_guess = max(span, min_span) / (2.0 * constants.gamma_e)
    th = (np.arange(n_th) + 0.5) * np.pi / n_th
    ph = (np.arange(n_ph) + 0.5) * (_TWO_PI / 3.0) / n_ph
    bs = b_guess * np.linspace(0.9, 2.0, n_b)
    starts = np.array(np.meshgrid(bs, th, ph, indexing="ij")).reshape(3, -1).T
    costs = _batch_cost(starts, meas, constants)
    order = np.argsort(costs, kind="stable")[:n_polish]

    scale = np.array([b_guess, 1.0, 1.0])

    def objective(x):
        return _batch_cost((x * scale)[None, :], meas, constants)[0]

    best = None
    for idx in order:
        res = minimize(
            objective,
            starts[idx] / scale,
            method="Nelder-Mead",
            options={"xatol": 1e-9, "fatol": 1e-3, "maxiter": 4000, "maxfev": 8000},
        )
        if best is None or res.fun < best.fun:
            best = res

    # Nelder-Mead can stall on the kinks of the assignment cost; restart it
    for _ in range(3):
        res = minimize(objective, best.x, method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-6, "maxiter": 4000})
        if res.fun >= best.fun - 1e-3:
            best = res if res.fun < best.fun else best
            break
        best = res

    b_fit, th_fit, ph_fit = best.x * scale
    b_fit = abs(b_fit)
    lines = _model_lines(np.array([b_fit, th_fit, ph_fit]), constants).reshape(8)
    rows, cols, rms = _assign(lines, meas)
    # (measured index in the caller's order, class, branch)
    assignment = sorted(
        (int(input_order[c]), int(r) // 2, "minus" if r % 2 == 0 else "plus") for r, c in zip(rows, cols)
    )

    converged, message = True, "ok"
    if span < min_span:
        converged, message = False, f"measured span {span:.3g} Hz is below {min_span:.3g} Hz; orientation unidentifiable"
    elif rms > residual_threshold:
        converged, message = False, f"residual {rms:.3g} Hz exceeds threshold {residual_threshold:.3g} Hz"
    return FitResult(
        float(b_fit),
        CrystalOrientation(th_fit, ph_fit),
        rms,
        assignment,
        converged,
        message,
        len(starts),
    )


def _field_in_crystal(orientation: CrystalOrientation) -> np.ndarray:
    return crystal_rotation(orientation).T @ FIELD_DIRECTION


def orientation_error(a: CrystalOrientation, b: CrystalOrientation) -> float:
    """Angle (rad) between the field directions seen from the two crystals,
    minimised over the cubic point group; zero iff the spectra coincide."""
    ba = _field_in_crystal(a)
    bb = _field_in_crystal(b)
    dots = np.clip(_POINT_GROUP @ bb @ ba, -1.0, 1.0)
    return float(np.arccos(np.max(dots)))


# ------------------------------------------------------------ calibration


@dataclass
class CalibrationTable:
    """Target-class 0 -> -1 line versus tip angle toward the field."""

    theta_d: np.ndarray
    frequency: np.ndarray
    target_class: int
    rotation_axis: np.ndarray
    _inverse: PchipInterpolator = field(repr=False, default=None)

    def __post_init__(self):
        f = np.asarray(self.frequency)
        if self._inverse is None:
            order = np.argsort(f)
            self._inverse = PchipInterpolator(f[order], np.asarray(self.theta_d)[order])

    def inverse(self, frequency):
        f = np.asarray(frequency, dtype=float)
        lo, hi = float(np.min(self.frequency)), float(np.max(self.frequency))
        if np.any(f < lo - 1e-6) or np.any(f > hi + 1e-6):
            raise InvalidInputError(f"frequency outside calibrated range [{lo:.6g}, {hi:.6g}] Hz")
        out = self._inverse(np.clip(f, lo, hi))
        return float(out) if out.ndim == 0 else out


def class_for_line(fit: FitResult, frequency: float, constants: SpinConstants = DEFAULT_CONSTANTS) -> int:
    """Index of the class whose 0 -> -1 line lies closest to ``frequency``."""
    peaks, _ = forward_spectrum(fit.b_magnitude, fit.orientation, constants=constants)
    return int(np.argmin(np.abs(peaks.centers[0::2] - frequency)))


def _target_setup(b_magnitude, orientation, target_class):
    if target_class not in range(4):
        raise InvalidInputError("target_class must be 0..3")
    n = _field_aligned(nv_axes(orientation))[target_class]
    u = np.cross(n, FIELD_DIRECTION)
    if np.linalg.norm(u) < 1e-9:
        raise InvalidInputError("target axis is parallel to the field; tip direction undefined")
    return n, u / np.linalg.norm(u)


def _tipped_frequency(n, u, theta_d, b_magnitude, constants):
    m = rotation_matrix(u, theta_d) @ n
    h = build_hamiltonian(b_magnitude * FIELD_DIRECTION, m / np.linalg.norm(m), constants)
    return transition_frequencies(h)[0]


def angle_frequency_calibration(
    fit: FitResult,
    target_class: int,
    angle_range=(-np.radians(10), np.radians(10)),
    n_points: int = 401,
    constants: SpinConstants = DEFAULT_CONSTANTS,
) -> CalibrationTable:
    """Tabulate f_minus of ``target_class`` as the crystal tips by theta_d.

    Positive ``theta_d`` rotates about ``n x B`` and brings the axis toward
    the field. Raises if the table is not strictly monotone.
    """
    lo, hi = angle_range
    if not lo < hi or n_points < 2:
        raise InvalidInputError("need lo < hi and at least two points")
    if not lo <= 0.0 <= hi:
        raise InvalidInputError("angle range must contain 0")
    n, u = _target_setup(fit.b_magnitude, fit.orientation, target_class)
    theta = np.union1d(np.linspace(lo, hi, n_points), [0.0])
    freq = np.array([_tipped_frequency(n, u, t, fit.b_magnitude, constants) for t in theta])
    d = np.diff(freq)
    if not (np.all(d > 0) or np.all(d < 0)):
        raise InvalidInputError("calibration is not strictly monotone over the requested range")
    return CalibrationTable(theta, freq, target_class, u)


# ------------------------------------------------------------- pump-probe


@dataclass
class PumpProbeResult:
    t_d: np.ndarray
    f2: np.ndarray
    contrast: np.ndarray  # (len(t_d), len(f2))
    theta_true: np.ndarray
    line_true: np.ndarray
    peak_center: np.ndarray
    peak_amplitude: np.ndarray
    theta_track: np.ndarray
    quadratic_coefficient: float


def _fit_peak(f2, y, width):
    k = int(np.argmax(y))
    p0 = (y[k], f2[k], width)
    try:
        popt, _ = curve_fit(lambda f, a, c, w: a * lorentzian(f, c, abs(w)), f2, y, p0=p0, maxfev=10000)
    except RuntimeError as exc:
        raise FitError(f"probe peak fit failed: {exc}") from exc
    return popt[0], popt[1]


def pump_probe_simulate(
    fit: FitResult,
    trap: TrapParams,
    torque: SpinTorqueModel,
    relax: RelaxationParams,
    t_d_list: Sequence[float],
    f2_grid: Sequence[float],
    probe_width: float | None = None,
    rabi_frequency: float = 5e6,
    target_class: int = 0,
    quadratic_window: float = 100e-6,
    constants: SpinConstants = DEFAULT_CONSTANTS,
) -> PumpProbeResult:
    """Contrast map ``exp(-t_d/T1) L(f2 - f(theta(t_d)))`` and its peak track.

    The pump starts the torque at t = 0. The probe Lorentzian defaults to
    the Fourier width ``1 / t_pi = 2 * rabi_frequency``. Peak centres are
    mapped back to angles through the calibration inverse and a pure
    ``a t^2`` law is fitted over ``quadratic_window``.
    """
    if not math.isclose(torque.field_magnitude, fit.b_magnitude, rel_tol=1e-6):
        raise InvalidInputError("torque field_magnitude must match the fitted field")
    t_d = np.asarray(t_d_list, dtype=float)
    f2 = np.asarray(f2_grid, dtype=float)
    if t_d.ndim != 1 or t_d.size < 1 or np.any(t_d < 0) or np.any(np.diff(t_d) <= 0):
        raise InvalidInputError("t_d_list must be non-negative and strictly increasing")
    width = 2.0 * rabi_frequency if probe_width is None else float(probe_width)
    if not width > 0:
        raise InvalidInputError("probe width must be positive")

    grid = t_d if t_d[0] == 0.0 else np.concatenate([[0.0], t_d])
    traj = deterministic_evolve(LibrationState(), trap, torque, grid)
    theta = traj.theta[-t_d.size :]

    n, u = _target_setup(fit.b_magnitude, fit.orientation, target_class)
    line = np.array([_tipped_frequency(n, u, th, fit.b_magnitude, constants) for th in theta])
    survive = np.exp(-t_d / relax.t1)
    contrast = survive[:, None] * lorentzian(f2[None, :], line[:, None], width)

    span = max(float(np.max(np.abs(theta))) * 1.5, np.radians(1.0))
    cal = angle_frequency_calibration(fit, target_class, (-span, span), 801, constants)
    centers = np.empty(t_d.size)
    amps = np.empty(t_d.size)
    for k in range(t_d.size):
        amps[k], centers[k] = _fit_peak(f2, contrast[k], width)
    track = cal.inverse(np.clip(centers, cal.frequency.min(), cal.frequency.max()))
    track = np.atleast_1d(track)
    m = (t_d > 0) & (t_d <= quadratic_window)
    if np.count_nonzero(m) >= 2:
        tt = t_d[m] ** 2
        a = float(tt @ track[m] / (tt @ tt))
    else:
        a = float("nan")
    return PumpProbeResult(t_d, f2, contrast, theta, line, centers, amps, track, a)


# ---------------------------------------------------------------- file I/O


def read_spectrum_text(source) -> tuple[np.ndarray, np.ndarray]:
    """Two whitespace- or comma-separated columns: frequency (Hz), signal."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source) as fh:
            text = fh.read()
    rows = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise InvalidInputError(f"line {lineno}: expected 2 columns, got {len(parts)}")
        try:
            rows.append((float(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise InvalidInputError(f"line {lineno}: {exc}") from None
    if len(rows) < 3:
        raise InvalidInputError("spectrum needs at least 3 rows")
    arr = np.array(rows)
    return arr[:, 0], arr[:, 1]


def find_peaks_in_spectrum(freq, signal, max_peaks: int = 8, prominence: float | None = None):
    """Line centres of the largest |signal - 1| features, refined by a parabola."""
    from scipy.signal import find_peaks

    freq = np.asarray(freq, dtype=float)
    dev = np.abs(np.asarray(signal, dtype=float) - 1.0)
    if prominence is None:
        prominence = 0.2 * float(dev.max())
    idx, props = find_peaks(dev, prominence=prominence)
    idx = idx[np.argsort(props["prominences"])[::-1][:max_peaks]]
    out = []
    for i in sorted(idx):
        if 0 < i < freq.size - 1:
            y0, y1, y2 = dev[i - 1], dev[i], dev[i + 1]
            den = y0 - 2 * y1 + y2
            shift = 0.5 * (y0 - y2) / den if den != 0 else 0.0
            out.append(freq[i] + shift * (freq[i + 1] - freq[i - 1]) / 2.0)
        else:
            out.append(freq[i])
    return np.array(out)


def fit_to_json(fit: FitResult) -> str:
    return json.dumps(fit.as_dict(), indent=2)


def calibration_to_csv(table: CalibrationTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["theta_d_rad", "frequency_Hz"])
    for t, f in zip(table.theta_d, table.frequency):
        w.writerow([repr(float(t)), repr(float(f))])
    return buf.getvalue()
