"""Experiment schemas and runners used by the command line."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .. import dicke, noise_budget
from ..errors import FitError
from ..fokker_planck import boltzmann_pdf, fokker_planck_evolve, grid_around
from ..libration import (
    LibrationState,
    SpinTorqueModel,
    TrapDrive,
    TrapParams,
    deterministic_evolve,
    langevin_ensemble,
    moment_of_inertia,
)
from ..mdmr import (
    CrystalOrientation,
    FitResult,
    angle_frequency_calibration,
    axis_field_angles,
    class_for_line,
    find_peaks_in_spectrum,
    fit_vector_field,
    forward_spectrum,
    pump_probe_simulate,
    read_spectrum_text,
)
from ..protocols import t1_protocol
from ..pulse_engine import RelaxationParams, echo_amplitude, echo_decay_time, rabi_trace
from ..readout import DetectionParams
from .config import REQUIRED, ConfigError, Param

INF = math.inf


@dataclass
class Table:
    columns: list
    rows: list
    results: dict = field(default_factory=dict)


# ------------------------------------------------------------ shared parts

TRAP = {
    "inertia": Param("inertia", None, "kg m^2; alternatively give trap.radius"),
    "radius": Param("length", None),
    "density": Param("density", 3515.0),
    "shape": Param("choice", "sphere", choices=("sphere", "cube_average", "ellipsoid")),
    "aspect": Param("number", 1.0),
    "omega": Param("rate", REQUIRED, "librational frequency, rad/s"),
    "gamma_g": Param("rate", REQUIRED, "gas damping rate, 1/s"),
    "drive_f_ac": Param("frequency", None),
    "drive_depth": Param("number", 0.0),
    "drive_phase": Param("angle", 0.0),
}
TORQUE = {
    "n_spins": Param("number", REQUIRED, "number of flipped spins"),
    "field": Param("field", REQUIRED, "field magnitude"),
    "phi": Param("angle", REQUIRED, "angle between field and NV axis"),
    "t1": Param("time", INF),
    "polarization": Param("number", 1.0),
}

RELAX = {
    "t1": Param("time", INF),
    "t2": Param("time", INF),
    "t2_star": Param("time", INF),
    "stretch": Param("number", 1.0),
}


def build_trap(c: dict) -> TrapParams:
    if c["inertia"] is None and c["radius"] is None:
        raise ConfigError("missing required field 'trap.inertia' (or give 'trap.radius')")
    if c["inertia"] is not None and c["radius"] is not None:
        raise ConfigError("give only one of 'trap.inertia' and 'trap.radius'")
    inertia = c["inertia"]
    if inertia is None:
        inertia = moment_of_inertia(c["radius"], c["density"], c["shape"], c["aspect"])
    drive = None
    if c["drive_f_ac"] is not None:
        drive = TrapDrive(c["drive_f_ac"], c["drive_depth"], c["drive_phase"])
    return TrapParams(inertia, c["omega"], c["gamma_g"], drive)


def build_torque(c: dict) -> SpinTorqueModel:
    return SpinTorqueModel(c["n_spins"], c["field"], c["phi"], c["t1"], 0.0, c["polarization"])


def build_relax(c: dict) -> RelaxationParams:
    return RelaxationParams(c["t1"], c["t2"], c["t2_star"], c["stretch"])


def _grid(t_max, n):
    if not t_max > 0 or n < 2:
        raise ConfigError("need t_max > 0 and at least 2 output times")
    return np.linspace(0.0, t_max, n)


# ---------------------------------------------------------------- spectrum

SPECTRUM = {
    "b_magnitude": Param("field", REQUIRED),
    "theta_nv": Param("angle", REQUIRED),
    "phi_k": Param("angle", REQUIRED),
    "width": Param("frequency", 5e6),
    "amplitude": Param("number", 0.05),
    "f_min": Param("frequency", 2.0e9),
    "f_max": Param("frequency", 3.8e9),
    "n_points": Param("int", 1801),
    "mode": Param("choice", "lines", choices=("lines", "curve")),
}


def run_spectrum(c, seed, workers):
    o = CrystalOrientation(c["theta_nv"], c["phi_k"])
    if c["mode"] == "lines":
        peaks, _ = forward_spectrum(c["b_magnitude"], o, c["width"], c["amplitude"])
        ang = np.degrees(axis_field_angles(o))
        rows = [[k, br, float(f), float(ang[k])] for (k, br), f in zip(peaks.labels, peaks.centers)]
        return Table(["class", "branch", "center_Hz", "axis_field_angle_deg"], rows)
    f = np.linspace(c["f_min"], c["f_max"], c["n_points"])
    _, curve = forward_spectrum(c["b_magnitude"], o, c["width"], c["amplitude"], f)
    return Table(["frequency_Hz", "signal"], [[float(a), float(b)] for a, b in zip(f, curve)])


# --------------------------------------------------------------------- fit

FIT = {
    "centers": Param("list:frequency", None, "measured line centres"),
    "spectrum_file": Param("str", None, "two-column text: frequency (Hz), signal"),
    "synthetic": {
        "b_magnitude": Param("field", None),
        "theta_nv": Param("angle", None),
        "phi_k": Param("angle", None),
        "noise": Param("frequency", 0.0),
    },
    "grid_theta": Param("int", 16),
    "grid_phi": Param("int", 16),
    "grid_b": Param("int", 5),
    "n_polish": Param("int", 10),
    "residual_threshold": Param("frequency", 5e6),
    "output": Param("choice", "fit", choices=("fit", "calibration")),
    "calibration": {
        "target_line": Param("frequency", None, "0 -> -1 line of the class to track"),
        "angle_min": Param("angle", -math.radians(10.0)),
        "angle_max": Param("angle", math.radians(10.0)),
        "n_points": Param("int", 401),
    },
}


def _fit_input(c, seed):
    syn = c["synthetic"]
    given = [c["centers"] is not None, c["spectrum_file"] is not None, syn["b_magnitude"] is not None]
    if sum(given) != 1:
        raise ConfigError("give exactly one of 'centers', 'spectrum_file' or 'synthetic.b_magnitude'")
    if c["centers"] is not None:
        return np.array(c["centers"])
    if c["spectrum_file"] is not None:
        try:
            f, s = read_spectrum_text(c["spectrum_file"])
        except OSError as exc:
            raise ConfigError(f"spectrum_file: {exc}") from None
        return find_peaks_in_spectrum(f, s)
    for k in ("theta_nv", "phi_k"):
        if syn[k] is None:
            raise ConfigError(f"missing required field 'synthetic.{k}'")
    peaks, _ = forward_spectrum(syn["b_magnitude"], CrystalOrientation(syn["theta_nv"], syn["phi_k"]))
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    return peaks.centers + rng.normal(0.0, syn["noise"], peaks.centers.size) if syn["noise"] > 0 else peaks.centers


def run_fit(c, seed, workers):
    centers = _fit_input(c, seed)
    fit = fit_vector_field(
        centers, (c["grid_theta"], c["grid_phi"], c["grid_b"]), c["n_polish"], c["residual_threshold"]
    )
    if not fit.converged:
        raise FitError(f"fit did not converge: {fit.message}")
    th, ph = fit.orientation.degrees()
    results = {
        "b_magnitude_T": fit.b_magnitude,
        "theta_nv_deg": th,
        "phi_k_deg": ph,
        "residual_Hz": fit.residual,
        "converged": fit.converged,
        "message": fit.message,
    }
    if c["output"] == "fit":
        rows = [[int(m), int(k), br, float(centers[m])] for m, k, br in fit.assignment]
        return Table(["measured_index", "class", "branch", "center_Hz"], rows, results)
    cal_c = c["calibration"]
    if cal_c["target_line"] is None:
        raise ConfigError("missing required field 'calibration.target_line'")
    k = class_for_line(fit, cal_c["target_line"])
    table = angle_frequency_calibration(fit, k, (cal_c["angle_min"], cal_c["angle_max"]), cal_c["n_points"])
    results["target_class"] = k
    rows = [[float(t), float(f)] for t, f in zip(table.theta_d, table.frequency)]
    return Table(["theta_d_rad", "frequency_Hz"], rows, results)


# -------------------------------------------------------------------- rabi

RABI = {
    "rabi_frequency": Param("frequency", REQUIRED),
    "t_max": Param("time", REQUIRED),
    "n_points": Param("int", 201),
    "pump_efficiency": Param("number", 1.0),
    "target": Param("choice", "minus", choices=("minus", "plus")),
    "relax": RELAX,
}


def run_rabi(c, seed, workers):
    t = np.linspace(0.0, c["t_max"], c["n_points"])
    r = c["relax"]
    relax = None if all(math.isinf(r[k]) for k in ("t1", "t2", "t2_star")) else build_relax(r)
    pop = rabi_trace(t, c["rabi_frequency"], relax, c["pump_efficiency"], c["target"])
    return Table(["duration_s", "target_population"], [[float(a), float(b)] for a, b in zip(t, pop)])


# -------------------------------------------------------------------- echo

ECHO = {
    "tau_max": Param("time", REQUIRED),
    "n_points": Param("int", 41),
    "detuning_sigma": Param("frequency", 0.0),
    "n_samples": Param("int", 256),
    "relax": RELAX,
}


def run_echo(c, seed, workers):
    relax = build_relax(c["relax"])
    taus = np.linspace(0.0, c["tau_max"], c["n_points"])
    amps = np.array([echo_amplitude(t, relax, c["detuning_sigma"], c["n_samples"], seed) for t in taus])
    results = {}
    if np.isfinite(relax.t2):
        results["fitted_t2_s"] = echo_decay_time(taus, amps)
    return Table(["tau_s", "echo_amplitude"], [[float(a), float(b)] for a, b in zip(taus, amps)], results)


# ---------------------------------------------------------------------- t1

T1 = {
    "trap": TRAP,
    "torque": TORQUE,
    "relax": RELAX,
    "detection": {
        "base_rate": Param("rate", REQUIRED, "count rate before attenuation, 1/s"),
        "slope": Param("number", 0.0, "count rate change per radian"),
        "attenuation": Param("number", 1e4),
        "bin_width": Param("time", 1e-4),
        "linear_range": Param("angle", INF),
    },
    "protocol": {
        "delay_max": Param("time", REQUIRED),
        "n_delays": Param("int", 7),
        "n_shots": Param("int", 1),
        "pump_efficiency": Param("number", 1.0),
        "integral_end": Param("time", 5e-3),
        "pre": Param("time", 1e-3),
        "duration": Param("time", 10e-3),
    },
}


def run_t1(c, seed, workers):
    d, p = c["detection"], c["protocol"]
    det = DetectionParams(d["base_rate"], d["slope"], d["attenuation"], d["bin_width"], d["linear_range"])
    delays = np.linspace(0.0, p["delay_max"], p["n_delays"])
    res = t1_protocol(
        delays, build_trap(c["trap"]), build_torque(c["torque"]), build_relax(c["relax"]), det, seed,
        p["pump_efficiency"], p["integral_end"], p["pre"], p["duration"], p["n_shots"],
    )
    rows = [[float(a), float(b)] for a, b in zip(res.delays, res.integrals)]
    return Table(["delay_s", "signal_integral"], rows, {"fitted_t1_s": res.fitted_t1, "fitted_amplitude": res.fitted_amplitude})


# -------------------------------------------------------------- pump-probe

PUMP_PROBE = {
    "b_magnitude": Param("field", REQUIRED),
    "theta_nv": Param("angle", REQUIRED),
    "phi_k": Param("angle", REQUIRED),
    "target_line": Param("frequency", REQUIRED, "pumped 0 -> -1 line"),
    "trap": TRAP,
    "n_spins": Param("number", REQUIRED),
    "relax": RELAX,
    "t_d_max": Param("time", 300e-6),
    "n_delays": Param("int", 16),
    "f2_min": Param("frequency", REQUIRED),
    "f2_max": Param("frequency", REQUIRED),
    "n_f2": Param("int", 281),
    "rabi_frequency": Param("frequency", 5e6),
    "probe_width": Param("frequency", None),
    "quadratic_window": Param("time", 100e-6),
    "mode": Param("choice", "track", choices=("track", "map")),
}


def run_pump_probe(c, seed, workers):
    o = CrystalOrientation(c["theta_nv"], c["phi_k"])
    fit = FitResult(c["b_magnitude"], o, 0.0, [])
    k = class_for_line(fit, c["target_line"])
    phi = float(axis_field_angles(o)[k])
    relax = build_relax(c["relax"])
    torque = SpinTorqueModel(c["n_spins"], c["b_magnitude"], phi, relax.t1)
    t_d = np.linspace(0.0, c["t_d_max"], c["n_delays"])
    f2 = np.linspace(c["f2_min"], c["f2_max"], c["n_f2"])
    r = pump_probe_simulate(
        fit, build_trap(c["trap"]), torque, relax, t_d, f2, c["probe_width"], c["rabi_frequency"], k, c["quadratic_window"]
    )
    results = {
        "target_class": k,
        "phi_rad": phi,
        "line_shift_Hz": float(r.peak_center[-1] - r.peak_center[0]),
        "quadratic_coefficient_rad_per_s2": r.quadratic_coefficient,
    }
    if c["mode"] == "map":
        rows = [[float(t), float(f), float(r.contrast[i, j])] for i, t in enumerate(t_d) for j, f in enumerate(f2)]
        return Table(["t_d_s", "f2_Hz", "contrast"], rows, results)
    rows = [
        [float(a), float(b), float(cc), float(d), float(e), float(g)]
        for a, b, cc, d, e, g in zip(t_d, r.theta_true, r.line_true, r.peak_center, r.peak_amplitude, r.theta_track)
    ]
    cols = ["t_d_s", "theta_rad", "line_Hz", "peak_center_Hz", "peak_amplitude", "theta_track_rad"]
    return Table(cols, rows, results)


# ---------------------------------------------------------------- dynamics

_DYN = {
    "trap": TRAP,
    "torque": TORQUE,
    "temperature": Param("temperature", REQUIRED),
    "t_max": Param("time", REQUIRED),
    "n_times": Param("int", 31),
}

LANGEVIN = dict(_DYN, n_traj=Param("int", 10000), block_size=Param("int", 1024))

FOKKER_PLANCK = dict(
    _DYN,
    grid={
        "n_theta": Param("int", 257),
        "n_theta_dot": Param("int", 257),
        "n_sigma": Param("number", 6.0),
        "cfl": Param("number", 0.4),
    },
)


def run_langevin(c, seed, workers):
    trap, torque = build_trap(c["trap"]), build_torque(c["torque"])
    t = _grid(c["t_max"], c["n_times"])
    res = langevin_ensemble(LibrationState(), trap, torque, t, c["temperature"], c["n_traj"], seed, workers, c["block_size"])
    det = deterministic_evolve(LibrationState(), trap, torque, t)
    rows = [[float(a), float(b), float(v), float(s), float(d)] for a, b, v, s, d in zip(t, res.mean, res.variance, res.stderr, det.theta)]
    return Table(["t_s", "mean_theta_rad", "var_theta_rad2", "stderr_rad", "deterministic_theta_rad"], rows)


def run_fokker_planck(c, seed, workers):
    trap, torque = build_trap(c["trap"]), build_torque(c["torque"])
    t = _grid(c["t_max"], c["n_times"])
    g = c["grid"]
    det = deterministic_evolve(LibrationState(), trap, torque, t)
    th, v = grid_around(det, trap, c["temperature"], g["n_theta"], g["n_theta_dot"], g["n_sigma"])
    res = fokker_planck_evolve(boltzmann_pdf(th, v, trap, c["temperature"]), trap, torque, c["temperature"], t, cfl=g["cfl"])
    rows = [[float(a), float(b), float(m), float(d)] for a, b, m, d in zip(t, res.first_moments, res.mass, det.theta)]
    return Table(["t_s", "first_moment_rad", "mass", "deterministic_theta_rad"], rows)


# ------------------------------------------------------------- sensitivity

SENSITIVITY = {
    "delta_x": Param("number", 1e4),
    "x0": Param("number", 1e4),
    "contrast": Param("number", 0.5),
    "ramsey_time": Param("time", 100e-9),
    "dead_time": Param("time", 10e-3),
    "n_spins": Param("number", 1e8),
    "field": Param("field", 0.027),
    "inertia": Param("inertia", REQUIRED),
    "omega0": Param("rate", 2.0 * math.pi * 1e3),
    "gas_temp": Param("temperature", 300.0),
    "gamma_g": Param("rate", 6280.0),
    "theta_span": Param("angle", math.radians(4.0)),
    "gamma_e": Param("number", 28.0e9),
    "attenuation": Param("number", 1e4),
    "fast_ramsey_time": Param("time", 1e-6),
    "fast_dead_time": Param("time", 100e-6),
    "conversion_time": Param("time", 100e-6),
    "measurement_time": Param("time", 1.0),
    "rotation_time": Param("time", 0.0),
}


def run_sensitivity(c, seed, workers):
    rows = noise_budget.sensitivity_table(noise_budget.SensitivityInputs(**c))
    return Table(["quantity", "value", "unit"], [[q, float(v), u] for q, v, u in rows])


# ------------------------------------------------------------------- dicke

DICKE = {
    "n": Param("list:int", REQUIRED, "spin numbers"),
    "theta_per_spin": Param("angle", None),
}


def run_dicke(c, seed, workers):
    rows, results = [], {}
    for n in c["n"]:
        w = dicke.dicke_weights(n)
        for k, (a, p) in enumerate(zip(w.weights, w.probabilities)):
            rows.append([n, k, float(a), float(p)])
        if c["theta_per_spin"] is not None:
            d = dicke.orientation_distribution(n, c["theta_per_spin"])
            results[f"n{n}_mean_rad"] = d.mean
            results[f"n{n}_std_rad"] = d.std
    return Table(["n", "k", "weight", "probability"], rows, results)


@dataclass(frozen=True)
class Experiment:
    schema: dict
    run: Callable


EXPERIMENTS = {
    "spectrum": Experiment(SPECTRUM, run_spectrum),
    "fit": Experiment(FIT, run_fit),
    "rabi": Experiment(RABI, run_rabi),
    "echo": Experiment(ECHO, run_echo),
    "t1": Experiment(T1, run_t1),
    "pump-probe": Experiment(PUMP_PROBE, run_pump_probe),
    "langevin": Experiment(LANGEVIN, run_langevin),
    "fokker-planck": Experiment(FOKKER_PLANCK, run_fokker_planck),
    "sensitivity": Experiment(SENSITIVITY, run_sensitivity),
    "dicke": Experiment(DICKE, run_dicke),
}
