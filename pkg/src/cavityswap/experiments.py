"""Config-driven experiment runners, one per figure-style measurement.

Each runner takes a resolved configuration dict plus an output directory,
writes CSV data (with a ``#``-prefixed header block) and a ``report.txt``
containing the full resolved parameter set and the results, and returns
the results dict. Runners are deterministic: repeated invocations produce
byte-identical files, independent of the worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from functools import partial

import numpy as np

from . import fluxmap
from .analysis import (NoOscillationError, dwell_times,
                       fit_exponential_decay, fit_phase_slope,
                       oscillation_frequency)
from .core import (ComplexAmplitudePair, ModeParams, PumpDrive, RectPulse,
                   ValidationError, cw_envelope, mode_params_from_q)
from .dynamics import SimConfig, integrate_checked, reflection_spectrum
from .sequences import (PulseSequence, Segment, calibrate_swap_time,
                        demodulate, parse_sequence, run_sequence_checked,
                        without_swaps)
from .units import Quantity, UnitError, parse_quantity

TWO_PI = 2.0 * math.pi

_LAB_FRAME_STEP_CAP = 2e7  # refuse lab-frame runs that would need more steps


# ---------------------------------------------------------------------------
# configuration schemas

_COMMON_KEYS = {
    "freq_a": ("freq", TWO_PI * 8.70e9),
    "q_int_a": ("dimensionless", 900e3),
    "q_ext_a": ("dimensionless", 50e3),
    "freq_b": ("freq", TWO_PI * 9.33e9),
    "t1_b": ("time", 14.9e-6),
    "pump_power": ("power_dbm", -52.0),
    "flux_calib": ("dimensionless", fluxmap.DEFAULT_FLUX_CALIB),
    "delta_phi": ("dimensionless", 0.0),  # 0 = derive from pump_power
    "gp": ("freq", 0.0),                  # 0 = derive from the flux curves
    "frame": ("str", "rotating"),
    "jobs": ("int", 1),
    "tolerance": ("dimensionless", 1e-6),
    "deterministic": ("str", "true"),
}

_RUNNER_KEYS = {
    "splitting": {
        "probe_span": ("freq", TWO_PI * 8e6),
        "probe_count": ("int", 801),
        "pump_span": ("freq", TWO_PI * 8e6),
        "pump_count": ("int", 41),
    },
    "chevron": {
        "delta_span": ("freq", TWO_PI * 8e6),
        "delta_count": ("int", 17),
        "t_end": ("time", 8e-6),
        "points_per_cycle": ("int", 800),
        "nbar": ("dimensionless", 1.0),
    },
    "power_sweep": {
        "power_start": ("power_dbm", -64.0),
        "power_stop": ("power_dbm", -44.0),
        "power_count": ("int", 11),
        "n_cycles": ("dimensionless", 12.0),
        "points_per_cycle": ("int", 1000),
    },
    "store_retrieve": {
        "delay_start": ("time", 1e-6),
        "delay_stop": ("time", 55e-6),
        "delay_count": ("int", 12),
        "t_swap": ("time", 0.0),  # 0 = calibrate a full swap
        "load_dur": ("time", 20e-6),
        "readout_dur": ("time", 0.0),  # 0 = 5/gamma_A
        "nbar": ("dimensionless", 10.0),
        "points_per_cycle": ("int", 400),
    },
    "phase_sweep": {
        "phase_count": ("int", 16),
        "delay": ("time", 5e-6),
        "t_swap": ("time", 0.0),
        "load_dur": ("time", 20e-6),
        "readout_dur": ("time", 0.0),
        "nbar": ("dimensionless", 10.0),
        "points_per_cycle": ("int", 400),
    },
    "custom_sequence": {
        "sequence": ("str", ""),
        "points_per_cycle": ("int", 400),
    },
}


def runner_schema(runner: str) -> dict:
    if runner not in _RUNNER_KEYS:
        raise ValidationError(f"unknown runner {runner!r}")
    schema = dict(_COMMON_KEYS)
    schema.update(_RUNNER_KEYS[runner])
    return schema


def parse_config_file(path) -> dict:
    """Read a flat key=value config file (# comments, unit suffixes)."""
    overrides = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, eq, val = line.partition("=")
            if eq != "=":
                raise ValidationError(f"{path}:{lineno}: expected key = value")
            overrides[key.strip()] = val.strip()
    return overrides


def resolve_config(runner: str, overrides: dict | None = None) -> dict:
    """Apply overrides to the runner defaults with unit/kind validation."""
    schema = runner_schema(runner)
    cfg = {key: default for key, (_, default) in schema.items()}
    for key, raw in (overrides or {}).items():
        if key not in schema:
            raise ValidationError(f"unknown config key {key!r} for runner {runner!r}")
        kind = schema[key][0]
        if kind == "str":
            cfg[key] = str(raw)
            continue
        if isinstance(raw, str):
            q = parse_quantity(raw)
            if kind == "int":
                if q.kind != "dimensionless" or q.value != int(q.value):
                    raise ValidationError(f"{key!r} must be an integer, got {raw!r}")
                cfg[key] = int(q.value)
                continue
            if q.kind != kind:
                raise ValidationError(
                    f"{key!r} must be a {kind} value, got {raw!r}")
            cfg[key] = q.value
        else:
            cfg[key] = int(raw) if kind == "int" else float(raw)
    _validate_config(runner, cfg)
    return cfg


def _validate_config(runner, cfg):
    if cfg["frame"] not in ("lab", "rotating"):
        raise ValidationError(f"frame must be lab or rotating, got {cfg['frame']!r}")
    if cfg["deterministic"].lower() != "true":
        raise ValidationError("deterministic execution cannot be disabled")
    if cfg["jobs"] < 1:
        raise ValidationError("jobs must be >= 1")
    for key in ("probe_count", "pump_count", "delta_count", "power_count",
                "delay_count", "phase_count"):
        if key in cfg and cfg[key] < 2:
            raise ValidationError(f"sweep count {key} must be >= 2")
    # constructing the modes validates all physical overrides
    _modes(cfg)


def _render_cfg_value(kind, value):
    if kind == "freq":
        return f"{value / TWO_PI:.12g}Hz"
    if kind == "time":
        return f"{value:.12g}s"
    if kind == "angle":
        return f"{value:.12g}rad"
    if kind == "power_dbm":
        return f"{value:.12g}dBm"
    return f"{value}"


# ---------------------------------------------------------------------------
# shared pieces

def _modes(cfg):
    mode_a = mode_params_from_q(cfg["freq_a"], cfg["q_int_a"], cfg["q_ext_a"])
    mode_b = ModeParams(cfg["freq_b"], 1.0 / cfg["t1_b"], 0.0)
    return mode_a, mode_b


def _resolve_gp(cfg) -> float:
    """Coupling rate from the config: explicit gp, or flux-pump conversion."""
    if cfg["gp"] > 0.0:
        return cfg["gp"]
    curve_a, curve_b, coupler = fluxmap.calibrated_curves(
        omega_a=cfg["freq_a"], omega_b=cfg["freq_b"])
    delta_phi = cfg["delta_phi"]
    if delta_phi == 0.0:
        delta_phi = fluxmap.pump_power_to_flux(cfg["pump_power"], cfg["flux_calib"])
    return fluxmap.coupling_rate(curve_a, curve_b,
                                 replace(coupler, delta_phi=delta_phi))


def _check_lab_frame_cost(cfg, duration, points_per_cycle):
    if cfg["frame"] != "lab":
        return
    steps = duration * points_per_cycle * max(cfg["freq_a"], cfg["freq_b"]) / TWO_PI
    if steps > _LAB_FRAME_STEP_CAP:
        raise ValidationError(
            f"lab-frame run would need ~{steps:.1e} steps; use scaled-down "
            "frequencies for lab-frame validation")


def _pmap(fn, items, jobs):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _write_csv(path, meta_lines, colnames, rows):
    with open(path, "w") as fh:
        for line in meta_lines:
            fh.write(f"# {line}\n")
        fh.write(",".join(colnames) + "\n")
        for row in rows:
            fh.write(",".join(
                v if isinstance(v, str) else f"{v:.17g}" for v in row) + "\n")


def _write_report(outdir, runner, cfg, results):
    schema = runner_schema(runner)
    path = os.path.join(outdir, "report.txt")
    with open(path, "w") as fh:
        fh.write(f"runner = {runner}\n")
        for key in sorted(cfg):
            kind = schema[key][0]
            if kind in ("str",):
                fh.write(f"config.{key} = {cfg[key]}\n")
            elif kind == "int":
                fh.write(f"config.{key} = {cfg[key]}\n")
            else:
                fh.write(f"config.{key} = {_render_cfg_value(kind, cfg[key])}\n")
        for key in sorted(results):
            val = results[key]
            if isinstance(val, float):
                fh.write(f"result.{key} = {val:.12g}\n")
            else:
                fh.write(f"result.{key} = {val}\n")
    return path


def _uniform_energy_series(trace):
    """(energy_a, dt) on a strictly uniform time grid (trailing sample of an
    off-stride record is dropped)."""
    t = trace.t
    dt = t[1] - t[0]
    if t.size > 2 and abs((t[-1] - t[-2]) - dt) > 1e-9 * dt:
        t = t[:-1]
        ea = trace.energy_a[:-1]
    else:
        ea = trace.energy_a
    return ea, float(dt)


def _swap_oscillation_frequency(trace, mode_a, mode_b) -> float:
    """Oscillation frequency of the readout-mode occupancy fraction.

    Using |a|^2/(|a|^2+|b|^2) instead of |a|^2 divides out the overall
    energy decay, so the FFT peak stays sharp for lossy modes at any
    pump detuning."""
    ea, dt = _uniform_energy_series(trace)
    eb = trace.energy_b[:ea.size]
    total = ea + eb
    floor = np.max(total) * 1e-300
    return oscillation_frequency(ea / np.maximum(total, floor), dt)


# ---------------------------------------------------------------------------
# sweep workers (module level so they pickle for the process pool)

def _chevron_worker(cfg, t_end, g, delta):
    mode_a, mode_b = _modes(cfg)
    omega_p = abs(mode_a.omega - mode_b.omega) + delta
    pump = PumpDrive(omega_p, 0.0, RectPulse(g, -1.0, 2.0 * t_end))
    omega_fast = math.sqrt(delta * delta + 4.0 * g * g)
    dt = TWO_PI / (cfg["points_per_cycle"] * max(omega_fast, mode_a.gamma_total))
    steps = int(math.ceil(t_end / dt))
    stride = max(1, steps // 4096)
    config = SimConfig(cfg["frame"], dt, t_end, 0.0, stride, cfg["tolerance"])
    init = ComplexAmplitudePair(complex(math.sqrt(cfg.get("nbar", 1.0))), 0.0j, 0.0)
    trace, rel = integrate_checked(init, (mode_a, mode_b), pump, None, config)
    ea, dt_rec = _uniform_energy_series(trace)
    omega_e = _swap_oscillation_frequency(trace, mode_a, mode_b)
    return ea, dt_rec, omega_e, rel


def _power_worker(cfg, curves, coupler, p_dbm):
    mode_a, mode_b = _modes(cfg)
    delta_phi = fluxmap.pump_power_to_flux(p_dbm, cfg["flux_calib"])
    g = fluxmap.coupling_rate(curves[0], curves[1],
                              replace(coupler, delta_phi=delta_phi))
    if g == 0.0:
        return g, None, 0.0
    omega_p = abs(mode_a.omega - mode_b.omega)
    t_end = cfg["n_cycles"] * TWO_PI / (2.0 * g)
    pump = PumpDrive(omega_p, 0.0, RectPulse(g, -1.0, 2.0 * t_end))
    dt = TWO_PI / (cfg["points_per_cycle"] * max(2.0 * g, mode_a.gamma_total))
    steps = int(math.ceil(t_end / dt))
    stride = max(1, steps // 4096)
    config = SimConfig(cfg["frame"], dt, t_end, 0.0, stride, cfg["tolerance"])
    init = ComplexAmplitudePair(1.0 + 0.0j, 0.0j, 0.0)
    trace, rel = integrate_checked(init, (mode_a, mode_b), pump, None, config)
    try:
        omega_e = _swap_oscillation_frequency(trace, mode_a, mode_b)
    except NoOscillationError:
        return g, None, rel
    return g, omega_e, rel


def _sr_sequence(cfg, g, t_swap, delay, phase2) -> PulseSequence:
    mode_specs = {
        "A": {"freq": Quantity(cfg["freq_a"], "GHz", "freq"),
              "q_int": Quantity(cfg["q_int_a"], "", "dimensionless"),
              "q_ext": Quantity(cfg["q_ext_a"], "", "dimensionless")},
        "B": {"freq": Quantity(cfg["freq_b"], "GHz", "freq"),
              "t1": Quantity(cfg["t1_b"], "us", "time")},
    }
    readout = cfg["readout_dur"]
    if readout == 0.0:
        mode_a, _ = _modes(cfg)
        readout = 5.0 / mode_a.gamma_total

    def q_time(v):
        return Quantity(v, "us", "time")

    segs = (
        Segment("load", {"dur": q_time(cfg["load_dur"]),
                         "nbar": Quantity(cfg["nbar"], "", "dimensionless")}),
        Segment("swap", {"dur": q_time(t_swap),
                         "gp": Quantity(g, "MHz", "freq"),
                         "delta": Quantity(0.0, "Hz", "freq"),
                         "phase": Quantity(0.0, "rad", "angle")}),
        Segment("delay", {"dur": q_time(delay)}),
        Segment("swap", {"dur": q_time(t_swap),
                         "gp": Quantity(g, "MHz", "freq"),
                         "delta": Quantity(0.0, "Hz", "freq"),
                         "phase": Quantity(phase2, "rad", "angle")}),
        Segment("readout", {"dur": q_time(readout)}),
    )
    return PulseSequence(mode_specs, segs)


def _run_retrieval(cfg, g, t_swap, delay, phase2):
    """One storage/retrieval trajectory; returns demodulated readout IQ,
    retrieved energy, dwell times over the correction window, and the
    convergence diff."""
    seq = _sr_sequence(cfg, g, t_swap, delay, phase2)
    trace, rel = run_sequence_checked(
        seq, tolerance=cfg["tolerance"], frame=cfg["frame"],
        points_per_cycle=cfg["points_per_cycle"])
    windows = seq.windows()
    readout_win = (windows[-1][1], windows[-1][2])
    i, q, energy = demodulate(trace, trace.meta["omega_a"], readout_win)
    correction_win = (windows[0][2], windows[-1][1])  # load end -> readout start
    t_a, t_b = dwell_times(trace, correction_win)
    return i, q, energy, t_a, t_b, rel


def _retrieval_reference(cfg, g, t_swap, delay, phase2=0.0):
    """Leaked energy of the same load with the swap pulses disabled."""
    seq = without_swaps(_sr_sequence(cfg, g, t_swap, delay, phase2))
    trace, rel = run_sequence_checked(
        seq, tolerance=cfg["tolerance"], frame=cfg["frame"],
        points_per_cycle=cfg["points_per_cycle"])
    windows = seq.windows()
    ref_win = (windows[0][2], windows[-1][2])  # everything after the load
    _, _, energy = demodulate(trace, trace.meta["omega_a"], ref_win)
    return energy, rel


def _delay_worker(cfg, g, t_swap, delay):
    i, q, energy, t_a, t_b, rel = _run_retrieval(cfg, g, t_swap, delay, 0.0)
    return energy, t_a, t_b, rel


def _phase_worker(cfg, g, t_swap, delay, phase):
    i, q, energy, t_a, t_b, rel = _run_retrieval(cfg, g, t_swap, delay, phase)
    return i, q, energy, rel


def _resolve_t_swap(cfg, g, mode_a, mode_b) -> float:
    if cfg["t_swap"] > 0.0:
        return cfg["t_swap"]
    t_pi = math.pi / (2.0 * g)
    return calibrate_swap_time((mode_a, mode_b), g, (0.25 * t_pi, 2.0 * t_pi))


# ---------------------------------------------------------------------------
# runners

def run_splitting(cfg, outdir):
    """Steady-state reflection of the readout mode vs pump detuning."""
    os.makedirs(outdir, exist_ok=True)
    mode_a, mode_b = _modes(cfg)
    g = _resolve_gp(cfg)
    probes = mode_a.omega + np.linspace(-0.5, 0.5, cfg["probe_count"]) * cfg["probe_span"]
    pump_deltas = np.linspace(-0.5, 0.5, cfg["pump_count"]) * cfg["pump_span"]
    diff = abs(mode_a.omega - mode_b.omega)

    rows = []
    center_mag = None
    k_center = int(np.argmin(np.abs(pump_deltas)))
    for k, delta in enumerate(pump_deltas):
        pump = PumpDrive(diff + delta, 0.0, cw_envelope(g))
        gam = reflection_spectrum(mode_a, mode_b, pump, probes)
        mag = np.abs(gam)
        if k == k_center:
            center_mag = mag
        for w, m in zip(probes, mag):
            rows.append((delta / TWO_PI, (w - mode_a.omega) / TWO_PI, m))
    _write_csv(os.path.join(outdir, "spectrum.csv"),
               [f"runner = splitting", f"gp_hz = {g / TWO_PI:.12g}"],
               ["pump_detuning_hz", "probe_offset_hz", "reflection_abs"], rows)

    separation = _dip_separation(probes, center_mag)
    results = {
        "gp_hz": g / TWO_PI,
        "dip_separation_hz": separation / TWO_PI,
        "expected_splitting_hz": 2.0 * g / TWO_PI,
        "dip_count": _count_dips(center_mag),
    }
    _write_report(outdir, "splitting", cfg, results)
    return results


def _count_dips(mag):
    interior = (mag[1:-1] < mag[:-2]) & (mag[1:-1] < mag[2:])
    return int(np.sum(interior))


def _dip_separation(omegas, mag):
    """Frequency separation of the two deepest local minima (0 if single dip),
    each refined by a parabola through its neighbours."""
    idx = np.where((mag[1:-1] < mag[:-2]) & (mag[1:-1] < mag[2:]))[0] + 1
    if idx.size < 2:
        return 0.0
    deepest = idx[np.argsort(mag[idx])][:2]
    dw = omegas[1] - omegas[0]
    refined = []
    for k in sorted(deepest):
        ya, yb, yc = mag[k - 1], mag[k], mag[k + 1]
        denom = ya - 2.0 * yb + yc
        shift = 0.0 if denom == 0.0 else 0.5 * (ya - yc) / denom
        refined.append(omegas[k] + shift * dw)
    return abs(refined[1] - refined[0])


def run_chevron(cfg, outdir):
    """Swap oscillations of the readout energy vs pump detuning and time."""
    os.makedirs(outdir, exist_ok=True)
    mode_a, mode_b = _modes(cfg)
    g = _resolve_gp(cfg)
    t_end = cfg["t_end"]
    _check_lab_frame_cost(cfg, t_end * cfg["delta_count"], cfg["points_per_cycle"])
    deltas = np.linspace(-0.5, 0.5, cfg["delta_count"]) * cfg["delta_span"]

    out = _pmap(partial(_chevron_worker, cfg, t_end, g), deltas, cfg["jobs"])

    map_rows = []
    ridge_rows = []
    omega_es = []
    max_rel = 0.0
    for delta, (ea, dt_rec, omega_e, rel) in zip(deltas, out):
        max_rel = max(max_rel, rel)
        omega_es.append(omega_e)
        ridge_rows.append((delta / TWO_PI, omega_e / TWO_PI))
        for k, e in enumerate(ea):
            map_rows.append((delta / TWO_PI, k * dt_rec, e))
    _write_csv(os.path.join(outdir, "chevron_map.csv"),
               ["runner = chevron", f"gp_hz = {g / TWO_PI:.12g}"],
               ["pump_detuning_hz", "t_s", "energy_a"], map_rows)
    _write_csv(os.path.join(outdir, "chevron_ridge.csv"),
               ["runner = chevron", f"gp_hz = {g / TWO_PI:.12g}"],
               ["pump_detuning_hz", "oscillation_hz"], ridge_rows)

    omega_es = np.asarray(omega_es)
    # sqrt(D^2 + 4 g^2) model: linear least squares for g^2
    g_fit_sq = float(np.mean(omega_es**2 - deltas**2)) / 4.0
    g_fit = math.sqrt(max(g_fit_sq, 0.0))
    model = np.sqrt(deltas**2 + 4.0 * g_fit**2)
    rms_rel = float(np.sqrt(np.mean((omega_es / model - 1.0) ** 2)))
    k0 = int(np.argmin(np.abs(deltas)))
    results = {
        "gp_hz": g / TWO_PI,
        "gp_fit_hz": g_fit / TWO_PI,
        "ridge_min_hz": float(np.min(omega_es)) / TWO_PI,
        "ridge_center_hz": float(omega_es[k0]) / TWO_PI,
        "model_rms_rel": rms_rel,
        "convergence_rel_diff": max_rel,
    }
    _write_report(outdir, "chevron", cfg, results)
    return results


def run_power_sweep(cfg, outdir):
    """Extracted swap rate vs pump power at zero detuning."""
    os.makedirs(outdir, exist_ok=True)
    curve_a, curve_b, coupler = fluxmap.calibrated_curves(
        omega_a=cfg["freq_a"], omega_b=cfg["freq_b"])
    powers = np.linspace(cfg["power_start"], cfg["power_stop"], cfg["power_count"])
    _check_lab_frame_cost(cfg, 1e-4, cfg["points_per_cycle"])

    out = _pmap(partial(_power_worker, cfg, (curve_a, curve_b), coupler),
                powers, cfg["jobs"])

    rows = []
    amps = []
    g_ext = []
    max_rel = 0.0
    n_silent = 0
    for p, (g_true, omega_e, rel) in zip(powers, out):
        max_rel = max(max_rel, rel)
        amp = math.sqrt(10.0 ** (p / 10.0))
        if omega_e is None:
            n_silent += 1
            rows.append((p, amp, g_true / TWO_PI, "no_oscillation"))
            continue
        rows.append((p, amp, g_true / TWO_PI, f"{omega_e / (2.0 * TWO_PI):.17g}"))
        amps.append(amp)
        g_ext.append(omega_e / 2.0)
    _write_csv(os.path.join(outdir, "power_sweep.csv"),
               ["runner = power_sweep"],
               ["power_dbm", "amp_sqrt_mw", "gp_flux_model_hz", "gp_extracted_hz"],
               rows)

    amps = np.asarray(amps)
    g_ext = np.asarray(g_ext)
    results = {"convergence_rel_diff": max_rel, "points_no_oscillation": n_silent}
    if amps.size >= 2:
        slope, intercept = np.polyfit(amps, g_ext, 1)
        pred = slope * amps + intercept
        ss_res = float(np.sum((g_ext - pred) ** 2))
        ss_tot = float(np.sum((g_ext - np.mean(g_ext)) ** 2))
        results.update({
            "slope_hz_per_sqrt_mw": slope / TWO_PI,
            "intercept_hz": intercept / TWO_PI,
            "r_squared": 1.0 - ss_res / ss_tot,
        })
    _write_report(outdir, "power_sweep", cfg, results)
    return results


def run_store_retrieve(cfg, outdir):
    """Retrieved energy vs storage delay, with the storage-decay fit."""
    os.makedirs(outdir, exist_ok=True)
    mode_a, mode_b = _modes(cfg)
    g = _resolve_gp(cfg)
    t_swap = _resolve_t_swap(cfg, g, mode_a, mode_b)
    delays = np.linspace(cfg["delay_start"], cfg["delay_stop"], cfg["delay_count"])
    total = cfg["load_dur"] + cfg["delay_stop"] + 10.0 / mode_a.gamma_total
    _check_lab_frame_cost(cfg, total, cfg["points_per_cycle"])

    reference, ref_rel = _retrieval_reference(cfg, g, t_swap, float(delays[-1]))
    out = _pmap(partial(_delay_worker, cfg, g, t_swap), delays, cfg["jobs"])

    rows = []
    retrieved = []
    dwell = []
    max_rel = ref_rel
    for delay, (energy, t_a, t_b, rel) in zip(delays, out):
        max_rel = max(max_rel, rel)
        retrieved.append(energy)
        dwell.append((t_a, t_b))
        rows.append((delay, energy, energy / reference))
    _write_csv(os.path.join(outdir, "store_retrieve.csv"),
               ["runner = store_retrieve", f"gp_hz = {g / TWO_PI:.12g}",
                f"t_swap_s = {t_swap:.12g}", f"reference = {reference:.12g}"],
               ["delay_s", "retrieved_energy", "eta"], rows)

    retrieved = np.asarray(retrieved)
    results = {
        "gp_hz": g / TWO_PI,
        "t_swap_s": t_swap,
        "reference_energy": reference,
        "eta_shortest": float(retrieved[0]) / reference,
        "convergence_rel_diff": max_rel,
        "configured_tau_s": 1.0 / mode_b.gamma_total if mode_b.gamma_total else math.inf,
    }
    try:
        fit = fit_exponential_decay(delays, retrieved)
        results["tau_s"] = fit.params["tau"]
        results["fit_residual_rms"] = fit.residual_rms
        results["tau_degenerate"] = "false"
    except Exception as exc:  # constant curve for a lossless storage mode
        results["tau_degenerate"] = "true"
        results["tau_note"] = type(exc).__name__

    # loss-corrected efficiency of the shortest-delay run
    t_a, t_b = dwell[0]
    results["eta_prime"] = results["eta_shortest"] * math.exp(
        mode_a.gamma_total * t_a + mode_b.gamma_total * t_b)
    _write_report(outdir, "store_retrieve", cfg, results)
    return results


def run_phase_sweep(cfg, outdir):
    """Retrieved IQ vs the relative phase of the retrieval pump pulse."""
    os.makedirs(outdir, exist_ok=True)
    mode_a, mode_b = _modes(cfg)
    g = _resolve_gp(cfg)
    t_swap = _resolve_t_swap(cfg, g, mode_a, mode_b)
    phases = np.arange(cfg["phase_count"]) * TWO_PI / cfg["phase_count"]
    delay = cfg["delay"]
    total = cfg["load_dur"] + delay + 10.0 / mode_a.gamma_total
    _check_lab_frame_cost(cfg, total * cfg["phase_count"], cfg["points_per_cycle"])

    reference, ref_rel = _retrieval_reference(cfg, g, t_swap, delay)
    out = _pmap(partial(_phase_worker, cfg, g, t_swap, delay), phases, cfg["jobs"])

    rows = []
    iqs = []
    energies = []
    max_rel = ref_rel
    for phase, (i, q, energy, rel) in zip(phases, out):
        max_rel = max(max_rel, rel)
        iqs.append(complex(i, q))
        energies.append(energy)
        rows.append((phase, i, q, energy))
    _write_csv(os.path.join(outdir, "phase_sweep.csv"),
               ["runner = phase_sweep", f"gp_hz = {g / TWO_PI:.12g}",
                f"t_swap_s = {t_swap:.12g}", f"reference = {reference:.12g}"],
               ["pump_phase_rad", "i", "q", "energy"], rows)

    iqs = np.asarray(iqs)
    energies = np.asarray(energies)
    eta = float(np.mean(energies)) / reference
    mags = np.abs(iqs)
    fit = fit_phase_slope(phases, np.angle(iqs))

    # circular-locus check: scale so the radius is sqrt(eta), then compare
    # the polygon area against pi*eta (with the n-gon correction factor)
    scale = math.sqrt(eta) / float(np.mean(mags))
    x = iqs.real * scale
    y = iqs.imag * scale
    area = 0.5 * abs(float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)))
    n = phases.size
    area_expected = math.pi * eta * (n / TWO_PI) * math.sin(TWO_PI / n)

    results = {
        "gp_hz": g / TWO_PI,
        "t_swap_s": t_swap,
        "phase_slope": fit.params["slope"],
        "phase_intercept": fit.params["intercept"],
        "slope_residual_rms": fit.residual_rms,
        "eta": eta,
        "iq_mag_rel_spread": float((np.max(mags) - np.min(mags)) / np.mean(mags)),
        "energy_rel_spread": float((np.max(energies) - np.min(energies))
                                   / np.mean(energies)),
        "iq_locus_area": area,
        "iq_locus_area_expected": area_expected,
        "convergence_rel_diff": max_rel,
    }
    _write_report(outdir, "phase_sweep", cfg, results)
    return results


def run_custom_sequence(cfg, outdir):
    """Run a user sequence file and dump the full trace."""
    os.makedirs(outdir, exist_ok=True)
    if not cfg["sequence"]:
        raise ValidationError("custom_sequence needs sequence=<file>")
    with open(cfg["sequence"]) as fh:
        seq = parse_sequence(fh.read())
    _check_lab_frame_cost(cfg, seq.total_duration, cfg["points_per_cycle"])
    trace, rel = run_sequence_checked(
        seq, tolerance=cfg["tolerance"], frame=cfg["frame"],
        points_per_cycle=cfg["points_per_cycle"])
    trace.to_csv(os.path.join(outdir, "trace.csv"))
    results = {
        "total_duration_s": seq.total_duration,
        "final_energy_a": float(trace.energy_a[-1]),
        "final_energy_b": float(trace.energy_b[-1]),
        "convergence_rel_diff": rel,
    }
    _write_report(outdir, "custom_sequence", cfg, results)
    return results


RUNNERS = {
    "splitting": run_splitting,
    "chevron": run_chevron,
    "power_sweep": run_power_sweep,
    "store_retrieve": run_store_retrieve,
    "phase_sweep": run_phase_sweep,
    "custom_sequence": run_custom_sequence,
}
