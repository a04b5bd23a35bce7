"""Timed pulse sequences: parsing, execution, and swap-time calibration.

Sequence files are line-oriented text with ``#`` comments. Every
dimensioned value carries a mandatory unit suffix::

    mode A freq=8.7GHz q_int=900e3 q_ext=50e3
    mode B freq=9.33GHz t1=14.9us
    seg load dur=20us nbar=10
    seg swap dur=0.6us gp=1.2MHz delta=0Hz phase=0deg
    seg delay dur=5us
    seg swap dur=0.6us gp=1.2MHz delta=0Hz phase=90deg
    seg readout dur=5us

Execution hands the complex state from segment to segment. The pump
oscillator runs continuously in simulation time, so a swap segment's
phase is defined relative to that continuous reference and the relative
phase between two swap pulses is well defined across a delay.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import fluxmap
from .core import (ModeParams, PumpDrive, ComplexAmplitudePair, RectPulse,
                   RaisedCosinePulse, CouplerState, ValidationError)
from .dynamics import (DriveTone, SimConfig, TraceRecord, integrate,
                       ConvergenceError)
from .units import Quantity, parse_quantity

TWO_PI = 2.0 * math.pi


class SequenceSyntaxError(ValueError):
    def __init__(self, message, line, col=None):
        at = f"line {line}" + (f", col {col}" if col is not None else "")
        super().__init__(f"{message} ({at})")
        self.line = line
        self.col = col


class SequenceSemanticError(ValueError):
    def __init__(self, message, index=None):
        where = "" if index is None else f" (segment {index})"
        super().__init__(f"{message}{where}")
        self.index = index


class CalibrationError(RuntimeError):
    """Swap-time search window excludes the minimum."""


# key -> required unit kind, in canonical emit order
_MODE_KEYS = {"freq": "freq", "q_int": "dimensionless", "q_ext": "dimensionless",
              "t1": "time", "gamma_int": "freq", "gamma_ext": "freq"}
_SEG_KEYS = {
    "load": {"dur": "time", "nbar": "dimensionless", "amp": "dimensionless",
             "freq": "freq"},
    "swap": {"dur": "time", "gp": "freq", "power": "power_dbm", "delta": "freq",
             "phase": "angle", "ramp": "time"},
    "delay": {"dur": "time"},
    "readout": {"dur": "time"},
}


@dataclass(frozen=True)
class Segment:
    """One timed segment; params hold parsed quantities keyed per kind."""

    kind: str
    params: dict

    @property
    def duration(self) -> float:
        return self.params["dur"].value

    def get(self, key, default=0.0):
        q = self.params.get(key)
        return default if q is None else q.value


@dataclass(frozen=True)
class PulseSequence:
    mode_specs: dict  # {"A": {key: Quantity}, "B": {...}}
    segments: tuple

    @property
    def mode_a(self) -> ModeParams:
        return _mode_from_spec(self.mode_specs["A"])

    @property
    def mode_b(self) -> ModeParams:
        return _mode_from_spec(self.mode_specs["B"])

    @property
    def total_duration(self) -> float:
        return sum(s.duration for s in self.segments)

    def windows(self):
        """[(kind, t_start, t_end)] for each segment on the global clock."""
        out = []
        t = 0.0
        for seg in self.segments:
            out.append((seg.kind, t, t + seg.duration))
            t += seg.duration
        return out


def _mode_from_spec(spec) -> ModeParams:
    omega = spec["freq"].value
    if "q_int" in spec:
        gamma_int = omega / spec["q_int"].value
    elif "t1" in spec:
        gamma_int = 1.0 / spec["t1"].value
    elif "gamma_int" in spec:
        gamma_int = spec["gamma_int"].value
    else:
        gamma_int = 0.0
    if "q_ext" in spec:
        gamma_ext = omega / spec["q_ext"].value
    elif "gamma_ext" in spec:
        gamma_ext = spec["gamma_ext"].value
    else:
        gamma_ext = 0.0
    return ModeParams(omega, gamma_int, gamma_ext)


def _parse_kv(tokens, allowed, lineno, line):
    params = {}
    for tok in tokens:
        col = line.find(tok) + 1
        key, eq, val = tok.partition("=")
        if eq != "=" or not val:
            raise SequenceSyntaxError(f"expected key=value, got {tok!r}", lineno, col)
        if key not in allowed:
            raise SequenceSyntaxError(f"unknown key {key!r}", lineno, col)
        if key in params:
            raise SequenceSyntaxError(f"duplicate key {key!r}", lineno, col)
        try:
            q = parse_quantity(val)
        except ValueError as exc:
            raise SequenceSyntaxError(str(exc), lineno, col) from exc
        if q.kind != allowed[key]:
            raise SequenceSyntaxError(
                f"{key!r} requires a {allowed[key]} value, got {val!r}", lineno, col)
        params[key] = q
    return params


def parse_sequence(text: str) -> PulseSequence:
    """Parse sequence-file text into a validated PulseSequence."""
    mode_specs = {}
    segments = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        tokens = line.split()
        head = tokens[0]
        if head == "mode":
            if len(tokens) < 2 or tokens[1] not in ("A", "B"):
                raise SequenceSyntaxError("mode line needs a name, A or B", lineno, 1)
            name = tokens[1]
            if name in mode_specs:
                raise SequenceSyntaxError(f"mode {name} defined twice", lineno, 1)
            spec = _parse_kv(tokens[2:], _MODE_KEYS, lineno, line)
            if "freq" not in spec:
                raise SequenceSyntaxError(f"mode {name} needs freq=", lineno, 1)
            mode_specs[name] = spec
        elif head == "seg":
            if len(tokens) < 2 or tokens[1] not in _SEG_KEYS:
                raise SequenceSyntaxError(
                    f"unknown segment kind {tokens[1] if len(tokens) > 1 else ''!r}",
                    lineno, 1)
            kind = tokens[1]
            params = _parse_kv(tokens[2:], _SEG_KEYS[kind], lineno, line)
            if "dur" not in params:
                raise SequenceSyntaxError(f"{kind} segment needs dur=", lineno, 1)
            segments.append(Segment(kind, params))
        else:
            raise SequenceSyntaxError(f"unknown directive {head!r}", lineno, 1)

    if not segments:
        raise SequenceSemanticError("empty sequence")
    for name in ("A", "B"):
        if name not in mode_specs:
            raise SequenceSemanticError(f"mode {name} is not defined")
    seq = PulseSequence(mode_specs, tuple(segments))
    _validate_semantics(seq)
    return seq


def _validate_semantics(seq: PulseSequence):
    for name, spec in seq.mode_specs.items():
        if sum(k in spec for k in ("q_int", "t1", "gamma_int")) > 1:
            raise SequenceSemanticError(
                f"mode {name}: internal loss given more than once")
        if sum(k in spec for k in ("q_ext", "gamma_ext")) > 1:
            raise SequenceSemanticError(
                f"mode {name}: external loss given more than once")
        _mode_from_spec(spec)  # validates ranges
    for i, seg in enumerate(seq.segments):
        if not seg.duration > 0.0:
            raise SequenceSemanticError("segment duration must be positive", i)
        if seg.kind == "swap":
            if ("gp" in seg.params) == ("power" in seg.params):
                raise SequenceSemanticError(
                    "swap segment needs exactly one of gp or power", i)
            if "gp" in seg.params and seg.params["gp"].value < 0.0:
                raise SequenceSemanticError("gp must be >= 0", i)
            if "ramp" in seg.params and not (
                    0.0 < seg.params["ramp"].value <= 0.5 * seg.duration):
                raise SequenceSemanticError("ramp must fit inside the pulse", i)
        if seg.kind == "load":
            if ("nbar" in seg.params) == ("amp" in seg.params):
                raise SequenceSemanticError(
                    "load segment needs exactly one of nbar or amp", i)
            if "nbar" in seg.params and seg.params["nbar"].value < 0.0:
                raise SequenceSemanticError("nbar must be >= 0", i)


def emit_sequence(seq: PulseSequence) -> str:
    """Render a PulseSequence back to file text (canonical key order).

    parse -> emit -> parse is a fixed point; files already written in the
    canonical format round-trip byte-identically.
    """
    lines = []
    for name in ("A", "B"):
        spec = seq.mode_specs[name]
        parts = [f"{k}={spec[k].render()}" for k in _MODE_KEYS if k in spec]
        lines.append(f"mode {name} " + " ".join(parts))
    for seg in seq.segments:
        parts = [f"{k}={seg.params[k].render()}" for k in _SEG_KEYS[seg.kind]
                 if k in seg.params]
        lines.append(f"seg {seg.kind} " + " ".join(parts))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# execution

def _segment_pump(seg: Segment, seq: PulseSequence, t0: float, t1: float,
                  curves, coupler, flux_calib) -> PumpDrive:
    if "gp" in seg.params:
        g = seg.params["gp"].value
    else:
        if curves is None or coupler is None:
            curves_a, curves_b, coupler = fluxmap.calibrated_curves()
            curves = (curves_a, curves_b)
        delta_phi = fluxmap.pump_power_to_flux(seg.params["power"].value, flux_calib)
        g = fluxmap.coupling_rate(curves[0], curves[1],
                                  replace(coupler, delta_phi=delta_phi))
    delta = seg.get("delta")
    phase = seg.get("phase")
    omega_p = abs(seq.mode_a.omega - seq.mode_b.omega) + delta
    # pad the support so boundary RK4 stages are inside despite rounding
    pad = 1e-12 * (t1 - t0)
    if "ramp" in seg.params:
        env = RaisedCosinePulse(g, t0, t1, seg.params["ramp"].value)
    else:
        env = RectPulse(g, t0 - pad, t1 + pad)
    return PumpDrive(omega_p, phase, env)


def _load_drive(seg: Segment, mode_a: ModeParams, t0: float, t1: float) -> DriveTone:
    omega_d = seg.get("freq", mode_a.omega)
    if "amp" in seg.params:
        amp = seg.params["amp"].value
    else:
        if mode_a.gamma_ext == 0.0:
            raise SequenceSemanticError(
                "cannot drive a load pulse into a mode with no external coupling")
        nbar = seg.params["nbar"].value
        dur = t1 - t0
        ga = mode_a.gamma_total
        sq = math.sqrt(mode_a.gamma_ext)
        # resonant fill from vacuum: a(T) = (2 sq amp/ga)(1 - e^{-ga T/2})
        if ga == 0.0:
            amp = math.sqrt(nbar) / (sq * dur)
        else:
            amp = math.sqrt(nbar) * ga / (2.0 * sq * (1.0 - math.exp(-0.5 * ga * dur)))
    return DriveTone(omega_d, amp, 0.0, t0, t1)


def _segment_dt(seg, pump, drive, mode_a, mode_b, frame, points_per_cycle):
    rates = [mode_a.gamma_total, mode_b.gamma_total]
    if frame == "lab":
        rates += [mode_a.omega, mode_b.omega]
        if pump is not None:
            rates.append(pump.omega_p)
        if drive is not None:
            rates.append(drive.omega_d)
    else:
        if pump is not None:
            # the energy oscillates at up to sqrt(delta^2 + 4 g^2)
            g = pump.envelope.max_amplitude
            delta = pump.omega_p - (mode_b.omega - mode_a.omega)
            rates.append(math.sqrt(delta * delta + 4.0 * g * g))
        if drive is not None:
            rates.append(abs(drive.omega_d - mode_a.omega))
    fastest = max(rates)
    dur = seg.duration
    dt = dur if fastest == 0.0 else TWO_PI / (points_per_cycle * fastest)
    return min(dt, dur / 8.0)


def run_sequence(seq: PulseSequence, *, frame: str = "rotating",
                 points_per_cycle: int = 400, direct_load: bool = True,
                 curves=None, coupler: CouplerState | None = None,
                 flux_calib: float = fluxmap.DEFAULT_FLUX_CALIB,
                 tolerance: float = 1e-6) -> TraceRecord:
    """Execute a pulse sequence with continuous state handoff.

    With `direct_load` (the default for analysis runs) a leading load
    segment sets a = sqrt(nbar) at its end instead of simulating the fill
    pulse; pass direct_load=False to drive the port explicitly.
    """
    mode_a = seq.mode_a
    mode_b = seq.mode_b
    t = 0.0
    state = ComplexAmplitudePair(0.0 + 0.0j, 0.0 + 0.0j, 0.0)
    pieces = []
    for i, seg in enumerate(seq.segments):
        t0, t1 = t, t + seg.duration
        if seg.kind == "load" and direct_load and i == 0 and "nbar" in seg.params:
            a_end = complex(math.sqrt(seg.params["nbar"].value))
            piece = TraceRecord(
                np.array([t0, t1]),
                np.array([state.a, a_end]),
                np.array([state.b, state.b]),
                np.array([0.0 + 0.0j, 0.0 + 0.0j]),
                {"frame": frame})
            state = ComplexAmplitudePair(a_end, state.b, t1)
        else:
            pump = None
            drive = None
            if seg.kind == "swap":
                pump = _segment_pump(seg, seq, t0, t1, curves, coupler, flux_calib)
            elif seg.kind == "load":
                drive = _load_drive(seg, mode_a, t0, t1)
            if pump is None:
                pump = PumpDrive(abs(mode_a.omega - mode_b.omega), 0.0, RectPulse(0.0, t0, t1))
            dt = _segment_dt(seg, pump, drive, mode_a, mode_b, frame, points_per_cycle)
            cfg = SimConfig(frame, dt, t1, t0, 1, tolerance)
            piece = integrate(state, (mode_a, mode_b), pump, drive, cfg)
            state = ComplexAmplitudePair(piece.a[-1], piece.b[-1], t1)
        pieces.append(piece)
        t = t1

    skip = [0] + [1] * (len(pieces) - 1)  # drop duplicated boundary samples
    t_arr = np.concatenate([p.t[s:] for p, s in zip(pieces, skip)])
    a_arr = np.concatenate([p.a[s:] for p, s in zip(pieces, skip)])
    b_arr = np.concatenate([p.b[s:] for p, s in zip(pieces, skip)])
    o_arr = np.concatenate([p.a_out[s:] for p, s in zip(pieces, skip)])
    meta = {
        "frame": frame,
        "points_per_cycle": points_per_cycle,
        "omega_a": mode_a.omega, "gamma_int_a": mode_a.gamma_int,
        "gamma_ext_a": mode_a.gamma_ext,
        "omega_b": mode_b.omega, "gamma_int_b": mode_b.gamma_int,
        "gamma_ext_b": mode_b.gamma_ext,
    }
    for i, (kind, w0, w1) in enumerate(seq.windows()):
        meta[f"seg{i}_kind"] = kind
        meta[f"seg{i}_t_start"] = w0
        meta[f"seg{i}_t_end"] = w1
    return TraceRecord(t_arr, a_arr, b_arr, o_arr, meta)


def run_sequence_checked(seq: PulseSequence, tolerance: float = 1e-6, **kwargs):
    """run_sequence plus a half-step self-convergence check.

    Re-runs with twice the time resolution and compares final states;
    raises ConvergenceError above `tolerance`. Returns (fine trace, diff).
    """
    ppc = kwargs.pop("points_per_cycle", 400)
    coarse = run_sequence(seq, points_per_cycle=ppc, **kwargs)
    fine = run_sequence(seq, points_per_cycle=2 * ppc, **kwargs)
    vc = np.array([coarse.a[-1], coarse.b[-1]])
    vf = np.array([fine.a[-1], fine.b[-1]])
    scale = max(float(np.linalg.norm(vf)), 1e-300)
    rel = float(np.linalg.norm(vc - vf) / scale)
    if rel > tolerance:
        raise ConvergenceError(rel, tolerance)
    fine.meta["convergence_rel_diff"] = rel
    return fine, rel


def without_swaps(seq: PulseSequence) -> PulseSequence:
    """The same sequence with every swap replaced by an equal-length delay
    (the reference run for efficiency measurements)."""
    segs = tuple(
        Segment("delay", {"dur": seg.params["dur"]}) if seg.kind == "swap" else seg
        for seg in seq.segments)
    return PulseSequence(seq.mode_specs, segs)


def demodulate(trace: TraceRecord, omega_ref: float, window) -> tuple:
    """IQ demodulation of the output field over a time window.

    Returns (I, Q, energy) with I + iQ = integral of a_out * e^{+i w_ref t}
    dt in the lab frame (identity rotation for rotating-frame traces) and
    energy = integral of |a_out|^2 dt.
    """
    t_lo, t_hi = window
    if not t_hi > t_lo:
        raise ValidationError("empty demodulation window")
    sub = trace.window(t_lo, t_hi)
    if sub.t.size < 2:
        raise ValidationError("demodulation window contains fewer than 2 samples")
    if trace.meta.get("frame", "rotating") == "lab":
        rotated = sub.a_out * np.exp(1j * omega_ref * sub.t)
    else:
        rotated = sub.a_out
    iq = complex(np.trapezoid(rotated, sub.t))
    energy = float(np.trapezoid(np.abs(sub.a_out) ** 2, sub.t))
    return iq.real, iq.imag, energy


def calibrate_swap_time(modes, g_p: float, window, *, delta: float = 0.0,
                        points_per_cycle: int = 800,
                        time_tol: float = 1e-13) -> float:
    """Pulse length minimizing the residual readout-mode energy after one swap.

    Golden-section search of the simulated residual |a(T)|^2 over the
    given (t_lo, t_hi) window; for the lossless resonant case this is
    pi/(2 g_P). Raises CalibrationError when the window excludes the
    minimum.
    """
    if not g_p > 0.0:
        raise ValidationError("g_p must be positive for swap calibration")
    mode_a, mode_b = modes
    omega_p = abs(mode_a.omega - mode_b.omega) + delta
    omega_fast = math.sqrt(delta * delta + 4.0 * g_p * g_p)
    dt = TWO_PI / (points_per_cycle * omega_fast)

    # a CW envelope with the integration window as the pulse: guarantees the
    # boundary RK4 stages see the coupling despite float rounding of t_end
    pump = PumpDrive(omega_p, 0.0, RectPulse(g_p))

    def residual(t_swap):
        cfg = SimConfig("rotating", dt, t_swap, 0.0, max(1, int(t_swap / dt)))
        trace = integrate(ComplexAmplitudePair(1.0 + 0.0j, 0.0j, 0.0),
                          (mode_a, mode_b), pump, None, cfg)
        return float(np.abs(trace.a[-1]) ** 2)

    lo, hi = window
    if not (hi > lo > 0.0):
        raise ValidationError("search window must satisfy 0 < t_lo < t_hi")
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = residual(x1), residual(x2)
    while b - a > time_tol:
        if f1 < f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = residual(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = residual(x2)
    t_opt = 0.5 * (a + b)
    margin = 1e-3 * (hi - lo)
    if t_opt - lo < margin or hi - t_opt < margin:
        raise CalibrationError(
            f"swap-time minimum at {t_opt:.3e} s sits on the search window edge")
    return t_opt
