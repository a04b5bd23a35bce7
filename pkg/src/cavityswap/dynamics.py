"""Coupled-mode integration and steady-state reflection.

The lab frame integrates the coupled-mode equations of motion directly
(plus an input drive term on the readout port):

    da/dt = -i(w_A - i g_A/2) a - i g_P(t) e^{+i(w_P t + phi_P)} b + sqrt(g_ext) a_in(t)
    db/dt = -i(w_B - i g_B/2) b - i g_P(t) e^{-i(w_P t + phi_P)} a

The rotating frame rotates each mode at its own natural frequency, which
leaves only the slow envelopes:

    da~/dt = -(g_A/2) a~ - i g_P(t) e^{+i(D t + phi_P)} b~ + drive
    db~/dt = -(g_B/2) b~ - i g_P(t) e^{-i(D t + phi_P)} a~

with D = w_P - (w_B - w_A). The output field at the readout port is
a_out = a_in - sqrt(g_ext) a (fixed by the critical-coupling null of the
reflection coefficient).

Integration is classic fixed-step RK4, chosen over adaptive stepping so
that sweep trajectories are bit-reproducible.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .core import ModeParams, PumpDrive, ComplexAmplitudePair, ValidationError

TWO_PI = 2.0 * math.pi

# minimum sample points per cycle of the fastest timescale
MIN_POINTS_PER_CYCLE = 50


class ResolutionError(ValidationError):
    """Integrator step too large for the fastest timescale in this frame."""


class IntegrationDivergedError(RuntimeError):
    """Non-finite state encountered during integration."""


class ConvergenceError(RuntimeError):
    """Half-step self-convergence check failed."""

    def __init__(self, rel_diff, tolerance):
        super().__init__(
            f"half-step self-convergence {rel_diff:.3e} exceeds tolerance {tolerance:.3e}")
        self.rel_diff = rel_diff
        self.tolerance = tolerance


class SingularSteadyStateError(ValidationError):
    """Steady-state system is exactly singular (zero damping on resonance)."""


@dataclass(frozen=True)
class DriveTone:
    """Coherent input tone on the readout port.

    amp_in is in sqrt(photons/s); the tone is zero outside [t_start, t_stop].
    """

    omega_d: float
    amp_in: float
    phase: float = 0.0
    t_start: float = -math.inf
    t_stop: float = math.inf

    def __post_init__(self):
        if self.amp_in < 0.0:
            raise ValidationError("incident amplitude must be >= 0")
        if not self.t_stop > self.t_start:
            raise ValidationError("drive support must be well-ordered")


@dataclass(frozen=True)
class SimConfig:
    frame: str = "rotating"  # "lab" or "rotating"
    dt: float = 1e-9
    t_end: float = 1e-6
    t_start: float = 0.0
    record_stride: int = 1
    tolerance: float = 1e-6  # half-step self-convergence target

    def __post_init__(self):
        if self.frame not in ("lab", "rotating"):
            raise ValidationError(f"unknown frame {self.frame!r}")
        if not self.dt > 0.0:
            raise ValidationError("dt must be positive")
        if not self.t_end > self.t_start:
            raise ValidationError("t_end must exceed t_start")
        if self.record_stride < 1:
            raise ValidationError("record_stride must be >= 1")


@dataclass
class TraceRecord:
    """Sampled trajectory: times, mode amplitudes, and the output field."""

    t: np.ndarray
    a: np.ndarray
    b: np.ndarray
    a_out: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def energy_a(self) -> np.ndarray:
        return np.abs(self.a) ** 2

    @property
    def energy_b(self) -> np.ndarray:
        return np.abs(self.b) ** 2

    def window(self, t_lo: float, t_hi: float) -> "TraceRecord":
        """Sub-trace with t_lo <= t <= t_hi (half-open rounding tolerant)."""
        eps = 1e-15 + 1e-9 * (self.t[-1] - self.t[0])
        sel = (self.t >= t_lo - eps) & (self.t <= t_hi + eps)
        if not np.any(sel):
            raise ValidationError("empty trace window")
        return TraceRecord(self.t[sel], self.a[sel], self.b[sel],
                           self.a_out[sel], dict(self.meta))

    def to_csv(self, path):
        """Write data columns to `path` and metadata to `<path>.meta`."""
        cols = np.column_stack([
            self.t, self.a.real, self.a.imag, self.b.real, self.b.imag,
            self.a_out.real, self.a_out.imag,
        ])
        with open(path, "w") as fh:
            fh.write("t_s,re_a,im_a,re_b,im_b,re_aout,im_aout\n")
            for row in cols:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
        with open(f"{path}.meta", "w") as fh:
            for key in sorted(self.meta):
                fh.write(f"{key} = {self.meta[key]}\n")

    @classmethod
    def from_csv(cls, path):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        meta = {}
        try:
            with open(f"{path}.meta") as fh:
                for line in fh:
                    key, _, val = line.partition("=")
                    meta[key.strip()] = val.strip()
        except FileNotFoundError:
            pass
        return cls(data[:, 0], data[:, 1] + 1j * data[:, 2],
                   data[:, 3] + 1j * data[:, 4], data[:, 5] + 1j * data[:, 6],
                   meta)


def rabi_frequency(delta: float, g_p: float) -> float:
    """Energy-oscillation frequency of the detuned two-mode swap.

    This is the frequency at which |a(t)|^2 oscillates: sqrt(D^2 + 4 g_P^2),
    i.e. 2 g_P on resonance (the normal-mode splitting).
    """
    return math.sqrt(delta * delta + 4.0 * g_p * g_p)


def _delta_rot(mode_a: ModeParams, mode_b: ModeParams, pump: PumpDrive) -> float:
    # rotating-frame coupling phase rate; equals the signed detuning
    # omega_p - |w_a - w_b| when mode B is the higher-frequency mode
    return pump.omega_p - (mode_b.omega - mode_a.omega)


def _fastest_rate(mode_a, mode_b, pump, drive, frame) -> float:
    if frame == "lab":
        rates = [mode_a.omega, mode_b.omega, pump.omega_p,
                 mode_a.gamma_total, mode_b.gamma_total]
        if drive is not None:
            rates.append(drive.omega_d)
    else:
        rates = [abs(_delta_rot(mode_a, mode_b, pump)),
                 pump.envelope.max_amplitude,
                 mode_a.gamma_total, mode_b.gamma_total]
        if drive is not None:
            rates.append(abs(drive.omega_d - mode_a.omega))
    return max(rates)


def max_step(mode_a, mode_b, pump, drive=None, frame="rotating",
             points_per_cycle=MIN_POINTS_PER_CYCLE) -> float:
    """Largest admissible RK4 step for this system in the given frame."""
    fastest = _fastest_rate(mode_a, mode_b, pump, drive, frame)
    return math.inf if fastest == 0.0 else TWO_PI / (points_per_cycle * fastest)


def _make_rhs(mode_a, mode_b, pump, drive, frame):
    ga2 = 0.5 * mode_a.gamma_total
    gb2 = 0.5 * mode_b.gamma_total
    phi_p = pump.phi_p
    env = pump.envelope
    sq_gext = math.sqrt(mode_a.gamma_ext)

    if frame == "lab":
        na = -1j * mode_a.omega - ga2
        nb = -1j * mode_b.omega - gb2
        wp = pump.omega_p
    else:
        na = complex(-ga2)
        nb = complex(-gb2)
        wp = _delta_rot(mode_a, mode_b, pump)

    if drive is not None:
        damp = sq_gext * drive.amp_in
        dw = drive.omega_d if frame == "lab" else drive.omega_d - mode_a.omega
        dphase = drive.phase
        d0, d1 = drive.t_start, drive.t_stop
    else:
        damp = 0.0

    cexp = cmath.exp

    def rhs(t, a, b):
        da = na * a
        db = nb * b
        g = env(t)
        if g != 0.0:
            ph = cexp(1j * (wp * t + phi_p))
            da += -1j * g * ph * b
            db += -1j * g * ph.conjugate() * a
        if damp != 0.0 and d0 <= t <= d1:
            da += damp * cexp(-1j * (dw * t + dphase))
        return da, db

    return rhs


def _input_field(drive, mode_a, frame, t):
    """Incident field a_in at times t (array), in the integration frame."""
    if drive is None or drive.amp_in == 0.0:
        return np.zeros_like(t, dtype=complex)
    dw = drive.omega_d if frame == "lab" else drive.omega_d - mode_a.omega
    field_vals = drive.amp_in * np.exp(-1j * (dw * t + drive.phase))
    mask = (t >= drive.t_start) & (t <= drive.t_stop)
    return np.where(mask, field_vals, 0.0 + 0.0j)


def derivative(state: ComplexAmplitudePair, t: float, modes, pump: PumpDrive,
               drive: DriveTone | None = None, frame: str = "rotating"):
    """Time derivative of the coupled-mode state (pure function).

    Returns a ComplexAmplitudePair whose components are da/dt and db/dt.
    """
    mode_a, mode_b = modes
    rhs = _make_rhs(mode_a, mode_b, pump, drive, frame)
    da, db = rhs(t, state.a, state.b)
    return ComplexAmplitudePair(da, db, t)


def integrate(initial: ComplexAmplitudePair, modes, pump: PumpDrive,
              drive: DriveTone | None = None,
              config: SimConfig = SimConfig()) -> TraceRecord:
    """Fixed-step RK4 trajectory of the coupled-mode equations.

    The step is shrunk (never grown) so an integer number of steps lands
    exactly on t_end. Records (t, a, b, a_out) every `record_stride` steps
    plus the final point.
    """
    mode_a, mode_b = modes
    dt_max = max_step(mode_a, mode_b, pump, drive, config.frame)
    if config.dt > dt_max * (1.0 + 1e-12):
        raise ResolutionError(
            f"dt={config.dt:.3e} s does not resolve the fastest timescale in the "
            f"{config.frame} frame (need dt <= {dt_max:.3e} s)")

    span = config.t_end - config.t_start
    n = max(1, int(math.ceil(span / config.dt - 1e-12)))
    dt = span / n
    stride = config.record_stride

    rhs = _make_rhs(mode_a, mode_b, pump, drive, config.frame)
    a = complex(initial.a)
    b = complex(initial.b)
    t0 = config.t_start

    rec_t = [t0]
    rec_a = [a]
    rec_b = [b]
    half = 0.5 * dt
    sixth = dt / 6.0
    for k in range(n):
        t = t0 + k * dt
        tm = t + half
        k1a, k1b = rhs(t, a, b)
        k2a, k2b = rhs(tm, a + half * k1a, b + half * k1b)
        k3a, k3b = rhs(tm, a + half * k2a, b + half * k2b)
        k4a, k4b = rhs(t + dt, a + dt * k3a, b + dt * k3b)
        a = a + sixth * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
        b = b + sixth * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
        if (k + 1) % stride == 0 or k + 1 == n:
            if not (math.isfinite(a.real) and math.isfinite(a.imag)
                    and math.isfinite(b.real) and math.isfinite(b.imag)):
                raise IntegrationDivergedError(
                    f"non-finite state at t={t0 + (k + 1) * dt:.6e} s "
                    f"(a={a!r}, b={b!r})")
            rec_t.append(t0 + (k + 1) * dt)
            rec_a.append(a)
            rec_b.append(b)

    t_arr = np.asarray(rec_t)
    a_arr = np.asarray(rec_a)
    b_arr = np.asarray(rec_b)
    a_in = _input_field(drive, mode_a, config.frame, t_arr)
    a_out = a_in - math.sqrt(mode_a.gamma_ext) * a_arr
    meta = {
        "frame": config.frame,
        "dt": dt,
        "t_start": config.t_start,
        "t_end": config.t_end,
        "record_stride": stride,
        "omega_a": mode_a.omega,
        "gamma_int_a": mode_a.gamma_int,
        "gamma_ext_a": mode_a.gamma_ext,
        "omega_b": mode_b.omega,
        "gamma_int_b": mode_b.gamma_int,
        "gamma_ext_b": mode_b.gamma_ext,
        "omega_p": pump.omega_p,
        "phi_p": pump.phi_p,
    }
    return TraceRecord(t_arr, a_arr, b_arr, a_out, meta)


def integrate_checked(initial, modes, pump, drive=None,
                      config: SimConfig = SimConfig()):
    """Integrate with a mandatory half-step self-convergence check.

    Runs the trajectory at dt and dt/2 and compares the final states;
    raises ConvergenceError above config.tolerance. Returns the half-step
    trace and the measured relative difference.
    """
    coarse = integrate(initial, modes, pump, drive, config)
    cfg_fine = SimConfig(config.frame, 0.5 * coarse.meta["dt"], config.t_end,
                         config.t_start, 2 * config.record_stride,
                         config.tolerance)
    fine = integrate(initial, modes, pump, drive, cfg_fine)
    vc = np.array([coarse.a[-1], coarse.b[-1]])
    vf = np.array([fine.a[-1], fine.b[-1]])
    scale = max(np.linalg.norm(vf), 1e-300)
    rel = float(np.linalg.norm(vc - vf) / scale)
    if rel > config.tolerance:
        raise ConvergenceError(rel, config.tolerance)
    fine.meta["convergence_rel_diff"] = rel
    return fine, rel


def reflection_spectrum(mode_a: ModeParams, mode_b: ModeParams,
                        pump: PumpDrive, probe_omegas) -> np.ndarray:
    """Steady-state reflection coefficient of the readout port under a CW pump.

    Solves the linear rotating-frame steady state under a weak probe at
    each frequency and returns Gamma(w) = a_out/a_in. For g_P = 0 this is
    the standard single-port Lorentzian 1 - gamma_ext / (i(w_A - w) + gamma_A/2).
    """
    if not getattr(pump.envelope, "is_cw", False):
        raise ValidationError("reflection_spectrum requires a CW pump envelope")
    g = pump.envelope.max_amplitude
    w = np.asarray(probe_omegas, dtype=float)

    chi_a_inv = 1j * (mode_a.omega - w) + 0.5 * mode_a.gamma_total
    if g == 0.0:
        denom = chi_a_inv
    else:
        chi_b_inv = 1j * (mode_b.omega - w - pump.omega_p) + 0.5 * mode_b.gamma_total
        if np.any(chi_b_inv == 0.0):
            raise SingularSteadyStateError(
                "undamped storage mode exactly on the converted probe frequency")
        denom = chi_a_inv + g * g / chi_b_inv
    if np.any(denom == 0.0):
        raise SingularSteadyStateError(
            "undamped readout mode exactly on the probe frequency")
    return 1.0 - mode_a.gamma_ext / denom
