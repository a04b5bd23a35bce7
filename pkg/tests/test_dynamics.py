import math

import numpy as np
import pytest
from scipy.linalg import expm

from cavityswap.core import (ComplexAmplitudePair, ModeParams, PumpDrive,
                             RectPulse, ValidationError, cw_envelope,
                             mode_params_from_q)
from cavityswap.dynamics import (ConvergenceError, DriveTone, ResolutionError,
                                 SimConfig, SingularSteadyStateError,
                                 TraceRecord, derivative, integrate,
                                 integrate_checked, max_step, rabi_frequency,
                                 reflection_spectrum)

TWO_PI = 2.0 * math.pi

OMEGA_A = TWO_PI * 8.7e9
OMEGA_B = TWO_PI * 9.33e9
GP = TWO_PI * 1.2e6


def _lossless_modes():
    return ModeParams(OMEGA_A), ModeParams(OMEGA_B)


def _default_modes():
    return (mode_params_from_q(OMEGA_A, 900e3, 50e3),
            ModeParams(OMEGA_B, 1.0 / 14.9e-6, 0.0))


def _pump(g=GP, delta=0.0, phi=0.0):
    return PumpDrive(OMEGA_B - OMEGA_A + delta, phi, cw_envelope(g))


def _rotating_cfg(g, t_end, delta=0.0, ppc=400, stride=1):
    omega = math.sqrt(delta * delta + 4.0 * g * g)
    return SimConfig("rotating", TWO_PI / (ppc * omega), t_end, 0.0, stride)


def _oracle_final_state(modes, g, delta, phi, a0, b0, t):
    """Independent matrix-exponential solution of the rotating-frame system.

    Substituting u = a e^{-i delta t/2}, v = b e^{+i delta t/2} removes the
    time dependence, leaving a constant 2x2 generator solved with expm.
    """
    mode_a, mode_b = modes
    m = np.array([
        [-0.5j * delta - 0.5 * mode_a.gamma_total, -1j * g * np.exp(1j * phi)],
        [-1j * g * np.exp(-1j * phi), 0.5j * delta - 0.5 * mode_b.gamma_total],
    ])
    u, v = expm(m * t) @ np.array([a0, b0])
    return u * np.exp(0.5j * delta * t), v * np.exp(-0.5j * delta * t)


class TestResonantSwap:
    def test_matches_cosine_closed_form(self):
        modes = _lossless_modes()
        t_end = math.pi / GP  # one full return
        cfg = _rotating_cfg(GP, t_end, ppc=800)
        trace = integrate(ComplexAmplitudePair(1 + 0j, 0j, 0.0), modes,
                          _pump(), None, cfg)
        expected = np.cos(GP * trace.t) ** 2
        assert np.max(np.abs(trace.energy_a - expected)) < 1e-8
        assert np.max(np.abs(trace.energy_b - (1.0 - expected))) < 1e-8

    def test_full_swap_residual(self):
        modes = _lossless_modes()
        t_end = math.pi / (2.0 * GP)
        cfg = _rotating_cfg(GP, t_end, ppc=800, stride=10**9)
        trace = integrate(ComplexAmplitudePair(1 + 0j, 0j, 0.0), modes,
                          _pump(), None, cfg)
        assert abs(trace.a[-1]) ** 2 < 1e-9
        assert abs(trace.b[-1]) ** 2 > 1.0 - 1e-9


class TestDetunedSwap:
    @pytest.mark.parametrize("delta", [TWO_PI * -3e6, TWO_PI * 1.7e6])
    def test_lossless_closed_form(self, delta):
        modes = _lossless_modes()
        omega = rabi_frequency(delta, GP)
        t_end = 3.0 * TWO_PI / omega
        cfg = _rotating_cfg(GP, t_end, delta, ppc=800)
        trace = integrate(ComplexAmplitudePair(1 + 0j, 0j, 0.0), modes,
                          _pump(delta=delta), None, cfg)
        contrast = 4.0 * GP**2 / omega**2
        expected = 1.0 - contrast * np.sin(0.5 * omega * trace.t) ** 2
        assert np.max(np.abs(trace.energy_a - expected)) < 1e-7

    @pytest.mark.parametrize("delta,phi", [
        (0.0, 0.0), (TWO_PI * 2e6, 0.7), (TWO_PI * -1e6, 2.1),
    ])
    def test_lossy_final_state_matches_expm_oracle(self, delta, phi):
        modes = _default_modes()
        t_end = 1.3e-6
        cfg = _rotating_cfg(GP, t_end, delta, ppc=800, stride=10**9)
        trace = integrate(ComplexAmplitudePair(0.6 + 0.2j, 0.1j, 0.0), modes,
                          _pump(delta=delta, phi=phi), None, cfg)
        a_ref, b_ref = _oracle_final_state(modes, GP, delta, phi,
                                           0.6 + 0.2j, 0.1j, t_end)
        assert abs(trace.a[-1] - a_ref) < 1e-8
        assert abs(trace.b[-1] - b_ref) < 1e-8


class TestConservationLaws:
    def test_lossless_energy_conserved_over_100us(self):
        modes = _lossless_modes()
        g = TWO_PI * 0.2e6
        cfg = _rotating_cfg(g, 100e-6, ppc=800, stride=100)
        trace = integrate(ComplexAmplitudePair(1 + 0j, 0j, 0.0), modes,
                          _pump(g=g), None, cfg)
        total = trace.energy_a + trace.energy_b
        assert np.max(np.abs(total - 1.0)) < 1e-9

    def test_input_output_energy_balance(self):
        mode_a, mode_b = _default_modes()
        drive = DriveTone(mode_a.omega, 1e3, 0.0, 0.0, 5e-6)
        cfg = _rotating_cfg(GP, 5e-6, ppc=800)
        trace = integrate(ComplexAmplitudePair(0j, 0j, 0.0),
                          (mode_a, mode_b), _pump(), drive, cfg)
        ea, eb = trace.energy_a, trace.energy_b
        a_in = np.where((trace.t >= 0.0) & (trace.t <= 5e-6), 1e3, 0.0)
        e_in = np.trapezoid(a_in**2, trace.t)
        e_out = np.trapezoid(np.abs(trace.a_out) ** 2, trace.t)
        dissipated = np.trapezoid(mode_a.gamma_int * ea
                                  + mode_b.gamma_total * eb, trace.t)
        stored = (ea[-1] + eb[-1]) - (ea[0] + eb[0])
        assert abs(stored - (e_in - e_out - dissipated)) / e_in < 1e-6

    def test_output_is_input_minus_leakage(self):
        mode_a, mode_b = _default_modes()
        cfg = _rotating_cfg(GP, 0.5e-6, ppc=400)
        trace = integrate(ComplexAmplitudePair(1 + 0j, 0j, 0.0),
                          (mode_a, mode_b), _pump(), None, cfg)
        # no input: a_out = -sqrt(gamma_ext) a
        assert np.allclose(trace.a_out,
                           -math.sqrt(mode_a.gamma_ext) * trace.a)


class TestFrameEquivalence:
    def test_envelopes_agree_on_scaled_system(self):
        # scaled-down carrier frequencies keep the lab frame affordable
        mode_a = ModeParams(TWO_PI * 80e6)
        mode_b = ModeParams(TWO_PI * 143e6)
        g = TWO_PI * 0.5e6
        pump = PumpDrive(mode_b.omega - mode_a.omega, 0.3, cw_envelope(g))
        t_end = math.pi / (2.0 * g)
        init = ComplexAmplitudePair(1 + 0j, 0j, 0.0)
        lab = integrate(init, (mode_a, mode_b), pump, None,
                        SimConfig("lab", TWO_PI / (100 * mode_b.omega),
                                  t_end, 0.0, 10**9))
        rot = integrate(init, (mode_a, mode_b), pump, None,
                        SimConfig("rotating", TWO_PI / (400 * 2 * g),
                                  t_end, 0.0, 10**9))
        assert abs(abs(lab.a[-1]) - abs(rot.a[-1])) < 1e-3
        assert abs(abs(lab.b[-1]) - abs(rot.b[-1])) < 1e-3


class TestIntegratorMechanics:
    def test_step_resolution_guard(self):
        modes = _default_modes()
        with pytest.raises(ResolutionError):
            integrate(ComplexAmplitudePair(1 + 0j, 0j, 0.0), modes, _pump(),
                      None, SimConfig("rotating", 1e-6, 1e-5))

    def test_lab_frame_needs_carrier_resolution(self):
        modes = _default_modes()
        dt_ok_rotating = TWO_PI / (400 * 2 * GP)
        with pytest.raises(ResolutionError):
            integrate(ComplexAmplitudePair(1 + 0j, 0j, 0.0), modes, _pump(),
                      None, SimConfig("lab", dt_ok_rotating, 1e-6))

    def test_max_step_scales_with_frame(self):
        mode_a, mode_b = _default_modes()
        assert max_step(mode_a, mode_b, _pump(), frame="lab") < \
            max_step(mode_a, mode_b, _pump(), frame="rotating")

    def test_bit_reproducible(self):
        modes = _default_modes()
        cfg = _rotating_cfg(GP, 1e-6, ppc=400)
        init = ComplexAmplitudePair(1 + 0j, 0j, 0.0)
        t1 = integrate(init, modes, _pump(), None, cfg)
        t2 = integrate(init, modes, _pump(), None, cfg)
        assert np.array_equal(t1.a, t2.a) and np.array_equal(t1.b, t2.b)

    def test_record_grid_and_final_point(self):
        modes = _default_modes()
        cfg = _rotating_cfg(GP, 1e-6, ppc=400, stride=7)
        trace = integrate(ComplexAmplitudePair(1 + 0j, 0j, 0.0), modes,
                          _pump(), None, cfg)
        assert trace.t[0] == 0.0
        assert trace.t[-1] == pytest.approx(1e-6, rel=1e-12)
        dt = trace.t[1] - trace.t[0]
        assert np.allclose(np.diff(trace.t[:-1]), dt, rtol=1e-9)

    def test_convergence_check_reports_small_diff(self):
        modes = _default_modes()
        cfg = _rotating_cfg(GP, 1e-6, ppc=400)
        trace, rel = integrate_checked(ComplexAmplitudePair(1 + 0j, 0j, 0.0),
                                       modes, _pump(), None, cfg)
        assert rel < 1e-8
        assert trace.meta["convergence_rel_diff"] == rel

    def test_convergence_failure_raises(self):
        modes = _default_modes()
        cfg = SimConfig("rotating", TWO_PI / (55 * 2 * GP), 20e-6,
                        tolerance=1e-16)
        with pytest.raises(ConvergenceError) as exc:
            integrate_checked(ComplexAmplitudePair(1 + 0j, 0j, 0.0), modes,
                              _pump(), None, cfg)
        assert exc.value.rel_diff > exc.value.tolerance

    def test_derivative_matches_hand_computed_rhs(self):
        mode_a, mode_b = _default_modes()
        state = ComplexAmplitudePair(0.3 + 0.1j, 0.2 - 0.4j, 0.0)
        d = derivative(state, 0.0, (mode_a, mode_b), _pump(phi=0.5))
        expected_a = (-0.5 * mode_a.gamma_total * state.a
                      - 1j * GP * np.exp(0.5j) * state.b)
        expected_b = (-0.5 * mode_b.gamma_total * state.b
                      - 1j * GP * np.exp(-0.5j) * state.a)
        assert d.a == pytest.approx(expected_a, rel=1e-14)
        assert d.b == pytest.approx(expected_b, rel=1e-14)


class TestTraceRecord:
    def _trace(self):
        modes = _default_modes()
        cfg = _rotating_cfg(GP, 1e-6, ppc=400, stride=20)
        return integrate(ComplexAmplitudePair(1 + 0j, 0j, 0.0), modes,
                         _pump(), None, cfg)

    def test_csv_round_trip(self, tmp_path):
        trace = self._trace()
        path = tmp_path / "trace.csv"
        trace.to_csv(path)
        loaded = TraceRecord.from_csv(path)
        assert np.allclose(loaded.t, trace.t, rtol=1e-15)
        assert np.allclose(loaded.a, trace.a, rtol=1e-15)
        assert np.allclose(loaded.a_out, trace.a_out, rtol=1e-15)
        assert loaded.meta["frame"] == "rotating"

    def test_window_selects_inclusive_range(self):
        trace = self._trace()
        sub = trace.window(0.2e-6, 0.6e-6)
        assert sub.t[0] >= 0.2e-6 - 1e-12
        assert sub.t[-1] <= 0.6e-6 + 1e-12
        assert sub.t.size > 2

    def test_empty_window_raises(self):
        trace = self._trace()
        with pytest.raises(ValidationError):
            trace.window(5e-6, 6e-6)


class TestReflectionSpectrum:
    def test_pump_off_is_lorentzian(self):
        mode_a, mode_b = _default_modes()
        w = mode_a.omega + np.linspace(-1, 1, 101) * TWO_PI * 2e6
        pump = PumpDrive(OMEGA_B - OMEGA_A, 0.0, cw_envelope(0.0))
        gamma = reflection_spectrum(mode_a, mode_b, pump, w)
        expected = 1.0 - mode_a.gamma_ext / (
            1j * (mode_a.omega - w) + 0.5 * mode_a.gamma_total)
        assert np.allclose(gamma, expected, rtol=1e-12)

    def test_critical_coupling_null(self):
        mode_a = ModeParams(OMEGA_A, 1e5, 1e5)  # gamma_int == gamma_ext
        mode_b = ModeParams(OMEGA_B, 1.0 / 14.9e-6, 0.0)
        pump = PumpDrive(OMEGA_B - OMEGA_A, 0.0, cw_envelope(0.0))
        gamma = reflection_spectrum(mode_a, mode_b, pump,
                                    np.array([mode_a.omega]))
        assert abs(gamma[0]) < 1e-12

    def test_splitting_puts_dips_at_plus_minus_g(self):
        mode_a, mode_b = _default_modes()
        w = mode_a.omega + np.linspace(-1, 1, 4001) * TWO_PI * 3e6
        gamma = reflection_spectrum(mode_a, mode_b, _pump(), w)
        mag = np.abs(gamma)
        idx = np.where((mag[1:-1] < mag[:-2]) & (mag[1:-1] < mag[2:]))[0] + 1
        assert idx.size == 2
        offsets = (w[idx] - mode_a.omega) / TWO_PI
        assert offsets[0] == pytest.approx(-1.2e6, rel=2e-2)
        assert offsets[1] == pytest.approx(1.2e6, rel=2e-2)

    def test_requires_cw_pump(self):
        mode_a, mode_b = _default_modes()
        pulsed = PumpDrive(OMEGA_B - OMEGA_A, 0.0, RectPulse(GP, 0.0, 1e-6))
        with pytest.raises(ValidationError):
            reflection_spectrum(mode_a, mode_b, pulsed,
                                np.array([mode_a.omega]))

    def test_singular_lossless_resonance(self):
        mode_a, mode_b = _lossless_modes()
        pump = PumpDrive(OMEGA_B - OMEGA_A, 0.0, cw_envelope(0.0))
        with pytest.raises(SingularSteadyStateError):
            reflection_spectrum(mode_a, mode_b, pump, np.array([mode_a.omega]))


class TestRabiFrequency:
    def test_resonant_value_is_twice_the_coupling(self):
        assert rabi_frequency(0.0, GP) == 2.0 * GP

    def test_detuned_value(self):
        assert rabi_frequency(3.0, 2.0) == pytest.approx(5.0)
