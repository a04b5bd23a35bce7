import math

import numpy as np
import pytest

from cavityswap.cli import main
from cavityswap.core import ValidationError
from cavityswap.experiments import (RUNNERS, parse_config_file, resolve_config,
                                    run_chevron, run_phase_sweep,
                                    run_splitting, run_store_retrieve)

TWO_PI = 2.0 * math.pi


class TestConfigResolution:
    def test_defaults(self):
        cfg = resolve_config("splitting")
        assert cfg["freq_a"] == pytest.approx(TWO_PI * 8.70e9)
        assert cfg["q_int_a"] == 900e3
        assert cfg["t1_b"] == 14.9e-6
        assert cfg["pump_power"] == -52.0
        assert cfg["frame"] == "rotating"
        assert cfg["jobs"] == 1

    def test_string_overrides_carry_units(self):
        cfg = resolve_config("splitting", {"freq_a": "8.5GHz",
                                           "pump_power": "-46dBm",
                                           "probe_count": "101"})
        assert cfg["freq_a"] == pytest.approx(TWO_PI * 8.5e9)
        assert cfg["pump_power"] == -46.0
        assert cfg["probe_count"] == 101

    def test_unknown_key_rejected(self):
        with pytest.raises(ValidationError, match="unknown config key"):
            resolve_config("splitting", {"bogus": "1"})

    def test_wrong_kind_rejected(self):
        with pytest.raises(ValidationError, match="freq"):
            resolve_config("splitting", {"freq_a": "8.5us"})

    def test_non_integer_count_rejected(self):
        with pytest.raises(ValidationError, match="integer"):
            resolve_config("splitting", {"probe_count": "10.5"})

    def test_sweep_counts_must_be_at_least_two(self):
        with pytest.raises(ValidationError, match="sweep count"):
            resolve_config("splitting", {"probe_count": "1"})

    def test_determinism_cannot_be_disabled(self):
        with pytest.raises(ValidationError, match="deterministic"):
            resolve_config("splitting", {"deterministic": "false"})

    def test_unknown_runner_rejected(self):
        with pytest.raises(ValidationError):
            resolve_config("resonance_fluorescence")

    def test_config_file_parsing(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("# a comment\nfreq_a = 8.5GHz\n\nprobe_count=101 # inline\n")
        overrides = parse_config_file(path)
        assert overrides == {"freq_a": "8.5GHz", "probe_count": "101"}

    def test_config_file_rejects_bad_lines(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("freq_a 8.5GHz\n")
        with pytest.raises(ValidationError, match="key = value"):
            parse_config_file(path)


SMALL_SPLITTING = {"probe_count": "201", "pump_count": "3"}
SMALL_CHEVRON = {"delta_count": "5", "t_end": "4us"}
SMALL_SR = {"delay_count": "4", "delay_stop": "16us"}
SMALL_PHASE = {"phase_count": "8", "delay": "2us"}


class TestSplittingRunner:
    def test_dip_separation_and_outputs(self, tmp_path):
        cfg = resolve_config("splitting", SMALL_SPLITTING)
        results = run_splitting(cfg, tmp_path)
        assert results["dip_separation_hz"] == pytest.approx(2.4e6, rel=0.05)
        assert results["dip_count"] == 2
        assert (tmp_path / "spectrum.csv").exists()
        assert (tmp_path / "report.txt").exists()

    def test_csv_has_hash_header_block(self, tmp_path):
        run_splitting(resolve_config("splitting", SMALL_SPLITTING), tmp_path)
        lines = (tmp_path / "spectrum.csv").read_text().splitlines()
        assert lines[0].startswith("# ")
        k = next(i for i, l in enumerate(lines) if not l.startswith("#"))
        assert lines[k] == "pump_detuning_hz,probe_offset_hz,reflection_abs"

    def test_report_contains_resolved_config(self, tmp_path):
        run_splitting(resolve_config("splitting", SMALL_SPLITTING), tmp_path)
        report = (tmp_path / "report.txt").read_text()
        assert "runner = splitting" in report
        assert "config.freq_a = 8700000000Hz" in report
        assert "result.dip_separation_hz" in report


class TestChevronRunner:
    def test_ridge_and_fit(self, tmp_path):
        cfg = resolve_config("chevron", SMALL_CHEVRON)
        results = run_chevron(cfg, tmp_path)
        assert results["gp_fit_hz"] == pytest.approx(1.2e6, rel=0.02)
        assert results["model_rms_rel"] < 0.02
        assert results["ridge_min_hz"] == pytest.approx(2.4e6, rel=0.02)
        assert results["convergence_rel_diff"] < 1e-8

    def test_deterministic_across_worker_counts(self, tmp_path):
        cfg1 = resolve_config("chevron", dict(SMALL_CHEVRON, jobs="1"))
        cfg2 = resolve_config("chevron", dict(SMALL_CHEVRON, jobs="3"))
        run_chevron(cfg1, tmp_path / "a")
        run_chevron(cfg2, tmp_path / "b")
        for name in ("chevron_map.csv", "chevron_ridge.csv"):
            assert (tmp_path / "a" / name).read_bytes() == \
                (tmp_path / "b" / name).read_bytes()

    def test_repeated_runs_byte_identical(self, tmp_path):
        cfg = resolve_config("chevron", SMALL_CHEVRON)
        run_chevron(cfg, tmp_path / "a")
        run_chevron(cfg, tmp_path / "b")
        assert (tmp_path / "a" / "report.txt").read_bytes() == \
            (tmp_path / "b" / "report.txt").read_bytes()

    def test_lab_frame_guard(self, tmp_path):
        cfg = resolve_config("chevron", dict(SMALL_CHEVRON, frame="lab"))
        with pytest.raises(ValidationError, match="lab-frame"):
            run_chevron(cfg, tmp_path)


class TestStoreRetrieveRunner:
    def test_efficiency_and_decay(self, tmp_path):
        cfg = resolve_config("store_retrieve", SMALL_SR)
        results = run_store_retrieve(cfg, tmp_path)
        assert 0.65 <= results["eta_shortest"] <= 0.85
        assert results["tau_s"] == pytest.approx(14.9e-6, rel=0.01)
        assert results["eta_prime"] >= 0.99
        assert results["convergence_rel_diff"] < 1e-8
        # calibrated swap time sits near (slightly below) pi/(2 g)
        t_pi = math.pi / (2.0 * TWO_PI * results["gp_hz"])
        assert 0.95 * t_pi < results["t_swap_s"] < t_pi

    def test_explicit_swap_time_is_respected(self, tmp_path):
        cfg = resolve_config("store_retrieve",
                             dict(SMALL_SR, t_swap="0.18us", delay_count="4"))
        results = run_store_retrieve(cfg, tmp_path)
        assert results["t_swap_s"] == pytest.approx(0.18e-6)
        # a mistimed swap leaves energy behind: efficiency drops
        assert results["eta_shortest"] < 0.72


class TestPhaseSweepRunner:
    def test_slope_magnitude_and_locus(self, tmp_path):
        cfg = resolve_config("phase_sweep", SMALL_PHASE)
        results = run_phase_sweep(cfg, tmp_path)
        assert results["phase_slope"] == pytest.approx(1.0, abs=1e-6)
        assert results["iq_mag_rel_spread"] < 1e-9
        assert results["iq_locus_area"] == pytest.approx(
            results["iq_locus_area_expected"], rel=1e-6)


class TestCli:
    def test_splitting_via_cli(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text("probe_count = 201\npump_count = 3\n")
        rc = main(["splitting", "--config", str(cfg),
                   "--out", str(tmp_path / "out")])
        assert rc == 0
        out = capsys.readouterr().out
        assert "dip_separation_hz" in out
        assert (tmp_path / "out" / "report.txt").exists()

    def test_custom_sequence_via_cli(self, tmp_path, capsys):
        seq = tmp_path / "seq.txt"
        seq.write_text(
            "mode A freq=8.7GHz q_int=900e3 q_ext=50e3\n"
            "mode B freq=9.33GHz t1=14.9us\n"
            "seg load dur=5us nbar=4\n"
            "seg swap dur=0.2us gp=1.2MHz delta=0Hz phase=0deg\n"
            "seg readout dur=2us\n")
        cfg = tmp_path / "cfg.txt"
        cfg.write_text(f"sequence = {seq}\n")
        rc = main(["custom_sequence", "--config", str(cfg),
                   "--out", str(tmp_path / "out")])
        assert rc == 0
        assert (tmp_path / "out" / "trace.csv").exists()
        assert (tmp_path / "out" / "trace.csv.meta").exists()

    def test_validation_error_exits_2(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text("nonsense = 1\n")
        rc = main(["splitting", "--config", str(cfg),
                   "--out", str(tmp_path / "out")])
        assert rc == 2
        assert "unknown config key" in capsys.readouterr().err

    def test_missing_config_file_exits_2(self, tmp_path, capsys):
        rc = main(["splitting", "--config", str(tmp_path / "absent.txt"),
                   "--out", str(tmp_path / "out")])
        assert rc == 2

    def test_numerical_failure_exits_3(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text("tolerance = 1e-18\ndelta_count = 3\nt_end = 2us\n")
        rc = main(["chevron", "--config", str(cfg),
                   "--out", str(tmp_path / "out")])
        assert rc == 3
        assert "numerical check failed" in capsys.readouterr().err

    def test_jobs_and_lab_frame_flags_are_wired(self, tmp_path):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text("delta_count = 3\nt_end = 2us\n")
        rc = main(["chevron", "--config", str(cfg), "--lab-frame",
                   "--out", str(tmp_path / "out")])
        assert rc == 2  # lab frame at GHz carriers is refused with a clear error

    def test_all_runners_have_subcommands(self, capsys):
        with pytest.raises(SystemExit):
            main(["--help"])
        out = capsys.readouterr().out
        for name in RUNNERS:
            assert name in out
