"""Tests for configuration, sweeps, statistics and CSV output."""

import subprocess
import sys
from dataclasses import replace

import numpy as np
import pytest

from wlmbdf.harness import (CSV_COLUMNS, BerRecord, ConfigError,
                            SimConfig, calibrate_beta, config_from_dict,
                            format_csv, intervals_separated, load_config,
                            packet_stream_seed, run_point, run_sweep,
                            simulate_coded_packet, snr_to_noise_variance,
                            wilson_halfwidth, wilson_interval)
from wlmbdf.signal_model import SystemDims

SMALL = SimConfig(dims=SystemDims(2, 1, 4), detectors=("wl-mb-df", "rmf"),
                  branches=2, beta=1.0, snr_db=(2.0, 6.0),
                  symbols_per_packet=40, packets_per_point=6,
                  max_bit_errors=10_000, master_seed=77)


class TestSnrFormula:
    def test_reference_point(self):
        assert snr_to_noise_variance(10.0, 8, 1.0, 1.0, 2) == pytest.approx(0.4)

    def test_zero_db_single_stream(self):
        assert snr_to_noise_variance(0.0, 1, 1.7, 1.0, 1) == pytest.approx(1.7)

    def test_halving_rate_doubles_noise(self):
        full = snr_to_noise_variance(6.0, 4, 1.0, 1.0, 2)
        half = snr_to_noise_variance(6.0, 4, 1.0, 0.5, 2)
        assert half == pytest.approx(2.0 * full)

    def test_invalid_rate(self):
        with pytest.raises(ValueError, match="rate"):
            snr_to_noise_variance(0.0, 1, 1.0, 0.0, 1)


class TestWilson:
    def test_halfwidth_shrinks_with_trials(self):
        assert wilson_halfwidth(10, 1000) > wilson_halfwidth(100, 10000)

    def test_interval_contains_rate(self):
        lo, hi = wilson_interval(50, 1000)
        assert lo < 0.05 < hi
        assert 0.0 <= lo and hi <= 1.0

    def test_zero_errors(self):
        lo, hi = wilson_interval(0, 1000)
        assert lo == pytest.approx(0.0, abs=1e-12)
        assert 0 < hi < 0.01

    def test_separation_predicate(self):
        assert intervals_separated(10, 10000, 100, 10000)
        assert not intervals_separated(90, 10000, 100, 10000)


class TestConfig:
    def test_defaults_are_desk_scale(self):
        cfg = SimConfig()
        assert cfg.dims == SystemDims(4, 2, 16)
        assert cfg.branches == 8
        assert cfg.packet_symbols == 500

    def test_coded_default_packet(self):
        assert replace(SimConfig(), coded=True).packet_symbols == 1000

    def test_empty_snr_grid_rejected(self):
        with pytest.raises(ConfigError, match="snr"):
            SimConfig(snr_db=())

    def test_unknown_detector_lists_registry(self):
        with pytest.raises(ConfigError, match="registered"):
            SimConfig(detectors=("zf",))

    def test_beta_calibrate_placeholder(self):
        cfg = SimConfig(beta="calibrate")
        with pytest.raises(ConfigError, match="calibrate"):
            cfg.beta_value()
        with pytest.raises(ConfigError, match="beta"):
            SimConfig(beta="auto")

    def test_from_dict_round_trip(self):
        cfg = config_from_dict({
            "dims": {"k": 2, "n_u": 1, "n_a": 4},
            "modulation": "qpsk",
            "detectors": ["wl-mb-df"],
            "branches": 4,
            "beta": 1.0,
            "snr_db": [0, 4],
            "imbalance": {"enabled": True, "gain": [0.9, 1.1], "phase_deg": [-10, 10]},
            "coded": False,
            "packets_per_point": 3,
            "master_seed": 5,
        })
        assert cfg.dims == SystemDims(2, 1, 4)
        assert cfg.imbalance.gain == (0.9, 1.1)

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError, match="unknown key"):
            config_from_dict({"snr": [1]})

    def test_unknown_nested_key(self):
        with pytest.raises(ConfigError, match="unknown key"):
            config_from_dict({"dims": {"k": 2, "n_u": 1, "n_a": 4, "rx": 9}})

    def test_load_yaml_file(self, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text("dims: {k: 2, n_u: 1, n_a: 4}\nsnr_db: [3]\n"
                        "detectors: [rmf]\npackets_per_point: 2\n")
        cfg = load_config(str(path))
        assert cfg.detectors == ("rmf",)

    def test_load_missing_file(self):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config("/nonexistent/cfg.yaml")


class TestSweep:
    def test_deterministic_csv_across_runs(self):
        a = format_csv(run_sweep(SMALL))
        b = format_csv(run_sweep(SMALL))
        assert a == b

    def test_deterministic_across_thread_counts(self):
        a = format_csv(run_sweep(SMALL, threads=1))
        b = format_csv(run_sweep(SMALL, threads=3))
        assert a == b

    def test_csv_schema(self):
        text = format_csv(run_sweep(SMALL))
        lines = text.strip().split("\n")
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert len(lines) == 1 + len(SMALL.detectors) * len(SMALL.snr_db)
        rows = [ln.split(",") for ln in lines[1:]]
        assert [r[0] for r in rows] == sorted(r[0] for r in rows)
        for r in rows:
            assert len(r) == len(CSV_COLUMNS)
            float(r[5]), float(r[6])          # parsable ber, ci

    def test_six_significant_digits(self):
        rec = BerRecord("rmf", 10.0, 0, 3_000_000, 1_234_567, 42)
        line = format_csv([rec]).strip().split("\n")[1]
        assert line.split(",")[5] == "0.411522"

    def test_stop_rule_truncates_on_errors(self):
        cfg = replace(SMALL, detectors=("rmf",), snr_db=(0.0,),
                      packets_per_point=64, max_bit_errors=5)
        rec = run_point(cfg, "rmf", 0)[0]
        # one batch of 8 packets, 160 bits each (2 streams x 40 QPSK symbols)
        assert rec.trials_bits == 8 * 160
        assert rec.bit_errors >= 5

    def test_coded_records_per_iteration(self):
        cfg = SimConfig(dims=SystemDims(2, 1, 4), detectors=("wl-mb-df",),
                        branches=2, beta=1.0, snr_db=(0.0,), coded=True,
                        iterations=3, symbols_per_packet=100,
                        packets_per_point=2, master_seed=3)
        recs = run_point(cfg, "wl-mb-df", 0)
        assert [r.iteration for r in recs] == [1, 2, 3]
        assert all(r.trials_bits == recs[0].trials_bits for r in recs)

    def test_coded_rejects_uncodable_detector(self):
        cfg = replace(SMALL, coded=True, detectors=("rmf",))
        with pytest.raises(ConfigError, match="IDD"):
            simulate_coded_packet(cfg, "rmf", 0, 0)

    def test_stream_seed_is_stable(self):
        # frozen value guards against platform- or run-dependent hashing
        assert packet_stream_seed("rmf", 0, 0) == 4891357056731376631

    def test_rmf_interference_floor_at_30db(self):
        """At 30 dB the matched filter stays interference-limited while the
        proposed detector is at least tenfold better."""
        cfg = SimConfig(detectors=("rmf", "wl-mb-df"), snr_db=(30.0,),
                        branches=8, beta=1.0, packets_per_point=8,
                        max_bit_errors=10 ** 9, master_seed=30)
        recs = {r.detector: r for r in run_sweep(cfg)}
        assert recs["rmf"].ber > 1e-3
        assert recs["rmf"].ber > 10.0 * recs["wl-mb-df"].ber

    def test_calibrate_beta_returns_grid_member(self):
        cfg = replace(SMALL, detectors=("wl-mb-df",), snr_db=(4.0,),
                      packets_per_point=2)
        best, table = calibrate_beta(cfg, grid=(0.0, 1.0))
        assert best in (0.0, 1.0)
        assert len(table) == 2


class TestCli:
    def test_ber_round_trip(self, tmp_path):
        cfg = tmp_path / "cfg.yaml"
        cfg.write_text("dims: {k: 2, n_u: 1, n_a: 4}\nsnr_db: [4]\n"
                       "detectors: [rmf]\npackets_per_point: 2\n"
                       "symbols_per_packet: 50\nmaster_seed: 9\n")
        out = tmp_path / "out.csv"
        proc = subprocess.run([sys.executable, "-m", "wlmbdf.cli", "ber",
                               "--config", str(cfg), "--out", str(out)],
                              capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        assert out.exists()
        assert out.read_text().startswith(",".join(CSV_COLUMNS))

    def test_config_error_exit_code(self, tmp_path):
        cfg = tmp_path / "bad.yaml"
        cfg.write_text("unknown_key: 1\n")
        proc = subprocess.run([sys.executable, "-m", "wlmbdf.cli", "ber",
                               "--config", str(cfg)],
                              capture_output=True, text=True)
        assert proc.returncode == 1
        assert "config error" in proc.stderr
