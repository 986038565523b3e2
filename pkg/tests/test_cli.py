"""Command-line surface: flags, JSON output, config files, manifests and
file emission."""

import json
import os

import numpy as np
import pytest

from cloudprofit.cli import build_parser, main, parse_config_text, resolve_config


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestBlockingCommand:
    def test_reference_value(self, capsys):
        code, out, _ = run_cli(capsys, "blocking", "--n", "10", "--rho", "8",
                               "--ca2", "1", "--json")
        assert code == 0
        payload = json.loads(out)
        assert payload["blocking"] == pytest.approx(0.12166, abs=1e-5)
        assert payload["z"] == 1.0

    def test_no_servers(self, capsys):
        code, out, _ = run_cli(capsys, "blocking", "--n", "0", "--rho", "5",
                               "--json")
        assert code == 0
        assert json.loads(out)["blocking"] == 1.0

    def test_hayward_diagnostics(self, capsys):
        code, out, _ = run_cli(capsys, "blocking", "--n", "10", "--rho", "8",
                               "--ca2", "2", "--service", "exp", "--json")
        assert code == 0
        payload = json.loads(out)
        assert payload["z"] == pytest.approx(1.5)
        assert payload["eta"] == 0.5
        assert payload["blocking"] == pytest.approx(0.164519674596318, abs=1e-9)

    def test_plain_erlang_flag(self, capsys):
        _, out, _ = run_cli(capsys, "blocking", "--n", "10", "--rho", "8",
                            "--ca2", "2", "--plain-erlang", "--json")
        assert json.loads(out)["blocking"] == pytest.approx(0.12166, abs=1e-5)

    def test_bad_flags_exit_nonzero(self, capsys):
        code, _, err = run_cli(capsys, "blocking", "--n", "-3", "--rho", "8")
        assert code == 1
        assert "error" in err


class TestDecideCommand:
    def test_qed_prints_calibration(self, capsys):
        code, out, _ = run_cli(capsys, "decide", "--policy", "qed",
                               "--lambda", "300", "--mu", "28.571",
                               "--c", "0.0017", "--d", "17",
                               "--n-current", "13", "--json")
        assert code == 0
        payload = json.loads(out)
        assert payload["alpha"] == pytest.approx(0.09722, abs=1e-4)
        assert payload["z_alpha"] == pytest.approx(1.29754, abs=1e-4)
        assert payload["n_next"] >= 13

    def test_optimal_zero_traffic(self, capsys):
        code, out, _ = run_cli(capsys, "decide", "--policy", "optimal",
                               "--lambda", "0", "--n-current", "9", "--json")
        assert code == 0
        payload = json.loads(out)
        assert payload["n_next"] == 0
        assert payload["n_minus"] == 9

    def test_optimal_agrees_with_exhaustive(self, capsys):
        code, out, _ = run_cli(capsys, "decide", "--policy", "optimal",
                               "--lambda", "300", "--mu", "28.571",
                               "--n-current", "13", "--scan-max", "200",
                               "--json")
        assert code == 0
        payload = json.loads(out)
        assert payload["n_next"] == payload["exhaustive_n"]


class TestSweepCommand:
    def test_boot_time_sweep_shape(self, capsys):
        code, out, _ = run_cli(capsys, "sweep", "--axis", "t_up",
                               "--start", "0", "--stop", "50", "--step", "5",
                               "--lambda", "300", "--n-current", "15")
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0].startswith("t_up_minutes,")
        n_plus = [int(line.split(",")[2]) for line in lines[1:]]
        assert all(a >= b for a, b in zip(n_plus, n_plus[1:]))

    def test_single_point_range(self, capsys):
        code, out, _ = run_cli(capsys, "sweep", "--axis", "charge",
                               "--start", "0.0017", "--stop", "0.0017",
                               "--step", "1")
        assert code == 0
        assert len(out.strip().splitlines()) == 2

    def test_charge_sweep_crosses_release_threshold(self, capsys):
        code, out, _ = run_cli(capsys, "sweep", "--axis", "charge",
                               "--start", "0.000001", "--stop", "0.003",
                               "--step", "0.0002", "--lambda", "300",
                               "--n-current", "13")
        assert code == 0
        rows = [line.split(",") for line in out.strip().splitlines()[1:]]
        n_next = [int(r[1]) for r in rows]
        assert n_next[0] == 0
        assert n_next[-1] > 0

    def test_empty_range_rejected(self, capsys):
        code, _, err = run_cli(capsys, "sweep", "--axis", "t_up",
                               "--start", "10", "--stop", "0", "--step", "5")
        assert code == 1


CONFIG_SMALL = """
# tiny synthetic run
policy = qed
seed = 5
synthetic_days = 1
synthetic_base_rate = 900
synthetic_amplitude = 300
synthetic_noise_scv = 0.0
n_max = 30
"""


class TestSimulateCommand:
    def _trim_trace(self, cfg_path, tmp_path):
        return cfg_path

    def test_writes_reports_and_manifest(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(CONFIG_SMALL)
        out_dir = tmp_path / "out"
        code, out, _ = run_cli(capsys, "simulate", "--config", str(cfg),
                               "--out-dir", str(out_dir), "--json")
        assert code == 0
        for name in ("report.json", "report.csv", "manifest.json"):
            assert (out_dir / name).exists()
        payload = json.loads((out_dir / "report.json").read_text())
        assert payload["policy"] == "qed"
        assert payload["manifest"]["config"]["seed"] == 5
        summary = json.loads(out)
        assert summary[0]["policy"] == "qed"

    def test_manifest_rerun_is_byte_identical(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(CONFIG_SMALL)
        out1 = tmp_path / "out1"
        out2 = tmp_path / "out2"
        assert run_cli(capsys, "simulate", "--config", str(cfg),
                       "--out-dir", str(out1))[0] == 0
        assert run_cli(capsys, "simulate", "--manifest",
                       str(out1 / "manifest.json"),
                       "--out-dir", str(out2))[0] == 0
        for name in ("report.json", "report.csv", "manifest.json"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_policy_all_writes_comparison(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(CONFIG_SMALL.replace("synthetic_days = 1",
                                            "synthetic_days = 1\nn_fixed = 3"))
        out_dir = tmp_path / "all"
        code, _, _ = run_cli(capsys, "simulate", "--config", str(cfg),
                             "--policy", "all", "--out-dir", str(out_dir))
        assert code == 0
        names = sorted(os.listdir(out_dir))
        for policy in ("optimal", "qed", "grassmann", "always_on", "reactive"):
            assert f"report_{policy}.json" in names
        comparison = (out_dir / "comparison.csv").read_text().strip().splitlines()
        assert comparison[0].startswith("policy,")
        assert len(comparison) == 6
        profits = [float(line.split(",")[1]) for line in comparison[1:]]
        assert profits == sorted(profits, reverse=True)

    def test_missing_config_errors(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, "simulate", "--config",
                               str(tmp_path / "nope.cfg"))
        assert code == 1
        assert "error" in err


class TestForecastCommand:
    def test_constant_series(self, tmp_path, capsys):
        series = tmp_path / "series.txt"
        series.write_text("\n".join(["100.0"] * 120))
        code, out, _ = run_cli(capsys, "forecast", "--series", str(series),
                               "--season-len", "24", "--json")
        assert code == 0
        payload = json.loads(out)
        assert payload["forecast"] == pytest.approx(100.0, abs=1e-4)
        assert abs(payload["relative_error_mean"]) < 1e-6

    def test_generated_series_low_error(self, tmp_path, capsys):
        m = 12
        seas = 1.0 + 0.3 * np.sin(2 * np.pi * np.arange(m) / m)
        seas /= seas.mean()
        values, level = [], 50.0
        for t in range(m * 8):
            values.append(float((level + 0.2) * seas[t % m]))
            level += 0.2
        series = tmp_path / "gen.txt"
        series.write_text("\n".join(f"{v!r}" for v in values))
        code, out, _ = run_cli(capsys, "forecast", "--series", str(series),
                               "--season-len", str(m), "--holdout", str(m),
                               "--json")
        assert code == 0
        payload = json.loads(out)
        assert payload["relative_error_mean_abs"] < 0.01

    def test_too_short_series(self, tmp_path, capsys):
        series = tmp_path / "short.txt"
        series.write_text("\n".join(["5.0"] * 30))
        code, _, err = run_cli(capsys, "forecast", "--series", str(series),
                               "--season-len", "24")
        assert code == 1


class TestConfigParsing:
    def test_roundtrip_defaults(self):
        resolved = resolve_config({})
        assert resolved["policy"] == "optimal"
        assert resolved["n_max"] == 1000

    def test_comments_and_overrides(self):
        parsed = parse_config_text("policy = reactive  # baseline\nseed = 9\n")
        assert parsed == {"policy": "reactive", "seed": 9}

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError, match="unknown key"):
            parse_config_text("wizardry = 3\n")

    def test_bad_line_rejected(self):
        with pytest.raises(ValueError, match="key = value"):
            parse_config_text("just some words\n")

    def test_parser_builds(self):
        parser = build_parser()
        args = parser.parse_args(["blocking", "--n", "1", "--rho", "0.5"])
        assert args.command == "blocking"
