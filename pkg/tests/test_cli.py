import json
import math

import pytest

import alignsim.cli as cli
from alignsim.cli import RunConfig, UsageError, _render_json, main, parse_config, run
from alignsim.evaluate import SchemeFailure
from fractions import Fraction


class TestParseConfig:
    def test_defaults(self):
        config = parse_config(["--scheme", "bc_mat"])
        assert config.mode == "verify"
        assert config.trials == 100
        assert config.seed == 0
        assert config.format == "json"
        assert config.threads == 0

    def test_flags_override_config_file(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"scheme": "bc_mat", "trials": 7, "seed": 3}))
        config = parse_config(["--config", str(path), "--trials", "9"])
        assert config.trials == 9
        assert config.seed == 3
        assert config.scheme == "bc_mat"

    def test_unknown_config_key_is_named(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"scheme": "bc_mat", "trails": 5}))
        with pytest.raises(UsageError, match="trails"):
            parse_config(["--config", str(path)])

    def test_missing_config_file(self):
        with pytest.raises(UsageError, match="cannot read"):
            parse_config(["--scheme", "bc_mat", "--config", "/nonexistent/x.json"])

    def test_scheme_required(self):
        with pytest.raises(UsageError, match="scheme"):
            parse_config([])

    def test_snr_grid_only_in_dof_sweep(self):
        with pytest.raises(UsageError, match="does not take"):
            parse_config(["--scheme", "bc_mat", "--snr-grid", "40,50"])
        with pytest.raises(UsageError, match="requires an SNR grid"):
            parse_config(["--scheme", "bc_mat", "--mode", "dof_sweep"])

    def test_snr_grid_needs_two_points(self):
        with pytest.raises(UsageError, match="two points"):
            parse_config(["--scheme", "bc_mat", "--mode", "dof_sweep", "--snr-grid", "40"])

    def test_bad_snr_grid_text(self):
        with pytest.raises(UsageError, match="bad SNR grid"):
            parse_config(
                ["--scheme", "bc_mat", "--mode", "dof_sweep", "--snr-grid", "40,abc"]
            )

    def test_csv_only_in_dof_sweep(self):
        with pytest.raises(UsageError, match="csv"):
            parse_config(["--scheme", "bc_mat", "--format", "csv"])

    def test_bad_tolerance(self):
        with pytest.raises(UsageError):
            parse_config(["--scheme", "bc_mat", "--tol-rank", "2.0"])

    def test_trials_must_be_positive(self):
        with pytest.raises(UsageError, match="trials"):
            parse_config(["--scheme", "bc_mat", "--trials", "0"])

    def test_resolved_threads(self):
        config = parse_config(["--scheme", "bc_mat", "--threads", "3"])
        assert config.resolved_threads() == 3
        config = parse_config(["--scheme", "bc_mat"])
        assert config.resolved_threads() >= 1


class TestRenderJson:
    def test_sorted_keys_and_fraction(self):
        text = _render_json({"b": Fraction(3, 7), "a": 1})
        assert text == '{"a":1,"b":"3/7"}'

    def test_float_precision_round_trips(self):
        value = 1.0 / 3.0
        assert json.loads(_render_json({"x": value}))["x"] == value

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            _render_json({"x": math.inf})

    def test_rejects_non_string_keys(self):
        with pytest.raises(TypeError):
            _render_json({1: "a"})

    def test_nested_containers_and_none(self):
        assert _render_json({"a": [1, (2.5, None)], "b": True}) == '{"a":[1,[2.5,null]],"b":true}'


def _run_main(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestVerifyMode:
    def test_verify_passes_and_reports(self, capsys):
        code, out, _ = _run_main(
            capsys,
            ["--scheme", "x_output_fb", "--trials", "5", "--seed", "1", "--threads", "1"],
        )
        assert code == 0
        doc = json.loads(out)
        assert doc["pass"] is True
        assert doc["results"]["decode_ok"] == 5
        assert doc["results"]["csi_slot_indices"] == []
        assert doc["config"]["scheme"] == "x_output_fb"

    def test_output_is_byte_stable(self, capsys):
        argv = ["--scheme", "bc_mat", "--trials", "4", "--seed", "9", "--threads", "1"]
        _, out1, _ = _run_main(capsys, argv)
        _, out2, _ = _run_main(capsys, argv)
        assert out1 == out2

    def test_out_file(self, capsys, tmp_path):
        path = tmp_path / "report.json"
        code, out, _ = _run_main(
            capsys,
            [
                "--scheme", "bc_mat", "--trials", "2", "--seed", "0",
                "--threads", "1", "--out", str(path),
            ],
        )
        assert code == 0
        assert out == ""
        doc = json.loads(path.read_text())
        assert doc["results"]["trials"] == 2

    def test_verify_reports_certificate_extrema(self, capsys):
        code, out, _ = _run_main(
            capsys,
            ["--scheme", "x_retro_csit", "--trials", "3", "--seed", "2", "--threads", "1"],
        )
        assert code == 0
        extrema = json.loads(out)["results"]["certificate_extrema"]
        assert extrema["colinearity_rx0"][1] <= 1e-8
        assert extrema["det_product"][0] > 0.0


class TestAuditMode:
    def test_x_scheme_fraction_is_exactly_three_sevenths(self, capsys):
        code, out, _ = _run_main(
            capsys,
            [
                "--scheme", "x_retro_csit", "--mode", "audit",
                "--trials", "3", "--seed", "0", "--threads", "1",
            ],
        )
        assert code == 0
        results = json.loads(out)["results"]
        assert results["csi_slot_fraction"] == "3/7"
        assert results["csi_slot_indices"] == [0, 1, 2]

    def test_ic3_scheme_fraction_at_most_five_eighths(self, capsys):
        code, out, _ = _run_main(
            capsys,
            [
                "--scheme", "ic3_retro_csit", "--mode", "audit",
                "--trials", "3", "--seed", "0", "--threads", "1",
            ],
        )
        assert code == 0
        results = json.loads(out)["results"]
        assert results["csi_slot_fraction"] == "5/8"
        assert Fraction(results["csi_slot_fraction"]) <= Fraction(5, 8)

    def test_output_feedback_audit(self, capsys):
        code, out, _ = _run_main(
            capsys,
            [
                "--scheme", "ic3_output_fb", "--mode", "audit",
                "--trials", "3", "--seed", "0", "--threads", "1",
            ],
        )
        assert code == 0
        results = json.loads(out)["results"]
        assert results["csi_slot_fraction"] == "0"
        assert results["outputs_own_receiver_only"] is True
        assert results["feedback_kind"] == "delayed_output"


class TestDofSweepMode:
    def test_high_snr_grid_passes(self, capsys):
        code, out, _ = _run_main(
            capsys,
            [
                "--scheme", "bc_mat", "--mode", "dof_sweep",
                "--snr-grid", "40,55,70", "--trials", "20",
                "--seed", "2", "--threads", "1",
            ],
        )
        assert code == 0
        results = json.loads(out)["results"]
        assert abs(results["slope"] - results["dof_counting_float"]) <= 0.05
        assert results["r_squared"] >= 0.999
        assert results["leakage_power_ratio"] < 1e-12

    def test_low_snr_grid_fails_the_slope_band(self, capsys):
        code, out, _ = _run_main(
            capsys,
            [
                "--scheme", "bc_mat", "--mode", "dof_sweep",
                "--snr-grid", "0,5", "--trials", "3",
                "--seed", "2", "--threads", "1",
            ],
        )
        assert code == 1
        assert json.loads(out)["pass"] is False

    def test_csv_output(self, capsys):
        code, out, _ = _run_main(
            capsys,
            [
                "--scheme", "bc_mat", "--mode", "dof_sweep",
                "--snr-grid", "40,55,70", "--trials", "20",
                "--seed", "2", "--threads", "1", "--format", "csv",
            ],
        )
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "snr_db,sum_rate,trials,discards"
        assert len(lines) == 4
        first = lines[1].split(",")
        assert float(first[0]) == 40.0
        assert float(first[1]) > 0.0


class TestFailurePaths:
    def test_usage_error_exit_code(self, capsys, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"scheme": "nope"}))
        code, out, err = _run_main(capsys, ["--config", str(path)])
        assert code == 2
        assert out == ""
        assert "unknown scheme" in err

    def test_bad_flag_choice_exits_2(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["--scheme", "nope"])
        assert info.value.code == 2

    def test_scheme_failure_maps_to_exit_3(self, capsys, monkeypatch):
        def boom(*args, **kwargs):
            raise SchemeFailure("synthetic invariant break")

        monkeypatch.setattr(cli, "run_trials", boom)
        config = parse_config(["--scheme", "bc_mat", "--trials", "1"])
        code = run(config)
        out = capsys.readouterr().out
        assert code == 3
        doc = json.loads(out)
        assert doc["pass"] is False
        assert doc["error"]["type"] == "SchemeFailure"
        assert "synthetic" in doc["error"]["message"]

    def test_config_echo_includes_all_flags(self, capsys):
        code, out, _ = _run_main(
            capsys,
            ["--scheme", "bc_mat", "--trials", "2", "--seed", "5", "--threads", "1"],
        )
        assert code == 0
        echo = json.loads(out)["config"]
        assert set(echo) == {
            "scheme", "mode", "trials", "seed", "snr_grid_db",
            "tol_rank", "tol_residual", "out", "format", "threads",
        }
