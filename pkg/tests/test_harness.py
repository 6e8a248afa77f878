"""Tests for config validation, the run dispatcher, and the CLI entry point."""

import json

import numpy as np
import pytest

from muclab import channel
from muclab.harness import (
    ExperimentConfig,
    config_from_args,
    build_parser,
    main,
    run,
    validate,
)

EXPLICIT_UNITARIES = [
    [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]],
    [[[0.0, 0.0], [1.0, 0.0]], [[1.0, 0.0], [0.0, 0.0]]],
]


def read_summary(tmp_path, kind):
    with open(tmp_path / f"{kind}_summary.json", encoding="utf-8") as handle:
        return json.load(handle)


def test_validate_accepts_runnable_learn_config():
    config = ExperimentConfig(
        kind="learn", channel={"d_channel": 2, "r": 2}, N=100
    )
    assert validate(config) == []


def test_validate_flags_missing_theta_for_explicit_unitaries():
    config = ExperimentConfig(
        kind="learn", channel={"d_channel": 2, "unitaries": EXPLICIT_UNITARIES}, N=100
    )
    problems = validate(config)
    assert any(problem.startswith("theta") for problem in problems)


def test_validate_flags_effective_rank_over_cap():
    config = ExperimentConfig(
        kind="concat_audit", d_channel=2, r=4, k=7, protocols=1
    )
    problems = validate(config)
    assert any("cap" in problem and "4096" in problem for problem in problems)


def test_validate_flags_concentration_outside_orbit_regime():
    config = ExperimentConfig(kind="concentration", d_channel=2, r=5, trials=1)
    problems = validate(config)
    assert any("d_channel**2" in problem for problem in problems)


def test_validate_never_raises_on_unknown_kind():
    problems = validate(ExperimentConfig(kind="bogus"))
    assert problems and "kind" in problems[0]


def test_validate_requires_rank_when_channel_fully_random():
    config = ExperimentConfig(kind="learn", channel={"d_channel": 2}, N=10)
    problems = validate(config)
    assert any("channel.r" in problem for problem in problems)


def test_from_sources_rejects_unknown_field():
    with pytest.raises(ValueError, match="unknown config field"):
        ExperimentConfig.from_sources({"bogus": 1}, {})


def test_from_sources_overrides_win():
    config = ExperimentConfig.from_sources(
        {"kind": "learn", "N": 10, "root_seed": 3}, {"N": 99}
    )
    assert config.N == 99
    assert config.root_seed == 3


def test_run_bound_summary_contains_reference_value(tmp_path):
    config = ExperimentConfig(
        kind="bound", r=4, d=2, k=1, epsilon=0.1, out=str(tmp_path)
    )
    assert run(config) == 0
    summary = read_summary(tmp_path, "bound")
    assert summary["reference_lower_bound"] == pytest.approx(200.0, rel=1e-12)
    assert "wall_time" in summary


def test_run_invalid_config_returns_two(tmp_path, capsys):
    config = ExperimentConfig(kind="concentration", d_channel=2, r=5, trials=1, out=str(tmp_path))
    assert run(config) == 2
    assert "config problem" in capsys.readouterr().err


def test_run_fisher_audit_records_all_satisfied(tmp_path):
    config = ExperimentConfig(
        kind="fisher_audit", d_channel=2, r=3, protocols=10, out=str(tmp_path)
    )
    assert run(config) == 0
    lines = (tmp_path / "fisher_audit.csv").read_text().splitlines()
    assert lines[0] == "kind,seed,d_channel,r,k,trace_fisher,bound,slack,satisfied"
    assert len(lines) == 11
    assert all(line.endswith(",true") for line in lines[1:])
    summary = read_summary(tmp_path, "fisher_audit")
    assert summary["all_satisfied"] is True
    assert summary["min_slack"] >= -1e-6 * 3 * 4


def test_run_concat_audit_uses_k_squared_bound(tmp_path):
    config = ExperimentConfig(
        kind="concat_audit", d_channel=2, r=2, k=2, protocols=4, out=str(tmp_path)
    )
    assert run(config) == 0
    summary = read_summary(tmp_path, "concat_audit")
    assert summary["all_satisfied"] is True
    rows = (tmp_path / "concat_audit.csv").read_text().splitlines()[1:]
    bounds = {float(row.split(",")[6]) for row in rows}
    assert bounds == {2**2 * 2 * 4.0}


def test_run_concentration_csv_header_and_rows(tmp_path):
    config = ExperimentConfig(
        kind="concentration", d_channel=2, r=2, trials=3, out=str(tmp_path)
    )
    assert run(config) == 0
    lines = (tmp_path / "concentration.csv").read_text().splitlines()
    assert lines[0] == "kind,seed,d_channel,r,trial,min_kii,mean_kii,lambda_min_k"
    assert len(lines) == 4


def test_rerun_produces_byte_identical_csv(tmp_path):
    def once(sub):
        out = tmp_path / sub
        config = ExperimentConfig(
            kind="mse_sweep",
            channel={"d_channel": 2, "r": 2},
            N_values=[50, 100],
            trials=3,
            root_seed=5,
            out=str(out),
        )
        assert run(config) == 0
        return (out / "mse_sweep.csv").read_bytes(), read_summary(out, "mse_sweep")

    csv_a, summary_a = once("a")
    csv_b, summary_b = once("b")
    assert csv_a == csv_b
    lines = csv_a.decode().splitlines()
    assert lines[0] == "kind,seed,d_channel,r,k,N,trial,sq_error"
    for summary in (summary_a, summary_b):
        summary.pop("wall_time")
        summary.pop("csv_path")
    assert summary_a == summary_b


def test_threaded_run_matches_serial_bytes(tmp_path):
    outputs = {}
    for threads in (1, 2):
        out = tmp_path / f"t{threads}"
        config = ExperimentConfig(
            kind="concentration",
            d_channel=2,
            r=3,
            trials=4,
            threads=threads,
            out=str(out),
        )
        assert run(config) == 0
        outputs[threads] = (out / "concentration.csv").read_bytes()
    assert outputs[1] == outputs[2]


def test_mse_sweep_summary_reference_and_slope(tmp_path):
    config = ExperimentConfig(
        kind="mse_sweep",
        channel={"d_channel": 2, "r": 2},
        N_values=[100, 1000],
        trials=5,
        out=str(tmp_path),
    )
    assert run(config) == 0
    summary = read_summary(tmp_path, "mse_sweep")
    assert summary["per_N"]["100"]["reference_mse"] == pytest.approx(6.25 / 100)
    assert summary["per_N"]["1000"]["reference_mse"] == pytest.approx(6.25 / 1000)
    assert "loglog_slope" in summary


def test_rank_cap_env_var_reaches_validation(tmp_path, monkeypatch):
    monkeypatch.setenv(channel.RANK_CAP_ENV, "10")
    assert channel.rank_cap() == 10
    config = ExperimentConfig(kind="concat_audit", d_channel=2, r=2, k=4, protocols=1)
    problems = validate(config)
    assert any("cap" in problem and "10" in problem for problem in problems)
    monkeypatch.setenv(channel.RANK_CAP_ENV, "100")
    assert validate(config) == []


def test_cli_bound_and_exit_codes(tmp_path, capsys):
    code = main(
        ["bound", "--r", "4", "--d", "2", "--epsilon", "0.1", "--out", str(tmp_path)]
    )
    assert code == 0
    assert read_summary(tmp_path, "bound")["reference_lower_bound"] == pytest.approx(200.0)
    code = main(
        ["concentration", "--d-channel", "2", "--r", "5", "--trials", "1", "--out", str(tmp_path)]
    )
    assert code == 2
    assert "config problem" in capsys.readouterr().err


def test_cli_learn_with_channel_flags(tmp_path):
    code = main(
        [
            "learn",
            "--d-channel", "2",
            "--r", "2",
            "--N", "100",
            "--seed", "7",
            "--out", str(tmp_path),
        ]
    )
    assert code == 0
    summary = read_summary(tmp_path, "learn")
    assert summary["root_seed"] == 7
    assert len(summary["theta_hat"]) == 2
    assert sum(summary["counts"]) == 100


def test_cli_theta_flag_fixes_rank(tmp_path):
    code = main(
        ["learn", "--d-channel", "2", "--theta", "0.25,0.75", "--N", "10", "--out", str(tmp_path)]
    )
    assert code == 0
    assert len(read_summary(tmp_path, "learn")["theta_hat"]) == 2


def test_cli_config_file_with_flag_override(tmp_path):
    config_path = tmp_path / "config.json"
    config_path.write_text(
        json.dumps({"channel": {"d_channel": 2, "r": 2}, "N": 50, "root_seed": 3})
    )
    out = tmp_path / "out"
    code = main(["learn", "--config", str(config_path), "--N", "200", "--out", str(out)])
    assert code == 0
    summary = read_summary(out, "learn")
    assert summary["N"] == 200
    assert summary["root_seed"] == 3


def test_cli_unknown_config_field_fails_cleanly(tmp_path, capsys):
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps({"bogus": 1, "N": 10}))
    code = main(["learn", "--config", str(config_path), "--out", str(tmp_path)])
    assert code == 2
    assert "unknown config field" in capsys.readouterr().err


def test_cli_repeatable_shot_flag_builds_sweep(tmp_path):
    code = main(
        [
            "mse_sweep",
            "--d-channel", "2",
            "--r", "2",
            "--N", "50",
            "--N", "100",
            "--trials", "2",
            "--out", str(tmp_path),
        ]
    )
    assert code == 0
    summary = read_summary(tmp_path, "mse_sweep")
    assert summary["N_values"] == [50, 100]


def test_parser_rejects_missing_subcommand(capsys):
    with pytest.raises(SystemExit):
        build_parser().parse_args([])
    capsys.readouterr()


def test_config_from_args_folds_channel_flags():
    args = build_parser().parse_args(
        ["learn", "--d-channel", "4", "--r", "3", "--N", "10"]
    )
    config = config_from_args(args)
    assert config.channel == {"d_channel": 4, "r": 3}
    assert config.N == 10
