import json
import os

import pytest

from popart.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, main
from popart.binreg import RESULTS_HEADER

TINY_BINREG = {
    "methods": ["popart"],
    "alphas": [1e-2],
    "betas": [0.1],
    "n_samples": 40,
    "n_repetitions": 2,
}


def _write_config(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def test_binreg_writes_outputs(tmp_path):
    out = tmp_path / "run1"
    code = main(
        ["binreg", "--config", _write_config(tmp_path, TINY_BINREG), "--out", str(out)]
    )
    assert code == EXIT_OK
    header = (out / "results.csv").read_text().splitlines()[0]
    assert header == ",".join(RESULTS_HEADER)
    summary = json.loads((out / "summary.json").read_text())
    assert summary["popart"]["alpha"] == 1e-2


def test_binreg_svg_and_sort(tmp_path):
    out = tmp_path / "run2"
    code = main(
        [
            "binreg",
            "--config",
            _write_config(tmp_path, TINY_BINREG),
            "--out",
            str(out),
            "--svg",
            "--sort",
        ]
    )
    assert code == EXIT_OK
    svg = (out / "popart.svg").read_text()
    assert svg.startswith("<svg")


def test_binreg_missing_config_names_path(tmp_path, capsys):
    missing = str(tmp_path / "nope.json")
    code = main(["binreg", "--config", missing, "--out", str(tmp_path / "o")])
    assert code == EXIT_CONFIG
    assert missing in capsys.readouterr().err


def test_binreg_unknown_config_key(tmp_path):
    cfg = _write_config(tmp_path, {"n_sampels": 10})
    code = main(["binreg", "--config", cfg, "--out", str(tmp_path / "o")])
    assert code == EXIT_CONFIG


def test_binreg_invalid_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    code = main(["binreg", "--config", str(path), "--out", str(tmp_path / "o")])
    assert code == EXIT_CONFIG


def test_binreg_unwritable_out_is_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code = main(
        [
            "binreg",
            "--config",
            _write_config(tmp_path, TINY_BINREG),
            "--out",
            str(blocker / "sub"),
        ]
    )
    assert code == EXIT_IO


def test_binreg_worker_env_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("POPART_WORKERS", "not-a-number")
    code = main(
        [
            "binreg",
            "--config",
            _write_config(tmp_path, TINY_BINREG),
            "--out",
            str(tmp_path / "o"),
        ]
    )
    assert code == EXIT_CONFIG


def test_binreg_deterministic_with_sort(tmp_path):
    cfg = _write_config(tmp_path, TINY_BINREG)
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["binreg", "--config", cfg, "--out", str(out), "--sort"]) == EXIT_OK
        outs.append((out / "results.csv").read_text())
    assert outs[0] == outs[1]


def test_rl_demo_steps_zero_header_only(tmp_path):
    out = tmp_path / "rl"
    code = main(["rl-demo", "--out", str(out), "--steps", "0"])
    assert code == EXIT_OK
    lines = (out / "rl_metrics.csv").read_text().splitlines()
    assert lines == ["step,episode,reward,grad_norm,normalized_error"]
    summary = json.loads((out / "rl_summary.json").read_text())
    assert summary == {"steps": 0}


def test_rl_demo_short_run(tmp_path):
    out = tmp_path / "rl2"
    code = main(["rl-demo", "--out", str(out), "--steps", "400", "--seed", "0"])
    assert code == EXIT_OK
    rows = (out / "rl_metrics.csv").read_text().splitlines()
    assert rows[0] == "step,episode,reward,grad_norm,normalized_error"
    assert len(rows) > 100
    summary = json.loads((out / "rl_summary.json").read_text())
    assert "max_relative_q_error" in summary
    assert summary["terminal_reward"] == 1000.0


def test_rl_demo_rejects_unknown_config_key(tmp_path):
    path = tmp_path / "rl.json"
    path.write_text(json.dumps({"copyperiod": 7}))
    code = main(["rl-demo", "--config", str(path), "--out", str(tmp_path / "o")])
    assert code == EXIT_CONFIG


def test_plot_from_existing_results(tmp_path):
    out = tmp_path / "run"
    cfg = _write_config(tmp_path, TINY_BINREG)
    assert main(["binreg", "--config", cfg, "--out", str(out)]) == EXIT_OK
    plots = tmp_path / "plots"
    code = main(
        ["plot", "--results", str(out / "results.csv"), "--out", str(plots)]
    )
    assert code == EXIT_OK
    assert (plots / "popart.svg").read_text().startswith("<svg")


def test_plot_missing_results_is_io_error(tmp_path):
    code = main(
        ["plot", "--results", str(tmp_path / "none.csv"), "--out", str(tmp_path / "p")]
    )
    assert code == EXIT_IO


def test_verify_ci_profile_passes(capsys):
    code = main(["verify", "--profile", "ci"])
    out = capsys.readouterr().out
    assert code == EXIT_OK
    assert "FAIL" not in out
    assert out.count("PASS") == 9


def test_no_partial_files_on_failure(tmp_path):
    # a run that errors before finishing must not leave partial outputs
    out = tmp_path / "o"
    cfg = _write_config(tmp_path, {"methods": ["bogus"]})
    code = main(["binreg", "--config", cfg, "--out", str(out)])
    assert code == EXIT_CONFIG
    assert not (out / "results.csv").exists()
    assert not (out / "summary.json").exists()
