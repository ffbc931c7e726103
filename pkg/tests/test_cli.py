import json
import logging
import os

import numpy as np
import pandas as pd
import pytest

from cylinder_afc.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main
from cylinder_afc.control.training import save_baseline
from cylinder_afc.utils.state_manager import RunStore

TINY_CONFIG = """
[flow]
reynolds = 20.0
diameter_lu = 8
length_d = 8.0

[sensors]
layout = "L3:150"
lifting_depth = 5
standardize_window = 5

[agent]
hidden_sizes = [16, 16]
batch_size = 4
update_every = 2
gradient_steps = 1

[training]
name = "tiny"
episodes = 2
steps_per_episode = 2
seeds = [0]
n_envs = 1
checkpoint_every = 2
evaluate_duration = 0.5
baseline_time = 1.0
"""


@pytest.fixture
def config_path(tmp_path) -> str:
    path = tmp_path / "tiny.toml"
    path.write_text(TINY_CONFIG)
    return str(path)


def test_missing_config_exits_with_usage_error(tmp_path, capsys) -> None:
    missing = str(tmp_path / "nowhere.toml")
    assert main(["baseline", "--config", missing]) == EXIT_CONFIG
    assert "nowhere.toml" in capsys.readouterr().err


def test_bad_arguments_exit_with_usage_error() -> None:
    assert main([]) == EXIT_CONFIG
    assert main(["launch"]) == EXIT_CONFIG


def test_config_errors_exit_with_usage_error(tmp_path) -> None:
    path = tmp_path / "bad.toml"
    path.write_text("[flow]\nspeed = 3\n")
    assert main(["baseline", "--config", str(path)]) == EXIT_CONFIG
    assert main(["train", "--config", str(path)]) == EXIT_CONFIG


def test_baseline_failure_is_a_runtime_error(config_path, tmp_path) -> None:
    assert main(["baseline", "--config", config_path, "--out", str(tmp_path / "runs")]) == EXIT_RUNTIME


def _prepared_store(tiny_baseline, tiny_flow, root: str) -> RunStore:
    store = RunStore(root, "tiny")
    save_baseline(store, tiny_baseline, tiny_flow)
    return store


def test_train_populates_seed_directory(config_path, tiny_baseline, tiny_flow, tmp_path) -> None:
    root = str(tmp_path / "runs")
    store = _prepared_store(tiny_baseline, tiny_flow, root)
    assert main(["train", "--config", config_path, "--seed", "1", "--out", root]) == EXIT_OK

    assert store.list_seeds() == [1]
    assert len(store.load_episodes(1)) == 2
    assert os.path.exists(os.path.join(store.checkpoint_dir(1), "agent.json"))

    assert main(["evaluate", "--config", config_path, "--seed", "1", "--out", root]) == EXIT_OK
    with open(os.path.join(store.evaluation_dir(1), "summary.json"), encoding="utf-8") as f:
        assert "mean_cd" in json.load(f)


def test_evaluate_rejects_checkpoint_with_other_state_size(config_path, tiny_baseline, tiny_flow, tmp_path) -> None:
    root = str(tmp_path / "runs")
    _prepared_store(tiny_baseline, tiny_flow, root)
    assert main(["train", "--config", config_path, "--out", root]) == EXIT_OK
    assert main(["evaluate", "--config", config_path, "--out", root, "--layout", "L2:4"]) == EXIT_CONFIG


def test_null_evaluation(config_path, tiny_baseline, tiny_flow, tmp_path) -> None:
    root = str(tmp_path / "runs")
    store = _prepared_store(tiny_baseline, tiny_flow, root)
    assert main(["evaluate", "--config", config_path, "--null", "--out", root]) == EXIT_OK
    assert os.path.exists(os.path.join(store.evaluation_dir(), "forces.csv"))


def test_export_field(config_path, tiny_baseline, tiny_flow, tmp_path) -> None:
    root = str(tmp_path / "runs")
    _prepared_store(tiny_baseline, tiny_flow, root)
    output = str(tmp_path / "field.csv")
    assert main(["export-field", "--config", config_path, "--out", root, "--output", output]) == EXIT_OK
    assert len(pd.read_csv(output)) == tiny_flow.nx * tiny_flow.ny


def test_analyze_trace_and_episodes(tmp_path) -> None:
    t = np.arange(2048) * 0.05
    trace = tmp_path / "forces.csv"
    pd.DataFrame({"t": t, "cd": 3.0 + 0.01 * np.sin(1.2 * np.pi * t), "cl": np.sin(0.6 * np.pi * t)}).to_csv(
        trace, index=False
    )
    episodes = []
    for k, value in enumerate((3.0, 3.2)):
        path = tmp_path / f"episodes{k}.csv"
        pd.DataFrame(
            {"episode": range(12), "mean_cd": [value] * 12, "std_cl": [0.1] * 12, "total_reward": [0.0] * 12}
        ).to_csv(path, index=False)
        episodes.append(str(path))

    out = str(tmp_path / "analysis")
    argv = ["analyze", "--trace", str(trace), "--cd-baseline", "3.2", "--episodes", *episodes, "--out", out]
    assert main(argv) == EXIT_OK

    with open(os.path.join(out, "analysis.json"), encoding="utf-8") as f:
        results = json.load(f)
    assert results["summary"]["reduction_pct"] == pytest.approx(6.25, abs=0.01)
    assert results["final_episodes"]["mean_cd"]["mean"] == pytest.approx(3.1)
    for name in ("psd_cl.csv", "psd_cd.csv", "learning_curves.csv"):
        assert os.path.exists(os.path.join(out, name))


def test_analyze_without_inputs(tmp_path) -> None:
    assert main(["analyze", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_suppression_uses_null_control_reference(config_path, tiny_baseline, tiny_flow, tmp_path, monkeypatch) -> None:
    from cylinder_afc.control.training import evaluate, load_baseline, load_run_config

    root = str(tmp_path / "runs")
    store = _prepared_store(tiny_baseline, tiny_flow, root)
    assert main(["train", "--config", config_path, "--out", root]) == EXIT_OK

    calls = []

    def fake_suppression(baseline_cl, controlled_cl, dt, strouhal):
        calls.append((list(baseline_cl), list(controlled_cl)))
        return 0.25

    monkeypatch.setattr("cylinder_afc.cli.spectral_suppression", fake_suppression)
    assert main(["evaluate", "--config", config_path, "--out", root]) == EXIT_OK

    with open(os.path.join(store.evaluation_dir(0), "summary.json"), encoding="utf-8") as f:
        assert json.load(f)["spectral_suppression"] == 0.25

    config = load_run_config(config_path)
    null = evaluate(config, load_baseline(store, config.flow, config.jets), None)
    (reference, controlled), = calls
    assert reference == null.trace.cl
    assert len(controlled) == len(reference)


def test_suppression_failure_is_logged(config_path, tiny_baseline, tiny_flow, tmp_path, caplog) -> None:
    root = str(tmp_path / "runs")
    store = _prepared_store(tiny_baseline, tiny_flow, root)
    assert main(["train", "--config", config_path, "--out", root]) == EXIT_OK

    with caplog.at_level(logging.WARNING, logger="cylinder_afc.cli"):
        assert main(["evaluate", "--config", config_path, "--out", root]) == EXIT_OK
    assert "Spectral suppression not computed" in caplog.text
    with open(os.path.join(store.evaluation_dir(0), "summary.json"), encoding="utf-8") as f:
        assert "spectral_suppression" not in json.load(f)
