import os

import pytest
import yaml

from cathnav import config as config_mod
from cathnav import fixtures, harness
from cathnav.metrics import MetricsReport


def smoke_config(tmp_path, modes, seeds, episodes=4):
    fixtures.write_fixture("straight", tmp_path)
    raw = {
        "phantom": "straight.phantom",
        "modes": list(modes),
        "seeds": list(seeds),
        "trainer": {"episodes": episodes, "warmup_episodes": 2,
                    "random_exploration_episodes": 2, "demo_episodes": 2,
                    "update_start_size": 64, "batch_size": 32},
    }
    path = tmp_path / "exp.yaml"
    path.write_text(yaml.safe_dump(raw))
    return config_mod.load_config(path)


def test_suite_creates_run_dirs_and_summary(tmp_path):
    cfg = smoke_config(tmp_path, ("sac", "sac-gail"), (0, 1))
    out = tmp_path / "out"
    results, failures = harness.run_suite(cfg, str(out), base_dir=str(tmp_path),
                                          quiet=True)
    assert not failures
    assert len(results) == 4
    for mode in ("sac", "sac-gail"):
        for seed in (0, 1):
            d = out / f"{mode}-seed{seed}"
            assert (d / "metrics.csv").exists()
            assert (d / "checkpoint.bin").exists()
    assert (out / "summary.csv").exists()
    text = (out / "comparison.txt").read_text()
    assert "sac-gail" in text


def test_suite_survives_child_failure(tmp_path, monkeypatch):
    cfg = smoke_config(tmp_path, ("sac",), (0, 1))
    calls = {"n": 0}
    real = harness.run_training

    def flaky(cfg_, mode, seed, out_dir, base_dir=".", quiet=False):
        calls["n"] += 1
        if seed == 0:
            raise RuntimeError("synthetic child abort")
        return real(cfg_, mode, seed, out_dir, base_dir, quiet)

    monkeypatch.setattr(harness, "run_training", flaky)
    out = tmp_path / "out"
    results, failures = harness.run_suite(cfg, str(out), base_dir=str(tmp_path),
                                          quiet=True)
    assert ("sac", 0) in failures
    assert ("sac", 1) in results
    assert (out / "failures.log").exists()
    assert "FAILED sac seed=0" in (out / "comparison.txt").read_text()


def test_mode_medians_with_unconverged_runs():
    def rep(conv):
        return MetricsReport(episodes=300, avg_steps=8.0, success_rate=0.5,
                             raw_success_rate=0.6, avg_time_s=0.1,
                             avg_error_px=20.0, convergence_episode=conv)

    results = {("sac", 0): rep(100), ("sac", 1): rep(None), ("sac", 2): rep(80)}
    med = harness.mode_medians(results, "convergence_episode")
    assert med["sac"] == 100
    results[("sac", 2)] = rep(None)
    med = harness.mode_medians(results, "convergence_episode")
    assert med["sac"] is None
