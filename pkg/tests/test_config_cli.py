import os

import numpy as np
import pytest
import yaml

from cathnav import cli, config, fixtures
from cathnav.metrics import read_metrics_csv


def write_smoke_config(tmp_path, modes=("sac",), seeds=(0,), episodes=6,
                       phantom="straight", **trainer_extra):
    fixtures.write_fixture(phantom, tmp_path)
    trainer = {
        "episodes": episodes,
        "warmup_episodes": 3,
        "random_exploration_episodes": 3,
        "demo_episodes": 2,
        "update_start_size": 64,
        "batch_size": 32,
    }
    trainer.update(trainer_extra)
    cfg = {
        "phantom": f"{phantom}.phantom",
        "out_dir": "runs",
        "modes": list(modes),
        "seeds": list(seeds),
        "trainer": trainer,
    }
    path = tmp_path / "exp.yaml"
    path.write_text(yaml.safe_dump(cfg))
    return path


class TestConfig:
    def test_defaults_round_trip(self, tmp_path):
        path = write_smoke_config(tmp_path)
        cfg = config.load_config(path)
        assert cfg.modes == ("sac",)
        assert cfg.trainer.episodes == 6
        assert cfg.env.max_steps == 20

    def test_unknown_key_rejected(self, tmp_path):
        path = write_smoke_config(tmp_path)
        raw = yaml.safe_load(path.read_text())
        raw["trainer"]["nonsense"] = 1
        path.write_text(yaml.safe_dump(raw))
        with pytest.raises(config.ConfigError, match="nonsense"):
            config.load_config(path)

    def test_unknown_mode_rejected(self, tmp_path):
        path = write_smoke_config(tmp_path, modes=("sacx",))
        with pytest.raises(config.ConfigError, match="sacx"):
            config.load_config(path)

    def test_missing_phantom_rejected(self, tmp_path):
        path = write_smoke_config(tmp_path)
        raw = yaml.safe_load(path.read_text())
        raw["phantom"] = "missing.phantom"
        path.write_text(yaml.safe_dump(raw))
        with pytest.raises(config.ConfigError, match="missing.phantom"):
            config.load_config(path)

    def test_custom_rule_table(self, tmp_path):
        path = write_smoke_config(tmp_path)
        raw = yaml.safe_load(path.read_text())
        table = {f"{t},{r}": [t, r] for t in config.LABELS
                 for r in config.LABELS}
        table["Z,Z"] = ["PS", "Z"]  # cross-coupled entry
        raw["fuzzy"] = {"rules": table}
        path.write_text(yaml.safe_dump(raw))
        cfg = config.load_config(path)
        ctrl = config.build_controller(cfg)
        u_push, _ = ctrl.crisp_outputs(0.0, 0.0)
        assert u_push == 1.0  # the overridden rule fires


class TestCli:
    def test_fixture_subcommand(self, tmp_path, capsys):
        rc = cli.main(["fixture", "y_bifurcation", "--out", str(tmp_path)])
        assert rc == 0
        out = capsys.readouterr().out.strip()
        assert out.endswith("y_bifurcation.phantom")
        assert os.path.exists(out)

    def test_fuzzy_subcommand(self, capsys):
        rc = cli.main(["fuzzy", "--e-trans", "1.5", "--e-rot", "-30"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "u_push_cm=1.5" in out
        assert "u_roll_deg=-30.0" in out

    def test_train_smoke(self, tmp_path, capsys):
        cfg_path = write_smoke_config(tmp_path)
        out_dir = tmp_path / "run1"
        rc = cli.main(["train", "--config", str(cfg_path), "--mode", "sac",
                       "--seed", "0", "--out", str(out_dir)])
        assert rc == 0
        rows = read_metrics_csv(out_dir / "metrics.csv")
        assert len(rows) == 6
        assert os.path.exists(out_dir / "checkpoint.bin")

    def test_eval_smoke(self, tmp_path, capsys):
        cfg_path = write_smoke_config(tmp_path)
        out_dir = tmp_path / "run1"
        cli.main(["train", "--config", str(cfg_path), "--out", str(out_dir)])
        rc = cli.main(["eval", "--config", str(cfg_path), "--checkpoint",
                       str(out_dir / "checkpoint.bin"), "--episodes", "3"])
        assert rc == 0
        assert "episodes=3" in capsys.readouterr().out

    def test_suite_smoke(self, tmp_path, capsys):
        cfg_path = write_smoke_config(tmp_path, modes=("sac", "sac-eil"),
                                      seeds=(0, 1), episodes=4)
        out_dir = tmp_path / "suite"
        rc = cli.main(["suite", "--config", str(cfg_path), "--out",
                       str(out_dir)])
        assert rc == 0
        for mode in ("sac", "sac-eil"):
            for seed in (0, 1):
                assert os.path.exists(out_dir / f"{mode}-seed{seed}" /
                                      "metrics.csv")
        assert os.path.exists(out_dir / "summary.csv")
        assert os.path.exists(out_dir / "comparison.txt")

    def test_unknown_fixture_errors(self, tmp_path, capsys):
        rc = cli.main(["fixture", "straight", "--out",
                       str(tmp_path / "nested")])
        assert rc == 0
        with pytest.raises(SystemExit):
            cli.main(["fixture", "nosuch", "--out", str(tmp_path)])

    def test_bad_config_nonzero_exit(self, tmp_path, capsys):
        bad = tmp_path / "bad.yaml"
        bad.write_text("phantom: nope.phantom\n")
        rc = cli.main(["train", "--config", str(bad)])
        assert rc == 2
        assert "error:" in capsys.readouterr().err
