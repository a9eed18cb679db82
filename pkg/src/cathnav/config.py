"""Experiment configuration: YAML file with one section per subsystem."""

import dataclasses
import os
from dataclasses import dataclass, field

import yaml

from .env import CatheterEnv, EnvConfig
from .fuzzy import (LABELS, FuzzyController, RuleBase, diagonal_rule_base,
                    triangular_family)
from .kinematics import CatheterConfig
from .trainer import MODES, TrainerConfig


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class FuzzyConfig:
    trans_centers_cm: tuple = (-2.0, -1.0, 0.0, 1.0, 2.0)
    trans_half_width_cm: float = 1.0
    rot_centers_deg: tuple = (-60.0, -30.0, 0.0, 30.0, 60.0)
    rot_half_width_deg: float = 30.0
    tol_trans_cm: float = 0.2
    tol_rot_deg: float = 5.0
    max_iters: int = 50
    rules: object = None  # optional {"T,R": ["P", "R"]} table


@dataclass(frozen=True)
class ImagingConfig:
    smooth_window: int = 9
    smooth_order: int = 3
    entry_side: str = "left"


@dataclass(frozen=True)
class GatewayConfig:
    mode: str = "oracle"
    port: int = 8765
    timeout_ms: int = 10000
    advance_mm: float = 8.0


@dataclass(frozen=True)
class ExperimentConfig:
    phantom: str = ""
    out_dir: str = "runs"
    modes: tuple = ("sac",)
    seeds: tuple = (0,)
    env: EnvConfig = field(default_factory=EnvConfig)
    catheter: CatheterConfig = field(default_factory=CatheterConfig)
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    fuzzy: FuzzyConfig = field(default_factory=FuzzyConfig)
    imaging: ImagingConfig = field(default_factory=ImagingConfig)
    gateway: GatewayConfig = field(default_factory=GatewayConfig)


_TUPLE_FIELDS = {"modes", "seeds", "hidden_sizes", "bounds_x_px",
                 "trans_centers_cm", "rot_centers_deg"}


def _build(dc_type, raw, where):
    if raw is None:
        return dc_type()
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected a mapping")
    names = {f.name for f in dataclasses.fields(dc_type)}
    unknown = set(raw) - names
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = {k: tuple(v) if k in _TUPLE_FIELDS and isinstance(v, list) else v
              for k, v in raw.items()}
    return dc_type(**kwargs)


def config_from_dict(raw, base_dir="."):
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    known = {"phantom", "out_dir", "modes", "seeds", "env", "catheter",
             "trainer", "fuzzy", "imaging", "gateway"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    cfg = ExperimentConfig(
        phantom=str(raw.get("phantom", "")),
        out_dir=str(raw.get("out_dir", "runs")),
        modes=tuple(raw.get("modes", ["sac"])),
        seeds=tuple(int(s) for s in raw.get("seeds", [0])),
        env=_build(EnvConfig, raw.get("env"), "env"),
        catheter=_build(CatheterConfig, raw.get("catheter"), "catheter"),
        trainer=_build(TrainerConfig, raw.get("trainer"), "trainer"),
        fuzzy=_build(FuzzyConfig, raw.get("fuzzy"), "fuzzy"),
        imaging=_build(ImagingConfig, raw.get("imaging"), "imaging"),
        gateway=_build(GatewayConfig, raw.get("gateway"), "gateway"),
    )
    validate_config(cfg, base_dir)
    return cfg


def validate_config(cfg, base_dir="."):
    bad = [m for m in cfg.modes if m not in MODES]
    if bad:
        raise ConfigError(f"unknown modes {bad}; choose from {MODES}")
    if not cfg.seeds:
        raise ConfigError("seeds must be non-empty")
    if not cfg.phantom:
        raise ConfigError("config needs a phantom path")
    path = cfg.phantom
    if not os.path.isabs(path):
        path = os.path.join(base_dir, path)
    if not os.path.exists(path):
        raise ConfigError(f"phantom file not found: {path}")


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    return config_from_dict(raw, base_dir=os.path.dirname(os.path.abspath(path)))


def phantom_path(cfg, base_dir="."):
    if os.path.isabs(cfg.phantom):
        return cfg.phantom
    return os.path.join(base_dir, cfg.phantom)


def build_environment(cfg, base_dir="."):
    from .phantom import load_vessel_map

    vmap = load_vessel_map(phantom_path(cfg, base_dir))
    return CatheterEnv(vmap, env_config=cfg.env, catheter_config=cfg.catheter)


def build_controller(cfg):
    trans = triangular_family(cfg.fuzzy.trans_centers_cm, cfg.fuzzy.trans_half_width_cm)
    rot = triangular_family(cfg.fuzzy.rot_centers_deg, cfg.fuzzy.rot_half_width_deg)
    if cfg.fuzzy.rules is None:
        rules = diagonal_rule_base(push_sets=trans, roll_sets=rot)
    else:
        table = {}
        for key, value in cfg.fuzzy.rules.items():
            t, r = (part.strip() for part in str(key).split(","))
            table[(t, r)] = (str(value[0]), str(value[1]))
        for pair in table:
            if pair[0] not in LABELS or pair[1] not in LABELS:
                raise ConfigError(f"bad rule antecedent {pair}")
        rules = RuleBase(rules=table, push_sets=trans, roll_sets=rot)
    return FuzzyController(
        rules=rules, trans_sets=trans, rot_sets=rot,
        push_scale_mm=cfg.env.push_scale_mm,
        roll_scale_deg=cfg.env.roll_scale_deg,
        tol_trans_cm=cfg.fuzzy.tol_trans_cm,
        tol_rot_deg=cfg.fuzzy.tol_rot_deg,
        max_iters=cfg.fuzzy.max_iters)


def default_config_text(phantom="fixtures/y_bifurcation.phantom"):
    """A commented starter configuration."""
    return f"""\
phantom: {phantom}
out_dir: runs
modes: [sac, sac-gail, sac-eil, sac-eil-gail]
seeds: [0, 1, 2]
env:
  push_scale_mm: 10.0
  roll_scale_deg: 30.0
  initial_insertion_mm: 10.0
  max_steps: 20
  push_limit_mm: 500.0
  trigger_radius_px: 80.0
catheter:
  distal_bend_angle_deg: 30.0
  distal_segment_mm: 15.0
  tube_radius_px: 3.0
trainer:
  episodes: 300
  warmup_episodes: 50
  batch_size: 128
  demo_episodes: 20
fuzzy:
  tol_trans_cm: 0.2
  tol_rot_deg: 5.0
  max_iters: 50
gateway:
  mode: oracle
  timeout_ms: 10000
"""
