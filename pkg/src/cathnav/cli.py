"""Command-line entry points: train, eval, suite, fixture, fuzzy."""

import argparse
import os
import sys

from . import config as config_mod
from . import fixtures, harness, metrics
from .fuzzy import FuzzyController


def _add_config_arg(p):
    p.add_argument("--config", required=True, help="experiment config YAML")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cathnav",
        description="Simulated catheter steering: training, evaluation and "
                    "fixtures for the vessel-phantom environment.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train one (mode, seed) run")
    _add_config_arg(p_train)
    p_train.add_argument("--mode", default=None, help="ablation mode")
    p_train.add_argument("--seed", type=int, default=None)
    p_train.add_argument("--out", default=None, help="output directory")

    p_eval = sub.add_parser("eval", help="evaluate a saved checkpoint")
    _add_config_arg(p_eval)
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--episodes", type=int, default=20)

    p_suite = sub.add_parser("suite", help="run the full mode x seed suite")
    _add_config_arg(p_suite)
    p_suite.add_argument("--out", default=None)

    p_fix = sub.add_parser("fixture", help="write a canonical phantom file")
    p_fix.add_argument("name", choices=sorted(fixtures.FIXTURES))
    p_fix.add_argument("--out", default=".")

    p_fuzzy = sub.add_parser("fuzzy", help="evaluate the fuzzy controller "
                                           "for a given error pair")
    p_fuzzy.add_argument("--e-trans", type=float, required=True,
                         help="translation error in cm")
    p_fuzzy.add_argument("--e-rot", type=float, required=True,
                         help="rotation error in degrees")
    p_fuzzy.add_argument("--config", default=None)
    return parser


def cmd_train(args):
    cfg = config_mod.load_config(args.config)
    base = os.path.dirname(os.path.abspath(args.config))
    mode = args.mode or cfg.modes[0]
    seed = cfg.seeds[0] if args.seed is None else args.seed
    out = args.out or os.path.join(base, cfg.out_dir,
                                   harness.run_dir_name(mode, seed))
    harness.run_training(cfg, mode, seed, out, base_dir=base)
    return 0


def cmd_eval(args):
    cfg = config_mod.load_config(args.config)
    base = os.path.dirname(os.path.abspath(args.config))
    environment = config_mod.build_environment(cfg, base)
    from .trainer import Trainer

    trainer = Trainer(environment, config=cfg.trainer, mode=cfg.modes[0],
                      seed=cfg.seeds[0])
    trainer.load(args.checkpoint)
    logs = trainer.evaluate(episodes=args.episodes)
    successes = sum(1 for ok, _, _ in logs if ok)
    avg_steps = sum(s for _, s, _ in logs) / len(logs)
    avg_return = sum(r for _, _, r in logs) / len(logs)
    print(f"episodes={len(logs)} success={successes}/{len(logs)} "
          f"avg_steps={avg_steps:.2f} avg_return={avg_return:.2f}")
    return 0


def cmd_suite(args):
    cfg = config_mod.load_config(args.config)
    base = os.path.dirname(os.path.abspath(args.config))
    out = args.out or os.path.join(base, cfg.out_dir)
    _, failures = harness.run_suite(cfg, out, base_dir=base)
    return 1 if failures else 0


def cmd_fixture(args):
    os.makedirs(args.out, exist_ok=True)
    path = fixtures.write_fixture(args.name, args.out)
    print(path)
    return 0


def cmd_fuzzy(args):
    if args.config:
        cfg = config_mod.load_config(args.config)
        controller = config_mod.build_controller(cfg)
    else:
        controller = FuzzyController()
    u_push, u_roll = controller.crisp_outputs(args.e_trans, args.e_rot)
    action = controller.action_from_outputs(u_push, u_roll)
    push_txt = "none" if u_push is None else f"{u_push:.6f}"
    roll_txt = "none" if u_roll is None else f"{u_roll:.6f}"
    print(f"u_push_cm={push_txt} u_roll_deg={roll_txt} "
          f"action_push={action.push:.6f} action_roll={action.roll:.6f}")
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    handlers = {
        "train": cmd_train,
        "eval": cmd_eval,
        "suite": cmd_suite,
        "fixture": cmd_fixture,
        "fuzzy": cmd_fuzzy,
    }
    try:
        return handlers[args.command](args)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
