"""Experiment orchestration: single training runs, ablation suites,
per-mode aggregation and plain-text comparison summaries."""

import csv
import os
import statistics
import traceback

from . import config as config_mod
from . import metrics as metrics_mod
from .expert import DemoStore
from .gateway import ExpertGateway
from .trainer import Trainer

SUMMARY_COLUMNS = ("mode", "seed", "episodes", "avg_steps", "success_rate",
                   "raw_success_rate", "avg_error_px", "convergence_episode")


def run_dir_name(mode, seed):
    return f"{mode}-seed{seed}"


def run_training(cfg, mode, seed, out_dir, base_dir=".", quiet=False):
    """One (mode, seed) training run; writes metrics.csv, checkpoint.bin
    and demos.jsonl under out_dir and returns the episode logs."""
    os.makedirs(out_dir, exist_ok=True)
    environment = config_mod.build_environment(cfg, base_dir)
    controller = config_mod.build_controller(cfg)
    gw = ExpertGateway(environment.vmap, environment.route, environment.catheter,
                       mode=cfg.gateway.mode,
                       port=cfg.gateway.port if cfg.gateway.mode == "human" else 0,
                       timeout_ms=cfg.gateway.timeout_ms,
                       advance_mm=cfg.gateway.advance_mm)
    store = DemoStore(os.path.join(out_dir, "demos.jsonl"))
    trainer = Trainer(environment, config=cfg.trainer, mode=mode, seed=seed,
                      gateway=gw, controller=controller, demo_store=store)
    try:
        logs = trainer.train()
    finally:
        gw.stop()
    metrics_mod.write_metrics_csv(logs, os.path.join(out_dir, "metrics.csv"))
    trainer.save(os.path.join(out_dir, "checkpoint.bin"))
    report = metrics_mod.compute_metrics(logs)
    with open(os.path.join(out_dir, "summary.txt"), "w", encoding="utf-8") as fh:
        fh.write(f"mode: {mode}\nseed: {seed}\nepisodes: {report.episodes}\n"
                 f"avg_steps: {report.avg_steps:.3f}\n"
                 f"raw_success_rate: {report.raw_success_rate:.4f}\n"
                 f"stable_success_rate: {report.success_rate:.4f}\n"
                 f"avg_error_px: {report.avg_error_px:.3f}\n"
                 f"convergence_episode: {report.convergence_episode}\n")
    if not quiet:
        print(f"[{mode} seed={seed}] episodes={report.episodes} "
              f"raw_success={report.raw_success_rate:.3f} "
              f"stable_success={report.success_rate:.3f} "
              f"convergence={report.convergence_episode} "
              f"avg_error_px={report.avg_error_px:.1f}")
    return logs, report


def run_suite(cfg, out_dir, base_dir=".", quiet=False):
    """Train every (mode, seed) pair; aborted child runs are recorded and
    the suite continues. Writes summary.csv and comparison.txt."""
    os.makedirs(out_dir, exist_ok=True)
    results = {}
    failures = {}
    for mode in cfg.modes:
        for seed in cfg.seeds:
            rd = os.path.join(out_dir, run_dir_name(mode, seed))
            try:
                _, report = run_training(cfg, mode, seed, rd, base_dir, quiet)
                results[(mode, seed)] = report
            except Exception as exc:  # noqa: BLE001 - suite must survive children
                failures[(mode, seed)] = f"{type(exc).__name__}: {exc}"
                with open(os.path.join(out_dir, "failures.log"), "a",
                          encoding="utf-8") as fh:
                    fh.write(f"{mode} seed={seed}\n{traceback.format_exc()}\n")

    _write_summary_csv(results, os.path.join(out_dir, "summary.csv"))
    text = comparison_text(cfg, results, failures)
    with open(os.path.join(out_dir, "comparison.txt"), "w", encoding="utf-8") as fh:
        fh.write(text)
    if not quiet:
        print(text)
    return results, failures


def _fmt(value):
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_summary_csv(results, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for (mode, seed), rep in sorted(results.items()):
            writer.writerow([mode, seed, rep.episodes, _fmt(rep.avg_steps),
                             _fmt(rep.success_rate), _fmt(rep.raw_success_rate),
                             _fmt(rep.avg_error_px),
                             _fmt(rep.convergence_episode)])


def mode_medians(results, key):
    """Median of a report field across seeds, per mode. Unconverged runs
    enter as infinity; an infinite median reports as None."""
    import math

    by_mode = {}
    for (mode, _), rep in results.items():
        by_mode.setdefault(mode, []).append(getattr(rep, key))
    out = {}
    for mode, values in by_mode.items():
        vals = [math.inf if v is None else v for v in values]
        med = statistics.median(vals)
        out[mode] = None if math.isinf(med) else med
    return out

def comparison_text(cfg, results, failures):
    lines = ["mode comparison (medians across seeds)", ""]
    conv = mode_medians(results, "convergence_episode")
    err = mode_medians(results, "avg_error_px")
    succ = mode_medians(results, "success_rate")
    header = f"{'mode':>14} {'convergence':>12} {'avg_error_px':>13} {'stable_rate':>12}"
    lines.append(header)
    for mode in cfg.modes:
        if mode not in conv:
            continue
        lines.append(f"{mode:>14} {_fmt(conv[mode]):>12} "
                     f"{_fmt(round(err[mode], 2) if err[mode] is not None else None):>13} "
                     f"{_fmt(round(succ[mode], 4) if succ[mode] is not None else None):>12}")
    for (mode, seed), why in sorted(failures.items()):
        lines.append(f"FAILED {mode} seed={seed}: {why}")
    lines.append("")
    return "\n".join(lines)
