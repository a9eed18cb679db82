"""Episode-log metrics: flanked success rate, convergence episode, error
and step averages. Pure functions of the log rows, recomputable from CSV.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

CSV_COLUMNS = ("episode", "mode", "seed", "steps", "cumulative_reward",
               "success", "termination_cause", "bifurcation_pose_error_px",
               "wallclock_s", "w_sac", "w_gail")

FLANK = 5
CONVERGENCE_RUN = 2 * FLANK + 1  # 11 consecutive raw successes


@dataclass(frozen=True)
class MetricsReport:
    episodes: int
    avg_steps: float
    success_rate: float        # stable (flanked) successes / episodes
    raw_success_rate: float
    avg_time_s: float
    avg_error_px: float        # mean pose error over raw-successful episodes
    convergence_episode: object  # int episode index or None


def stable_success_flags(raw):
    """An episode is stably successful when it succeeds and so do the five
    episodes on each side; boundary episodes can never qualify."""
    raw = np.asarray(raw, dtype=bool)
    n = len(raw)
    out = np.zeros(n, dtype=bool)
    for i in range(FLANK, n - FLANK):
        out[i] = bool(np.all(raw[i - FLANK:i + FLANK + 1]))
    return out


def convergence_episode(raw):
    """Start of the earliest run of >= 11 consecutive raw successes."""
    raw = np.asarray(raw, dtype=bool)
    run = 0
    for i, ok in enumerate(raw):
        run = run + 1 if ok else 0
        if run == CONVERGENCE_RUN:
            return i - CONVERGENCE_RUN + 1
    return None


def compute_metrics(rows):
    """Table-level metrics from episode rows (dicts or EpisodeLog objects)."""
    if not rows:
        raise ValueError("empty episode log")
    get = lambda r, k: r[k] if isinstance(r, dict) else getattr(r, k)
    raw = np.array([bool(get(r, "success")) for r in rows])
    steps = np.array([float(get(r, "steps")) for r in rows])
    times = np.array([float(get(r, "wallclock_s")) for r in rows])
    errors = np.array([float(get(r, "bifurcation_pose_error_px")) for r in rows])
    stable = stable_success_flags(raw)
    ok_err = errors[raw & np.isfinite(errors)]
    return MetricsReport(
        episodes=len(rows),
        avg_steps=float(steps.mean()),
        success_rate=float(stable.sum()) / len(rows),
        raw_success_rate=float(raw.sum()) / len(rows),
        avg_time_s=float(times.mean()),
        avg_error_px=float(ok_err.mean()) if len(ok_err) else float("nan"),
        convergence_episode=convergence_episode(raw),
    )


# ---------------------------------------------------------------------------
# CSV round trip
# ---------------------------------------------------------------------------

def episode_row(log):
    """EpisodeLog -> plain dict in CSV column order."""
    return {
        "episode": log.episode,
        "mode": log.mode,
        "seed": log.seed,
        "steps": log.steps,
        "cumulative_reward": log.cumulative_reward,
        "success": log.success,
        "termination_cause": log.termination_cause,
        "bifurcation_pose_error_px": log.bifurcation_pose_error_px,
        "wallclock_s": log.wallclock_s,
        "w_sac": log.w_sac,
        "w_gail": log.w_gail,
    }


def _format(key, value):
    if key in ("episode", "seed", "steps"):
        return str(int(value))
    if key == "success":
        return "1" if value else "0"
    if key in ("mode", "termination_cause"):
        return str(value)
    v = float(value)
    return "nan" if math.isnan(v) else repr(v)


def write_metrics_csv(rows, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in rows:
            row = r if isinstance(r, dict) else episode_row(r)
            writer.writerow([_format(k, row[k]) for k in CSV_COLUMNS])


def read_metrics_csv(path):
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for raw in csv.DictReader(fh):
            rows.append({
                "episode": int(raw["episode"]),
                "mode": raw["mode"],
                "seed": int(raw["seed"]),
                "steps": int(raw["steps"]),
                "cumulative_reward": float(raw["cumulative_reward"]),
                "success": raw["success"] == "1",
                "termination_cause": raw["termination_cause"],
                "bifurcation_pose_error_px": float(raw["bifurcation_pose_error_px"]),
                "wallclock_s": float(raw["wallclock_s"]),
                "w_sac": float(raw["w_sac"]),
                "w_gail": float(raw["w_gail"]),
            })
    return rows
