"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line. The learning criteria share one session-scoped ablation
suite over the Y phantom (4 modes x 3 seeds x 300 episodes).
"""

import base64
import math
import threading
import time

import numpy as np
import pytest
from scipy import ndimage

from cathnav import fixtures, harness, imaging, kernels, kinematics, metrics
from cathnav import phantom as phantom_mod
from cathnav import trainer as trainer_mod
from cathnav.config import config_from_dict
from cathnav.env import Action, CatheterEnv
from cathnav.expert import oracle_target_pose
from cathnav.fuzzy import FuzzyController, defuzzify
from cathnav.gateway import ExpertGateway
from cathnav.nn import Network, Tensor, gradient
from cathnav.trainer import ScheduleParams, Trainer, gail_reward, schedule_weights
from ws_client import ScriptedClient

from test_imaging import random_blob


def report(name, ok, detail=""):
    print(f"\nACCEPTANCE {'PASS' if ok else 'FAIL'}: {name} {detail}")
    assert ok, f"{name}: {detail}"


# ---------------------------------------------------------------------------
# scheduling / fuzzy / imitation arithmetic
# ---------------------------------------------------------------------------

def test_schedule_exactness():
    t0 = time.perf_counter()
    p = ScheduleParams(total_episodes=300)
    mid = schedule_weights(150, p)
    ok = abs(mid[0] - 0.75) < 1e-12 and abs(mid[1] - 0.25) < 1e-12
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(10_000):
        total = int(rng.integers(1, 2000))
        t = int(rng.integers(0, total + 1))
        k = float(rng.uniform(1e-3, 10.0))
        w_sac, w_gail = schedule_weights(t, ScheduleParams(total_episodes=total,
                                                           steepness=k))
        worst = max(worst, abs(w_sac + w_gail - 1.0))
    elapsed = time.perf_counter() - t0
    report("schedule exactness", ok and worst < 1e-12 and elapsed < 1.0,
           f"(midpoint={mid}, worst sum error={worst:.2e}, {elapsed:.2f}s)")


def test_fuzzy_exactness():
    a1 = imaging.pixels_to_physical(215.0, 80.0)
    a2 = imaging.pixels_to_physical(0.0, 80.0)
    a3 = imaging.pixels_to_physical(0.0, 0.0)
    anchors = (abs(a1.d_cm - 2.5) < 1e-12 and abs(a2.e_deg - 0.0) < 1e-12
               and abs(a3.e_deg - 90.0) < 1e-12)
    centers = {"NL": -2.0, "NS": -1.0, "Z": 0.0, "PS": 1.0, "PL": 2.0}
    d1 = defuzzify({"Z": 1.0}, centers)
    d2 = defuzzify({"PS": 0.5, "PL": 0.5}, centers)
    d3 = defuzzify({"NS": 0.2, "PS": 0.6}, centers)
    cases = (abs(d1 - 0.0) < 1e-9 and abs(d2 - 1.5) < 1e-9
             and abs(d3 - 0.5) < 1e-9)
    report("fuzzy exactness", anchors and cases,
           f"(anchors=({a1.d_cm}, {a2.e_deg}, {a3.e_deg}), "
           f"defuzzify=({d1}, {d2}, {d3}))")


def test_gail_reward_exactness():
    def disc_with_output(p):
        net = Network([10, 1], output_activation="sigmoid", seed=0)
        net.params[:] = 0.0
        net._tensors[0][1].data[:] = math.log(p / (1.0 - p)) if 0 < p < 1 else 1e3
        return net

    r_half = gail_reward(disc_with_output(0.5), np.zeros(8), np.zeros(2))
    r_clamp = gail_reward(disc_with_output(0.9999999), np.zeros(8), np.zeros(2))
    ok = (abs(r_half - math.log(2.0)) < 1e-12
          and abs(r_clamp - (-math.log(1e-6))) < 1e-9)
    report("imitation reward exactness", ok,
           f"(ln2 err={abs(r_half - math.log(2.0)):.2e}, "
           f"clamp err={abs(r_clamp + math.log(1e-6)):.2e})")


# ---------------------------------------------------------------------------
# thinning / gradients / kinematics
# ---------------------------------------------------------------------------

def test_thinning_properties():
    t0 = time.perf_counter()
    struct = np.ones((3, 3), dtype=int)
    for seed in range(100):
        img = random_blob(seed)
        skel = imaging.thin(img)
        assert not np.any(skel & ~img), f"seed {seed}: skeleton escaped"
        n_in = ndimage.label(img, structure=struct)[1]
        n_out = ndimage.label(skel, structure=struct)[1]
        assert n_in == n_out, f"seed {seed}: components {n_in} -> {n_out}"
        assert np.array_equal(imaging.thin(skel), skel), f"seed {seed}: not idempotent"
    elapsed = time.perf_counter() - t0
    report("thinning properties", elapsed < 30.0,
           f"(100 blobs, {elapsed:.1f}s)")


def test_gradient_check():
    t0 = time.perf_counter()
    shapes = [((8, 64, 64, 4), "linear"),     # policy
              ((10, 64, 64, 1), "linear"),    # critics
              ((10, 64, 64, 1), "sigmoid")]   # discriminator
    rng = np.random.default_rng(3)
    worst = 0.0
    for sizes, act in shapes:
        net = Network(sizes, output_activation=act, seed=11)
        x = rng.standard_normal((16, sizes[0]))
        targets = rng.standard_normal((16, sizes[-1]))
        rep = gradient(net, x, lambda out: (out - Tensor(targets)).square().mean())

        def loss_value():
            return float(np.mean((net.forward(x) - targets) ** 2))

        def central(i, h):
            keep = net.params[i]
            net.params[i] = keep + h
            lp = loss_value()
            net.params[i] = keep - h
            lm = loss_value()
            net.params[i] = keep
            return (lp - lm) / (2 * h)

        probes = 0
        for i in rng.integers(0, net.n_params, 400):
            if probes >= 100:
                break
            fd = central(i, 1e-5)
            fd_half = central(i, 5e-6)
            # the loss must be differentiable at the probe: a rectifier kink
            # inside the stencil makes the step sizes disagree well above
            # the smooth-case O(h^2) + float-cancellation level
            if abs(fd - fd_half) > max(3e-9, 1e-4 * (abs(fd) + abs(fd_half))):
                continue
            probes += 1
            ad = rep.gradient[i]
            worst = max(worst, abs(ad - fd) / (abs(ad) + abs(fd) + 1e-8))
        assert probes == 100
    elapsed = time.perf_counter() - t0
    report("gradient check", worst < 1e-4 and elapsed < 60.0,
           f"(max rel err={worst:.2e}, {elapsed:.1f}s)")


def test_kinematics_consistency_loop():
    cfg = kinematics.CatheterConfig()
    route = np.array([[0.0, 300.0], [3000.0, 300.0]])
    worst = 0.0
    for theta in np.linspace(0.0, 180.0, 37):
        _, body = kinematics.body_polyline(cfg, 80.0, float(theta), route)
        offset = body[-1, 1] - 300.0
        rec = kinematics.pitch_from_distance(offset, cfg)
        worst = max(worst, abs(rec - theta))
    def offsets(thetas):
        return [abs(kinematics.body_polyline(cfg, 80.0, float(t), route)[1][-1, 1] - 300.0)
                for t in thetas]
    lo = offsets(np.linspace(1.0, 89.0, 45))
    hi = offsets(np.linspace(91.0, 179.0, 45))
    mono = np.all(np.diff(lo) < 0) and np.all(np.diff(hi) > 0)
    report("kinematics consistency loop", worst < 1.0 and bool(mono),
           f"(max pitch err={worst:.3f} deg, monotone={mono})")


# ---------------------------------------------------------------------------
# fuzzy correction convergence
# ---------------------------------------------------------------------------

def _pose_state(env, insertion_mm, roll_deg):
    state, _ = env.reset(0)
    while abs(state.insertion_mm - insertion_mm) > 1e-6 or \
            abs(state.roll_deg - roll_deg) > 1e-6:
        push = np.clip((insertion_mm - state.insertion_mm)
                       / env.config.push_scale_mm, -1, 1)
        droll = np.clip((roll_deg - state.roll_deg)
                        / env.config.roll_scale_deg, -1, 1)
        state = env.apply_correction(state, Action(float(push), float(droll)))
    return state


def test_fuzzy_correction_convergence():
    t0 = time.perf_counter()
    vmap = phantom_mod.parse_vessel_map(fixtures.fixture_text("y_bifurcation"))
    env = CatheterEnv(vmap)
    ctrl = FuzzyController()
    target = oracle_target_pose(vmap, 1, env.route, env.catheter)
    center, side = env.correction_view(1)
    node_arc = env.route.bifurcations[0].node_arc_px
    # tip ~35 px before the junction: |e_trans| <= 1.5 cm by construction
    base_insertion = ((node_arc - 35.0 - env.catheter.tip_along_mm
                       * env.catheter.px_per_mm) / env.catheter.px_per_mm
                      + env.catheter.distal_segment_mm)
    rng = np.random.default_rng(2024)
    converged = 0
    iters = []
    for k in range(20):
        insertion = base_insertion + rng.uniform(-3.0, 3.0)
        roll = rng.uniform(-100.0, 100.0)
        state = _pose_state(env, insertion, roll)
        state, result = ctrl.run_correction_loop(
            env, state, target.point_px, target.offset_px,
            entry_side=side, roi_center_px=center)
        converged += bool(result.converged)
        iters.append(result.iterations)
    elapsed = time.perf_counter() - t0
    report("fuzzy correction convergence", converged >= 18 and elapsed < 120.0,
           f"({converged}/20 within {max(iters)} iters, {elapsed:.1f}s)")


# ---------------------------------------------------------------------------
# learning criteria (shared ablation suite)
# ---------------------------------------------------------------------------

@pytest.fixture(scope="session")
def ablation_suite(tmp_path_factory):
    out = tmp_path_factory.mktemp("ablation")
    fixtures.write_fixture("y_bifurcation", out)
    cfg = config_from_dict({
        "phantom": "y_bifurcation.phantom",
        "modes": ["sac", "sac-gail", "sac-eil", "sac-eil-gail"],
        "seeds": [0, 1, 2],
        "trainer": {"episodes": 300},
    }, base_dir=str(out))
    t0 = time.perf_counter()
    results, failures = harness.run_suite(cfg, str(out / "runs"),
                                          base_dir=str(out), quiet=True)
    return results, failures, time.perf_counter() - t0


def _mode_median(results, mode, key):
    vals = [getattr(rep, key) for (m, _), rep in results.items() if m == mode]
    vals = [math.inf if v is None else v for v in vals]
    return float(np.median(vals))


@pytest.mark.slow
def test_learning_directional(ablation_suite):
    results, failures, elapsed = ablation_suite
    assert not failures, f"child runs failed: {failures}"
    conv_full = _mode_median(results, "sac-eil-gail", "convergence_episode")
    conv_sac = _mode_median(results, "sac", "convergence_episode")
    both = math.isfinite(conv_full) and math.isfinite(conv_sac)
    ok = both and conv_full <= 0.9 * conv_sac and elapsed < 45 * 60
    report("learning directional", ok,
           f"(median convergence: full={conv_full}, sac={conv_sac}, "
           f"suite wallclock={elapsed / 60:.1f} min)")


@pytest.mark.slow
def test_accuracy_directional(ablation_suite):
    results, _, _ = ablation_suite
    err = {mode: _mode_median(results, mode, "avg_error_px")
           for mode in trainer_mod.MODES}
    ok = (err["sac-eil-gail"] < err["sac"]
          and max(err["sac-eil"], err["sac-eil-gail"])
          < min(err["sac"], err["sac-gail"]))
    report("accuracy directional", ok, f"(median avg_error_px={err})")


# ---------------------------------------------------------------------------
# metrics / determinism / wire protocol
# ---------------------------------------------------------------------------

def test_metric_rule_oracle():
    rng = np.random.default_rng(99)
    for _ in range(1000):
        raw = list(rng.random(300) < rng.uniform(0.1, 0.95))
        fast = list(metrics.stable_success_flags(raw))
        slow = []
        for i in range(300):
            ok = all(0 <= j < 300 and raw[j] for j in range(i - 5, i + 6))
            slow.append(ok)
        assert fast == slow
    report("metric rule oracle", True, "(1000 random strings, exact)")


def test_suite_determinism(tmp_path):
    import yaml

    from cathnav import cli

    fixtures.write_fixture("straight", tmp_path)
    cfg = {
        "phantom": "straight.phantom",
        "modes": ["sac"],
        "seeds": [0],
        "trainer": {"episodes": 8, "warmup_episodes": 4,
                    "random_exploration_episodes": 4, "demo_episodes": 2,
                    "update_start_size": 64, "batch_size": 32},
    }
    cfg_path = tmp_path / "exp.yaml"
    cfg_path.write_text(yaml.safe_dump(cfg))

    def run(out):
        rc = cli.main(["suite", "--config", str(cfg_path), "--out", str(out)])
        assert rc == 0
        path = out / "sac-seed0" / "metrics.csv"
        lines = path.read_text().splitlines()
        header = lines[0].split(",")
        drop = header.index("wallclock_s")
        return ["\x1f".join(v for i, v in enumerate(line.split(","))
                            if i != drop) for line in lines]

    a = run(tmp_path / "run_a")
    b = run(tmp_path / "run_b")
    report("suite determinism", a == b,
           f"({len(a)} rows byte-identical excluding wallclock)")


def test_wire_round_trip(tmp_path):
    """[SECONDARY] scripted client drives the gateway; the episode log must
    carry the exact human pose, and malformed poses fall back to oracle."""
    from cathnav.env import EnvConfig

    vmap = phantom_mod.parse_vessel_map(fixtures.fixture_text("y_bifurcation"))
    # start just inside the trigger radius so every episode opens with a
    # correction request
    env = CatheterEnv(vmap, env_config=EnvConfig(initial_insertion_mm=40.0))
    gw = ExpertGateway(vmap, env.route, env.catheter, mode="human", port=0,
                       timeout_ms=8000)
    client = None
    try:
        cfg = trainer_mod.TrainerConfig(episodes=60, warmup_episodes=0,
                                        random_exploration_episodes=0)
        trainer = Trainer(env, config=cfg, mode="sac-eil", seed=1, gateway=gw)
        client = ScriptedClient(gw.port)
        time.sleep(0.1)
        oracle = oracle_target_pose(vmap, 1, env.route, env.catheter)
        want_point = [float(oracle.point_px[0]), float(oracle.point_px[1])]
        want_offset = float(oracle.offset_px) + 1.5
        acks = {}

        def expert_script():
            msg = client.recv(want_type="bifurcation")
            client.send({"type": "pose", "bifurcation_id": msg["bifurcation_id"],
                         "P_target": want_point, "D_target": want_offset,
                         "branch_id": oracle.branch_id})
            acks["good"] = client.recv(want_type="ack")

        t = threading.Thread(target=expert_script, daemon=True)
        t.start()
        log = trainer.run_episode()
        t.join(timeout=5)
        seg = log.corrections[0]
        human_ok = (seg.source == "human"
                    and list(seg.target_point_px) == want_point
                    and seg.target_offset_px == want_offset
                    and acks["good"]["accepted"] is True
                    and len(trainer.demos) > 0)

        # malformed pose: rejected twice, oracle fallback
        def bad_script():
            msg = client.recv(want_type="bifurcation")
            bad = {"type": "pose", "bifurcation_id": msg["bifurcation_id"],
                   "P_target": [10.0, 10.0], "D_target": 0.0,
                   "branch_id": "branch_neg"}
            client.send(bad)
            acks["bad1"] = client.recv(want_type="ack")
            client.send(bad)
            acks["bad2"] = client.recv(want_type="ack")

        t2 = threading.Thread(target=bad_script, daemon=True)
        t2.start()
        log2 = trainer.run_episode()
        t2.join(timeout=5)
        seg2 = log2.corrections[0]
        fallback_ok = (seg2.source == "oracle"
                       and acks["bad1"]["accepted"] is False
                       and acks["bad2"]["accepted"] is False)
        report("wire round trip", human_ok and fallback_ok,
               f"(human source={seg.source}, submitted offset round-trip "
               f"{seg.target_offset_px == want_offset}, fallback={seg2.source})")
    finally:
        if client:
            client.close()
        gw.stop()
