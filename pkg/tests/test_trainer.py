import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cathnav import fixtures, phantom, trainer
from cathnav.env import CatheterEnv
from cathnav.gateway import ExpertGateway
from cathnav.nn import Network
from cathnav.trainer import (ReplayBuffer, ScheduleParams, Trainer,
                             TrainerConfig, blended_reward, gail_reward,
                             schedule_weights)


def make_trainer(mode="sac", seed=0, phantom_name="y_bifurcation", **kw):
    vmap = phantom.parse_vessel_map(fixtures.fixture_text(phantom_name))
    environment = CatheterEnv(vmap)
    gw = ExpertGateway(vmap, environment.route, environment.catheter,
                       mode="oracle")
    cfg = TrainerConfig(**kw)
    return Trainer(environment, config=cfg, mode=mode, seed=seed, gateway=gw)


class TestSchedule:
    def test_midpoint_exact(self):
        p = ScheduleParams(total_episodes=300)
        assert schedule_weights(150, p) == (0.75, 0.25)

    def test_steep_start_limits(self):
        p = ScheduleParams(total_episodes=300, steepness=5.0)
        w_sac, w_gail = schedule_weights(0, p)
        assert w_sac == pytest.approx(1.0, abs=1e-12)
        assert w_gail == pytest.approx(0.0, abs=1e-12)

    @given(st.integers(0, 1000), st.floats(0.001, 5.0), st.integers(1, 1000))
    @settings(max_examples=300, deadline=None)
    def test_weights_sum_to_one(self, t, k, total):
        p = ScheduleParams(total_episodes=total, steepness=k)
        w_sac, w_gail = schedule_weights(min(t, total), p)
        assert abs(w_sac + w_gail - 1.0) < 1e-12

    def test_monotone_and_bounded(self):
        p = ScheduleParams(total_episodes=300)
        ws = [schedule_weights(t, p) for t in range(301)]
        sacs = [w[0] for w in ws]
        gails = [w[1] for w in ws]
        assert all(a >= b for a, b in zip(sacs, sacs[1:]))
        assert all(a <= b for a, b in zip(gails, gails[1:]))
        assert all(0.5 <= w <= 1.0 for w in sacs)
        assert all(0.0 <= w <= 0.5 for w in gails)


class TestGailReward:
    def _disc(self, logit):
        net = Network([10, 1], output_activation="sigmoid", seed=0)
        net.params[:] = 0.0
        net._tensors[0][1].data[:] = logit
        return net

    def test_half_output_is_ln2(self):
        r = gail_reward(self._disc(0.0), np.zeros(8), np.zeros(2))
        assert r == math.log(2.0)

    def test_low_output_low_reward(self):
        # the clamp floors the reward at -log(1 - 1e-6) ~ 1e-6
        r = gail_reward(self._disc(-30.0), np.zeros(8), np.zeros(2))
        assert 0.0 <= r <= 1.1e-6

    def test_clamp_boundary_value(self):
        r = gail_reward(self._disc(40.0), np.zeros(8), np.zeros(2))
        assert r == pytest.approx(-math.log(1e-6), abs=1e-9)

    def test_always_non_negative(self):
        net = Network([10, 1], output_activation="sigmoid", seed=4)
        rng = np.random.default_rng(0)
        rs = gail_reward(net, rng.random((64, 8)), rng.uniform(-1, 1, (64, 2)))
        assert np.all(rs >= 0.0)


class TestBlendedReward:
    def test_midpoint_arithmetic(self):
        p = ScheduleParams(total_episodes=300, noise_half_width=0.0)
        rng = np.random.default_rng(0)
        assert blended_reward(4.0, 8.0, 150, p, rng) == pytest.approx(5.0)

    def test_zero_gail_weight_passthrough(self):
        p = ScheduleParams(total_episodes=300, steepness=5.0,
                           noise_half_width=0.0)
        rng = np.random.default_rng(0)
        assert blended_reward(4.0, 8.0, 0, p, rng) == pytest.approx(4.0, abs=1e-9)

    def test_noise_support_bound(self):
        p = ScheduleParams(total_episodes=300, noise_half_width=0.1)
        rng = np.random.default_rng(1)
        for t in (0, 100, 250):
            w_sac, w_gail = schedule_weights(t, p)
            base = w_sac * 4.0 + w_gail * 8.0
            for _ in range(50):
                r = blended_reward(4.0, 8.0, t, p, rng)
                assert abs(r - base) <= 0.1


class TestReplayBuffer:
    def test_sampled_transitions_were_inserted(self):
        buf = ReplayBuffer(128, 8, 2)
        rng = np.random.default_rng(0)
        tags = {}
        for i in range(100):
            obs = rng.random(8)
            buf.insert(obs, rng.uniform(-1, 1, 2), float(i), rng.random(8),
                       False, episode=i // 10, step=i % 10, w_sac=1.0, w_gail=0.0)
            tags[(i // 10, i % 10)] = obs
        idx = buf.sample_indices(64, rng)
        for j in idx:
            key = (int(buf.episode[j]), int(buf.step[j]))
            assert key in tags
            np.testing.assert_array_equal(buf.obs[j], tags[key])

    def test_capacity_wraps(self):
        buf = ReplayBuffer(16, 8, 2)
        for i in range(40):
            buf.insert(np.zeros(8), np.zeros(2), 0.0, np.zeros(8), False,
                       episode=0, step=i, w_sac=1.0, w_gail=0.0)
        assert len(buf) == 16
        assert set(buf.step) == set(range(24, 40))


class TestSacUpdate:
    def test_terminal_batch_regresses_to_reward(self):
        tr = make_trainer(reward_scale=1.0)
        rng = np.random.default_rng(0)
        s = rng.random(8)
        for i in range(600):
            a = rng.uniform(-1, 1, 2)
            tr.replay.insert(s, a, 2.0 * a[0] - a[1], s, True, 0, i, 1.0, 0.0)
        for _ in range(2500):
            tr.sac_update()
        probe = np.array([0.5, -0.5])
        q = tr.critic1.forward(np.concatenate([s, probe])[None]).ravel()[0]
        assert q == pytest.approx(2.0 * 0.5 + 0.5, abs=0.15)

    def test_gamma_zero_equals_terminal(self):
        tr = make_trainer(reward_scale=1.0, gamma=0.0)
        rng = np.random.default_rng(1)
        s = rng.random(8)
        for i in range(600):
            a = rng.uniform(-1, 1, 2)
            tr.replay.insert(s, a, float(np.sin(3 * a[0])), s, False, 0, i,
                             1.0, 0.0)
        for _ in range(2500):
            tr.sac_update()
        probe = np.array([0.4, 0.0])
        q = tr.critic1.forward(np.concatenate([s, probe])[None]).ravel()[0]
        assert q == pytest.approx(math.sin(1.2), abs=0.15)

    def test_soft_bandit_bellman_consistency(self):
        # self-looping bandit: after training, Q must satisfy the soft
        # Bellman identity Q(a) = r(a) + gamma * E[minQ(a') - alpha*logpi]
        tr = make_trainer(reward_scale=1.0, gamma=0.5)
        rng = np.random.default_rng(2)
        s = np.full(8, 0.25)
        for i in range(800):
            a = rng.uniform(-1, 1, 2)
            tr.replay.insert(s, a, float(a[0]), s, False, 0, i, 1.0, 0.0)
        for _ in range(2000):
            tr.sac_update()
        acts, logps = tr._sample_batch(np.tile(s, (512, 1)),
                                       np.random.default_rng(9))
        x = np.concatenate([np.tile(s, (512, 1)), acts], axis=1)
        qmin = np.minimum(tr.critic1.forward(x).ravel(),
                          tr.critic2.forward(x).ravel())
        v_soft = float(np.mean(qmin - tr.alpha_ent * logps))
        probe = np.array([0.3, 0.1])
        xq = np.concatenate([s, probe])[None]
        q = min(float(tr.critic1.forward(xq).ravel()[0]),
                float(tr.critic2.forward(xq).ravel()[0]))
        want = probe[0] + 0.5 * v_soft
        assert q == pytest.approx(want, abs=0.05 * max(1.0, abs(want)) + 0.1)

    def test_nonfinite_loss_aborts(self):
        tr = make_trainer()
        tr.replay.insert(np.zeros(8), np.zeros(2), float("nan"), np.zeros(8),
                         True, 0, 0, 1.0, 0.0)
        for i in range(300):
            tr.replay.insert(np.zeros(8), np.zeros(2), float("nan"),
                             np.zeros(8), True, 0, i, 1.0, 0.0)
        with pytest.raises(trainer.TrainingDiverged):
            for _ in range(5):
                tr.sac_update()


class TestDiscriminatorUpdate:
    def test_separable_clouds_separate(self):
        tr = make_trainer(mode="sac-gail")
        rng = np.random.default_rng(0)
        demo = (np.tile([1.0, 1, 1, 1, 0, 0, 0, 0], (64, 1)),
                np.tile([0.8, -0.8], (64, 1)))
        agent = (np.tile([0.0, 0, 0, 0, 1, 1, 1, 1], (64, 1)),
                 np.tile([-0.8, 0.8], (64, 1)))
        for _ in range(500):
            loss, d_demo, d_agent = tr.discriminator_update(agent, demo)
        assert d_demo > 0.9
        assert d_agent < 0.1

    def test_identical_batches_plateau(self):
        tr = make_trainer(mode="sac-gail")
        rng = np.random.default_rng(1)
        batch = (rng.random((64, 8)), rng.uniform(-1, 1, (64, 2)))
        loss = None
        for _ in range(300):
            loss, d_demo, d_agent = tr.discriminator_update(batch, batch)
        assert loss == pytest.approx(-2.0 * math.log(0.5), abs=0.05)
        assert d_demo == pytest.approx(0.5, abs=0.05)

    def test_fresh_discriminator_near_half(self):
        tr = make_trainer(mode="sac-gail")
        rng = np.random.default_rng(2)
        x = rng.random((32, 8))
        a = rng.uniform(-1, 1, (32, 2))
        out = tr.discriminator.forward(np.concatenate([x, a], axis=1))
        assert np.all(np.abs(out - 0.5) < 0.2)


class TestRunEpisode:
    def test_sac_mode_never_touches_demos(self):
        tr = make_trainer(mode="sac", episodes=60)
        for _ in range(55):
            tr.run_episode()
        assert len(tr.demos) == 0

    def test_eil_gail_episode_logs_correction(self):
        tr = make_trainer(mode="sac-eil-gail", seed=3)
        tr.episode_index = 60  # past warmup
        # drive a scripted approach so the junction triggers
        log = None
        for _ in range(30):
            log = tr.run_episode()
            if log.corrections:
                break
        assert log is not None and log.corrections
        seg = log.corrections[0]
        assert seg.node == 1
        assert seg.source == "oracle"
        assert math.isfinite(log.bifurcation_pose_error_px)
        assert len(tr.demos) > 0

    def test_episode_reproducibility(self):
        a = make_trainer(mode="sac-eil-gail", seed=11)
        b = make_trainer(mode="sac-eil-gail", seed=11)
        for _ in range(12):
            la = a.run_episode()
            lb = b.run_episode()
            assert la.cumulative_reward == lb.cumulative_reward
            assert la.steps == lb.steps
            assert la.success == lb.success

    def test_warmup_never_evaluates_discriminator(self):
        tr = make_trainer(mode="sac-eil-gail", seed=2, warmup_episodes=6,
                          random_exploration_episodes=6, demo_episodes=2,
                          update_start_size=32, batch_size=16)
        tr.bootstrap_demonstrations()
        calls = {"n": 0}
        original = tr.discriminator.forward

        def spy(x):
            calls["n"] += 1
            return original(x)

        tr.discriminator.forward = spy
        rewards = []
        for _ in range(6):
            log = tr.run_episode()
            rewards.append(log.cumulative_reward)
        assert calls["n"] == 0, "discriminator touched during warmup"
        tr.run_episode()  # past warmup: blending and disc updates engage
        assert calls["n"] > 0

    def test_warmup_purity_shared_prefix(self):
        # identical seeds: modes cannot diverge before the first
        # discriminator/correction event at the warmup boundary
        a = make_trainer(mode="sac", seed=5, warmup_episodes=8,
                         random_exploration_episodes=8)
        b = make_trainer(mode="sac-eil-gail", seed=5, warmup_episodes=8,
                         random_exploration_episodes=8)
        b.bootstrap_demonstrations()  # demos alone must not change episodes
        for ep in range(8):
            la = a.run_episode()
            lb = b.run_episode()
            assert la.cumulative_reward == lb.cumulative_reward
            assert (la.w_sac, la.w_gail) == (lb.w_sac, lb.w_gail) == (1.0, 0.0)


class TestTrain:
    def test_smoke_run_produces_all_rows(self):
        tr = make_trainer(mode="sac", episodes=5, update_start_size=64,
                          batch_size=32)
        logs = tr.train()
        assert len(logs) == 5
        assert [l.episode for l in logs] == list(range(5))

    def test_checkpoint_round_trip(self, tmp_path):
        tr = make_trainer(mode="sac", episodes=3, update_start_size=32,
                          batch_size=16)
        tr.train()
        path = tmp_path / "ck.bin"
        tr.save(path)
        tr2 = make_trainer(mode="sac")
        tr2.load(path)
        np.testing.assert_array_equal(tr.actor.params, tr2.actor.params)
        np.testing.assert_array_equal(tr.critic2.params, tr2.critic2.params)
        assert tr2.episode_index == 3

    @pytest.mark.slow
    def test_straight_tube_sac_learns(self):
        tr = make_trainer(mode="sac", phantom_name="straight", episodes=150)
        logs = tr.train()
        tail = [l.success for l in logs[-50:]]
        assert sum(tail) / 50 >= 0.8
