"""Hybrid actor-critic / adversarial-imitation training loop.

Four ablation modes share one episode structure: plain max-entropy RL
("sac"), adversarial imitation blending ("sac-gail"), online fuzzy pose
correction at bifurcations ("sac-eil"), and both ("sac-eil-gail").

Reward blending follows a sigmoid schedule over episodes: the imitation
share rises from 0 to 0.5 around the midpoint of training; the first
``warmup_episodes`` use environment rewards only and never touch the
discriminator.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import expert, fuzzy, imaging, kernels, kinematics, nn
from .env import Action

MODES = ("sac", "sac-gail", "sac-eil", "sac-eil-gail")
DISC_CLAMP = 1e-6


class TrainingDiverged(RuntimeError):
    pass


def mode_uses_gail(mode):
    return mode in ("sac-gail", "sac-eil-gail")


def mode_uses_eil(mode):
    return mode in ("sac-eil", "sac-eil-gail")


# ---------------------------------------------------------------------------
# Reward scheduling and imitation reward
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScheduleParams:
    total_episodes: int = 300
    steepness: float = 0.05
    noise_half_width: float = 0.05
    warmup_episodes: int = 50

    def __post_init__(self):
        if self.total_episodes <= 0 or self.steepness <= 0 or self.noise_half_width < 0:
            raise ValueError("invalid schedule parameters")


def schedule_weights(t, params):
    """Sigmoid blend weights at episode t: (w_sac, w_gail), summing to 1."""
    z = params.steepness * (t - params.total_episodes / 2.0)
    if z >= 0:
        alpha = 1.0 / (1.0 + math.exp(-z))
    else:
        ez = math.exp(z)
        alpha = ez / (1.0 + ez)
    return 1.0 - 0.5 * alpha, 0.5 * alpha


def gail_reward(discriminator, s, a):
    """Imitation reward -log(1 - D(s, a)) with the complement clamped to
    [1e-6, 1 - 1e-6]; always non-negative."""
    s = np.asarray(s, dtype=np.float64)
    single = s.ndim == 1
    x = np.concatenate([np.atleast_2d(s), np.atleast_2d(a)], axis=1)
    d = discriminator.forward(x).ravel()
    one_minus = np.clip(1.0 - d, DISC_CLAMP, 1.0 - DISC_CLAMP)
    r = -np.log(one_minus)
    return float(r[0]) if single else r


def blended_reward(r_sac, r_gail, t, params, rng):
    """Scheduled mix of the two rewards plus uniform exploration noise."""
    w_sac, w_gail = schedule_weights(t, params)
    eps = rng.uniform(-params.noise_half_width, params.noise_half_width)
    return w_sac * r_sac + w_gail * r_gail + eps


# ---------------------------------------------------------------------------
# Buffers
# ---------------------------------------------------------------------------

class ReplayBuffer:
    """Bounded FIFO of transitions with their insertion-time blend weights."""

    def __init__(self, capacity, obs_dim, act_dim):
        self.capacity = int(capacity)
        self.obs = np.zeros((capacity, obs_dim))
        self.act = np.zeros((capacity, act_dim))
        self.rew = np.zeros(capacity)
        self.next_obs = np.zeros((capacity, obs_dim))
        self.done = np.zeros(capacity)
        self.episode = np.zeros(capacity, dtype=np.int64)
        self.step = np.zeros(capacity, dtype=np.int64)
        self.w_sac = np.zeros(capacity)
        self.w_gail = np.zeros(capacity)
        self.size = 0
        self.ptr = 0

    def __len__(self):
        return self.size

    def insert(self, obs, act, rew, next_obs, done, episode, step,
               w_sac, w_gail):
        i = self.ptr
        self.obs[i] = obs
        self.act[i] = act
        self.rew[i] = rew
        self.next_obs[i] = next_obs
        self.done[i] = float(done)
        self.episode[i] = episode
        self.step[i] = step
        self.w_sac[i] = w_sac
        self.w_gail[i] = w_gail
        self.ptr = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample_indices(self, batch_size, rng):
        return rng.integers(0, self.size, size=batch_size)


class DemoBuffer:
    """Expert (observation, action) pairs used by the discriminator."""

    def __init__(self, obs_dim, act_dim):
        self.obs = np.zeros((0, obs_dim))
        self.act = np.zeros((0, act_dim))

    def __len__(self):
        return len(self.obs)

    def append(self, obs, act):
        self.obs = np.vstack([self.obs, np.atleast_2d(obs)])
        self.act = np.vstack([self.act, np.atleast_2d(act)])

    def sample(self, batch_size, rng):
        idx = rng.integers(0, len(self.obs), size=batch_size)
        return self.obs[idx], self.act[idx]


# ---------------------------------------------------------------------------
# Configuration and logs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainerConfig:
    episodes: int = 300
    warmup_episodes: int = 50
    gamma: float = 0.99
    polyak_tau: float = 0.005
    learning_rate: float = 3e-4
    batch_size: int = 128
    replay_capacity: int = 50000
    updates_per_step: int = 1
    disc_updates_per_episode: int = 2
    target_entropy: float = -2.0
    schedule_steepness: float = 0.05
    blend_noise_half_width: float = 0.05
    demo_episodes: int = 20
    auto_alpha: bool = False
    initial_alpha: float = 0.2
    update_start_size: int = 256
    hidden_sizes: tuple = (64, 64)
    random_exploration_episodes: int = 50  # random actions while exploring
    explore_push_range: tuple = (0.0, 0.7)   # per-episode push bias draw
    explore_roll_range: tuple = (-0.55, 0.55)  # per-episode roll bias draw
    explore_jitter: float = 0.35             # per-step uniform jitter
    reward_scale: float = 1.0  # critic-side reward scaling

    def schedule(self):
        return ScheduleParams(self.episodes, self.schedule_steepness,
                              self.blend_noise_half_width, self.warmup_episodes)


@dataclass
class CorrectionSegment:
    node: int
    converged: bool
    iterations: int
    source: str
    target_point_px: tuple
    target_offset_px: float
    final_error_trans_cm: float
    final_error_rot_deg: float


@dataclass
class EpisodeLog:
    episode: int
    mode: str
    seed: int
    steps: int
    cumulative_reward: float
    success: bool
    termination_cause: str
    bifurcation_pose_error_px: float  # nan when no junction was approached
    wallclock_s: float
    w_sac: float
    w_gail: float
    corrections: list = field(default_factory=list)


@dataclass
class LossReport:
    critic1: float
    critic2: float
    actor: float
    alpha: float


# ---------------------------------------------------------------------------
# Trainer
# ---------------------------------------------------------------------------

class Trainer:
    def __init__(self, environment, config=None, mode="sac", seed=0,
                 gateway=None, controller=None, demo_store=None):
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        self.env = environment
        self.config = config or TrainerConfig()
        self.mode = mode
        self.seed = int(seed)
        self.gateway = gateway
        self.controller = controller or fuzzy.FuzzyController(
            push_scale_mm=environment.config.push_scale_mm,
            roll_scale_deg=environment.config.roll_scale_deg)
        self.demo_store = demo_store

        obs_dim = environment.OBSERVATION_DIM
        act_dim = 2
        hid = tuple(self.config.hidden_sizes)
        seeds = np.random.SeedSequence(self.seed).spawn(6)
        self.rng_explore = np.random.default_rng(seeds[1])
        self.rng_update = np.random.default_rng(seeds[2])
        self.rng_blend = np.random.default_rng(seeds[3])
        self.rng_demo = np.random.default_rng(seeds[4])

        def net_seed(i):
            return np.random.SeedSequence([self.seed, i]).generate_state(1)[0]

        self.actor = nn.Network([obs_dim, *hid, 2 * act_dim], seed=net_seed(0))
        self.critic1 = nn.Network([obs_dim + act_dim, *hid, 1], seed=net_seed(1))
        self.critic2 = nn.Network([obs_dim + act_dim, *hid, 1], seed=net_seed(2))
        self.target1 = self.critic1.copy()
        self.target2 = self.critic2.copy()
        self.discriminator = nn.Network([obs_dim + act_dim, *hid, 1],
                                        output_activation="sigmoid", seed=net_seed(3))
        lr = self.config.learning_rate
        self.opt_actor = nn.Adam(self.actor.n_params, lr=lr)
        self.opt_critic1 = nn.Adam(self.critic1.n_params, lr=lr)
        self.opt_critic2 = nn.Adam(self.critic2.n_params, lr=lr)
        self.opt_disc = nn.Adam(self.discriminator.n_params, lr=lr)
        self.log_alpha = np.array([math.log(self.config.initial_alpha)])
        self.opt_alpha = nn.Adam(1, lr=lr)

        self.replay = ReplayBuffer(self.config.replay_capacity, obs_dim, act_dim)
        self.demos = DemoBuffer(obs_dim, act_dim)
        self.episode_index = 0
        self.updates_done = 0
        self._explore_bias = np.zeros(2)

        self._oracle_targets = {
            rb.bifurcation.node: expert.oracle_target_pose(
                environment.vmap, rb.bifurcation.node, environment.route,
                environment.catheter)
            for rb in environment.route.bifurcations
        }

    # -- policy ---------------------------------------------------------------

    @property
    def alpha_ent(self):
        return float(np.exp(self.log_alpha[0]))

    def select_action(self, obs, deterministic=False):
        if deterministic:
            out = self.actor.forward(obs)
            return np.tanh(out[:2])
        if self.episode_index < self.config.random_exploration_episodes:
            # directed exploration: a per-episode (push, roll) bias with
            # per-step jitter, so warmup trajectories traverse the vessel
            # and hold a roll long enough to commit to either branch
            j = self.config.explore_jitter
            return np.clip(self._explore_bias
                           + self.rng_explore.uniform(-j, j, 2), -1.0, 1.0)
        return nn.sample_squashed_gaussian(self.actor, obs, self.rng_explore).action

    def _sample_batch(self, s, rng):
        """Batched squashed-Gaussian sample (values only, no tape)."""
        out = self.actor.forward(s)
        d = out.shape[1] // 2
        mu, ls = out[:, :d], np.clip(out[:, d:], nn.LOG_STD_MIN, nn.LOG_STD_MAX)
        std = np.exp(ls)
        xi = rng.standard_normal(mu.shape)
        u = mu + std * xi
        a = np.tanh(u)
        gauss = -0.5 * xi**2 - 0.5 * nn.LOG_2PI - ls
        corr = np.log(1.0 - a**2 + nn.LOGPROB_EPS)
        logp = np.sum(gauss - corr, axis=1)
        return np.clip(a, -1.0 + nn.SQUASH_EPS, 1.0 - nn.SQUASH_EPS), logp

    # -- reward assembly --------------------------------------------------------

    def _batch_rewards(self, idx):
        r_env = self.replay.rew[idx]
        if not mode_uses_gail(self.mode) or self.episode_index < self.config.warmup_episodes:
            return r_env.copy()
        s = self.replay.obs[idx]
        a = self.replay.act[idx]
        r_g = gail_reward(self.discriminator, s, a)
        delta = self.config.blend_noise_half_width
        eps = self.rng_blend.uniform(-delta, delta, size=len(idx))
        return (self.replay.w_sac[idx] * r_env
                + self.replay.w_gail[idx] * np.asarray(r_g) + eps)

    # -- updates -----------------------------------------------------------------

    def sac_update(self, idx=None):
        """One soft actor-critic update on a replay batch: twin critic
        regression to the soft Bellman target, reparameterized actor step,
        temperature step, target smoothing."""
        cfg = self.config
        if idx is None:
            idx = self.replay.sample_indices(cfg.batch_size, self.rng_update)
        s = self.replay.obs[idx]
        a = self.replay.act[idx]
        s2 = self.replay.next_obs[idx]
        done = self.replay.done[idx]
        r = self._batch_rewards(idx)

        a2, logp2 = self._sample_batch(s2, self.rng_update)
        x2 = np.concatenate([s2, a2], axis=1)
        q1t = self.target1.forward(x2).ravel()
        q2t = self.target2.forward(x2).ravel()
        y = cfg.reward_scale * r + cfg.gamma * (1.0 - done) * (
            np.minimum(q1t, q2t) - self.alpha_ent * logp2)

        x = np.concatenate([s, a], axis=1)
        critic_losses = []
        for critic, opt in ((self.critic1, self.opt_critic1),
                            (self.critic2, self.opt_critic2)):
            critic.zero_grad()
            pred = critic.forward_tensor(nn.Tensor(x)).reshape(-1)
            loss = (pred - nn.Tensor(y)).square().mean()
            loss.backward()
            opt.step(critic.params, critic.grad_vector())
            critic_losses.append(float(loss.data))

        # actor step (critic gradients computed on the tape are discarded)
        self.actor.zero_grad()
        self.critic1.zero_grad()
        self.critic2.zero_grad()
        sT = nn.Tensor(s)
        out = self.actor.forward_tensor(sT)
        d = out.data.shape[1] // 2
        mu = out[:, :d]
        ls = out[:, d:].clip(nn.LOG_STD_MIN, nn.LOG_STD_MAX)
        std = ls.exp()
        xi = nn.Tensor(self.rng_update.standard_normal((len(idx), d)))
        aT = (mu + std * xi).tanh()
        logp = (nn.Tensor(-0.5 * xi.data**2 - 0.5 * nn.LOG_2PI) - ls
                - (nn.Tensor(1.0 + nn.LOGPROB_EPS) - aT.square()).log()).sum(axis=1)
        q1p = self.critic1.forward_tensor(nn.concat([sT, aT])).reshape(-1)
        q2p = self.critic2.forward_tensor(nn.concat([sT, aT])).reshape(-1)
        qmin = nn.minimum(q1p, q2p)
        actor_loss = (logp * self.alpha_ent - qmin).mean()
        actor_loss.backward()
        self.opt_actor.step(self.actor.params, self.actor.grad_vector())

        if cfg.auto_alpha:
            alpha_grad = -(float(np.mean(logp.data)) + cfg.target_entropy)
            self.opt_alpha.step(self.log_alpha, np.array([alpha_grad]))

        tau = cfg.polyak_tau
        self.target1.params *= (1.0 - tau)
        self.target1.params += tau * self.critic1.params
        self.target2.params *= (1.0 - tau)
        self.target2.params += tau * self.critic2.params

        report = LossReport(critic1=critic_losses[0], critic2=critic_losses[1],
                            actor=float(actor_loss.data), alpha=self.alpha_ent)
        if not all(math.isfinite(v) for v in
                   (report.critic1, report.critic2, report.actor, report.alpha)):
            raise TrainingDiverged(f"non-finite losses at update "
                                   f"{self.updates_done}: {report}")
        self.updates_done += 1
        return report

    def discriminator_update(self, agent_batch=None, demo_batch=None):
        """One ascent step of E_demo[log D] + E_agent[log(1 - D)]."""
        cfg = self.config
        if agent_batch is None:
            idx = self.replay.sample_indices(cfg.batch_size, self.rng_update)
            agent_batch = (self.replay.obs[idx], self.replay.act[idx])
        if demo_batch is None:
            demo_batch = self.demos.sample(cfg.batch_size, self.rng_update)
        xa = np.concatenate(agent_batch, axis=1)
        xd = np.concatenate(demo_batch, axis=1)
        self.discriminator.zero_grad()
        d_demo = self.discriminator.forward_tensor(nn.Tensor(xd)).reshape(-1) \
            .clip(DISC_CLAMP, 1.0 - DISC_CLAMP)
        d_agent = self.discriminator.forward_tensor(nn.Tensor(xa)).reshape(-1) \
            .clip(DISC_CLAMP, 1.0 - DISC_CLAMP)
        loss = -(d_demo.log().mean() + (nn.Tensor(1.0) - d_agent).log().mean())
        loss.backward()
        self.opt_disc.step(self.discriminator.params,
                           self.discriminator.grad_vector())
        return (float(loss.data), float(np.mean(d_demo.data)),
                float(np.mean(d_agent.data)))

    # -- episodes -------------------------------------------------------------

    def _maybe_update(self):
        if len(self.replay) >= max(self.config.update_start_size,
                                   self.config.batch_size):
            for _ in range(self.config.updates_per_step):
                self.sac_update()

    def _record_demos(self, pairs, source, episode):
        if not pairs:
            return
        records = [expert.DemoRecord(observation=obs, action=act,
                                     source=source, episode=episode)
                   for obs, act in pairs]
        if self.demo_store is not None:
            self.demo_store.append(records)
        for rec in records:
            self.demos.append(rec.observation, rec.action)

    def _pose_error_px(self, body_px, node):
        """Pose deviation (translation + rotation, pixels) of a body
        snapshot against the oracle target at a junction, measured through
        the imaging pipeline on the junction window."""
        target = self._oracle_targets[node]
        center, side = self.env.correction_view(node)
        w, h = self.env.vmap.canvas_px
        mask = kernels.rasterize_tube(int(h), int(w), body_px,
                                      self.env.catheter.tube_radius_px)
        try:
            pose = imaging.estimate_tip_pose_roi(mask, center, 220.0, side)
        except imaging.ImagingError:
            return float("nan")
        trans = float(np.hypot(*(target.point_px - pose.tip_px)))
        rot = abs(target.offset_px - pose.offset_px)
        return trans + rot

    def run_episode(self, environment=None, gateway=None, mode=None):
        """One episode of the shared loop; correction transfers control to
        the fuzzy loop at detected junctions (post-warmup, EIL modes), and
        the traversed pairs land in the demo buffer."""
        env_ = environment or self.env
        gateway_ = gateway or self.gateway
        mode_ = mode or self.mode
        cfg = self.config
        episode = self.episode_index
        t0 = time.perf_counter()
        sched = cfg.schedule()
        if mode_uses_gail(mode_) and episode >= cfg.warmup_episodes:
            w_sac, w_gail = schedule_weights(episode, sched)
        else:
            w_sac, w_gail = 1.0, 0.0

        if episode < cfg.random_exploration_episodes:
            self._explore_bias = np.array([
                self.rng_explore.uniform(*cfg.explore_push_range),
                self.rng_explore.uniform(*cfg.explore_roll_range)])

        state, obs = env_.reset(seed=self.seed * 100003 + episode)
        corrections = []
        # closest approach per route bifurcation: node -> (dist, body)
        best = {}

        def track(st):
            for node, tgt in self._oracle_targets.items():
                d = float(np.hypot(*(tgt.point_px - st.tip_px)))
                if node not in best or d < best[node][0]:
                    best[node] = (d, st.body_px.copy())

        track(state)
        total_reward = 0.0
        eil_active = mode_uses_eil(mode_) and episode >= cfg.warmup_episodes

        def correct_at_junction(st):
            """Expert takeover when a junction is detected; returns the
            corrected state (or the input when nothing fires)."""
            if not (eil_active and gateway_ is not None) or st.done:
                return st
            event = env_.detect_bifurcation(st)
            if event is None:
                return st
            target = gateway_.request_target_pose(env_, st, event,
                                                  episode=episode)
            center, side = env_.correction_view(event.node)
            st, result = self.controller.run_correction_loop(
                env_, st, target.point_px, target.offset_px,
                entry_side=side, roi_center_px=center)
            self._record_demos(result.demos, target.source, episode)
            err = result.final_error
            corrections.append(CorrectionSegment(
                node=event.node, converged=result.converged,
                iterations=result.iterations, source=target.source,
                target_point_px=(float(target.point_px[0]),
                                 float(target.point_px[1])),
                target_offset_px=float(target.offset_px),
                final_error_trans_cm=(err.trans_magnitude_cm if err else
                                      float("nan")),
                final_error_rot_deg=(err.e_rot_deg if err else float("nan"))))
            track(st)
            return st

        state = correct_at_junction(state)
        obs = env_.observe(state)
        while not state.done:
            action_vec = self.select_action(obs)
            state2, outcome = env_.step(state, Action(*action_vec))
            track(state2)
            # the expert takeover is part of the observed transition: the
            # policy's next state is the corrected pose
            state2 = correct_at_junction(state2)
            next_obs = env_.observe(state2) if not state2.done \
                else outcome.observation
            self.replay.insert(obs, action_vec, outcome.reward,
                               next_obs, outcome.done,
                               episode, state2.step_count, w_sac, w_gail)
            total_reward += outcome.reward
            self._maybe_update()
            state, obs = state2, next_obs

        if mode_uses_gail(mode_) and episode >= cfg.warmup_episodes and len(self.demos):
            for _ in range(cfg.disc_updates_per_episode):
                self.discriminator_update()

        errors = [self._pose_error_px(body, node)
                  for node, (_, body) in sorted(best.items())]
        errors = [e for e in errors if math.isfinite(e)]
        log = EpisodeLog(
            episode=episode, mode=mode_, seed=self.seed,
            steps=state.step_count, cumulative_reward=total_reward,
            success=(state.cause == "success"),
            termination_cause=state.cause,
            bifurcation_pose_error_px=(float(np.mean(errors)) if errors
                                       else float("nan")),
            wallclock_s=time.perf_counter() - t0,
            w_sac=w_sac, w_gail=w_gail, corrections=corrections)
        self.episode_index += 1
        return log

    # -- demo bootstrapping -----------------------------------------------------

    def scripted_expert_action(self, state, noise_scale=0.08):
        """Route-following controller used to pre-generate demonstrations:
        roll toward the branch alignment before each junction, push harder
        when aligned, with seeded exploration noise."""
        env_ = self.env
        rb = env_.upcoming_route_bifurcation(state)
        tip = state.tip_px
        if rb is not None:
            want = self._oracle_targets[rb.bifurcation.node].offset_px
            theta = kinematics.pitch_from_distance(want, env_.catheter)
            u = min((kinematics.actuator_command(t, state.roll_deg)
                     for t in (theta, -theta)), key=abs)
            roll = u / env_.config.roll_scale_deg
            node_xy = env_.vmap.nodes[rb.bifurcation.node]
            near = float(np.hypot(*(node_xy - tip))) < 2.5 * env_.config.trigger_radius_px
            push = 0.2 if (abs(u) > 20.0 and near) else 1.0
        else:
            roll = 0.0
            dist_px = float(np.hypot(*(env_.vmap.target.center - tip)))
            push = dist_px / (env_.config.push_scale_mm * env_.catheter.px_per_mm)
        vec = np.array([push, roll]) + self.rng_demo.normal(0.0, noise_scale, 2)
        return np.clip(vec, -1.0, 1.0)

    def bootstrap_demonstrations(self):
        """Pre-generate oracle route demonstrations for the discriminator."""
        for k in range(self.config.demo_episodes):
            state, obs = self.env.reset(seed=-(k + 1))
            pairs = []
            while not state.done:
                action_vec = self.scripted_expert_action(state)
                pairs.append((obs, action_vec))
                state, outcome = self.env.step(state, Action(*action_vec))
                obs = outcome.observation
            if state.cause == "success":
                self._record_demos(pairs, "oracle", episode=-(k + 1))

    # -- full runs ----------------------------------------------------------------

    def train(self):
        """Run the configured number of episodes; returns the episode logs."""
        if mode_uses_gail(self.mode):
            self.bootstrap_demonstrations()
        logs = []
        for _ in range(self.config.episodes):
            logs.append(self.run_episode())
        return logs

    def evaluate(self, episodes=20):
        """Deterministic rollouts of the current policy (no learning)."""
        logs = []
        for k in range(episodes):
            state, obs = self.env.reset(seed=10_000_019 + k)
            total = 0.0
            while not state.done:
                a = self.select_action(obs, deterministic=True)
                state, outcome = self.env.step(state, Action(*a))
                total += outcome.reward
                obs = outcome.observation
            logs.append((state.cause == "success", state.step_count, total))
        return logs

    def save(self, path):
        from .checkpoint import save_checkpoint
        save_checkpoint(path, {
            "actor": self.actor,
            "critic1": self.critic1,
            "critic2": self.critic2,
            "target1": self.target1,
            "target2": self.target2,
            "discriminator": self.discriminator,
        }, scalars={"log_alpha": float(self.log_alpha[0]),
                    "episode": float(self.episode_index)})

    def load(self, path):
        from .checkpoint import load_checkpoint
        nets, scalars = load_checkpoint(path)
        for name in ("actor", "critic1", "critic2", "target1", "target2",
                     "discriminator"):
            getattr(self, name).params[:] = nets[name].params
        self.log_alpha[0] = scalars["log_alpha"]
        self.episode_index = int(scalars["episode"])
