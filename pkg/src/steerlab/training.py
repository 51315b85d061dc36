"""Demonstration-guided training loop.

Each simulation step runs the MPC-PID demonstrator and the learning agent
synchronously: the executed steering command is gated between them with a
(decaying) probability, and the reward can blend path-following quality with
an imitation penalty whose weights adapt through a normalized sigmoid of the
two reward parts.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .ddpg import (DdpgAgent, DdpgParams, GaussianNoise, OuNoise, ReplayBuffer,
                   act_with_noise, load_checkpoint, save_checkpoint)
from .errors import ConfigError, ControllerFault, ParameterError, TrainingFault
from .longitudinal import LongitudinalControl
from .mpc_pid import MpcPidController
from .track import Track, wrap_angle
from .vehicle import (STEER_RATE_LIMIT, ControlCommand, VehicleParams,
                      VehicleState, step_plant)

REWARD_MODES = ("base", "change_penalty", "demo_fixed", "demo_adaptive")
ACTION_MODES = ("steering", "steering_rate")
HEADING_MODES = ("velocity", "body_slip")

METRICS_HEADER = ("step,episode,critic_loss,actor_loss,r_track,r_diff,"
                  "c_track,c_diff,executed_demo,lr,lateral_error,speed")


# ---------------------------------------------------------------------------
# Rewards


def step_reward(v: float, phi: float, d: float) -> float:
    """Per-step path-following reward: |v cos(phi)| - |v sin(phi)| - |v||d|."""
    return abs(v * math.cos(phi)) - abs(v * math.sin(phi)) - abs(v) * abs(d)


@dataclass(frozen=True)
class RewardBreakdown:
    """Parts and coefficients of one step's reward.

    In change-penalty mode the ``r_diff``/``c_diff`` slots carry the
    steering-change penalty instead of the imitation penalty.
    """

    r_track: float
    r_diff: float
    c_track: float
    c_diff: float
    total: float


def reward_change_penalty(r_track: float, steer: float, steer_prev: float,
                          c_track: float = 1.0, c_change: float = 1.0) -> RewardBreakdown:
    """Tracking reward minus a penalty on the squared steering change."""
    penalty = 0.5 * (steer - steer_prev) ** 2
    total = c_track * r_track - c_change * penalty
    return RewardBreakdown(r_track, penalty, c_track, c_change, total)


def reward_demo(r_track: float, a_demo: float, a: float,
                c_track: float = 1.0, c_diff: float = 1.0) -> RewardBreakdown:
    """Tracking reward minus a penalty on disagreement with the demonstrator.

    ``a_demo`` and ``a`` must live in the same action space (use
    :func:`demo_action_transform` first in steering-rate mode).
    """
    penalty = 0.5 * (a_demo - a) ** 2
    total = c_track * r_track - c_diff * penalty
    return RewardBreakdown(r_track, penalty, c_track, c_diff, total)


def sigmoid(x: float) -> float:
    """Numerically stable logistic function."""
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def adaptive_coefficients(r_track: float, r_diff: float) -> tuple[float, float]:
    """Sigmoid-of-reward coefficients, normalized to sum to one.

    ``r_diff`` is the non-negative penalty magnitude, so larger disagreement
    with the demonstrator raises the imitation weight.
    """
    s_track = sigmoid(r_track)
    s_diff = sigmoid(r_diff)
    total = s_track + s_diff
    return s_track / total, s_diff / total


def reward_demo_adaptive(r_track: float, a_demo: float, a: float) -> RewardBreakdown:
    """Imitation-penalized reward with adaptive, normalized coefficients."""
    penalty = 0.5 * (a_demo - a) ** 2
    c_track, c_diff = adaptive_coefficients(r_track, penalty)
    total = c_track * r_track - c_diff * penalty
    return RewardBreakdown(r_track, penalty, c_track, c_diff, total)


# ---------------------------------------------------------------------------
# Demonstration plumbing


def gate_action(a_agent: float, a_demo: float, p_action: float,
                rng: np.random.Generator) -> tuple[float, bool]:
    """Execute the demonstrator's action with probability ``p_action``.

    Returns (executed action, True if the demonstrator was used).
    """
    if not 0.0 <= p_action <= 1.0:
        raise ParameterError("p_action must be in [0, 1]")
    if rng.random() < p_action:
        return a_demo, True
    return a_agent, False


def demo_action_transform(a_demo_steer: float, prev_steer: float, dt: float) -> float:
    """Map a demonstrated steering angle into the steering-rate action space."""
    if dt <= 0.0:
        raise ParameterError("dt must be positive")
    rate = (a_demo_steer - prev_steer) / dt
    return min(STEER_RATE_LIMIT, max(-STEER_RATE_LIMIT, rate))


# ---------------------------------------------------------------------------
# Learning-rate schedule


@dataclass(frozen=True)
class LrSchedule:
    """Constant first half, then decaying triangular cycles.

    Cycle ``k`` interpolates linearly from ``eta_max0 * lam**k`` down to
    ``eta_min0 * lam**k`` at mid-cycle and back up, with
    ``eta_min0 = eta_max0 / 10``.
    """

    eta_max0: float
    lam: float = 0.9
    cycle_len: int = 32
    total_steps: int = 0

    def __post_init__(self):
        if not 0.0 < self.lam <= 1.0:
            raise ParameterError("lam must be in (0, 1]")
        if self.eta_max0 <= 0.0 or self.cycle_len < 2:
            raise ParameterError("need eta_max0 > 0 and cycle_len >= 2")

    @property
    def eta_min0(self) -> float:
        return self.eta_max0 * 0.1

    @property
    def half_split(self) -> int:
        return self.total_steps // 2

    def bounds(self, k_cycle: int) -> tuple[float, float]:
        decay = self.lam ** k_cycle
        return self.eta_min0 * decay, self.eta_max0 * decay


def cyclical_lr(step: int, schedule: LrSchedule) -> float:
    """Learning rate at a training step under the cyclical schedule."""
    if step < 0 or (schedule.total_steps and step >= schedule.total_steps):
        raise ParameterError("step outside schedule range")
    half = schedule.half_split
    if step < half:
        return schedule.eta_max0
    j = step - half
    k_cycle = j // schedule.cycle_len
    pos = j % schedule.cycle_len
    eta_min, eta_max = schedule.bounds(k_cycle)
    mid = schedule.cycle_len / 2.0
    if pos <= mid:
        return eta_max - (eta_max - eta_min) * (pos / mid)
    return eta_min + (eta_max - eta_min) * ((pos - mid) / mid)


# ---------------------------------------------------------------------------
# Observations


@dataclass(frozen=True)
class TrainConfig:
    reward_mode: str = "demo_adaptive"
    action_mode: str = "steering"
    heading_error_mode: str = "velocity"
    total_steps: int = 150_000
    episode_cap_steps: int = 2000
    corridor_limit: float = 1.5
    dt: float = 0.05
    n_waypoints: int = 10
    p_action: float = 0.3
    p_action_decay: bool = True        # linear decay to 0 over the first half
    c_track: float = 1.0               # fixed-coefficient modes only
    c_penalty: float = 1.0
    warmup_steps: int = 1000
    lr_cycle_lambda: float = 0.9
    lr_cycle_len: int = 32
    noise_kind: str = "ou"             # "ou" or "gaussian"
    noise_theta: float = 0.15
    noise_sigma: float = 0.2
    noise_sigma_final: float | None = None   # linear decay target, None = constant
    obs_scale_waypoints: float = 0.1
    obs_scale_speed: float = 0.05

    def __post_init__(self):
        if self.reward_mode not in REWARD_MODES:
            raise ConfigError(f"unknown reward mode: {self.reward_mode!r}")
        if self.action_mode not in ACTION_MODES:
            raise ConfigError(f"unknown action mode: {self.action_mode!r}")
        if self.heading_error_mode not in HEADING_MODES:
            raise ConfigError(f"unknown heading mode: {self.heading_error_mode!r}")
        if not 0.0 <= self.p_action <= 1.0:
            raise ConfigError("p_action must be in [0, 1]")
        if self.dt <= 0.0 or self.total_steps < 0 or self.n_waypoints < 1:
            raise ConfigError("dt must be positive, total_steps >= 0, n_waypoints >= 1")


def observation_size(cfg: TrainConfig) -> int:
    """Flattened observation length: 2 per waypoint + (v, d, phi) [+ steering]."""
    extra = 1 if cfg.action_mode == "steering_rate" else 0
    return 2 * cfg.n_waypoints + 3 + extra


def observation_scale(cfg: TrainConfig) -> np.ndarray:
    """Per-feature input scaling baked into the networks."""
    scale = np.ones(observation_size(cfg))
    scale[:2 * cfg.n_waypoints] = cfg.obs_scale_waypoints
    scale[2 * cfg.n_waypoints] = cfg.obs_scale_speed
    return scale


def heading_error(state: VehicleState, heading_ref: float, mode: str = "velocity") -> float:
    """Angle between the vehicle's velocity direction and the path tangent.

    ``body_slip`` mode returns the side-slip angle instead (the literal
    reading of "velocity vs heading"), which is insensitive to the path.
    """
    if mode == "body_slip":
        return state.side_slip
    return wrap_angle(state.yaw + state.side_slip - heading_ref)


def build_observation(state: VehicleState, track: Track, cfg: TrainConfig,
                      projection=None) -> np.ndarray:
    """Assemble the fixed-order observation vector.

    Order: n waypoints ahead in the vehicle frame (x1, y1, ..., xn, yn), then
    speed, signed lateral error, heading error, and (in steering-rate mode)
    the current normalized steering. All quantities are ego-relative.
    """
    if projection is None:
        projection = track.project((state.x, state.y))
    ahead = track.waypoints_ahead(projection, (state.x, state.y, state.yaw),
                                  cfg.n_waypoints)
    phi = heading_error(state, projection.heading_ref, cfg.heading_error_mode)
    tail = [state.speed, projection.lateral_error, phi]
    if cfg.action_mode == "steering_rate":
        tail.append(state.steering)
    obs = np.concatenate([ahead.reshape(-1), np.asarray(tail)])
    if not np.all(np.isfinite(obs)):
        raise TrainingFault("non-finite observation")
    return obs


def spawn_state(track: Track, speed: float = 0.0) -> VehicleState:
    """Vehicle placed on the first waypoint, aligned with the first segment."""
    p0 = track.waypoints[0]
    p1 = track.waypoints[1]
    yaw = math.atan2(p1[1] - p0[1], p1[0] - p0[0])
    return VehicleState(x=float(p0[0]), y=float(p0[1]), yaw=yaw, speed=speed)


# ---------------------------------------------------------------------------
# Training loop


@dataclass
class TrainSetup:
    """Everything a training run needs besides the seed and output paths."""

    track: Track
    plant: VehicleParams
    demo: MpcPidController
    longitudinal: LongitudinalControl
    ddpg: DdpgParams
    cfg: TrainConfig


@dataclass
class TrainResult:
    checkpoint_path: str
    metrics_path: str
    steps: int
    episodes: int
    final_episode_steps: int
    demo_faults: int = 0


def _fmt(x: float) -> str:
    return repr(float(x))


def _policy_meta(cfg: TrainConfig) -> dict:
    return {
        "action_mode": cfg.action_mode,
        "n_waypoints": cfg.n_waypoints,
        "heading_error_mode": cfg.heading_error_mode,
        "dt": repr(cfg.dt),
    }


def train(setup: TrainSetup, out_dir, seed: int = 0) -> TrainResult:
    """Run the full demonstration-guided training loop.

    Writes ``metrics.csv`` (one row per environment step) and
    ``checkpoint.txt`` under ``out_dir``; identical seeds reproduce both
    files byte for byte.
    """
    cfg = setup.cfg
    os.makedirs(out_dir, exist_ok=True)
    metrics_path = os.path.join(out_dir, "metrics.csv")
    checkpoint_path = os.path.join(out_dir, "checkpoint.txt")

    ss = np.random.SeedSequence(seed)
    rng_init, rng_noise, rng_gate, rng_sample = [
        np.random.default_rng(s) for s in ss.spawn(4)]

    obs_dim = observation_size(cfg)
    agent = DdpgAgent(obs_dim, setup.ddpg, rng=rng_init,
                      obs_scale=observation_scale(cfg))
    buffer = ReplayBuffer(setup.ddpg.buffer_capacity, obs_dim)
    if cfg.noise_kind == "ou":
        noise = OuNoise(cfg.noise_theta, cfg.noise_sigma, rng=rng_noise)
    else:
        noise = GaussianNoise(cfg.noise_sigma, rng=rng_noise)

    schedule = LrSchedule(eta_max0=1.0, lam=cfg.lr_cycle_lambda,
                          cycle_len=cfg.lr_cycle_len, total_steps=cfg.total_steps)
    half = max(1, cfg.total_steps // 2)

    rows = [METRICS_HEADER]
    demo = setup.demo
    lon = setup.longitudinal
    rate_mode = cfg.action_mode == "steering_rate"

    def reset_episode():
        demo.begin_episode()
        lon.begin_episode()
        noise.reset()
        state = spawn_state(setup.track, speed=lon.spawn_speed())
        proj = setup.track.project((state.x, state.y))
        obs = build_observation(state, setup.track, cfg, proj)
        return state, proj, obs

    state, proj, obs = reset_episode()
    episode = 0
    episode_steps = 0
    demo_faults = 0

    try:
        for step in range(cfg.total_steps):
            try:
                a_demo_steer = demo.act(state)
            except ControllerFault:
                demo_faults += 1
                a_demo_steer = 0.0
            if rate_mode:
                a_demo = demo_action_transform(a_demo_steer, state.steering, cfg.dt)
            else:
                a_demo = a_demo_steer

            if cfg.noise_sigma_final is not None and cfg.total_steps > 1:
                frac = step / (cfg.total_steps - 1)
                noise.sigma = cfg.noise_sigma + frac * (cfg.noise_sigma_final
                                                        - cfg.noise_sigma)
            a_agent = act_with_noise(agent.actor, obs, noise,
                                     setup.ddpg.a_low, setup.ddpg.a_high)

            p = cfg.p_action
            if cfg.p_action_decay:
                p = cfg.p_action * max(0.0, 1.0 - step / half)
            executed, used_demo = gate_action(a_agent, a_demo, p, rng_gate)

            throttle, brake = lon.command(state.speed, episode_steps * cfg.dt, cfg.dt)
            if rate_mode:
                cmd = ControlCommand(steering_rate=executed, throttle=throttle,
                                     brake=brake)
            else:
                cmd = ControlCommand(steering=executed, throttle=throttle, brake=brake)
            next_state = step_plant(state, cmd, setup.plant, cfg.dt)
            next_proj = setup.track.project((next_state.x, next_state.y),
                                            hint=proj.nearest_segment_index)

            d = next_proj.lateral_error
            phi = heading_error(next_state, next_proj.heading_ref,
                                cfg.heading_error_mode)
            r_track = step_reward(next_state.speed, phi, d)
            if cfg.reward_mode == "base":
                br = RewardBreakdown(r_track, 0.0, 1.0, 0.0, r_track)
            elif cfg.reward_mode == "change_penalty":
                br = reward_change_penalty(r_track, next_state.steering,
                                           state.steering, cfg.c_track, cfg.c_penalty)
            elif cfg.reward_mode == "demo_fixed":
                br = reward_demo(r_track, a_demo, executed, cfg.c_track, cfg.c_penalty)
            else:
                br = reward_demo_adaptive(r_track, a_demo, executed)

            corridor_hit = abs(d) > cfg.corridor_limit
            done_flag = 1.0 if corridor_hit else 0.0
            next_obs = build_observation(next_state, setup.track, cfg, next_proj)
            buffer.add(obs, executed, br.total, next_obs, done_flag)

            critic_loss = math.nan
            actor_loss = math.nan
            eta = cyclical_lr(step, schedule)
            if step >= cfg.warmup_steps and buffer.size >= setup.ddpg.batch_size:
                batch = buffer.sample(setup.ddpg.batch_size, rng_sample)
                critic_loss, actor_loss = agent.update(
                    batch, actor_lr=setup.ddpg.actor_lr * eta,
                    critic_lr=setup.ddpg.critic_lr * eta)

            rows.append(",".join([
                str(step), str(episode), _fmt(critic_loss), _fmt(actor_loss),
                _fmt(br.r_track), _fmt(br.r_diff), _fmt(br.c_track),
                _fmt(br.c_diff), "1" if used_demo else "0",
                _fmt(setup.ddpg.critic_lr * eta), _fmt(d),
                _fmt(next_state.speed)]))

            episode_steps += 1
            if corridor_hit or episode_steps >= cfg.episode_cap_steps:
                state, proj, obs = reset_episode()
                episode += 1
                episode_steps = 0
            else:
                state, proj, obs = next_state, next_proj, next_obs
    except TrainingFault:
        save_checkpoint(agent, os.path.join(out_dir, "checkpoint_fault.txt"),
                        meta=_policy_meta(cfg))
        with open(metrics_path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(rows) + "\n")
        raise

    save_checkpoint(agent, checkpoint_path, meta=_policy_meta(cfg))
    with open(metrics_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(rows) + "\n")
    return TrainResult(checkpoint_path=checkpoint_path, metrics_path=metrics_path,
                       steps=cfg.total_steps, episodes=episode,
                       final_episode_steps=episode_steps, demo_faults=demo_faults)


# ---------------------------------------------------------------------------
# Detached policy


class PolicyController:
    """Trained actor running alone: observation in, action out, no noise."""

    def __init__(self, agent: DdpgAgent, track: Track, cfg: TrainConfig):
        self.agent = agent
        self.track = track
        self.cfg = cfg
        self.action_mode = cfg.action_mode
        self._hint: int | None = None

    def begin_episode(self) -> None:
        self._hint = None

    def act(self, state: VehicleState) -> float:
        proj = self.track.project((state.x, state.y), hint=self._hint)
        self._hint = proj.nearest_segment_index
        obs = build_observation(state, self.track, self.cfg, proj)
        return self.agent.act(obs)


def detach_demo(checkpoint_path, track: Track,
                cfg: TrainConfig | None = None) -> PolicyController:
    """Standalone controller from a training checkpoint; no MPC dependency.

    The observation layout is restored from checkpoint metadata; passing a
    ``cfg`` whose observation size disagrees raises CheckpointError.
    """
    expected = observation_size(cfg) if cfg is not None else None
    agent, meta = load_checkpoint(checkpoint_path, expected_obs_dim=expected)
    if cfg is None:
        cfg = TrainConfig(
            action_mode=meta.get("action_mode", "steering"),
            n_waypoints=int(meta.get("n_waypoints", 10)),
            heading_error_mode=meta.get("heading_error_mode", "velocity"),
        )
    return PolicyController(agent, track, cfg)
