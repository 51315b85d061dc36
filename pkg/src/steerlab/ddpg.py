"""Self-contained deterministic actor-critic core.

Everything here is hand-rolled on numpy: two-hidden-layer ReLU networks with
manual backpropagation, a ring replay buffer, Ornstein-Uhlenbeck exploration
noise, Polyak-averaged target networks, and plain-text checkpoints. Training
is single-threaded and bit-reproducible under fixed seeds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CheckpointError, ConfigError, TrainingFault

CHECKPOINT_MAGIC = "steerlab-checkpoint 1"


@dataclass(frozen=True)
class DdpgParams:
    gamma: float = 0.99
    rho: float = 0.995
    batch_size: int = 64
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    a_low: float = -1.0
    a_high: float = 1.0
    hidden: tuple[int, int] = (64, 64)
    buffer_capacity: int = 100_000
    optimizer: str = "adam"    # "adam" or "momentum"

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError("gamma must be in [0, 1)")
        if not 0.0 <= self.rho <= 1.0:
            raise ConfigError("rho must be in [0, 1]")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.a_low >= self.a_high:
            raise ConfigError("a_low must be below a_high")
        if self.optimizer not in ("adam", "momentum"):
            raise ConfigError(f"unknown optimizer: {self.optimizer!r}")


class Mlp:
    """Fully connected net: scaled input, ReLU hidden layers, tanh or identity output.

    ``input_scale`` is a fixed per-feature multiplier applied before the first
    layer (it is part of the network definition and is checkpointed with it).
    A tanh output is scaled by ``out_scale`` to the action bound.
    """

    def __init__(self, sizes, weights, biases, out_act="identity",
                 out_scale=1.0, input_scale=None):
        self.sizes = list(sizes)
        self.weights = weights
        self.biases = biases
        self.out_act = out_act
        self.out_scale = float(out_scale)
        if input_scale is None:
            input_scale = np.ones(self.sizes[0])
        self.input_scale = np.asarray(input_scale, dtype=float)
        if self.input_scale.shape != (self.sizes[0],):
            raise ConfigError("input_scale length must match input size")
        for i, (w, b) in enumerate(zip(weights, biases)):
            if w.shape != (self.sizes[i], self.sizes[i + 1]) or b.shape != (self.sizes[i + 1],):
                raise ConfigError(f"layer {i} dimensions inconsistent with sizes")

    @property
    def parameters(self) -> list[np.ndarray]:
        return self.weights + self.biases

    def forward(self, x: np.ndarray) -> np.ndarray:
        y, _ = self.forward_cached(np.asarray(x, dtype=float))
        return y

    def forward_cached(self, x: np.ndarray):
        squeeze = x.ndim == 1
        h = np.atleast_2d(x) * self.input_scale
        activations = [h]
        pre = []
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            pre.append(z)
            if i < last:
                h = np.maximum(z, 0.0)
            elif self.out_act == "tanh":
                h = self.out_scale * np.tanh(z)
            else:
                h = z
            activations.append(h)
        out = h[0] if squeeze else h
        return out, (activations, pre)

    def backward(self, cache, d_out: np.ndarray):
        """Gradients of a scalar loss wrt parameters and the (unscaled) input.

        ``d_out`` is the loss gradient at the network output, shaped like the
        batched output. Returns (param_grads, d_input) with param_grads ordered
        like :attr:`parameters`.
        """
        activations, pre = cache
        d_out = np.atleast_2d(d_out)
        last = len(self.weights) - 1
        if self.out_act == "tanh":
            t = np.tanh(pre[last])
            dz = d_out * self.out_scale * (1.0 - t * t)
        else:
            dz = d_out
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        for i in range(last, -1, -1):
            grads_w[i] = activations[i].T @ dz
            grads_b[i] = dz.sum(axis=0)
            dh = dz @ self.weights[i].T
            if i > 0:
                dz = dh * (pre[i - 1] > 0.0)
        d_input = dh * self.input_scale
        return grads_w + grads_b, d_input


def init_mlp(sizes, rng: np.random.Generator, out_act="identity", out_scale=1.0,
             input_scale=None, final_init: float | None = None) -> Mlp:
    """Uniform fan-in initialization; optionally a tight final-layer range."""
    weights = []
    biases = []
    last = len(sizes) - 2
    for i in range(len(sizes) - 1):
        bound = 1.0 / math.sqrt(sizes[i])
        if i == last and final_init is not None:
            bound = final_init
        weights.append(rng.uniform(-bound, bound, size=(sizes[i], sizes[i + 1])))
        biases.append(rng.uniform(-bound, bound, size=(sizes[i + 1],)))
    return Mlp(sizes, weights, biases, out_act=out_act, out_scale=out_scale,
               input_scale=input_scale)


def clone_mlp(net: Mlp) -> Mlp:
    return Mlp(net.sizes, [w.copy() for w in net.weights],
               [b.copy() for b in net.biases], out_act=net.out_act,
               out_scale=net.out_scale, input_scale=net.input_scale.copy())


def actor_forward(net: Mlp, s: np.ndarray) -> np.ndarray:
    """Deterministic policy output; bounded by the tanh output scaling."""
    return net.forward(s)


def critic_forward(net: Mlp, s: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Q-value of (state, action); the action is concatenated at the input."""
    s = np.atleast_2d(np.asarray(s, dtype=float))
    a = np.atleast_2d(np.asarray(a, dtype=float))
    q = net.forward(np.concatenate([s, a], axis=1))
    return q[:, 0]


class OuNoise:
    """Discrete Ornstein-Uhlenbeck process: x += theta*(mu - x) + sigma*eta."""

    def __init__(self, theta: float = 0.15, sigma: float = 0.2, mu: float = 0.0,
                 rng: np.random.Generator | None = None):
        if not 0.0 <= theta <= 1.0 or sigma < 0.0:
            raise ConfigError("need theta in [0, 1] and sigma >= 0")
        self.theta = theta
        self.sigma = sigma
        self.mu = mu
        self.rng = rng if rng is not None else np.random.default_rng()
        self.x = mu

    def reset(self) -> None:
        self.x = self.mu

    def step(self) -> float:
        self.x = self.x + self.theta * (self.mu - self.x) + self.sigma * self.rng.standard_normal()
        return self.x


class GaussianNoise:
    """Uncorrelated alternative to OU noise (same interface)."""

    def __init__(self, sigma: float = 0.2, rng: np.random.Generator | None = None):
        self.sigma = sigma
        self.rng = rng if rng is not None else np.random.default_rng()

    def reset(self) -> None:
        pass

    def step(self) -> float:
        return self.sigma * self.rng.standard_normal()


def act_with_noise(net: Mlp, s: np.ndarray, noise, a_low: float, a_high: float) -> float:
    """Policy action plus one exploration-noise sample, clipped to bounds."""
    a = float(actor_forward(net, np.asarray(s, dtype=float))[0])
    return min(a_high, max(a_low, a + noise.step()))


class ReplayBuffer:
    """Fixed-capacity ring buffer of transitions with uniform sampling."""

    def __init__(self, capacity: int, obs_dim: int, action_dim: int = 1):
        if capacity < 1:
            raise ConfigError("capacity must be >= 1")
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.next_obs = np.zeros((capacity, obs_dim))
        self.done = np.zeros(capacity)
        self.count = 0

    @property
    def size(self) -> int:
        return min(self.count, self.capacity)

    def add(self, s, a, r, s2, d) -> None:
        i = self.count % self.capacity
        self.obs[i] = s
        self.actions[i] = a
        self.rewards[i] = r
        self.next_obs[i] = s2
        self.done[i] = d
        self.count += 1

    def sample(self, batch_size: int, rng: np.random.Generator):
        idx = rng.integers(0, self.size, size=batch_size)
        return (self.obs[idx], self.actions[idx], self.rewards[idx],
                self.next_obs[idx], self.done[idx])


def compute_targets(rewards, next_obs, done, actor_targ: Mlp, critic_targ: Mlp,
                    gamma: float) -> np.ndarray:
    """y = r + gamma * (1 - d) * Q_targ(s', mu_targ(s'))."""
    a2 = actor_targ.forward(np.atleast_2d(next_obs))
    q2 = critic_forward(critic_targ, next_obs, a2)
    return np.asarray(rewards) + gamma * (1.0 - np.asarray(done)) * q2


def critic_loss_and_grads(critic: Mlp, obs, actions, targets):
    """Mean-squared Bellman error and its gradients wrt critic parameters."""
    x = np.concatenate([np.atleast_2d(obs), np.atleast_2d(actions)], axis=1)
    q, cache = critic.forward_cached(x)
    err = q[:, 0] - np.asarray(targets)
    loss = float(np.mean(err * err))
    d_q = (2.0 * err / err.shape[0])[:, None]
    grads, _ = critic.backward(cache, d_q)
    return loss, grads


def actor_loss_and_grads(actor: Mlp, critic: Mlp, obs):
    """Negative mean Q under the current policy and its actor gradients."""
    obs = np.atleast_2d(obs)
    a, cache_a = actor.forward_cached(obs)
    x = np.concatenate([obs, a], axis=1)
    q, cache_q = critic.forward_cached(x)
    loss = -float(np.mean(q[:, 0]))
    d_q = np.full((obs.shape[0], 1), -1.0 / obs.shape[0])
    _, d_input = critic.backward(cache_q, d_q)
    d_a = d_input[:, obs.shape[1]:]
    grads, _ = actor.backward(cache_a, d_a)
    return loss, grads


class _Optimizer:
    def __init__(self, kind: str, params: list[np.ndarray]):
        self.kind = kind
        self.t = 0
        if kind == "momentum":
            self.momentum = 0.9
            self.state = [np.zeros_like(p) for p in params]
        else:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
            self.beta1, self.beta2, self.eps = 0.9, 0.999, 1e-8

    def step(self, params: list[np.ndarray], grads: list[np.ndarray], lr: float) -> None:
        self.t += 1
        if self.kind == "momentum":
            for p, g, vel in zip(params, grads, self.state):
                vel *= self.momentum
                vel += g
                p -= lr * vel
        else:
            c1 = 1.0 - self.beta1 ** self.t
            c2 = 1.0 - self.beta2 ** self.t
            for p, g, m, v in zip(params, grads, self.m, self.v):
                m *= self.beta1
                m += (1.0 - self.beta1) * g
                v *= self.beta2
                v += (1.0 - self.beta2) * g * g
                p -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def polyak_update(target: Mlp, source: Mlp, rho: float) -> None:
    """target <- rho * target + (1 - rho) * source, elementwise."""
    for pt, ps in zip(target.parameters, source.parameters):
        pt *= rho
        pt += (1.0 - rho) * ps


class DdpgAgent:
    """Actor/critic pair with target networks and per-update Polyak averaging."""

    def __init__(self, obs_dim: int, params: DdpgParams | None = None,
                 rng: np.random.Generator | None = None,
                 obs_scale: np.ndarray | None = None, action_dim: int = 1):
        self.params = params if params is not None else DdpgParams()
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        rng = rng if rng is not None else np.random.default_rng()
        h1, h2 = self.params.hidden
        bound = max(abs(self.params.a_low), abs(self.params.a_high))
        if obs_scale is None:
            obs_scale = np.ones(obs_dim)
        critic_scale = np.concatenate([obs_scale, np.ones(action_dim)])
        self.actor = init_mlp([obs_dim, h1, h2, action_dim], rng, out_act="tanh",
                              out_scale=bound, input_scale=obs_scale, final_init=3e-3)
        self.critic = init_mlp([obs_dim + action_dim, h1, h2, 1], rng,
                               input_scale=critic_scale)
        self.actor_targ = clone_mlp(self.actor)
        self.critic_targ = clone_mlp(self.critic)
        self.actor_opt = _Optimizer(self.params.optimizer, self.actor.parameters)
        self.critic_opt = _Optimizer(self.params.optimizer, self.critic.parameters)

    def act(self, obs: np.ndarray) -> float:
        return float(actor_forward(self.actor, np.asarray(obs, dtype=float))[0])

    def update(self, batch, actor_lr: float | None = None,
               critic_lr: float | None = None) -> tuple[float, float]:
        """One gradient step on each network from a sampled batch.

        Returns (critic_loss, actor_loss); actor_loss is the negative batch
        mean Q of the policy's own actions.
        """
        obs, actions, rewards, next_obs, done = batch
        a_lr = self.params.actor_lr if actor_lr is None else actor_lr
        c_lr = self.params.critic_lr if critic_lr is None else critic_lr

        y = compute_targets(rewards, next_obs, done, self.actor_targ,
                            self.critic_targ, self.params.gamma)
        critic_loss, c_grads = critic_loss_and_grads(self.critic, obs, actions, y)
        self.critic_opt.step(self.critic.parameters, c_grads, c_lr)

        actor_loss, a_grads = actor_loss_and_grads(self.actor, self.critic, obs)
        self.actor_opt.step(self.actor.parameters, a_grads, a_lr)

        polyak_update(self.actor_targ, self.actor, self.params.rho)
        polyak_update(self.critic_targ, self.critic, self.params.rho)

        if not (math.isfinite(critic_loss) and math.isfinite(actor_loss)):
            raise TrainingFault(
                f"non-finite loss (critic={critic_loss}, actor={actor_loss}); "
                f"batch rewards range [{np.min(rewards)}, {np.max(rewards)}]")
        return critic_loss, actor_loss


def _write_array(fh, name: str, arr: np.ndarray) -> None:
    flat = np.asarray(arr, dtype=float).reshape(-1)
    fh.write(name + " " + " ".join(repr(float(v)) for v in flat) + "\n")


class _Reader:
    def __init__(self, path):
        try:
            with open(path, "r", encoding="utf-8") as fh:
                self.lines = fh.read().splitlines()
        except OSError as exc:
            raise CheckpointError(f"cannot read checkpoint: {path}") from exc
        self.pos = 0

    def next_line(self) -> str:
        if self.pos >= len(self.lines):
            raise CheckpointError("checkpoint truncated")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def expect(self, tag: str) -> list[str]:
        line = self.next_line()
        parts = line.split()
        if not parts or parts[0] != tag:
            raise CheckpointError(f"expected '{tag}', found {line[:40]!r}")
        return parts[1:]

    def array(self, tag: str, shape) -> np.ndarray:
        vals = self.expect(tag)
        arr = np.array([float(v) for v in vals])
        if arr.size != int(np.prod(shape)):
            raise CheckpointError(
                f"{tag}: expected {int(np.prod(shape))} values, found {arr.size}")
        return arr.reshape(shape)


def _write_net(fh, name: str, net: Mlp) -> None:
    fh.write(f"net {name}\n")
    fh.write("sizes " + " ".join(str(s) for s in net.sizes) + "\n")
    fh.write(f"out_act {net.out_act}\n")
    fh.write(f"out_scale {net.out_scale!r}\n")
    _write_array(fh, "input_scale", net.input_scale)
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        _write_array(fh, f"W{i}", w)
        _write_array(fh, f"b{i}", b)


def _read_net(reader: _Reader, name: str) -> Mlp:
    tag = reader.expect("net")
    if tag != [name]:
        raise CheckpointError(f"expected net {name}, found {tag}")
    sizes = [int(s) for s in reader.expect("sizes")]
    out_act = reader.expect("out_act")[0]
    out_scale = float(reader.expect("out_scale")[0])
    input_scale = reader.array("input_scale", (sizes[0],))
    weights, biases = [], []
    for i in range(len(sizes) - 1):
        weights.append(reader.array(f"W{i}", (sizes[i], sizes[i + 1])))
        biases.append(reader.array(f"b{i}", (sizes[i + 1],)))
    return Mlp(sizes, weights, biases, out_act=out_act, out_scale=out_scale,
               input_scale=input_scale)


def _write_opt(fh, name: str, opt: _Optimizer) -> None:
    fh.write(f"opt {name} {opt.kind} {opt.t}\n")
    arrays = opt.state if opt.kind == "momentum" else opt.m + opt.v
    for i, arr in enumerate(arrays):
        _write_array(fh, f"o{i}", arr)


def _read_opt(reader: _Reader, name: str, params: list[np.ndarray]) -> _Optimizer:
    parts = reader.expect("opt")
    if parts[0] != name:
        raise CheckpointError(f"expected opt {name}, found {parts[0]}")
    opt = _Optimizer(parts[1], params)
    opt.t = int(parts[2])
    arrays = opt.state if opt.kind == "momentum" else opt.m + opt.v
    for i, arr in enumerate(arrays):
        arr[...] = reader.array(f"o{i}", arr.shape)
    return opt


def save_checkpoint(agent: DdpgAgent, path, meta: dict | None = None) -> None:
    """Serialize all four networks, optimizer state, and caller metadata as text."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(CHECKPOINT_MAGIC + "\n")
        meta = dict(meta or {})
        fh.write(f"meta {len(meta)}\n")
        for key in sorted(meta):
            fh.write(f"{key} {meta[key]}\n")
        fh.write(f"obs_dim {agent.obs_dim}\n")
        fh.write(f"action_dim {agent.action_dim}\n")
        p = agent.params
        fh.write(f"params {p.gamma!r} {p.rho!r} {p.batch_size} {p.actor_lr!r} "
                 f"{p.critic_lr!r} {p.a_low!r} {p.a_high!r} {p.hidden[0]} "
                 f"{p.hidden[1]} {p.buffer_capacity} {p.optimizer}\n")
        for name, net in (("actor", agent.actor), ("critic", agent.critic),
                          ("actor_target", agent.actor_targ),
                          ("critic_target", agent.critic_targ)):
            _write_net(fh, name, net)
        _write_opt(fh, "actor", agent.actor_opt)
        _write_opt(fh, "critic", agent.critic_opt)


def load_checkpoint(path, expected_obs_dim: int | None = None) -> tuple[DdpgAgent, dict]:
    """Rebuild an agent from :func:`save_checkpoint` output. Round-trip is exact."""
    reader = _Reader(path)
    if reader.next_line() != CHECKPOINT_MAGIC:
        raise CheckpointError("not a steerlab checkpoint (bad magic line)")
    n_meta = int(reader.expect("meta")[0])
    meta = {}
    for _ in range(n_meta):
        line = reader.next_line()
        key, _, value = line.partition(" ")
        meta[key] = value
    obs_dim = int(reader.expect("obs_dim")[0])
    action_dim = int(reader.expect("action_dim")[0])
    if expected_obs_dim is not None and obs_dim != expected_obs_dim:
        raise CheckpointError(
            f"observation size mismatch: expected {expected_obs_dim}, found {obs_dim}")
    pv = reader.expect("params")
    params = DdpgParams(gamma=float(pv[0]), rho=float(pv[1]), batch_size=int(pv[2]),
                        actor_lr=float(pv[3]), critic_lr=float(pv[4]),
                        a_low=float(pv[5]), a_high=float(pv[6]),
                        hidden=(int(pv[7]), int(pv[8])),
                        buffer_capacity=int(pv[9]), optimizer=pv[10])
    agent = DdpgAgent(obs_dim, params, rng=np.random.default_rng(0),
                      action_dim=action_dim)
    agent.actor = _read_net(reader, "actor")
    agent.critic = _read_net(reader, "critic")
    agent.actor_targ = _read_net(reader, "actor_target")
    agent.critic_targ = _read_net(reader, "critic_target")
    if agent.actor.sizes[0] != obs_dim:
        raise CheckpointError(
            f"actor input size {agent.actor.sizes[0]} does not match obs_dim {obs_dim}")
    agent.actor_opt = _read_opt(reader, "actor", agent.actor.parameters)
    agent.critic_opt = _read_opt(reader, "critic", agent.critic.parameters)
    return agent, meta
