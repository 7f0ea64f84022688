"""Deterministic policy-gradient learner on plain numpy arrays.

Actor (8 -> 64 -> 64 -> 4, tanh output) and critic (12 -> 64 -> 64 -> 1)
are small dense networks with hand-written forward and backward passes,
which keeps training bit-reproducible under a fixed seed and lets the
gradients be checked against finite differences.  Targets are soft-updated
copies; exploration is clipped Gaussian noise on the actor output.
"""

from __future__ import annotations

import io
import json
import math
import time
from dataclasses import dataclass

import numpy as np

from .rl_env import WaterAirEnv, direction_to_ctrl

PARAM_FORMAT = "hydrolink-params"
PARAM_VERSION = 1


class InsufficientData(Exception):
    """Replay buffer holds fewer transitions than one minibatch."""


class ParamFileError(Exception):
    """Malformed, truncated or wrong-version parameter file."""


def _relu(x):
    return np.maximum(x, 0.0)


class MlpNet:
    """Dense network with relu hidden layers and a configurable output."""

    def __init__(self, sizes, output="identity", rng=None, init_scale=1.0):
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        if output not in ("identity", "tanh"):
            raise ValueError("output must be 'identity' or 'tanh'")
        self.sizes = [int(s) for s in sizes]
        self.output = output
        self.weights = []
        self.biases = []
        rng = rng if rng is not None else np.random.default_rng(0)
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            bound = init_scale / math.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(rng.uniform(-bound, bound, size=fan_out))

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def forward(self, x: np.ndarray) -> np.ndarray:
        y, _ = self.forward_cached(x)
        return y

    def forward_cached(self, x: np.ndarray):
        """Forward pass keeping per-layer activations for backprop."""
        a = np.atleast_2d(np.asarray(x, dtype=float))
        if a.shape[1] != self.sizes[0]:
            raise ValueError(f"input width {a.shape[1]} != {self.sizes[0]}")
        acts = [a]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = acts[-1] @ w + b
            if i < self.n_layers - 1:
                z = _relu(z)
            elif self.output == "tanh":
                z = np.tanh(z)
            acts.append(z)
        out = acts[-1]
        if np.ndim(x) == 1:
            out = out[0]
        return out, acts

    def backward(self, acts, grad_out: np.ndarray):
        """Gradients of sum(grad_out * output) w.r.t. params and input.

        acts is the cache from forward_cached; grad_out has the output's
        batch shape.  Returns ([(dW, db) per layer], grad_input).
        """
        g = np.atleast_2d(np.asarray(grad_out, dtype=float)).copy()
        if self.output == "tanh":
            g = g * (1.0 - acts[-1] ** 2)
        grads = [None] * self.n_layers
        for i in range(self.n_layers - 1, -1, -1):
            grads[i] = (acts[i].T @ g, g.sum(axis=0))
            g = g @ self.weights[i].T
            if i > 0:
                g = g * (acts[i] > 0.0)
        return grads, g

    def params(self):
        for w, b in zip(self.weights, self.biases):
            yield w
            yield b

    def copy(self) -> "MlpNet":
        dup = MlpNet(self.sizes, output=self.output)
        dup.weights = [w.copy() for w in self.weights]
        dup.biases = [b.copy() for b in self.biases]
        return dup

    def soft_update_from(self, online: "MlpNet", tau: float):
        """theta_target <- tau * theta_online + (1 - tau) * theta_target."""
        for tgt, src in zip(self.params(), online.params()):
            tgt *= 1.0 - tau
            tgt += tau * src


@dataclass
class Transition:
    obs: np.ndarray
    action: np.ndarray
    reward: float
    next_obs: np.ndarray
    done: bool


class ReplayBuffer:
    """Fixed-capacity ring buffer over flat transition arrays."""

    def __init__(self, capacity: int = 1_000_000, obs_dim: int = 8, act_dim: int = 4):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)
        self.obs = np.zeros((self.capacity, obs_dim))
        self.action = np.zeros((self.capacity, act_dim))
        self.reward = np.zeros(self.capacity)
        self.next_obs = np.zeros((self.capacity, obs_dim))
        self.done = np.zeros(self.capacity, dtype=bool)
        self.size = 0
        self._head = 0

    def __len__(self) -> int:
        return self.size

    def push(self, tr: Transition):
        i = self._head
        self.obs[i] = tr.obs
        self.action[i] = tr.action
        self.reward[i] = tr.reward
        self.next_obs[i] = tr.next_obs
        self.done[i] = tr.done
        self._head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch: int, rng: np.random.Generator):
        if self.size < batch:
            raise InsufficientData(f"buffer holds {self.size} < batch {batch}")
        idx = rng.integers(0, self.size, size=batch)
        return (
            self.obs[idx],
            self.action[idx],
            self.reward[idx],
            self.next_obs[idx],
            self.done[idx],
        )


@dataclass
class Hyperparams:
    """Training knobs; the listed defaults are the benchmark settings."""

    discount: float = 0.2
    actor_lr: float = 1e-3
    critic_lr: float = 1e-4
    batch: int = 64
    noise_std: float = 0.2
    noise_decay: float = 0.995
    tau: float = 1e-3
    max_episodes: int = 500
    max_steps: int = 500
    buffer_capacity: int = 1_000_000
    warmup: int = 640
    guided_warmup: bool = True
    clone_steps: int = 2000
    optimizer: str = "sgd"
    actor_layers: tuple = (64, 64)
    critic_layers: tuple = (64, 64)
    intensity_scale: float = 100.0
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.discount <= 1.0):
            raise ValueError("discount must be in [0, 1]")
        if self.actor_lr <= 0 or self.critic_lr <= 0:
            raise ValueError("learning rates must be > 0")
        if self.batch < 1:
            raise ValueError("batch must be >= 1")
        if not (0.0 < self.tau <= 1.0):
            raise ValueError("tau must be in (0, 1]")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError("optimizer must be 'sgd' or 'adam'")


class _Adam:
    def __init__(self, net: MlpNet, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in net.params()]
        self.v = [np.zeros_like(p) for p in net.params()]
        self.t = 0

    def step(self, net: MlpNet, grads, sign: float):
        self.t += 1
        flat = []
        for dw, db in grads:
            flat.extend([dw, db])
        for p, g, m, v in zip(net.params(), flat, self.m, self.v):
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            mhat = m / (1 - self.beta1**self.t)
            vhat = v / (1 - self.beta2**self.t)
            p += sign * self.lr * mhat / (np.sqrt(vhat) + self.eps)


def _sgd_step(net: MlpNet, grads, lr: float, sign: float):
    flat = []
    for dw, db in grads:
        flat.extend([dw, db])
    for p, g in zip(net.params(), flat):
        p += sign * lr * g


class DdpgAgent:
    """Actor-critic pair with target copies and an observation scaler."""

    def __init__(self, hp: Hyperparams, obs_dim: int = 8, act_dim: int = 4, obs_scale=None):
        self.hp = hp
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.obs_scale = (
            np.ones(obs_dim) if obs_scale is None else np.asarray(obs_scale, dtype=float)
        )
        rng = np.random.default_rng(hp.seed)
        self.actor = MlpNet([obs_dim, *hp.actor_layers, act_dim], output="tanh", rng=rng)
        self.critic = MlpNet(
            [obs_dim + act_dim, *hp.critic_layers, 1], output="identity", rng=rng
        )
        self.target_actor = self.actor.copy()
        self.target_critic = self.critic.copy()
        self._opt_actor = _Adam(self.actor, hp.actor_lr) if hp.optimizer == "adam" else None
        self._opt_critic = (
            _Adam(self.critic, hp.critic_lr) if hp.optimizer == "adam" else None
        )

    def _scale(self, obs: np.ndarray) -> np.ndarray:
        return np.asarray(obs, dtype=float) * self.obs_scale

    def act(self, obs, noise_std: float = 0.0, rng: np.random.Generator | None = None):
        """Deterministic policy plus optional clipped Gaussian noise."""
        a = self.actor.forward(self._scale(np.asarray(obs, dtype=float)))
        if noise_std > 0.0:
            if rng is None:
                raise ValueError("rng required when noise_std > 0")
            a = a + rng.normal(0.0, noise_std, size=a.shape)
        return np.clip(a, -1.0, 1.0)

    def train_step(self, buffer: ReplayBuffer, rng: np.random.Generator):
        """One critic regression step and one actor ascent step.

        Returns (critic_loss, actor_objective) where the objective is the
        minibatch mean of Q(s, actor(s)).
        """
        hp = self.hp
        obs, act, rew, nobs, done = buffer.sample(hp.batch, rng)
        s = self._scale(obs)
        s2 = self._scale(nobs)

        a2 = self.target_actor.forward(s2)
        q2 = self.target_critic.forward(np.concatenate([s2, a2], axis=1))[:, 0]
        y = rew + hp.discount * (1.0 - done.astype(float)) * q2

        q, cache = self.critic.forward_cached(np.concatenate([s, act], axis=1))
        err = q[:, 0] - y
        critic_loss = float(np.mean(err**2))
        grad_q = (2.0 / hp.batch) * err[:, None]
        cgrads, _ = self.critic.backward(cache, grad_q)
        if self._opt_critic is not None:
            self._opt_critic.step(self.critic, cgrads, sign=-1.0)
        else:
            _sgd_step(self.critic, cgrads, hp.critic_lr, sign=-1.0)

        a_pred, acache = self.actor.forward_cached(s)
        qa, ccache = self.critic.forward_cached(np.concatenate([s, a_pred], axis=1))
        actor_objective = float(np.mean(qa[:, 0]))
        _, gin = self.critic.backward(ccache, np.full((hp.batch, 1), 1.0 / hp.batch))
        agrads, _ = self.actor.backward(acache, gin[:, self.obs_dim :])
        if self._opt_actor is not None:
            self._opt_actor.step(self.actor, agrads, sign=+1.0)
        else:
            _sgd_step(self.actor, agrads, hp.actor_lr, sign=+1.0)

        self.target_actor.soft_update_from(self.actor, hp.tau)
        self.target_critic.soft_update_from(self.critic, hp.tau)
        return critic_loss, actor_objective

    def clone_step(self, buffer: ReplayBuffer, rng: np.random.Generator) -> float:
        """Critic TD update plus actor regression onto the stored actions.

        Used while the behaviour policy is still the warm-up guide, so the
        actor starts the ascent phase from the guide instead of from its
        random initialisation.  Returns the clone loss.
        """
        hp = self.hp
        obs, act, rew, nobs, done = buffer.sample(hp.batch, rng)
        s = self._scale(obs)
        s2 = self._scale(nobs)

        a2 = self.target_actor.forward(s2)
        q2 = self.target_critic.forward(np.concatenate([s2, a2], axis=1))[:, 0]
        y = rew + hp.discount * (1.0 - done.astype(float)) * q2
        q, cache = self.critic.forward_cached(np.concatenate([s, act], axis=1))
        grad_q = (2.0 / hp.batch) * (q[:, 0] - y)[:, None]
        cgrads, _ = self.critic.backward(cache, grad_q)
        if self._opt_critic is not None:
            self._opt_critic.step(self.critic, cgrads, sign=-1.0)
        else:
            _sgd_step(self.critic, cgrads, hp.critic_lr, sign=-1.0)

        a_pred, acache = self.actor.forward_cached(s)
        diff = a_pred - act
        agrads, _ = self.actor.backward(acache, (2.0 / hp.batch) * diff)
        if self._opt_actor is not None:
            self._opt_actor.step(self.actor, agrads, sign=-1.0)
        else:
            _sgd_step(self.actor, agrads, hp.actor_lr, sign=-1.0)

        self.target_actor.soft_update_from(self.actor, hp.tau)
        self.target_critic.soft_update_from(self.critic, hp.tau)
        return float(np.mean(diff**2))

    # -- persistence --------------------------------------------------

    def _net_specs(self):
        return {
            "actor": self.actor,
            "critic": self.critic,
            "target_actor": self.target_actor,
            "target_critic": self.target_critic,
        }

    def save(self, path):
        """Header line (format, version, shapes) + little-endian float64
        parameters in row-major layer order."""
        nets = self._net_specs()
        header = {
            "format": PARAM_FORMAT,
            "version": PARAM_VERSION,
            "obs_scale": list(map(float, self.obs_scale)),
            "nets": {
                name: {"sizes": net.sizes, "output": net.output}
                for name, net in nets.items()
            },
        }
        buf = io.BytesIO()
        buf.write((json.dumps(header, sort_keys=True) + "\n").encode())
        for net in nets.values():
            for p in net.params():
                buf.write(np.ascontiguousarray(p, dtype="<f8").tobytes())
        data = buf.getvalue()
        with open(path, "wb") as fh:
            fh.write(data)

    @classmethod
    def load(cls, path, hp: Hyperparams | None = None) -> "DdpgAgent":
        with open(path, "rb") as fh:
            head_line = fh.readline()
            blob = fh.read()
        try:
            header = json.loads(head_line.decode())
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ParamFileError(f"unreadable header: {exc}") from None
        if header.get("format") != PARAM_FORMAT:
            raise ParamFileError(f"unexpected format {header.get('format')!r}")
        if header.get("version") != PARAM_VERSION:
            raise ParamFileError(
                f"unsupported version {header.get('version')} (want {PARAM_VERSION})"
            )
        hp = hp if hp is not None else Hyperparams()
        obs_scale = np.asarray(header["obs_scale"], dtype=float)
        actor_sizes = header["nets"]["actor"]["sizes"]
        agent = cls.__new__(cls)
        agent.hp = hp
        agent.obs_dim = actor_sizes[0]
        agent.act_dim = actor_sizes[-1]
        agent.obs_scale = obs_scale
        offset = 0
        for name in ("actor", "critic", "target_actor", "target_critic"):
            layout = header["nets"][name]
            net = MlpNet(layout["sizes"], output=layout["output"])
            for i, (fan_in, fan_out) in enumerate(zip(layout["sizes"][:-1], layout["sizes"][1:])):
                need = fan_in * fan_out * 8
                if offset + need > len(blob):
                    raise ParamFileError("truncated parameter file")
                net.weights[i] = (
                    np.frombuffer(blob, "<f8", count=fan_in * fan_out, offset=offset)
                    .reshape(fan_in, fan_out)
                    .copy()
                )
                offset += need
                need = fan_out * 8
                if offset + need > len(blob):
                    raise ParamFileError("truncated parameter file")
                net.biases[i] = np.frombuffer(blob, "<f8", count=fan_out, offset=offset).copy()
                offset += need
            setattr(agent, name, net)
        if offset != len(blob):
            raise ParamFileError("trailing bytes after parameters")
        agent._opt_actor = _Adam(agent.actor, hp.actor_lr) if hp.optimizer == "adam" else None
        agent._opt_critic = (
            _Adam(agent.critic, hp.critic_lr) if hp.optimizer == "adam" else None
        )
        return agent


@dataclass
class EpisodeRecord:
    episode: int
    ret: float
    steps: int
    wall_ms: float


def straight_facing_action(env: WaterAirEnv) -> np.ndarray:
    """Point both ends along the line between them (warm-up guide)."""
    scn = env.scenario
    tx_dir = scn.rx_pos - scn.tx_pos
    tx_dir = tx_dir / np.linalg.norm(tx_dir)
    return np.concatenate(
        [
            direction_to_ctrl(tx_dir, "up", env.config.theta_max),
            direction_to_ctrl(-tx_dir, "down", env.config.theta_max),
        ]
    )


def default_obs_scale(env: WaterAirEnv, hp: Hyperparams) -> np.ndarray:
    """Unit scaling for directions, configured gains for intensity/time."""
    horizon = env.config.max_steps * env.config.sample_time
    return np.array([1.0] * 6 + [hp.intensity_scale, 1.0 / horizon])


def train(env: WaterAirEnv, hp: Hyperparams, agent: DdpgAgent | None = None):
    """Standard training loop: noisy rollouts, replay, one update per step.

    Before the buffer reaches hp.warmup transitions no updates happen; with
    guided_warmup the warm-up behaviour policy is the straight-facing
    action plus exploration noise, which seeds the buffer with informative
    transitions on a reward landscape that is flat almost everywhere.
    Returns (agent, [EpisodeRecord...]); fully reproducible for a fixed
    hp.seed and environment seed policy.
    """
    if agent is None:
        agent = DdpgAgent(hp, obs_scale=default_obs_scale(env, hp))
    buffer = ReplayBuffer(hp.buffer_capacity)
    rng = np.random.default_rng(np.random.PCG64(hp.seed + 1))
    guide = straight_facing_action(env) if hp.guided_warmup else None
    clone_budget = hp.clone_steps if guide is not None else 0
    noise = hp.noise_std
    total_steps = 0
    log: list[EpisodeRecord] = []
    for ep in range(hp.max_episodes):
        t0 = time.perf_counter()
        obs, _ = env.reset()
        obs_arr = obs.to_array()
        ret = 0.0
        steps = 0
        for _ in range(env.config.max_steps):
            guiding = guide is not None and total_steps < hp.warmup + clone_budget
            if guiding:
                action = np.clip(
                    guide + rng.normal(0.0, max(noise, 0.05), size=4), -1.0, 1.0
                )
            else:
                action = agent.act(obs_arr, noise_std=noise, rng=rng)
            nobs, rew, done, _ = env.step(action)
            nobs_arr = nobs.to_array()
            buffer.push(Transition(obs_arr, action, rew, nobs_arr, done))
            if len(buffer) >= max(hp.warmup, hp.batch):
                if guiding:
                    agent.clone_step(buffer, rng)
                else:
                    agent.train_step(buffer, rng)
            obs_arr = nobs_arr
            ret += rew
            steps += 1
            total_steps += 1
            if done:
                break
        noise *= hp.noise_decay
        log.append(
            EpisodeRecord(
                episode=ep, ret=ret, steps=steps, wall_ms=(time.perf_counter() - t0) * 1e3
            )
        )
    return agent, log
