"""Multi-agent PPO with a shared actor and a centralised critic.

Rollouts are stored as (time, env, ...) arrays in a :class:`RolloutBatch`.
Advantages come from GAE on the shared team reward, so every agent at a given
(time, env) row uses the same advantage.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Callable, Optional

import numpy as np

from esp_marl import kernels
from esp_marl.errors import InvalidArgument, NonFiniteError
from esp_marl.markov_game import Environment, Trajectory, Transition
from esp_marl.nn.autograd import Tensor, minimum, parameter
from esp_marl.nn.optim import AdamState, adam_step
from esp_marl.nn.policy import Actor, Critic


@dataclass
class TrainerConfig:
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_eps: float = 0.2
    epochs: int = 10
    num_minibatches: int = 4
    actor_lr: float = 3e-4
    critic_lr: float = 3e-4
    entropy_coef: float = 0.01
    max_grad_norm: float = 0.5
    adam_eps: float = 1e-5
    n_envs: int = 8
    horizon: int = 200
    hidden: int = 64


@dataclass
class RolloutBatch:
    """Arrays shaped (T, E, ...). ``element`` is -1 for real data, else the group element id."""

    obs: np.ndarray
    states: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    rewards: np.ndarray
    values: np.ndarray
    next_states: np.ndarray
    next_values: np.ndarray
    dones: np.ndarray
    truncs: np.ndarray
    steps: np.ndarray
    element: int = -1
    advantages: Optional[np.ndarray] = None
    returns: Optional[np.ndarray] = None
    episode_returns: list = field(default_factory=list)

    @property
    def horizon(self) -> int:
        return self.rewards.shape[0]

    @property
    def n_envs(self) -> int:
        return self.rewards.shape[1]

    @property
    def is_augmented(self) -> bool:
        return self.element >= 0

    def __len__(self):
        return self.rewards.size

    def to_trajectories(self, env: Environment) -> list:
        """Split into per-episode :class:`Trajectory` records (one list per env, in time order)."""
        out = []
        for e in range(self.n_envs):
            traj = Trajectory()
            for t in range(self.horizon):
                state = _state(env, self.states[t, e], self.obs[t, e], int(self.steps[t, e]))
                nxt_step = int(self.steps[t, e]) + 1
                finished = bool(self.dones[t, e] or self.truncs[t, e])
                nxt = _state(env, self.next_states[t, e], env.observe(self.next_states[t, e]), nxt_step, finished)
                traj.transitions.append(
                    Transition(
                        state=state,
                        joint_action=self.actions[t, e].copy(),
                        behavior_log_probs=self.log_probs[t, e].copy(),
                        reward=float(self.rewards[t, e]),
                        next_state=nxt,
                        done=bool(self.dones[t, e]),
                        truncated=bool(self.truncs[t, e]),
                        is_augmented=self.is_augmented,
                        source_element=self.element if self.is_augmented else None,
                    )
                )
                if finished:
                    out.append(traj)
                    traj = Trajectory()
            if traj.transitions:
                out.append(traj)
        return out


def _state(env, g, obs, t, finished=False):
    from esp_marl.markov_game import EnvState

    return EnvState(np.array(g), np.array(obs), t, finished)


class RolloutCollector:
    """Steps ``n_envs`` copies of an environment in lockstep.

    Finished episodes are reset in place, so consecutive calls to
    :meth:`collect` continue where the previous call stopped.
    """

    def __init__(self, env: Environment, n_envs: int, rng: np.random.Generator):
        if n_envs < 1:
            raise InvalidArgument("n_envs must be >= 1")
        self.env = env
        self.n_envs = n_envs
        self.rng = rng
        self.states = env.initial_states(rng, n_envs)
        self.t = np.zeros(n_envs, dtype=np.int64)
        self.running = np.zeros(n_envs)

    def collect(self, actor: Actor, critic: Critic, horizon: int) -> RolloutBatch:
        if horizon < 1:
            raise InvalidArgument("horizon must be >= 1")
        env, E = self.env, self.n_envs
        buf = {k: [] for k in ("obs", "states", "actions", "log_probs", "rewards", "values",
                               "next_states", "dones", "truncs", "steps")}
        finished = []
        for _ in range(horizon):
            obs = env.observe(self.states)
            dist = actor.distribution(obs)
            actions = dist.sample(self.rng)
            logp = dist.log_prob(actions).data
            values = critic.value(self.states)
            try:
                nxt, rewards, term = env.step_batch(self.states, actions)
            except Exception as exc:  # pragma: no cover - defensive context
                raise RuntimeError(f"{env.name}: step failed during rollout collection") from exc
            self.t += 1
            term = term.astype(bool)
            trunc = (self.t >= env.max_steps) & ~term
            buf["obs"].append(obs)
            buf["states"].append(self.states)
            buf["actions"].append(actions)
            buf["log_probs"].append(logp)
            buf["rewards"].append(rewards)
            buf["values"].append(values)
            buf["next_states"].append(nxt)
            buf["dones"].append(term)
            buf["truncs"].append(trunc)
            buf["steps"].append(self.t - 1)
            self.running += rewards
            ended = term | trunc
            self.states = nxt.copy()
            if ended.any():
                finished.extend(self.running[ended].tolist())
                self.running[ended] = 0.0
                self.t[ended] = 0
                self.states[ended] = env.initial_states(self.rng, int(ended.sum()))
        arrays = {k: np.stack(v) for k, v in buf.items()}
        next_values = critic.value(arrays["next_states"])
        return RolloutBatch(
            obs=arrays["obs"],
            states=arrays["states"],
            actions=arrays["actions"],
            log_probs=arrays["log_probs"],
            rewards=arrays["rewards"],
            values=arrays["values"],
            next_states=arrays["next_states"],
            next_values=next_values,
            dones=arrays["dones"].astype(np.float64),
            truncs=arrays["truncs"].astype(np.float64),
            steps=arrays["steps"],
            episode_returns=finished,
        )


def collect_rollouts(actor: Actor, critic: Critic, env: Environment, horizon: int,
                     n_envs: int = 1, seed=0) -> RolloutBatch:
    """One-shot collection from fresh resets (see :class:`RolloutCollector` for streaming)."""
    return RolloutCollector(env, n_envs, np.random.default_rng(seed)).collect(actor, critic, horizon)


def compute_gae(batch: RolloutBatch, gamma: float, lam: float) -> RolloutBatch:
    """Fill ``advantages`` and ``returns`` (= advantages + values) in place and return the batch."""
    adv = kernels.gae(batch.rewards, batch.values, batch.next_values, batch.dones, batch.truncs, gamma, lam)
    batch.advantages = adv
    batch.returns = adv + batch.values
    return batch


# ---------------------------------------------------------------------------
# flattened training samples


@dataclass
class Samples:
    """Rows are (time, env) pairs; agent-level arrays keep an agent axis."""

    obs: np.ndarray  # (R, n, obs_dim)
    states: np.ndarray  # (R, D)
    actions: np.ndarray  # (R, n) or (R, n, 2)
    log_probs: np.ndarray  # (R, n)
    advantages: np.ndarray  # (R,)
    returns: np.ndarray  # (R,)
    real: np.ndarray  # (R,) bool

    def __len__(self):
        return len(self.returns)

    def take(self, idx) -> "Samples":
        return Samples(**{f.name: getattr(self, f.name)[idx] for f in fields(self)})


def flatten(batches) -> Samples:
    if isinstance(batches, RolloutBatch):
        batches = [batches]
    parts = []
    for b in batches:
        if b.advantages is None:
            raise InvalidArgument("compute_gae must run before flattening")
        R = b.horizon * b.n_envs
        parts.append(
            Samples(
                obs=b.obs.reshape(R, *b.obs.shape[2:]),
                states=b.states.reshape(R, -1),
                actions=b.actions.reshape(R, *b.actions.shape[2:]),
                log_probs=b.log_probs.reshape(R, -1),
                advantages=b.advantages.reshape(R),
                returns=b.returns.reshape(R),
                real=np.full(R, not b.is_augmented),
            )
        )
    return Samples(**{f.name: np.concatenate([getattr(p, f.name) for p in parts]) for f in fields(Samples)})


def normalize_advantages(samples: Samples) -> Samples:
    adv = samples.advantages
    return replace(samples, advantages=(adv - adv.mean()) / (adv.std() + 1e-8))


# ---------------------------------------------------------------------------
# losses


def surrogate_terms(actor: Actor, flat: Tensor, mb: Samples, clip_eps: float):
    """Clipped surrogate (to maximise), entropy, and diagnostics for a minibatch."""
    dist = actor.distribution(mb.obs, flat)
    logp = dist.log_prob(mb.actions)  # (R, n)
    ratio = (logp - mb.log_probs).exp()
    adv = mb.advantages[:, None]
    clipped = ratio.clip(1.0 - clip_eps, 1.0 + clip_eps)
    surr = minimum(ratio * adv, clipped * adv).mean()
    entropy = dist.entropy().mean()
    with np.errstate(over="ignore"):
        r = ratio.data
        info = {
            "kl_old_new": float(np.mean(mb.log_probs - logp.data)),
            "clip_fraction": float(np.mean(np.abs(r - 1.0) > clip_eps)),
        }
    return surr, entropy, info


def value_loss(critic: Critic, flat: Tensor, states, targets) -> Tensor:
    err = critic.value(states, flat) - targets
    return (err * err).mean()


@dataclass
class MetricsRecord:
    step: int = 0
    ep_reward_mean: float = float("nan")
    ep_reward_stderr: float = float("nan")
    policy_loss: float = 0.0
    value_loss: float = 0.0
    entropy: float = 0.0
    kl_old_new: float = 0.0
    clip_fraction: float = 0.0
    sym_policy_loss: float = 0.0
    sym_value_loss: float = 0.0
    ratio_max: float = float("nan")
    wall_time_s: float = 0.0
    actor_grad_norm: float = 0.0
    critic_grad_norm: float = 0.0

    CSV_FIELDS = ("step", "ep_reward_mean", "ep_reward_stderr", "policy_loss", "value_loss", "entropy",
                  "kl_old_new", "clip_fraction", "sym_policy_loss", "sym_value_loss", "ratio_max",
                  "wall_time_s")

    def csv_row(self) -> list:
        return [self.step if k == "step" else repr(float(getattr(self, k))) for k in self.CSV_FIELDS]


ConsistencyHook = Callable[[Samples, Tensor, Tensor], tuple]


@dataclass
class LearnerState:
    """Everything an update mutates: parameter vectors and their optimizer moments."""

    actor: Actor
    critic: Critic
    actor_opt: AdamState
    critic_opt: AdamState

    @classmethod
    def create(cls, actor: Actor, critic: Critic) -> "LearnerState":
        return cls(actor, critic, AdamState.zeros(len(actor.params)), AdamState.zeros(len(critic.params)))


def _finite(x: Tensor, what: str):
    if not np.isfinite(x.data).all():
        raise NonFiniteError(f"non-finite {what}; update aborted")


def ppo_update(learner: LearnerState, samples: Samples, cfg: TrainerConfig, rng: np.random.Generator,
               consistency: Optional[ConsistencyHook] = None) -> MetricsRecord:
    """Clipped-surrogate update of the shared actor and MSE update of the critic.

    ``consistency(minibatch, actor_flat, critic_flat)`` may return extra actor
    and critic loss terms (tensors, already scaled) plus their raw values; the
    ESP layer uses it for the symmetry consistency losses.
    """
    actor, critic = learner.actor, learner.critic
    samples = normalize_advantages(samples)
    R = len(samples)
    n_mb = max(1, min(cfg.num_minibatches, R))
    acc = {k: 0.0 for k in ("policy_loss", "value_loss", "entropy", "kl_old_new", "clip_fraction",
                            "sym_policy_loss", "sym_value_loss", "actor_grad_norm", "critic_grad_norm")}
    count = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(R)
        for idx in np.array_split(order, n_mb):
            mb = samples.take(idx)
            pflat = parameter(actor.params.values)
            vflat = parameter(critic.params.values)
            surr, ent, info = surrogate_terms(actor, pflat, mb, cfg.clip_eps)
            actor_loss = -surr - cfg.entropy_coef * ent
            critic_loss = value_loss(critic, vflat, mb.states, mb.returns)
            v_loss = float(critic_loss.data)
            if consistency is not None:
                extra_pi, extra_v, s_pi, s_v = consistency(mb, pflat, vflat)
                if extra_pi is not None:
                    actor_loss = actor_loss + extra_pi
                if extra_v is not None:
                    critic_loss = critic_loss + extra_v
                acc["sym_policy_loss"] += s_pi
                acc["sym_value_loss"] += s_v
            _finite(actor_loss, "actor loss")
            _finite(critic_loss, "critic loss")
            actor_loss.backward()
            critic_loss.backward()
            pgrad = pflat.grad if pflat.grad is not None else np.zeros(len(actor.params))
            vgrad = vflat.grad if vflat.grad is not None else np.zeros(len(critic.params))
            new_p, learner.actor_opt, pinfo = adam_step(
                actor.params.values, pgrad, learner.actor_opt, cfg.actor_lr, eps=cfg.adam_eps,
                max_grad_norm=cfg.max_grad_norm)
            new_v, learner.critic_opt, vinfo = adam_step(
                critic.params.values, vgrad, learner.critic_opt, cfg.critic_lr, eps=cfg.adam_eps,
                max_grad_norm=cfg.max_grad_norm)
            actor.params.values = new_p
            critic.params.values = new_v
            acc["policy_loss"] += -float(surr.data)
            acc["value_loss"] += v_loss
            acc["entropy"] += float(ent.data)
            acc["kl_old_new"] += info["kl_old_new"]
            acc["clip_fraction"] += info["clip_fraction"]
            acc["actor_grad_norm"] += pinfo.grad_norm
            acc["critic_grad_norm"] += vinfo.grad_norm
            count += 1
    return MetricsRecord(**{k: v / count for k, v in acc.items()})


def evaluate_policy(actor: Actor, env: Environment, episodes: int, seed, deterministic: bool = True) -> dict:
    """Run ``episodes`` full episodes in lockstep. Returns returns, stderr and risky-state rate."""
    if episodes < 1:
        raise InvalidArgument("episodes must be >= 1")
    rng = np.random.default_rng(seed)
    states = env.initial_states(rng, episodes)
    returns = np.zeros(episodes)
    risky = []
    for _ in range(env.max_steps):
        dist = actor.distribution(env.observe(states))
        actions = dist.mode() if deterministic else dist.sample(rng)
        states, r, term = env.step_batch(states, actions)
        returns += r
        if hasattr(env, "risky"):
            risky.append(env.risky(states))
        if term.any():  # no shipped task terminates early
            raise NotImplementedError("early termination during evaluation")
    out = {
        "mean_return": float(returns.mean()),
        "stderr": float(returns.std(ddof=1) / np.sqrt(episodes)) if episodes > 1 else 0.0,
        "returns": returns.tolist(),
    }
    out["risky_rate"] = float(np.mean(risky)) if risky else float("nan")
    return out
