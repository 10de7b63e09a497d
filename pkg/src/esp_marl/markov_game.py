"""Cooperative Markov game interface, trajectory records, and symmetry checkers.

Environments are functional: :meth:`Environment.step` maps a state and a joint
action to a new state, so checkers can evaluate the dynamics on transformed
states directly. Every shipped environment is deterministic given its state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from esp_marl.errors import EpisodeFinished, InvalidArgument, UnsupportedCheck
from esp_marl.groups import (
    ActionLayout,
    Group,
    GroupElement,
    ObservationLayout,
    apply_action_transform,
    apply_state_transform,
)

REWARD_TOL = 1e-9
TRANSITION_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class EnvState:
    global_state: np.ndarray
    per_agent_obs: np.ndarray
    t: int = 0
    finished: bool = False

    def __eq__(self, other):
        if not isinstance(other, EnvState):
            return NotImplemented
        return (
            self.t == other.t
            and self.finished == other.finished
            and np.array_equal(self.global_state, other.global_state)
            and np.array_equal(self.per_agent_obs, other.per_agent_obs)
        )


@dataclass(frozen=True)
class SymmetrySpec:
    """A group attached to an environment through its three layouts."""

    group: Group
    obs_layout: ObservationLayout
    act_layout: ActionLayout
    global_layout: ObservationLayout

    def element(self, name: str) -> GroupElement:
        return self.group.element(name)

    def transform_state(self, g: GroupElement, state: EnvState) -> EnvState:
        return EnvState(
            apply_state_transform(g, state.global_state, self.global_layout),
            apply_state_transform(g, state.per_agent_obs, self.obs_layout),
            state.t,
            state.finished,
        )

    def transform_actions(self, g: GroupElement, joint_action):
        return apply_action_transform(g, joint_action, self.act_layout)


@dataclass
class Transition:
    state: EnvState
    joint_action: np.ndarray
    behavior_log_probs: np.ndarray
    reward: float
    next_state: EnvState
    done: bool
    truncated: bool = False
    is_augmented: bool = False
    source_element: Optional[int] = None


@dataclass
class Trajectory:
    transitions: list = field(default_factory=list)

    @property
    def episode_return(self) -> float:
        return float(sum(tr.reward for tr in self.transitions))

    def __len__(self):
        return len(self.transitions)

    def __iter__(self):
        return iter(self.transitions)


class Environment:
    """Base class for deterministic, batched, functional multi-agent tasks.

    Subclasses set the layouts and implement :meth:`initial_states`,
    :meth:`step_batch` and :meth:`observe`, all vectorised over a leading
    environment axis.
    """

    name = "environment"
    stochastic = False
    n_agents: int
    max_steps: int
    reward_bound: float
    obs_layout: ObservationLayout
    global_layout: ObservationLayout
    act_layout: ActionLayout
    symmetry_groups = ("C4",)

    @property
    def obs_dim(self) -> int:
        return self.obs_layout.size

    @property
    def state_dim(self) -> int:
        return self.global_layout.size

    @property
    def discrete(self) -> bool:
        return self.act_layout.kind == "discrete"

    def params(self) -> dict:
        return {"env": self.name, "n_agents": self.n_agents}

    def symmetry_spec(self, group="C4") -> SymmetrySpec:
        from esp_marl.groups import group_by_name

        if isinstance(group, str):
            group = group_by_name(group)
        return SymmetrySpec(group, self.obs_layout, self.act_layout, self.global_layout)

    # -- batched core, implemented by subclasses ---------------------------
    def initial_states(self, rng: np.random.Generator, count: int) -> np.ndarray:
        raise NotImplementedError

    def step_batch(self, states: np.ndarray, actions: np.ndarray):
        """Return ``(next_states, rewards, terminated)`` for (E, D) states."""
        raise NotImplementedError

    def observe(self, states: np.ndarray) -> np.ndarray:
        """(..., D) global states -> (..., n_agents, obs_dim) observations."""
        raise NotImplementedError

    # -- single-state API --------------------------------------------------
    def make_state(self, global_state, t: int = 0, finished: bool = False) -> EnvState:
        g = np.asarray(global_state, dtype=np.float64)
        return EnvState(g, self.observe(g), t, finished)

    def reset(self, seed: int) -> EnvState:
        rng = np.random.default_rng(seed)
        return self.make_state(self.initial_states(rng, 1)[0], 0)

    def check_actions(self, joint_action) -> np.ndarray:
        a = np.asarray(joint_action)
        if self.discrete:
            if a.shape[-1:] != (self.n_agents,):
                raise InvalidArgument(f"expected {self.n_agents} discrete actions, got shape {a.shape}")
            if not np.issubdtype(a.dtype, np.integer):
                if not np.all(np.isfinite(a)) or not np.all(a == np.round(a)):
                    raise InvalidArgument("discrete actions must be integers")
                a = a.astype(np.int64)
            if np.any((a < 0) | (a >= self.act_layout.n_actions)):
                raise InvalidArgument(f"action index out of range [0, {self.act_layout.n_actions})")
            return a
        a = np.asarray(a, dtype=np.float64)
        if a.shape[-2:] != (self.n_agents, 2):
            raise InvalidArgument(f"expected ({self.n_agents}, 2) continuous actions, got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise InvalidArgument("continuous actions must be finite")
        return a

    def step(self, state: EnvState, joint_action):
        """Advance one step. Returns ``(next_state, reward, done)``.

        ``done`` marks termination; hitting ``max_steps`` is a truncation and
        shows up as ``next_state.finished`` instead.
        """
        if state.finished or state.t >= self.max_steps:
            raise EpisodeFinished(f"{self.name}: episode already ended at t={state.t}")
        a = self.check_actions(joint_action)
        nxt, reward, term = self.step_batch(state.global_state[None], a[None])
        done = bool(term[0])
        t = state.t + 1
        return self.make_state(nxt[0], t, done or t >= self.max_steps), float(reward[0]), done

    def random_actions(self, rng: np.random.Generator, count: int) -> np.ndarray:
        if self.discrete:
            return rng.integers(0, self.act_layout.n_actions, size=(count, self.n_agents))
        return rng.uniform(-1.0, 1.0, size=(count, self.n_agents, 2))


def reset(env: Environment, seed: int) -> EnvState:
    return env.reset(seed)


def step(env: Environment, state: EnvState, joint_action):
    return env.step(state, joint_action)


# ---------------------------------------------------------------------------
# checkers


@dataclass
class InvarianceReport:
    check: str
    env: str
    group: str
    tolerance: float
    num_samples: int
    per_element: dict  # element name -> max deviation
    witness: Optional[dict] = None

    @property
    def max_deviation(self) -> float:
        return max(self.per_element.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tolerance

    def to_record(self) -> dict:
        return {
            "check": self.check,
            "env": self.env,
            "group": self.group,
            "passed": self.passed,
            "max_deviation": self.max_deviation,
            "tolerance": self.tolerance,
            "num_samples": self.num_samples,
            "per_element": self.per_element,
            "witness": self.witness,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)

    def to_text(self) -> str:
        head = "PASS" if self.passed else "FAIL"
        lines = [
            f"[{head}] {self.check} on {self.env} with {self.group}: "
            f"max deviation {self.max_deviation:.3e} (tol {self.tolerance:.0e}, {self.num_samples} samples)"
        ]
        for name, dev in self.per_element.items():
            lines.append(f"    {name:<10} {dev:.3e}")
        if self.witness is not None and not self.passed:
            lines.append(f"    witness: {json.dumps(self.witness)}")
        return "\n".join(lines)


def sample_reachable_pairs(env: Environment, num_samples: int, seed) -> tuple:
    """States visited by a uniform-random policy from random resets, with the
    random joint action taken there. Returns ``(states (N, D), actions)``."""
    if num_samples < 1:
        raise InvalidArgument("num_samples must be >= 1")
    rng = np.random.default_rng(seed)
    n_envs = min(num_samples, 32)
    states = env.initial_states(rng, n_envs)
    t = np.zeros(n_envs, dtype=np.int64)
    out_s, out_a = [], []
    collected = 0
    while collected < num_samples:
        actions = env.random_actions(rng, n_envs)
        out_s.append(states.copy())
        out_a.append(actions)
        collected += n_envs
        states, _, term = env.step_batch(states, actions)
        t += 1
        restart = (t >= env.max_steps) | term.astype(bool)
        if restart.any():
            states[restart] = env.initial_states(rng, int(restart.sum()))
            t[restart] = 0
    return np.concatenate(out_s)[:num_samples], np.concatenate(out_a)[:num_samples]


def _witness(env, spec, g, s, a, **extra):
    rec = {"element": g.name, "state": s.tolist(), "action": np.asarray(a).tolist()}
    rec.update({k: float(v) for k, v in extra.items()})
    return rec


def check_reward_invariance(env: Environment, spec: SymmetrySpec, num_samples: int = 1000, seed=0,
                            elements=None) -> InvarianceReport:
    """max |R(s,a) - R(L_g s, K_g a)| over sampled reachable pairs, per element."""
    states, actions = sample_reachable_pairs(env, num_samples, seed)
    _, r, _ = env.step_batch(states, actions)
    elements = list(spec.group.elements if elements is None else elements)
    per, witness, worst = {}, None, -1.0
    for g in elements:
        if g.is_identity:
            per[g.name] = 0.0
            continue
        gs = apply_state_transform(g, states, spec.global_layout)
        ga = apply_action_transform(g, actions, spec.act_layout)
        _, rg, _ = env.step_batch(gs, ga)
        dev = np.abs(r - rg)
        k = int(np.argmax(dev))
        per[g.name] = float(dev[k])
        if dev[k] > worst:
            worst = dev[k]
            witness = _witness(env, spec, g, states[k], actions[k], reward=r[k], transformed_reward=rg[k])
    return InvarianceReport("reward_invariance", env.name, spec.group.name, REWARD_TOL,
                            num_samples, per, witness)


def check_transition_equivariance(env: Environment, spec: SymmetrySpec, num_samples: int = 1000,
                                  seed=0, elements=None) -> InvarianceReport:
    """max ||L_g step(s,a) - step(L_g s, K_g a)||_inf over sampled pairs, per element."""
    if env.stochastic:
        raise UnsupportedCheck(
            f"{env.name} is stochastic; only next-state equivariance of deterministic dynamics is checked"
        )
    states, actions = sample_reachable_pairs(env, num_samples, seed)
    nxt, _, _ = env.step_batch(states, actions)
    elements = list(spec.group.elements if elements is None else elements)
    per, witness, worst = {}, None, -1.0
    for g in elements:
        if g.is_identity:
            per[g.name] = 0.0
            continue
        gs = apply_state_transform(g, states, spec.global_layout)
        ga = apply_action_transform(g, actions, spec.act_layout)
        nxt_g, _, _ = env.step_batch(gs, ga)
        dev = np.max(np.abs(apply_state_transform(g, nxt, spec.global_layout) - nxt_g), axis=1)
        k = int(np.argmax(dev))
        per[g.name] = float(dev[k])
        if dev[k] > worst:
            worst = dev[k]
            witness = _witness(env, spec, g, states[k], actions[k], deviation=dev[k])
    return InvarianceReport("transition_equivariance", env.name, spec.group.name, TRANSITION_TOL,
                            num_samples, per, witness)


def check_observation_consistency(env: Environment, spec: SymmetrySpec, num_samples: int = 200,
                                  seed=0) -> InvarianceReport:
    """max |observe(L_g s) - L_g observe(s)| per element."""
    states, _ = sample_reachable_pairs(env, num_samples, seed)
    obs = env.observe(states)
    per, witness, worst = {}, None, -1.0
    for g in spec.group.elements:
        a = env.observe(apply_state_transform(g, states, spec.global_layout))
        b = apply_state_transform(g, obs, spec.obs_layout)
        dev = np.max(np.abs(a - b).reshape(len(states), -1), axis=1)
        k = int(np.argmax(dev))
        per[g.name] = float(dev[k])
        if dev[k] > worst:
            worst = dev[k]
            witness = {"element": g.name, "state": states[k].tolist(), "deviation": float(dev[k])}
    return InvarianceReport("observation_consistency", env.name, spec.group.name, REWARD_TOL,
                            num_samples, per, witness)


def transform_transition(tr: Transition, spec: SymmetrySpec, g: GroupElement) -> Transition:
    """Copy of ``tr`` under (L_g, K_g); reward and done flags are unchanged."""
    return replace(
        tr,
        state=spec.transform_state(g, tr.state),
        joint_action=spec.transform_actions(g, tr.joint_action),
        next_state=spec.transform_state(g, tr.next_state),
        is_augmented=not g.is_identity,
        source_element=None if g.is_identity else g.id,
    )
