"""Symmetry augmentation and symmetry consistency losses on top of MAPPO.

Augmentation maps collected rollouts through (L_g, K_g) and re-evaluates the
behaviour policy and critic on the transformed data, so augmented samples enter
the clipped surrogate with a starting ratio of 1. The consistency losses tie
the policy at ``L_g[s]`` (pulled back through K_g) to the policy at ``s``, and
the critic at ``L_g[s]`` to the critic at ``s``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from esp_marl.errors import InvalidArgument
from esp_marl.groups import GroupElement, apply_action_transform, apply_state_transform
from esp_marl.markov_game import SymmetrySpec, Trajectory, transform_transition
from esp_marl.mappo import LearnerState, MetricsRecord, RolloutBatch, Samples, TrainerConfig, ppo_update
from esp_marl.nn.autograd import Tensor
from esp_marl.nn.distributions import Categorical, DiagGaussian
from esp_marl.nn.policy import Actor, Critic

KL_DIRECTIONS = ("as_written", "reversed")


@dataclass
class EspConfig:
    group: str = "C4"
    augmentation_elements: tuple = ("r90",)
    consistency_elements: tuple = ("r90",)
    c: float = 0.5
    kl_direction: str = "as_written"
    augment_enabled: bool = True
    loss_enabled: bool = True
    stop_original_branch: bool = False

    def __post_init__(self):
        self.augmentation_elements = tuple(self.augmentation_elements)
        self.consistency_elements = tuple(self.consistency_elements)
        if self.c < 0:
            raise InvalidArgument("consistency coefficient c must be >= 0")
        if self.kl_direction not in KL_DIRECTIONS:
            raise InvalidArgument(f"kl_direction must be one of {KL_DIRECTIONS}")
        if "e" in self.augmentation_elements or "e" in self.consistency_elements:
            raise InvalidArgument("element lists must not contain the identity")
        if self.augment_enabled and not self.augmentation_elements:
            raise InvalidArgument("augmentation enabled with no augmentation elements")
        if self.loss_enabled and not self.consistency_elements:
            raise InvalidArgument("consistency loss enabled with no consistency elements")

    @property
    def active_loss(self) -> bool:
        return self.loss_enabled and self.c > 0

    def resolve(self, spec: SymmetrySpec, names: Sequence[str]) -> list:
        return [spec.group.element(n) for n in names]


# ---------------------------------------------------------------------------
# augmentation


def augment_trajectory(traj: Trajectory, spec: SymmetrySpec, elements, actor: Actor = None) -> list:
    """One transformed copy of ``traj`` per element.

    With an ``actor`` the behaviour log-probs are recomputed as
    log pi(K_g a | L_g obs) under its current parameters; without one they are
    copied unchanged.
    """
    out = []
    for g in elements:
        new = Trajectory([transform_transition(tr, spec, g) for tr in traj.transitions])
        if actor is not None and new.transitions:
            obs = np.stack([tr.state.per_agent_obs for tr in new.transitions])
            acts = np.stack([np.asarray(tr.joint_action) for tr in new.transitions])
            logp = actor.log_prob(obs, acts)
            for tr, lp in zip(new.transitions, logp):
                tr.behavior_log_probs = lp
        out.append(new)
    return out


def augment_batch(batch: RolloutBatch, spec: SymmetrySpec, elements, actor: Actor, critic: Critic) -> list:
    """Array-level augmentation of a rollout batch; one batch per element.

    Value predictions are recomputed on the transformed states so GAE can run
    on each augmented batch independently.
    """
    out = []
    for g in elements:
        if batch.is_augmented:
            raise InvalidArgument("refusing to augment already-augmented data")
        obs = apply_state_transform(g, batch.obs, spec.obs_layout)
        states = apply_state_transform(g, batch.states, spec.global_layout)
        next_states = apply_state_transform(g, batch.next_states, spec.global_layout)
        actions = apply_action_transform(g, batch.actions, spec.act_layout)
        out.append(
            RolloutBatch(
                obs=obs,
                states=states,
                actions=actions,
                log_probs=actor.log_prob(obs, actions),
                rewards=batch.rewards.copy(),
                values=critic.value(states),
                next_states=next_states,
                next_values=critic.value(next_states),
                dones=batch.dones.copy(),
                truncs=batch.truncs.copy(),
                steps=batch.steps.copy(),
                element=g.id,
            )
        )
    return out


# ---------------------------------------------------------------------------
# consistency losses


def _pulled_back(actor: Actor, obs, spec: SymmetrySpec, g: GroupElement, flat):
    """Distribution over ``a`` given by pi(K_g a | L_g obs)."""
    obs_g = apply_state_transform(g, obs, spec.obs_layout)
    if actor.discrete:
        logits = actor.head(obs_g, flat)
        perm = spec.act_layout.permutation(g)
        if isinstance(logits, Tensor):
            return Categorical(logits.take(perm, axis=-1))
        return Categorical(np.take(logits, perm, axis=-1))
    # K_g a = R a, so the pulled-back mean is R^T mu(L_g obs); the std is shared.
    mean = actor.head(obs_g, flat) @ g.linear_rep
    src = actor.params.values if flat is None else flat
    return DiagGaussian(mean, actor.params.view("pi.log_std", src))


def _original(actor: Actor, obs, flat, stop_gradient: bool):
    if stop_gradient and flat is not None:
        flat = Tensor(flat.data)
    return actor.distribution(obs, flat)


def symmetry_policy_loss(actor: Actor, obs, spec: SymmetrySpec, g: GroupElement, flat=None,
                         kl_direction: str = "as_written", stop_original_branch: bool = False) -> Tensor:
    """Mean over rows and agents of KL[pi(K_g a | L_g s) || pi(a | s)].

    ``kl_direction="reversed"`` swaps the arguments. Gradients flow through
    both branches unless ``stop_original_branch`` is set.
    """
    if kl_direction not in KL_DIRECTIONS:
        raise InvalidArgument(f"kl_direction must be one of {KL_DIRECTIONS}")
    if g.is_identity:
        return Tensor(0.0)
    transformed = _pulled_back(actor, obs, spec, g, flat)
    original = _original(actor, obs, flat, stop_original_branch)
    if kl_direction == "as_written":
        kl = transformed.kl(original)
    else:
        kl = original.kl(transformed)
    # rounding can leave an exactly-equal pair at -1e-17; KL is never negative
    return kl.clip(0.0, np.inf).mean()


def symmetry_value_loss(critic: Critic, states, spec: SymmetrySpec, g: GroupElement, flat=None) -> Tensor:
    """Mean of (V(s) - V(L_g s))^2, differentiable through both evaluations."""
    if g.is_identity:
        return Tensor(0.0)
    v = critic.value(states, flat)
    v_g = critic.value(apply_state_transform(g, states, spec.global_layout), flat)
    d = v - v_g
    if isinstance(d, Tensor):
        return (d * d).mean()
    return Tensor(np.mean(d * d))


def ratio_diagnostic(actor: Actor, obs, actions, spec: SymmetrySpec, g: GroupElement,
                     behavior_log_probs=None, flat=None) -> dict:
    """Summary of pi_old(K_g a | L_g s) / pi_old(a | s) over a batch.

    This is the importance ratio naive augmentation would feed into the
    surrogate; values far from 1 show why it is not a sound estimate.
    """
    if behavior_log_probs is None:
        behavior_log_probs = actor.log_prob(obs, actions, flat)
    obs_g = apply_state_transform(g, obs, spec.obs_layout)
    act_g = apply_action_transform(g, actions, spec.act_layout)
    logp_g = actor.log_prob(obs_g, act_g, flat)
    ratio = np.exp(logp_g - np.asarray(behavior_log_probs)).reshape(-1)
    return {
        "min": float(ratio.min()),
        "max": float(ratio.max()),
        "mean": float(ratio.mean()),
        "p99": float(np.percentile(ratio, 99)),
    }


# ---------------------------------------------------------------------------
# update


@dataclass
class ConsistencyLoss:
    """Minibatch hook computing c * (S_pi + S_V) on the real rows."""

    spec: SymmetrySpec
    elements: list
    config: EspConfig
    actor: Actor
    critic: Critic
    rng: np.random.Generator
    chosen: list = field(default_factory=list)

    def __call__(self, mb: Samples, pflat: Tensor, vflat: Tensor):
        real = mb.take(mb.real) if not mb.real.all() else mb
        if len(real) == 0:
            return None, None, 0.0, 0.0
        g = self.elements[int(self.rng.integers(len(self.elements)))]
        self.chosen.append(g.name)
        s_pi = symmetry_policy_loss(self.actor, real.obs, self.spec, g, pflat, self.config.kl_direction,
                                    self.config.stop_original_branch)
        s_v = symmetry_value_loss(self.critic, real.states, self.spec, g, vflat)
        c = self.config.c
        return s_pi * c, s_v * c, float(s_pi.data), float(s_v.data)


def esp_update(learner: LearnerState, samples: Samples, cfg: TrainerConfig, esp: EspConfig,
               spec: SymmetrySpec, rng: np.random.Generator, loss_rng: np.random.Generator = None) -> MetricsRecord:
    """MAPPO update maximising J_MAPPO - c (S_pi + S_V).

    With the loss inactive (``c == 0`` or ``loss_enabled`` false) this is
    exactly :func:`ppo_update`. ``loss_rng`` draws the consistency element per
    minibatch; it defaults to a generator derived from ``rng``'s next output
    only when the loss is active, so the inactive path never touches ``rng``.
    """
    if not esp.active_loss:
        return ppo_update(learner, samples, cfg, rng)
    if loss_rng is None:
        loss_rng = np.random.default_rng(rng.integers(2**63))
    hook = ConsistencyLoss(spec, esp.resolve(spec, esp.consistency_elements), esp, learner.actor,
                           learner.critic, loss_rng)
    return ppo_update(learner, samples, cfg, rng, consistency=hook)
