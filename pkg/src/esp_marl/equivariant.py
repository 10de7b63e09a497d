"""Exactly equivariant actors and invariant critics by weight projection.

Each hidden layer carries the regular representation of the group: a width
``|G| * k`` layer is ``|G|`` blocks of ``k`` units and ``g`` moves block ``h``
to block ``g h``. Every weight matrix ``W`` between representations
``rho_in`` and ``rho_out`` is replaced by its group average

    W <- (1/|G|) sum_g rho_out(g)^T W rho_in(g),

which commutes with the group action. Because tanh acts elementwise and the
hidden representations are permutations, the whole network becomes
equivariant: logits(L_g s) = K_g logits(s), mean(L_g s) = R_g mean(s) and
V(L_g s) = V(s), up to float rounding.

These are fixtures for the fixed-point properties of the consistency losses
and the ratio diagnostic. They are not used for training.
"""

from __future__ import annotations

import numpy as np

from esp_marl.errors import InvalidArgument
from esp_marl.groups import Group, GroupElement
from esp_marl.markov_game import SymmetrySpec
from esp_marl.nn.policy import Actor, Critic


def regular_representation(group: Group, g: GroupElement, channels: int) -> np.ndarray:
    """Block permutation sending block ``h`` to block ``g h`` (``channels`` units per block)."""
    n = len(group.elements)
    p = np.zeros((n, n))
    for h in group.elements:
        p[group.compose(g, h).id, h.id] = 1.0
    return np.kron(p, np.eye(channels))


def action_representation(spec: SymmetrySpec, g: GroupElement) -> np.ndarray:
    """Matrix acting on the actor head: a logit permutation or the planar rep."""
    layout = spec.act_layout
    if layout.kind == "discrete":
        perm = layout.permutation(g)
        m = np.zeros((layout.n_actions, layout.n_actions))
        m[perm, np.arange(layout.n_actions)] = 1.0
        return m
    return g.linear_rep.copy()


def _project(params, prefix: str, sizes, group: Group, rep_in, rep_out) -> None:
    n_layers = len(sizes) - 1
    order = len(group.elements)
    for width in sizes[1:-1]:
        if width % order:
            raise InvalidArgument(f"hidden width {width} is not divisible by |G| = {order}")

    def rep(k, g):
        if k == 0:
            return rep_in(g)
        return regular_representation(group, g, sizes[k] // order)

    for k in range(n_layers):
        W = params.view(f"{prefix}.l{k}.W").copy()
        b = params.view(f"{prefix}.l{k}.b").copy()
        W_sum = np.zeros_like(W)
        b_sum = np.zeros_like(b)
        for g in group.elements:
            r_in = rep(k, g)
            r_out = rep_out(g) if k == n_layers - 1 else rep(k + 1, g)
            W_sum += r_out.T @ W @ r_in
            b_sum += r_out.T @ b
        params.set(f"{prefix}.l{k}.W", W_sum / order)
        params.set(f"{prefix}.l{k}.b", b_sum / order)


def symmetrize_actor(actor: Actor, spec: SymmetrySpec) -> Actor:
    """Project ``actor`` in place onto the equivariant subspace; returns it."""
    _project(actor.params, actor.prefix, actor.arch.sizes, spec.group,
             spec.obs_layout.matrix, lambda g: action_representation(spec, g))
    if not actor.discrete:
        # an isotropic std is rotation and reflection invariant
        actor.params.set("pi.log_std", np.full(2, actor.params.view("pi.log_std").mean()))
    return actor


def symmetrize_critic(critic: Critic, spec: SymmetrySpec) -> Critic:
    """Project ``critic`` in place onto the invariant subspace; returns it."""
    _project(critic.params, critic.prefix, critic.arch.sizes, spec.group,
             spec.global_layout.matrix, lambda g: np.ones((1, 1)))
    return critic
