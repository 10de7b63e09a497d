import numpy as np
import pytest

from esp_marl.envs import make_env
from esp_marl.equivariant import regular_representation, symmetrize_actor, symmetrize_critic
from esp_marl.errors import InvalidArgument
from esp_marl.esp import ratio_diagnostic, symmetry_policy_loss, symmetry_value_loss
from esp_marl.groups import apply_action_transform, apply_state_transform, group_by_name
from esp_marl.nn.autograd import parameter
from esp_marl.nn.policy import Actor, Critic


def test_regular_representation_is_a_homomorphism():
    group = group_by_name("D4")
    for a in group.elements:
        for b in group.elements:
            lhs = regular_representation(group, group.compose(a, b), 2)
            rhs = regular_representation(group, a, 2) @ regular_representation(group, b, 2)
            assert np.array_equal(lhs, rhs)


@pytest.mark.parametrize("name", ["coop_nav", "predator_prey", "formation_change"])
@pytest.mark.parametrize("group", ["C4", "D4"])
def test_projected_networks_are_equivariant(name, group, rng):
    env = make_env(name)
    if group not in env.symmetry_groups:
        pytest.skip(f"{name} has no {group} symmetry")
    spec = env.symmetry_spec(group)
    actor = symmetrize_actor(Actor(env.obs_dim, env.act_layout, (16, 16)).init(rng, out_gain=1.0), spec)
    critic = symmetrize_critic(Critic(env.state_dim, (16, 16)).init(rng), spec)
    states = env.initial_states(rng, 20)
    obs = env.observe(states)
    for g in spec.group.non_identity:
        obs_g = apply_state_transform(g, obs, spec.obs_layout)
        head_g = actor.head(obs_g)
        expected = apply_action_transform(g, actor.head(obs), spec.act_layout, logits=True)
        assert np.max(np.abs(head_g - expected)) < 1e-12
        assert np.max(np.abs(critic.value(apply_state_transform(g, states, spec.global_layout))
                             - critic.value(states))) < 1e-12
        assert float(symmetry_policy_loss(actor, obs, spec, g).data) < 1e-9
        assert float(symmetry_value_loss(critic, states, spec, g).data) < 1e-9
        actions = actor.distribution(obs).sample(rng)
        diag = ratio_diagnostic(actor, obs, actions, spec, g)
        assert abs(diag["max"] - 1.0) < 1e-12 and abs(diag["min"] - 1.0) < 1e-12


def test_fixed_point_gradients_vanish(rng):
    env = make_env("coop_nav")
    spec = env.symmetry_spec("C4")
    actor = symmetrize_actor(Actor(env.obs_dim, env.act_layout, (8,)).init(rng, out_gain=1.0), spec)
    critic = symmetrize_critic(Critic(env.state_dim, (8,)).init(rng), spec)
    states = env.initial_states(rng, 10)
    g = spec.group.element("r90")
    pf, vf = parameter(actor.params.values), parameter(critic.params.values)
    symmetry_policy_loss(actor, env.observe(states), spec, g, pf).backward()
    symmetry_value_loss(critic, states, spec, g, vf).backward()
    assert np.max(np.abs(pf.grad)) < 1e-9 and np.max(np.abs(vf.grad)) < 1e-9


def test_projection_is_idempotent(rng):
    env = make_env("coop_nav")
    spec = env.symmetry_spec("C4")
    actor = symmetrize_actor(Actor(env.obs_dim, env.act_layout, (8,)).init(rng), spec)
    once = actor.params.values.copy()
    assert np.allclose(symmetrize_actor(actor, spec).params.values, once, atol=1e-14)


def test_hidden_width_must_divide_group_order(rng):
    env = make_env("coop_nav")
    with pytest.raises(InvalidArgument):
        symmetrize_critic(Critic(env.state_dim, (10,)).init(rng), env.symmetry_spec("C4"))
