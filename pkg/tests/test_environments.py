import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from esp_marl import kernels
from esp_marl.envs import (
    ENV_NAMES,
    make_cooperative_navigation,
    make_env,
    make_formation_change,
    make_predator_prey,
)
from esp_marl.envs.particle import Physics, join, split
from esp_marl.errors import InvalidArgument
from esp_marl.groups import apply_state_transform
from esp_marl.markov_game import reset, sample_reachable_pairs, step


def test_factory_names_and_errors():
    for name in ENV_NAMES:
        assert make_env(name).name == name
    with pytest.raises(InvalidArgument):
        make_env("starcraft")
    with pytest.raises(InvalidArgument):
        make_cooperative_navigation(1)
    with pytest.raises(InvalidArgument):
        make_predator_prey(1)
    with pytest.raises(InvalidArgument):
        make_formation_change(6)


def test_layout_sizes_match_observations():
    for name in ENV_NAMES:
        env = make_env(name)
        s = reset(env, 0)
        assert s.global_state.shape == (env.global_layout.size,)
        assert s.per_agent_obs.shape == (env.n_agents, env.obs_layout.size)


def test_coop_nav_covered_landmarks_cost_nothing():
    env = make_cooperative_navigation(3)
    land = np.array([[[-1.0, 0.0], [0.0, 1.0], [1.0, 0.0]]])
    state = join(land, np.zeros((1, 3, 2)), land)
    nxt, r, _ = env.step_batch(state, np.zeros((1, 3), dtype=int))
    assert r[0] == 0.0
    assert np.array_equal(nxt, state)


def test_coop_nav_collision_penalty():
    env = make_cooperative_navigation(3)
    pos = np.array([[[0.0, 0.0], [0.1, 0.0], [1.0, 1.0]]])
    state = join(pos, np.zeros((1, 3, 2)), pos)
    _, r, _ = env.step_batch(state, np.zeros((1, 3), dtype=int))
    assert r[0] == -1.0  # every landmark covered, one colliding pair
    assert env.risky(state)[0]


def test_predator_on_prey_gets_capture_bonus():
    env = make_predator_prey(3)
    pred = np.array([[[0.0, 0.0], [0.8, 0.8], [-0.8, 0.8]]])
    prey = np.array([[[0.0, 0.0]]])
    state = join(pred, np.zeros((1, 3, 2)), prey, np.zeros((1, 1, 2)))
    nxt, r, _ = env.step_batch(state, np.zeros((1, 3), dtype=int))
    p, _, q, _ = split(nxt, 3, 3, 1, 1)
    d = np.min(np.linalg.norm(p[0] - q[0, 0], axis=1))
    expected = 10.0 * (d < env.predator_radius + env.prey_radius) - 0.1 * d
    assert abs(r[0] - expected) < 1e-12
    assert r[0] >= 10.0 - 0.1 * (env.predator_radius + env.prey_radius)


def test_prey_flee_is_equivariant(rng):
    env = make_predator_prey(3)
    spec = env.symmetry_spec("D4")
    pred = rng.uniform(-1, 1, size=(50, 3, 2))
    prey = rng.uniform(-1, 1, size=(50, 1, 2))
    base = env.prey_acceleration(pred, prey)
    for g in spec.group:
        R = g.linear_rep
        moved = env.prey_acceleration(pred @ R.T, prey @ R.T)
        assert np.max(np.abs(moved - base @ R.T)) < 1e-12


def test_formation_at_goal_costs_nothing():
    env = make_formation_change(8)
    goals = -env.formation[None]
    state = join(goals, np.zeros((1, 8, 2)), goals)
    nxt, r, _ = env.step_batch(state, np.zeros((1, 8, 2)))
    assert np.array_equal(nxt, state)
    assert r[0] == env.arrival_bonus  # zero distance cost plus the all-arrived bonus


def test_formation_spawn_and_r180_swaps_goals():
    env = make_formation_change(8)
    spec = env.symmetry_spec("C4")
    s = env.initial_states(np.random.default_rng(0), 1)[0]
    pos, _, goals = split(s[None], 8, 8, 8)
    assert np.max(np.abs(pos[0] - env.formation)) <= env.jitter
    assert np.array_equal(goals[0], -env.formation)
    moved = apply_state_transform(spec.element("r180"), s, spec.global_layout)
    _, _, mgoals = split(moved[None], 8, 8, 8)
    assert np.array_equal(mgoals[0], env.formation)


def test_formation_risky_metric():
    env = make_formation_change(4)
    pos = np.array([[[0.5, 0.5], [0.6, 0.5], [-0.5, -0.5], [0.5, -0.5]],
                    [[0.5, 0.5], [-0.5, 0.5], [-0.5, -0.5], [0.5, -0.5]]])
    states = join(pos, np.zeros((2, 4, 2)), pos)
    assert env.risky(states).tolist() == [True, False]


@pytest.mark.parametrize("name", ENV_NAMES)
def test_speed_and_arena_limits_hold(name):
    env = make_env(name)
    states, actions = sample_reachable_pairs(env, 2000, seed=1)
    nxt, _, _ = env.step_batch(states, actions)
    n = env.n_agents
    pos, vel = split(nxt, n, n)
    assert np.all(np.abs(pos) <= env.physics.arena_half_width)
    speed = np.linalg.norm(vel, axis=-1)
    assert np.all(speed <= env.physics.max_speed * (1 + 1e-12))


@given(st.floats(0.01, 0.99), st.integers(0, 2**31 - 1))
def test_kinetic_energy_non_increasing_without_actions(damping, seed):
    rng = np.random.default_rng(seed)
    phys = Physics(damping=damping)
    pos = rng.uniform(-1, 1, size=(4, 3, 2))
    vel = rng.uniform(-1, 1, size=(4, 3, 2))
    ke = (vel ** 2).sum()
    for _ in range(10):
        pos, vel = kernels.integrate(pos, vel, np.zeros_like(vel), phys.damping, phys.dt, phys.max_speed,
                                     phys.arena_half_width)
        new = (vel ** 2).sum()
        assert new <= ke + 1e-15
        ke = new


@pytest.mark.parametrize("name", ENV_NAMES)
def test_observation_builder_commutes_with_group(name):
    env = make_env(name)
    spec = env.symmetry_spec("D4")
    states, _ = sample_reachable_pairs(env, 300, seed=2)
    obs = env.observe(states)
    for g in spec.group:
        lhs = env.observe(apply_state_transform(g, states, spec.global_layout))
        rhs = apply_state_transform(g, obs, spec.obs_layout)
        assert np.max(np.abs(lhs - rhs)) <= 1e-9


def test_coop_nav_step_matches_single_state_api():
    env = make_env("coop_nav")
    s = reset(env, 4)
    nxt, r, _ = step(env, s, [1, 3, 4])
    bn, br, _ = env.step_batch(s.global_state[None], np.array([[1, 3, 4]]))
    assert np.array_equal(nxt.global_state, bn[0]) and r == br[0]


def test_predator_prey_risky_metric():
    env = make_predator_prey(3)
    pos = np.array([[[0.0, 0.0], [0.1, 0.0], [0.9, 0.9]],
                    [[0.0, 0.0], [0.5, 0.0], [0.9, 0.9]]])
    prey = np.array([[[-0.8, 0.8]], [[-0.8, 0.8]]])
    states = join(pos, np.zeros((2, 3, 2)), prey, np.zeros((2, 1, 2)))
    assert env.risky(states).tolist() == [True, False]
