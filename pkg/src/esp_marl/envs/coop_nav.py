"""Cooperative navigation: n agents cover n landmarks without colliding."""

import numpy as np

from esp_marl import kernels
from esp_marl.envs.particle import Physics, flatten_batch, join, others, split, step_entities
from esp_marl.errors import InvalidArgument
from esp_marl.groups import ObservationLayout, discrete_moves, geo
from esp_marl.markov_game import Environment


class CooperativeNavigation(Environment):
    """Global state: agent positions, agent velocities, landmark positions.

    Team reward per step is ``-sum_l min_i |agent_i - landmark_l|`` minus
    ``collision_penalty`` per colliding agent pair.
    """

    name = "coop_nav"
    symmetry_groups = ("C4", "D4")

    def __init__(self, n_agents=3, *, physics=None, agent_radius=0.15, collision_penalty=1.0,
                 spawn_half_width=1.0, max_steps=25):
        if n_agents < 2:
            raise InvalidArgument("cooperative navigation needs at least 2 agents")
        self.n_agents = n = int(n_agents)
        self.physics = physics or Physics()
        self.agent_radius = agent_radius
        self.collision_penalty = collision_penalty
        self.spawn_half_width = spawn_half_width
        self.max_steps = max_steps
        self.act_layout = discrete_moves()
        self.global_layout = ObservationLayout(
            [geo(f"agent{i}.pos") for i in range(n)]
            + [geo(f"agent{i}.vel") for i in range(n)]
            + [geo(f"landmark{j}.pos") for j in range(n)]
        )
        self.obs_layout = ObservationLayout(
            [geo("self.vel"), geo("self.pos")]
            + [geo(f"landmark{j}.rel") for j in range(n)]
            + [geo(f"other{k}.rel") for k in range(n - 1)]
        )
        diag = 2.0 * np.sqrt(2.0) * self.physics.arena_half_width
        self.reward_bound = n * diag + collision_penalty * n * (n - 1) / 2

    def initial_states(self, rng, count):
        n, w = self.n_agents, self.spawn_half_width
        pos = rng.uniform(-w, w, size=(count, n, 2))
        land = rng.uniform(-w, w, size=(count, n, 2))
        return join(pos, np.zeros((count, n, 2)), land)

    def reward(self, pos, land):
        cover = kernels.min_distances(pos, land).sum(axis=1)
        hits = kernels.count_contacts(pos, 2.0 * self.agent_radius)
        return -cover - self.collision_penalty * hits

    def step_batch(self, states, actions):
        n = self.n_agents
        pos, vel, land = split(states, n, n, n)
        acc = self.act_layout.displacements[actions] * self.physics.accel_scale
        pos, vel = step_entities(pos, vel, acc, self.physics)
        # reward is scored on the post-move configuration, as in the particle-env convention
        r = self.reward(pos, land)
        return join(pos, vel, land), r, np.zeros(len(states), dtype=bool)

    def risky(self, states):
        """True where two agents overlap (the collision rate reported by evaluation)."""
        flat, lead = flatten_batch(states)
        (pos,) = split(flat, self.n_agents)
        return (kernels.count_contacts(pos, 2.0 * self.agent_radius) > 0).reshape(lead)

    def observe(self, states):
        flat, lead = flatten_batch(states)
        n = self.n_agents
        pos, vel, land = split(flat, n, n, n)
        E = flat.shape[0]
        rel_land = land[:, None, :, :] - pos[:, :, None, :]
        obs = np.concatenate(
            [vel, pos, rel_land.reshape(E, n, -1), others(pos).reshape(E, n, -1)], axis=2
        )
        return obs.reshape(*lead, n, self.obs_dim)
