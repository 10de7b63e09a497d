"""Formation change on a 2D kinematic plane.

Robots start on the perimeter of a square and must swap to the antipodal point
while avoiding each other and a circular obstacle at the centre.
"""

import numpy as np

from esp_marl import kernels
from esp_marl.envs.particle import (
    Physics,
    clip_norm,
    flatten_batch,
    join,
    others,
    split,
    step_entities,
)
from esp_marl.errors import InvalidArgument
from esp_marl.groups import ObservationLayout, continuous_2d, geo
from esp_marl.markov_game import Environment


def square_formation(n_robots, half_side):
    """Counter-clockwise spawn points: corners for 4, corners plus edge midpoints for 8."""
    h = half_side
    if n_robots == 4:
        pts = [(h, h), (-h, h), (-h, -h), (h, -h)]
    elif n_robots == 8:
        pts = [(h, 0), (h, h), (0, h), (-h, h), (-h, 0), (-h, -h), (0, -h), (h, -h)]
    else:
        raise InvalidArgument(f"formation change supports 4 or 8 robots, got {n_robots}")
    return np.array(pts, dtype=np.float64)


class FormationChange(Environment):
    """Global state: robot positions, robot velocities, goal positions.

    Reward per step: ``-sum_i |robot_i - goal_i|``, minus ``collision_penalty``
    per robot-robot or robot-obstacle contact, plus ``arrival_bonus`` when every
    robot is inside ``goal_radius``. Actions are 2D accelerations, norm-clipped to 1.
    """

    name = "formation_change"
    symmetry_groups = ("C4", "D4")

    def __init__(self, n_robots=8, *, physics=None, half_side=0.8, jitter=0.05, robot_radius=0.08,
                 obstacle_radius=0.2, goal_radius=0.1, collision_penalty=1.0, arrival_bonus=5.0,
                 risky_distance=0.2, max_steps=50):
        self.formation = square_formation(n_robots, half_side)
        self.n_agents = n = int(n_robots)
        self.physics = physics or Physics(accel_scale=2.0, max_speed=0.8, arena_half_width=1.2)
        self.jitter = jitter
        self.robot_radius = robot_radius
        self.obstacle_radius = obstacle_radius
        self.goal_radius = goal_radius
        self.collision_penalty = collision_penalty
        self.arrival_bonus = arrival_bonus
        self.risky_distance = risky_distance
        self.max_steps = max_steps
        self.act_layout = continuous_2d()
        self.global_layout = ObservationLayout(
            [geo(f"robot{i}.pos") for i in range(n)]
            + [geo(f"robot{i}.vel") for i in range(n)]
            + [geo(f"robot{i}.goal") for i in range(n)]
        )
        self.obs_layout = ObservationLayout(
            [geo("self.vel"), geo("self.pos"), geo("goal.rel"), geo("obstacle.rel")]
            + [geo(f"other{k}.rel") for k in range(n - 1)]
        )
        diag = 2.0 * np.sqrt(2.0) * self.physics.arena_half_width
        self.reward_bound = n * diag + collision_penalty * (n * (n - 1) / 2 + n) + arrival_bonus

    def initial_states(self, rng, count):
        n = self.n_agents
        pos = self.formation[None] + rng.uniform(-self.jitter, self.jitter, size=(count, n, 2))
        goals = np.broadcast_to(-self.formation[None], (count, n, 2))
        return join(pos, np.zeros((count, n, 2)), goals)

    def contacts(self, pos):
        pair = kernels.count_contacts(pos, 2.0 * self.robot_radius)
        r = np.sqrt(pos[..., 0] * pos[..., 0] + pos[..., 1] * pos[..., 1])
        obstacle = (r < self.obstacle_radius + self.robot_radius).sum(axis=1)
        return pair + obstacle

    def reward(self, pos, goals):
        d = pos - goals
        dist = np.sqrt(d[..., 0] * d[..., 0] + d[..., 1] * d[..., 1])
        arrived = np.all(dist < self.goal_radius, axis=1)
        return -dist.sum(axis=1) - self.collision_penalty * self.contacts(pos) + self.arrival_bonus * arrived

    def step_batch(self, states, actions):
        n = self.n_agents
        pos, vel, goals = split(states, n, n, n)
        acc = clip_norm(np.asarray(actions, dtype=np.float64), 1.0) * self.physics.accel_scale
        pos, vel = step_entities(pos, vel, acc, self.physics)
        r = self.reward(pos, goals)
        return join(pos, vel, goals), r, np.zeros(len(states), dtype=bool)

    def risky(self, states):
        """True where some pair of robots is closer than ``risky_distance``."""
        flat, lead = flatten_batch(states)
        (pos,) = split(flat, self.n_agents)
        return (kernels.count_contacts(pos, self.risky_distance) > 0).reshape(lead)

    def observe(self, states):
        flat, lead = flatten_batch(states)
        n = self.n_agents
        pos, vel, goals = split(flat, n, n, n)
        E = flat.shape[0]
        obs = np.concatenate(
            [vel, pos, goals - pos, -pos, others(pos).reshape(E, n, -1)], axis=2
        )
        return obs.reshape(*lead, n, self.obs_dim)
