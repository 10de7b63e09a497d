"""Predator-prey: learned predators chase one scripted, fleeing prey."""

import numpy as np

from esp_marl import kernels
from esp_marl.envs.particle import (
    Physics,
    unit,
    flatten_batch,
    join,
    others,
    split,
    step_entities,
)
from esp_marl.errors import InvalidArgument
from esp_marl.groups import ObservationLayout, discrete_moves, geo
from esp_marl.markov_game import Environment


class PredatorPrey(Environment):
    """Global state: predator positions, predator velocities, prey position, prey velocity.

    Reward per step: ``capture_bonus`` if any predator overlaps the prey, minus
    ``shaping * min_i |predator_i - prey|``.
    """

    name = "predator_prey"
    symmetry_groups = ("C4", "D4")

    def __init__(self, n_predators=3, *, physics=None, predator_radius=0.075, prey_radius=0.05,
                 prey_accel=4.0, prey_max_speed=1.3, capture_bonus=10.0, shaping=0.1, max_steps=25):
        if n_predators < 2:
            raise InvalidArgument("predator-prey needs at least 2 predators")
        self.n_agents = n = int(n_predators)
        self.physics = physics or Physics(accel_scale=3.0, max_speed=1.0, arena_half_width=1.0)
        self.predator_radius = predator_radius
        self.prey_radius = prey_radius
        self.prey_accel = prey_accel
        self.prey_max_speed = prey_max_speed
        self.capture_bonus = capture_bonus
        self.shaping = shaping
        self.max_steps = max_steps
        self.act_layout = discrete_moves()
        self.global_layout = ObservationLayout(
            [geo(f"pred{i}.pos") for i in range(n)]
            + [geo(f"pred{i}.vel") for i in range(n)]
            + [geo("prey.pos"), geo("prey.vel")]
        )
        self.obs_layout = ObservationLayout(
            [geo("self.vel"), geo("self.pos"), geo("prey.rel"), geo("prey.vel")]
            + [geo(f"other{k}.rel") for k in range(n - 1)]
        )
        diag = 2.0 * np.sqrt(2.0) * self.physics.arena_half_width
        self.reward_bound = capture_bonus + shaping * diag
        self._caps = np.array([self.physics.max_speed] * n + [prey_max_speed])

    def initial_states(self, rng, count):
        n, w = self.n_agents, self.physics.arena_half_width
        pos = rng.uniform(-w, w, size=(count, n, 2))
        prey = rng.uniform(-w, w, size=(count, 1, 2))
        return join(pos, np.zeros((count, n, 2)), prey, np.zeros((count, 1, 2)))

    def prey_acceleration(self, pred_pos, prey_pos):
        """Unit push directly away from the nearest predator, scaled by ``prey_accel``."""
        away = prey_pos - pred_pos  # (E, n, 2)
        dist = np.sqrt(away[..., 0] * away[..., 0] + away[..., 1] * away[..., 1])
        k = np.argmin(dist, axis=1)
        E = pred_pos.shape[0]
        d = away[np.arange(E), k]
        return unit(d)[:, None, :] * self.prey_accel

    def reward(self, pred_pos, prey_pos):
        nearest = kernels.min_distances(pred_pos, prey_pos)[:, 0]
        caught = nearest < self.predator_radius + self.prey_radius
        return self.capture_bonus * caught - self.shaping * nearest

    def step_batch(self, states, actions):
        n = self.n_agents
        pos, vel, prey, prey_vel = split(states, n, n, 1, 1)
        acc = self.act_layout.displacements[actions] * self.physics.accel_scale
        prey_acc = self.prey_acceleration(pos, prey)
        all_pos, all_vel = step_entities(
            np.concatenate([pos, prey], axis=1),
            np.concatenate([vel, prey_vel], axis=1),
            np.concatenate([acc, prey_acc], axis=1),
            self.physics,
            max_speed=self._caps,
        )
        pos, prey = all_pos[:, :n], all_pos[:, n:]
        vel, prey_vel = all_vel[:, :n], all_vel[:, n:]
        r = self.reward(pos, prey)
        return join(pos, vel, prey, prey_vel), r, np.zeros(len(states), dtype=bool)

    def risky(self, states):
        """True where two predators overlap (the collision rate reported by evaluation)."""
        flat, lead = flatten_batch(states)
        (pos,) = split(flat, self.n_agents)
        return (kernels.count_contacts(pos, 2.0 * self.predator_radius) > 0).reshape(lead)

    def observe(self, states):
        flat, lead = flatten_batch(states)
        n = self.n_agents
        pos, vel, prey, prey_vel = split(flat, n, n, 1, 1)
        E = flat.shape[0]
        obs = np.concatenate(
            [
                vel,
                pos,
                prey - pos,
                np.broadcast_to(prey_vel, (E, n, 2)),
                others(pos).reshape(E, n, -1),
            ],
            axis=2,
        )
        return obs.reshape(*lead, n, self.obs_dim)
