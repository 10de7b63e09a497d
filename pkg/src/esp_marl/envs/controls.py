"""Deliberately asymmetric variants of cooperative navigation.

They exist so the invariance checkers can be shown to fail, with a witness,
when a task is not a symmetric Markov game.
"""

import numpy as np

from esp_marl import kernels
from esp_marl.envs.coop_nav import CooperativeNavigation
from esp_marl.envs.particle import join, split, step_entities


class AnchoredNavigation(CooperativeNavigation):
    """Reward pulls every agent toward a fixed world point, so rotating the
    state changes the reward. Dynamics are untouched and stay equivariant."""

    name = "control_anchored"

    def __init__(self, n_agents=3, anchor=(1.0, 0.5), **kw):
        super().__init__(n_agents, **kw)
        self.anchor = np.asarray(anchor, dtype=np.float64)

    def reward(self, pos, land):
        return -np.linalg.norm(pos - self.anchor, axis=-1).sum(axis=1)


class WindyNavigation(CooperativeNavigation):
    """A constant wind along +x is added to every agent's acceleration, so the
    dynamics are not rotation equivariant."""

    name = "control_windy"

    def __init__(self, n_agents=3, wind=(1.5, 0.0), **kw):
        super().__init__(n_agents, **kw)
        self.wind = np.asarray(wind, dtype=np.float64)

    def step_batch(self, states, actions):
        n = self.n_agents
        pos, vel, land = split(states, n, n, n)
        acc = self.act_layout.displacements[actions] * self.physics.accel_scale + self.wind
        pos, vel = step_entities(pos, vel, acc, self.physics)
        cover = kernels.min_distances(pos, land).sum(axis=1)
        return join(pos, vel, land), -cover, np.zeros(len(states), dtype=bool)
