"""Shared actor and centralised critic built on flat parameter vectors."""

import numpy as np

from esp_marl.groups import ActionLayout
from esp_marl.nn.distributions import Categorical, DiagGaussian
from esp_marl.nn.layers import MLPArch, ParameterVector, init_mlp, mlp_forward, register_mlp


class Actor:
    """One policy network shared by every agent (parameter sharing).

    Discrete layouts produce per-action logits; continuous layouts produce a 2D
    mean and use a state-independent learned log-std (``pi.log_std``).
    """

    prefix = "pi"

    def __init__(self, obs_dim: int, act_layout: ActionLayout, hidden=(64, 64)):
        self.act_layout = act_layout
        self.discrete = act_layout.kind == "discrete"
        n_out = act_layout.n_actions if self.discrete else 2
        self.arch = MLPArch((obs_dim, *hidden, n_out))
        self.params = ParameterVector()
        register_mlp(self.params, self.prefix, self.arch)
        if not self.discrete:
            self.params.add("pi.log_std", (2,))

    def init(self, rng: np.random.Generator, out_gain=0.01, log_std=0.0):
        init_mlp(self.params, self.prefix, self.arch, rng, out_gain=out_gain)
        if not self.discrete:
            self.params.set("pi.log_std", np.full(2, log_std))
        return self

    def head(self, obs, flat=None):
        """Raw network output: logits, or the Gaussian mean."""
        return mlp_forward(self.params, obs, self.arch, self.prefix, flat)

    def distribution(self, obs, flat=None):
        out = self.head(obs, flat)
        if self.discrete:
            return Categorical(out)
        src = self.params.values if flat is None else flat
        return DiagGaussian(out, self.params.view("pi.log_std", src))

    def log_prob(self, obs, actions, flat=None) -> np.ndarray:
        return self.distribution(obs, flat).log_prob(actions).data


class Critic:
    """V(s) on the global state vector."""

    prefix = "vf"

    def __init__(self, state_dim: int, hidden=(64, 64)):
        self.arch = MLPArch((state_dim, *hidden, 1))
        self.params = ParameterVector()
        register_mlp(self.params, self.prefix, self.arch)

    def init(self, rng: np.random.Generator, out_gain=1.0):
        init_mlp(self.params, self.prefix, self.arch, rng, out_gain=out_gain)
        return self

    def value(self, states, flat=None):
        out = mlp_forward(self.params, states, self.arch, self.prefix, flat)
        return out[..., 0]
