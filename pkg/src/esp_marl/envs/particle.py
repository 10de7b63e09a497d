"""Shared particle-world physics and observation helpers."""

from dataclasses import dataclass

import numpy as np

from esp_marl import kernels


@dataclass(frozen=True)
class Physics:
    dt: float = 0.1
    damping: float = 0.25
    max_speed: float = 1.0
    accel_scale: float = 5.0
    arena_half_width: float = 1.5

    def __post_init__(self):
        if not 0.0 <= self.damping < 1.0:
            raise ValueError("damping must lie in [0, 1)")


def split(states, *sizes):
    """Cut (E, D) into (E, k, 2) blocks of the given entity counts."""
    out, i = [], 0
    E = states.shape[0]
    for k in sizes:
        out.append(states[:, i : i + 2 * k].reshape(E, k, 2))
        i += 2 * k
    return out


def join(*blocks):
    E = blocks[0].shape[0]
    return np.concatenate([b.reshape(E, -1) for b in blocks], axis=1)


def others(pos):
    """Relative positions of the other entities: (E, m, 2) -> (E, m, m-1, 2)."""
    E, m, _ = pos.shape
    rel = pos[:, None, :, :] - pos[:, :, None, :]  # rel[e, i, j] = pos_j - pos_i
    mask = ~np.eye(m, dtype=bool)
    return rel[:, mask].reshape(E, m, m - 1, 2)


def clip_norm(vec, limit=1.0):
    """Scale each 2-vector down to at most ``limit`` in norm."""
    n = np.sqrt(vec[..., 0] * vec[..., 0] + vec[..., 1] * vec[..., 1])
    over = n > limit
    scale = np.where(over, limit / np.where(over, n, 1.0), 1.0)
    return vec * scale[..., None]


def unit(vec):
    """Normalise 2-vectors; zero vectors stay zero."""
    n = np.sqrt(vec[..., 0] * vec[..., 0] + vec[..., 1] * vec[..., 1])
    safe = np.where(n > 0.0, n, 1.0)
    return vec / safe[..., None]


def step_entities(pos, vel, acc, phys: Physics, max_speed=None):
    cap = phys.max_speed if max_speed is None else max_speed
    return kernels.integrate(pos, vel, acc, phys.damping, phys.dt, cap, phys.arena_half_width)


def flatten_batch(states):
    """Allow observe() on (D,) or (..., D) inputs: returns (E, D) and the lead shape."""
    states = np.asarray(states, dtype=np.float64)
    lead = states.shape[:-1]
    return states.reshape(-1, states.shape[-1]), lead
