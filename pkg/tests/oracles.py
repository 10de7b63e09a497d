"""Slow, obviously-correct reference implementations used by several tests."""

import numpy as np


def gae_direct(rewards, values, next_values, dones, truncs, gamma, lam):
    """O(T^2) GAE: A_t = sum_l (gamma lam)^l delta_{t+l}, cut at the first episode end."""
    T = len(rewards)
    delta = rewards + gamma * next_values * (1.0 - dones) - values
    adv = np.zeros(T)
    for t in range(T):
        weight = 1.0
        for k in range(t, T):
            adv[t] += weight * delta[k]
            if dones[k] or truncs[k]:
                break
            weight *= gamma * lam
    return adv


def random_trajectory(rng, T):
    rewards = rng.normal(size=T)
    values = rng.normal(size=T)
    next_values = np.append(values[1:], rng.normal())
    ends = rng.random(T) < 0.1
    dones = (ends & (rng.random(T) < 0.5)).astype(float)
    truncs = (ends & (dones == 0)).astype(float)
    # after an end the successor value belongs to the next episode, not the reset state
    next_values = np.where(ends, rng.normal(size=T), next_values)
    return rewards, values, next_values, dones, truncs
