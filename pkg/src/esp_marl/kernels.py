"""Hot numeric kernels with a numba path and a pure-numpy fallback.

``gae``, ``integrate``, ``count_contacts`` and ``min_distances`` dispatch to the
compiled version when :data:`esp_marl._accel.USE_NUMBA` is true. The numpy twins
are always importable as ``*_numpy`` and are what the benchmark compares against.
Both paths evaluate the same floating-point expressions in the same order.
"""

import numpy as np

from esp_marl._accel import USE_NUMBA, jit

# ---------------------------------------------------------------------------
# generalized advantage estimation


def gae_numpy(rewards, values, next_values, dones, truncs, gamma, lam):
    """Backward GAE recursion over a (T, E) block.

    ``next_values[t]`` is the critic at the true successor of step ``t`` (before
    any reset). ``dones`` cuts bootstrapping, ``truncs`` only cuts the recursion.
    """
    T = rewards.shape[0]
    adv = np.zeros_like(rewards)
    last = np.zeros(rewards.shape[1:], dtype=rewards.dtype)
    for t in range(T - 1, -1, -1):
        live = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_values[t] * live - values[t]
        last = delta + gamma * lam * live * (1.0 - truncs[t]) * last
        adv[t] = last
    return adv


def _gae_loop(rewards, values, next_values, dones, truncs, gamma, lam):
    T, E = rewards.shape
    adv = np.zeros((T, E))
    for e in range(E):
        last = 0.0
        for t in range(T - 1, -1, -1):
            live = 1.0 - dones[t, e]
            delta = rewards[t, e] + gamma * next_values[t, e] * live - values[t, e]
            last = delta + gamma * lam * live * (1.0 - truncs[t, e]) * last
            adv[t, e] = last
    return adv


_gae_jit = jit(_gae_loop)


def gae(rewards, values, next_values, dones, truncs, gamma, lam):
    rewards = np.ascontiguousarray(rewards, dtype=np.float64)
    values = np.ascontiguousarray(values, dtype=np.float64)
    next_values = np.ascontiguousarray(next_values, dtype=np.float64)
    dones = np.ascontiguousarray(dones, dtype=np.float64)
    truncs = np.ascontiguousarray(truncs, dtype=np.float64)
    squeeze = rewards.ndim == 1
    if squeeze:
        rewards, values, next_values, dones, truncs = (
            a[:, None] for a in (rewards, values, next_values, dones, truncs)
        )
    if USE_NUMBA:
        out = _gae_jit(rewards, values, next_values, dones, truncs, float(gamma), float(lam))
    else:
        out = gae_numpy(rewards, values, next_values, dones, truncs, gamma, lam)
    return out[:, 0] if squeeze else out


# ---------------------------------------------------------------------------
# particle integration: damping, speed cap, arena clamp


def integrate_numpy(pos, vel, acc, damping, dt, max_speed, half_width):
    """One semi-implicit Euler step for (E, m, 2) entity arrays.

    ``max_speed`` is a length-m array (entities may have different caps).
    Returns new ``(pos, vel)``; inputs are not modified.
    """
    vel = vel * (1.0 - damping) + acc * dt
    speed = np.sqrt(vel[..., 0] * vel[..., 0] + vel[..., 1] * vel[..., 1])
    over = speed > max_speed
    scale = np.where(over, max_speed / np.where(over, speed, 1.0), 1.0)
    vel = vel * scale[..., None]
    pos = np.clip(pos + vel * dt, -half_width, half_width)
    return pos, vel


def _integrate_loop(pos, vel, acc, damping, dt, max_speed, half_width):
    E, m, _ = pos.shape
    new_pos = np.empty_like(pos)
    new_vel = np.empty_like(vel)
    keep = 1.0 - damping
    for e in range(E):
        for i in range(m):
            vx = vel[e, i, 0] * keep + acc[e, i, 0] * dt
            vy = vel[e, i, 1] * keep + acc[e, i, 1] * dt
            speed = np.sqrt(vx * vx + vy * vy)
            if speed > max_speed[i]:
                s = max_speed[i] / speed
                vx = vx * s
                vy = vy * s
            px = pos[e, i, 0] + vx * dt
            py = pos[e, i, 1] + vy * dt
            new_pos[e, i, 0] = min(max(px, -half_width), half_width)
            new_pos[e, i, 1] = min(max(py, -half_width), half_width)
            new_vel[e, i, 0] = vx
            new_vel[e, i, 1] = vy
    return new_pos, new_vel


_integrate_jit = jit(_integrate_loop)


def integrate(pos, vel, acc, damping, dt, max_speed, half_width):
    max_speed = np.broadcast_to(np.asarray(max_speed, dtype=np.float64), pos.shape[1:2])
    if USE_NUMBA:
        return _integrate_jit(
            np.ascontiguousarray(pos, dtype=np.float64),
            np.ascontiguousarray(vel, dtype=np.float64),
            np.ascontiguousarray(acc, dtype=np.float64),
            float(damping),
            float(dt),
            np.ascontiguousarray(max_speed),
            float(half_width),
        )
    return integrate_numpy(pos, vel, acc, damping, dt, max_speed, half_width)


# ---------------------------------------------------------------------------
# pairwise contacts


def count_contacts_numpy(pos, threshold):
    """Number of unordered pairs closer than ``threshold``, per env. pos: (E, m, 2)."""
    d = pos[:, :, None, :] - pos[:, None, :, :]
    dist = np.sqrt(d[..., 0] * d[..., 0] + d[..., 1] * d[..., 1])
    m = pos.shape[1]
    iu = np.triu_indices(m, k=1)
    return (dist[:, iu[0], iu[1]] < threshold).sum(axis=1).astype(np.float64)


def _count_contacts_loop(pos, threshold):
    E, m, _ = pos.shape
    out = np.zeros(E)
    for e in range(E):
        c = 0
        for i in range(m):
            for j in range(i + 1, m):
                dx = pos[e, i, 0] - pos[e, j, 0]
                dy = pos[e, i, 1] - pos[e, j, 1]
                if np.sqrt(dx * dx + dy * dy) < threshold:
                    c += 1
        out[e] = c
    return out


_count_contacts_jit = jit(_count_contacts_loop)


def count_contacts(pos, threshold):
    if USE_NUMBA:
        return _count_contacts_jit(np.ascontiguousarray(pos, dtype=np.float64), float(threshold))
    return count_contacts_numpy(pos, threshold)


# ---------------------------------------------------------------------------
# nearest-source distances


def min_distances_numpy(sources, targets):
    """For each target, distance to the nearest source. (E,p,2),(E,q,2) -> (E,q)."""
    d = sources[:, :, None, :] - targets[:, None, :, :]
    dist = np.sqrt(d[..., 0] * d[..., 0] + d[..., 1] * d[..., 1])
    return dist.min(axis=1)


def _min_distances_loop(sources, targets):
    E, p, _ = sources.shape
    q = targets.shape[1]
    out = np.empty((E, q))
    for e in range(E):
        for j in range(q):
            best = np.inf
            for i in range(p):
                dx = sources[e, i, 0] - targets[e, j, 0]
                dy = sources[e, i, 1] - targets[e, j, 1]
                d = np.sqrt(dx * dx + dy * dy)
                if d < best:
                    best = d
            out[e, j] = best
    return out


_min_distances_jit = jit(_min_distances_loop)


def min_distances(sources, targets):
    if USE_NUMBA:
        return _min_distances_jit(
            np.ascontiguousarray(sources, dtype=np.float64),
            np.ascontiguousarray(targets, dtype=np.float64),
        )
    return min_distances_numpy(sources, targets)
