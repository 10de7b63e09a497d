import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from esp_marl import kernels
from esp_marl._accel import HAVE_NUMBA
from oracles import gae_direct, random_trajectory

needs_numba = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")


def test_gae_matches_direct_sum(rng):
    for _ in range(200):
        T = int(rng.integers(1, 60))
        traj = random_trajectory(rng, T)
        gamma, lam = rng.uniform(0.8, 1.0), rng.uniform(0.0, 1.0)
        got = kernels.gae(*traj, gamma, lam)
        assert np.max(np.abs(got - gae_direct(*traj, gamma, lam))) < 1e-10


def test_gae_lambda_zero_is_one_step_td():
    r = np.array([1.0, 2.0, 3.0])
    v = np.array([0.5, 0.5, 0.5])
    nv = np.array([1.0, 1.0, 1.0])
    z = np.zeros(3)
    assert np.allclose(kernels.gae(r, v, nv, z, z, 0.9, 0.0), r + 0.9 * nv - v)


def test_gae_lambda_one_is_discounted_return_minus_value():
    r = np.array([1.0, 0.0, 2.0])
    v = np.array([0.3, -0.2, 0.1])
    nv = np.array([-0.2, 0.1, 0.0])
    d = np.array([0.0, 0.0, 1.0])
    adv = kernels.gae(r, v, nv, d, np.zeros(3), 0.5, 1.0)
    returns = np.array([1.0 + 0.5 * 0.0 + 0.25 * 2.0, 0.0 + 0.5 * 2.0, 2.0])
    assert np.allclose(adv, returns - v)


def test_gae_truncation_bootstraps_but_stops_recursion():
    r = np.array([1.0, 1.0])
    v = np.zeros(2)
    nv = np.array([10.0, 0.0])
    adv = kernels.gae(r, v, nv, np.zeros(2), np.array([1.0, 0.0]), 0.9, 0.95)
    assert adv[0] == pytest.approx(1.0 + 9.0)


def test_gae_batched_matches_columns(rng):
    cols = [random_trajectory(rng, 25) for _ in range(4)]
    stacked = [np.stack([c[i] for c in cols], axis=1) for i in range(5)]
    out = kernels.gae(*stacked, 0.99, 0.95)
    for e, c in enumerate(cols):
        assert np.allclose(out[:, e], gae_direct(*c, 0.99, 0.95), atol=1e-12)


@needs_numba
@given(st.integers(0, 2**32 - 1))
def test_numba_and_numpy_agree(seed):
    rng = np.random.default_rng(seed)
    traj = [a[:, None] for a in random_trajectory(rng, 40)]
    a = kernels._gae_jit(*traj, 0.99, 0.95)
    b = kernels.gae_numpy(*traj, 0.99, 0.95)
    assert np.array_equal(a, b)

    pos = rng.uniform(-1.5, 1.5, size=(5, 4, 2))
    vel = rng.normal(size=(5, 4, 2))
    acc = rng.normal(size=(5, 4, 2))
    cap = np.array([1.0, 1.0, 0.5, 2.0])
    pa, va = kernels._integrate_jit(pos, vel, acc, 0.25, 0.1, cap, 1.0)
    pb, vb = kernels.integrate_numpy(pos, vel, acc, 0.25, 0.1, cap, 1.0)
    assert np.array_equal(pa, pb) and np.array_equal(va, vb)

    assert np.array_equal(kernels._count_contacts_jit(pos, 0.7), kernels.count_contacts_numpy(pos, 0.7))
    tgt = rng.normal(size=(5, 3, 2))
    assert np.array_equal(kernels._min_distances_jit(pos, tgt), kernels.min_distances_numpy(pos, tgt))


def test_integrate_respects_speed_cap_and_arena(rng):
    pos = rng.uniform(-1, 1, size=(3, 2, 2))
    vel = rng.normal(0, 5, size=(3, 2, 2))
    new_pos, new_vel = kernels.integrate(pos, vel, np.zeros_like(vel), 0.0, 0.1, 1.3, 1.0)
    assert np.all(np.linalg.norm(new_vel, axis=-1) <= 1.3 + 1e-12)
    assert np.all(np.abs(new_pos) <= 1.0)


def test_contacts_and_nearest_distances():
    pos = np.array([[[0.0, 0.0], [0.3, 0.0], [5.0, 5.0]]])
    assert kernels.count_contacts(pos, 0.5).tolist() == [1.0]
    tgt = np.array([[[0.0, 1.0], [5.0, 4.0]]])
    assert np.allclose(kernels.min_distances(pos, tgt), [[1.0, 1.0]])
