import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from esp_marl.errors import InvalidArgument, NonFiniteError
from esp_marl.groups import continuous_2d, discrete_moves
from esp_marl.nn import Actor, AdamState, Categorical, Critic, DiagGaussian, ParameterVector, adam_step
from esp_marl.nn.checkpoint import load_checkpoint, save_checkpoint
from esp_marl.nn.layers import orthogonal


# -- parameter vectors -----------------------------------------------------


def test_parameter_vector_registry():
    p = ParameterVector()
    p.add("a", (2, 3))
    p.add("b", (4,))
    assert len(p) == 10
    p.set("b", [1, 2, 3, 4])
    assert p.view("b").tolist() == [1, 2, 3, 4]
    p.check()
    with pytest.raises(InvalidArgument):
        p.add("a", (1,))
    p.values[0] = np.nan
    with pytest.raises(InvalidArgument):
        p.check()


def test_orthogonal_init(rng):
    w = orthogonal(rng, (8, 5), gain=2.0)
    assert np.allclose(w.T @ w, 4.0 * np.eye(5))


def test_actor_and_critic_shapes(rng):
    actor = Actor(6, discrete_moves(), (8, 8)).init(rng)
    obs = rng.normal(size=(4, 3, 6))
    assert actor.head(obs).shape == (4, 3, 5)
    assert actor.log_prob(obs, np.zeros((4, 3), dtype=int)).shape == (4, 3)
    cont = Actor(6, continuous_2d(), (8,)).init(rng, log_std=-0.5)
    assert np.array_equal(cont.params.view("pi.log_std"), [-0.5, -0.5])
    assert cont.distribution(obs).mean.shape == (4, 3, 2)
    critic = Critic(10, (8,)).init(rng)
    assert critic.value(rng.normal(size=(4, 10))).shape == (4,)


# -- categorical -----------------------------------------------------------


def test_uniform_categorical():
    d = Categorical(np.zeros((5, 5)))
    assert np.allclose(d.log_prob(np.arange(5)).data, -math.log(5))
    assert np.allclose(d.entropy().data, math.log(5), atol=1e-12)


def test_categorical_kl_against_direct_sum():
    p = np.array([0.2, 0.5, 0.3])
    q = np.array([0.4, 0.4, 0.2])
    expected = sum(pi * (math.log(pi) - math.log(qi)) for pi, qi in zip(p, q))
    got = Categorical(np.log(p)).kl(Categorical(np.log(q))).data
    assert abs(got - expected) < 1e-12
    assert Categorical(np.log(p)).kl(Categorical(np.log(p))).data == 0.0


def test_categorical_log_prob_formula(rng):
    logits = rng.normal(size=(4, 6))
    lse = np.log(np.exp(logits).sum(axis=-1))
    a = np.array([0, 5, 2, 3])
    assert np.allclose(Categorical(logits).log_prob(a).data, logits[np.arange(4), a] - lse, atol=1e-12)


def test_categorical_errors():
    with pytest.raises(InvalidArgument):
        Categorical(np.zeros(5)).log_prob(5)
    with pytest.raises(InvalidArgument):
        Categorical(np.array([0.0, np.inf]))


@given(st.integers(0, 2**32 - 1))
def test_categorical_kl_non_negative(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(0, 3, size=(2, 10, 5))
    assert np.all(Categorical(a).kl(Categorical(b)).data >= -1e-12)


def test_categorical_sampling_is_deterministic_and_matches_probs():
    logits = np.log(np.array([0.1, 0.6, 0.3]))
    d = Categorical(np.broadcast_to(logits, (20000, 3)))
    s1 = d.sample(np.random.default_rng(3))
    s2 = d.sample(np.random.default_rng(3))
    assert np.array_equal(s1, s2)
    freq = np.bincount(s1, minlength=3) / len(s1)
    assert np.max(np.abs(freq - [0.1, 0.6, 0.3])) < 0.02
    assert d.mode()[0] == 1


# -- gaussian --------------------------------------------------------------


def test_gaussian_examples():
    std_normal = DiagGaussian(np.zeros(2), np.zeros(2))
    assert std_normal.kl(DiagGaussian(np.zeros(2), np.zeros(2))).data == 0.0
    assert abs(std_normal.log_prob(np.zeros(2)).data - (-0.5 * 2 * math.log(2 * math.pi))) < 1e-12
    shifted = DiagGaussian(np.ones(1), np.zeros(1))
    assert abs(shifted.kl(DiagGaussian(np.zeros(1), np.zeros(1))).data - 0.5) < 1e-12


def test_gaussian_kl_closed_form(rng):
    m1, m2 = rng.normal(size=(2, 3))
    s1, s2 = rng.uniform(-1, 1, size=(2, 3))
    expected = np.sum(s2 - s1 + (np.exp(2 * s1) + (m1 - m2) ** 2) / (2 * np.exp(2 * s2)) - 0.5)
    got = DiagGaussian(m1, s1).kl(DiagGaussian(m2, s2)).data
    assert abs(got - expected) < 1e-12


def test_gaussian_log_std_clamped():
    d = DiagGaussian(np.zeros(2), np.array([-9.0, 7.0]))
    assert np.array_equal(d.log_std.data, [-5.0, 2.0])


def test_gaussian_sampling_statistics():
    d = DiagGaussian(np.broadcast_to([1.0, -2.0], (50000, 2)), np.log([0.5, 2.0]))
    x = d.sample(np.random.default_rng(0))
    assert np.allclose(x.mean(axis=0), [1.0, -2.0], atol=0.03)
    assert np.allclose(x.std(axis=0), [0.5, 2.0], atol=0.03)


# -- adam --------------------------------------------------------------------


def test_adam_zero_gradient_keeps_params():
    p = np.array([1.0, -2.0])
    new, st1, _ = adam_step(p, np.zeros(2), AdamState.zeros(2), lr=0.1)
    assert np.array_equal(new, p)
    assert st1.t == 1


def test_adam_moments_decay_under_zero_gradient():
    st0 = AdamState(np.array([0.5, 0.5]), np.array([1.0, 1.0]), 3)
    _, st1, _ = adam_step(np.zeros(2), np.zeros(2), st0, lr=0.1)
    assert np.allclose(st1.m, 0.45) and np.allclose(st1.v, 0.999)


def test_adam_first_step_size():
    new, _, _ = adam_step(np.array([0.0]), np.array([1.0]), AdamState.zeros(1), lr=0.1, eps=1e-8,
                          max_grad_norm=None)
    assert abs(new[0] - (-0.1)) < 1e-6


def test_adam_clips_global_norm():
    g = np.array([6.0, 8.0])  # norm 10
    _, st, info = adam_step(np.zeros(2), g, AdamState.zeros(2), max_grad_norm=0.5)
    assert info.clipped and info.grad_norm == 10.0
    assert np.allclose(st.m / (1 - 0.9), g * 0.05)


def test_adam_rejects_non_finite(caplog):
    with pytest.raises(NonFiniteError):
        adam_step(np.zeros(2), np.array([np.nan, 0.0]), AdamState.zeros(2))
    assert "non-finite" in caplog.text


# -- checkpoint ------------------------------------------------------------


def test_checkpoint_round_trip_is_bit_exact(tmp_path, rng):
    arrays = {"theta": rng.normal(size=17), "steps": np.arange(4)}
    gen = np.random.default_rng(9)
    meta = {"rng": gen.bit_generator.state, "note": "x"}
    path = tmp_path / "ck.npz"
    save_checkpoint(path, arrays, meta)
    got, got_meta = load_checkpoint(path)
    assert set(got) == set(arrays)
    assert all(np.array_equal(got[k], arrays[k]) and got[k].dtype == arrays[k].dtype for k in arrays)
    restored = np.random.default_rng()
    restored.bit_generator.state = got_meta["rng"]
    assert restored.random() == gen.random()


def test_checkpoint_rejects_foreign_files(tmp_path):
    path = tmp_path / "plain.npz"
    np.savez(path, a=np.zeros(2))
    with pytest.raises(InvalidArgument):
        load_checkpoint(path)


def test_adam_rejects_non_finite_step():
    with pytest.raises(NonFiniteError):
        adam_step(np.zeros(2), np.ones(2), AdamState.zeros(2), lr=float("inf"))
