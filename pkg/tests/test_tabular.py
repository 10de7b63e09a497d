import numpy as np
import pytest

from esp_marl.errors import ConvergenceError, InvalidArgument
from esp_marl.tabular import (
    bellman_residual,
    build_grid_symmetry_game,
    build_symmetry_broken_game,
    value_iteration,
    value_iteration_full,
    verify_optimal_value_equivalence,
)


@pytest.fixture(scope="module")
def game2():
    return build_grid_symmetry_game(3, 2)


def _state(game, *cells):
    target = np.array(cells)
    return int(np.flatnonzero(np.all(game.states == target, axis=(1, 2)))[0])


def _action(game, *moves):
    return int(np.flatnonzero(np.all(game.joint_actions == np.array(moves), axis=1))[0])


def test_sizes(game2):
    assert game2.n_states == 81 and game2.n_actions == 25
    g1 = build_grid_symmetry_game(5, 1)
    assert g1.n_states == 25 and g1.n_actions == 5


def test_reward_at_fixed_point(game2):
    s = _state(game2, (0, 0), (0, 0))
    assert game2.reward[s, _action(game2, 0, 0)] == -1.0


def test_tables_are_exactly_symmetric(game2):
    checks = game2.validate()
    assert all(ok for ok, _ in checks.values()), checks


def test_broken_game_violates_reward_invariance():
    checks = build_symmetry_broken_game(3, 2).validate()
    assert checks["bijection"][0] and checks["homomorphism"][0] and checks["transition_invariance"][0]
    assert not checks["reward_invariance"][0]


def test_bad_parameters():
    with pytest.raises(InvalidArgument):
        build_grid_symmetry_game(7, 1)
    with pytest.raises(InvalidArgument):
        build_grid_symmetry_game(3, 3)
    with pytest.raises(InvalidArgument):
        build_grid_symmetry_game(3, 1, gamma=1.0)


def test_gamma_zero_is_myopic():
    game = build_grid_symmetry_game(3, 2, gamma=0.0)
    assert np.array_equal(value_iteration(game), game.reward)


def test_single_agent_hand_rolled_values():
    game = build_grid_symmetry_game(3, 1, gamma=0.9)
    q = value_iteration(game, tol=1e-12)
    centre, edge, corner = _state(game, (0, 0)), _state(game, (1, 0)), _state(game, (1, 1))
    stay, west = _action(game, 0), _action(game, 2)
    assert abs(q[centre, stay]) < 1e-10
    # edge: pay 1 now, step to the centre and stay there
    assert abs(q[edge, west] - (-1.0)) < 1e-10
    # staying on the edge once, then leaving: -1 + 0.9 * (-1)
    assert abs(q[edge, stay] - (-1.9)) < 1e-10
    # corner: -2, then the edge's optimal value -1
    assert abs(q[corner, west] - (-2.0 - 0.9 * 1.0)) < 1e-10


def test_residual_meets_tolerance_and_is_monotone(game2):
    res = value_iteration_full(game2, tol=1e-10)
    assert res.residual <= 1e-10
    assert bellman_residual(game2, res.q) == res.residual
    r = np.array(res.residuals)
    assert np.all(np.diff(r) <= 1e-15)


def test_non_convergence_reports_residual(game2):
    with pytest.raises(ConvergenceError) as info:
        value_iteration(game2, tol=1e-10, max_iter=3)
    assert info.value.residual > 1e-10


@pytest.mark.parametrize("side,n", [(3, 2), (5, 1), (3, 1), (5, 2)])
def test_optimal_value_equivalence_holds(side, n):
    game = build_grid_symmetry_game(side, n)
    report = verify_optimal_value_equivalence(game, value_iteration(game, 1e-10), tol=1e-8)
    assert report.passed, report.to_text()
    assert report.per_element["e"] == 0.0


def test_broken_game_fails_with_witness():
    game = build_symmetry_broken_game(3, 2)
    report = verify_optimal_value_equivalence(game, value_iteration(game, 1e-10), tol=1e-8)
    assert not report.passed
    w = report.witness
    assert w["element"] != "e" and abs(w["q"] - w["q_transformed"]) == report.max_deviation
    assert "FAIL" in report.to_text()
