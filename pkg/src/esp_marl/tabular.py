"""Enumerable symmetric Markov games and an exact check of optimal value equivalence.

Grid games put agents on an odd square grid centred at the origin. States and
joint actions are enumerated, so reward, transition and group actions become
integer/real tables and the symmetry conditions can be checked exhaustively.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from esp_marl.errors import ConvergenceError, InvalidArgument
from esp_marl.groups import MPE_MOVES, Group, cyclic_group, discrete_moves

# grid moves share the particle-world order: stay, E, W, N, S
GRID_MOVES = MPE_MOVES.astype(np.int64)


@dataclass
class FiniteGame:
    states: np.ndarray  # (S, n_agents, 2) integer coordinates
    joint_actions: np.ndarray  # (A, n_agents) move indices
    reward: np.ndarray  # (S, A)
    transition: np.ndarray  # (S, A) -> next state index
    gamma: float
    group: Group
    sigma: dict = field(default_factory=dict)  # element id -> (S,) state permutation
    tau: dict = field(default_factory=dict)  # element id -> (A,) joint-action permutation
    name: str = "grid"

    @property
    def n_states(self) -> int:
        return self.reward.shape[0]

    @property
    def n_actions(self) -> int:
        return self.reward.shape[1]

    def validate(self) -> dict:
        """Exhaustive table checks. Returns ``{check: (passed, witness)}``."""
        out = {}
        S, A = self.reward.shape
        ok, wit = True, None
        for g in self.group:
            for name, perm, size in (("sigma", self.sigma[g.id], S), ("tau", self.tau[g.id], A)):
                if not np.array_equal(np.sort(perm), np.arange(size)):
                    ok, wit = False, {"element": g.name, "map": name}
        out["bijection"] = (ok, wit)

        ok, wit = True, None
        for g1, g2 in itertools.product(self.group, repeat=2):
            g12 = self.group.compose(g1, g2)
            for name, table in (("sigma", self.sigma), ("tau", self.tau)):
                if not np.array_equal(table[g12.id], table[g1.id][table[g2.id]]):
                    ok, wit = False, {"g1": g1.name, "g2": g2.name, "map": name}
        out["homomorphism"] = (ok, wit)

        ok, wit = True, None
        for g in self.group:
            s, t = self.sigma[g.id], self.tau[g.id]
            moved = self.reward[s[:, None], t[None, :]]
            bad = np.argwhere(moved != self.reward)
            if bad.size and ok:
                i, j = bad[0]
                ok, wit = False, {"element": g.name, "state": int(i), "action": int(j)}
        out["reward_invariance"] = (ok, wit)

        ok, wit = True, None
        for g in self.group:
            s, t = self.sigma[g.id], self.tau[g.id]
            lhs = s[self.transition]  # sigma_g(T[s][a])
            rhs = self.transition[s[:, None], t[None, :]]  # T[sigma_g s][tau_g a]
            bad = np.argwhere(lhs != rhs)
            if bad.size and ok:
                i, j = bad[0]
                ok, wit = False, {"element": g.name, "state": int(i), "action": int(j)}
        out["transition_invariance"] = (ok, wit)
        return out


def _rotate_cells(cells, g):
    rep = np.rint(g.linear_rep).astype(np.int64)
    return cells @ rep.T


def build_grid_symmetry_game(grid_side: int = 3, n_agents: int = 2, gamma: float = 0.9,
                             corner_bonus: float = 0.0) -> FiniteGame:
    """Grid game with reward ``-sum_i |x_i| + |y_i|`` and a -1 co-location penalty.

    ``corner_bonus`` adds a reward whenever an agent sits on the north-east
    corner. Any non-zero value breaks the rotation symmetry (negative control).
    """
    if grid_side not in (3, 5) or n_agents not in (1, 2):
        raise InvalidArgument(
            f"grid_side must be 3 or 5 and n_agents 1 or 2 (got {grid_side}, {n_agents})"
        )
    if not 0.0 <= gamma < 1.0:
        raise InvalidArgument("gamma must lie in [0, 1)")
    h = grid_side // 2
    cells = np.array([(x, y) for x in range(-h, h + 1) for y in range(-h, h + 1)], dtype=np.int64)
    states = np.array(list(itertools.product(cells.tolist(), repeat=n_agents)), dtype=np.int64)
    state_index = {tuple(map(tuple, s)): i for i, s in enumerate(states.tolist())}
    joint_actions = np.array(list(itertools.product(range(len(GRID_MOVES)), repeat=n_agents)))
    action_index = {tuple(a): i for i, a in enumerate(joint_actions.tolist())}
    S, A = len(states), len(joint_actions)

    dist = np.abs(states).sum(axis=(1, 2)).astype(np.float64)
    reward_s = -dist
    if n_agents == 2:
        reward_s -= np.all(states[:, 0] == states[:, 1], axis=1).astype(np.float64)
    if corner_bonus:
        reward_s += corner_bonus * np.any(np.all(states == (h, h), axis=2), axis=1)
    reward = np.repeat(reward_s[:, None], A, axis=1)

    transition = np.empty((S, A), dtype=np.int64)
    for a_idx, ja in enumerate(joint_actions):
        moved = np.clip(states + GRID_MOVES[ja][None], -h, h)
        for s_idx in range(S):
            transition[s_idx, a_idx] = state_index[tuple(map(tuple, moved[s_idx].tolist()))]

    group = cyclic_group(4)
    sigma, tau = {}, {}
    moves = discrete_moves()
    for g in group:
        rot = _rotate_cells(states.reshape(-1, 2), g).reshape(states.shape)
        sigma[g.id] = np.array([state_index[tuple(map(tuple, s))] for s in rot.tolist()])
        perm = moves.permutation(g)
        tau[g.id] = np.array([action_index[tuple(perm[ja])] for ja in joint_actions])
    name = f"grid{grid_side}x{grid_side}_n{n_agents}" + ("_broken" if corner_bonus else "")
    return FiniteGame(states, joint_actions, reward, transition, gamma, group, sigma, tau, name)


def build_symmetry_broken_game(grid_side: int = 3, n_agents: int = 2, gamma: float = 0.9,
                               bonus: float = 1.0) -> FiniteGame:
    """Negative control: the grid game plus a reward bonus in the north-east corner."""
    return build_grid_symmetry_game(grid_side, n_agents, gamma, corner_bonus=bonus)


@dataclass
class ValueIterationResult:
    q: np.ndarray
    residual: float
    iterations: int
    residuals: list


def value_iteration(game: FiniteGame, tol: float = 1e-10, max_iter: int = 100_000) -> np.ndarray:
    return value_iteration_full(game, tol, max_iter).q


def value_iteration_full(game: FiniteGame, tol: float = 1e-10, max_iter: int = 100_000) -> ValueIterationResult:
    """Synchronous Q-iteration with the cooperative max-over-joint-actions backup."""
    if not 0.0 <= game.gamma < 1.0:
        raise InvalidArgument("value iteration needs gamma in [0, 1)")
    if tol <= 0:
        raise InvalidArgument("tol must be positive")
    q = game.reward.copy()
    residuals = []
    for it in range(1, max_iter + 1):
        new = game.reward + game.gamma * q.max(axis=1)[game.transition]
        res = float(np.max(np.abs(new - q)))
        residuals.append(res)
        q = new
        if res <= tol:
            # one more residual evaluation on the returned table
            final = float(np.max(np.abs(game.reward + game.gamma * q.max(axis=1)[game.transition] - q)))
            return ValueIterationResult(q, final, it, residuals)
    raise ConvergenceError(f"value iteration did not reach {tol} in {max_iter} sweeps", residuals[-1])


def bellman_residual(game: FiniteGame, q: np.ndarray) -> float:
    return float(np.max(np.abs(game.reward + game.gamma * q.max(axis=1)[game.transition] - q)))


@dataclass
class EquivalenceReport:
    game: str
    tolerance: float
    per_element: dict
    witness: Optional[dict] = None

    @property
    def max_deviation(self) -> float:
        return max(self.per_element.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tolerance

    def to_record(self) -> dict:
        return {
            "game": self.game,
            "passed": self.passed,
            "max_deviation": self.max_deviation,
            "tolerance": self.tolerance,
            "per_element": self.per_element,
            "witness": self.witness,
        }

    def to_text(self) -> str:
        head = "PASS" if self.passed else "FAIL"
        line = (f"[{head}] optimal value equivalence on {self.game}: max |Q(s,a) - Q(gs,ga)| = "
                f"{self.max_deviation:.3e} (tol {self.tolerance:.0e})")
        if not self.passed and self.witness:
            line += f"\n    witness: {self.witness}"
        return line


def verify_optimal_value_equivalence(game: FiniteGame, q: np.ndarray, tol: float = 1e-8) -> EquivalenceReport:
    per, witness, worst = {}, None, -1.0
    for g in game.group:
        moved = q[game.sigma[g.id][:, None], game.tau[g.id][None, :]]
        dev = np.abs(q - moved)
        s, a = np.unravel_index(int(np.argmax(dev)), dev.shape)
        per[g.name] = float(dev[s, a])
        if dev[s, a] > worst:
            worst = dev[s, a]
            witness = {
                "element": g.name,
                "state": game.states[s].tolist(),
                "joint_action": game.joint_actions[a].tolist(),
                "q": float(q[s, a]),
                "q_transformed": float(moved[s, a]),
            }
    return EquivalenceReport(game.name, tol, per, witness)
