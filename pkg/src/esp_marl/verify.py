"""The consolidated verification suite behind ``esp-marl verify``.

Sections, in order: group axioms and representation properties, symmetric
Markov game checks on every shipped task, the tabular optimal-value oracle,
and reverse-mode vs finite-difference gradient checks for every loss.

Negative controls (a corrupted Cayley table, two asymmetric tasks and a
symmetry-broken finite game) are expected to fail; a control that passes is a
harness failure.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from esp_marl.envs import ENV_NAMES, make_env
from esp_marl.envs.controls import AnchoredNavigation, WindyNavigation
from esp_marl.esp import symmetry_policy_loss, symmetry_value_loss
from esp_marl.groups import (
    Group,
    ObservationLayout,
    check_group_axioms,
    continuous_2d,
    cyclic_group,
    dihedral_extension,
    discrete_moves,
    geo,
    group_by_name,
    inv,
    representation_deviations,
)
from esp_marl.mappo import Samples, surrogate_terms, value_loss
from esp_marl.markov_game import (
    SymmetrySpec,
    check_observation_consistency,
    check_reward_invariance,
    check_transition_equivariance,
)
from esp_marl.nn.gradcheck import gradient_check
from esp_marl.nn.policy import Actor, Critic
from esp_marl.tabular import (
    build_grid_symmetry_game,
    build_symmetry_broken_game,
    value_iteration_full,
    verify_optimal_value_equivalence,
)

REP_TOL = 1e-12
GRAD_TOL = 1e-4
GRAD_KINDS = (
    "ppo_surrogate_discrete",
    "ppo_surrogate_continuous",
    "value_mse",
    "sym_policy_discrete",
    "sym_policy_continuous",
    "sym_value",
    "entropy_discrete",
    "entropy_continuous",
)


@dataclass
class CheckOutcome:
    section: str
    name: str
    check_passed: bool
    max_deviation: float
    tolerance: float
    expected_fail: bool = False
    witness: Optional[dict] = None

    @property
    def ok(self) -> bool:
        """Harness verdict: real checks must pass, negative controls must fail."""
        return self.check_passed != self.expected_fail

    def line(self) -> str:
        verdict = "ok  " if self.ok else "FAIL"
        tag = " (expected fail)" if self.expected_fail else ""
        text = (f"[{verdict}] {self.section:<9} {self.name:<44} max dev {self.max_deviation:.3e} "
                f"tol {self.tolerance:.0e}{tag}")
        if self.witness is not None and (not self.check_passed or not self.ok):
            text += "\n           witness: " + json.dumps(self.witness)[:300]
        return text


@dataclass
class VerifyReport:
    outcomes: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(o.ok for o in self.outcomes)

    def add(self, outcome: CheckOutcome) -> CheckOutcome:
        self.outcomes.append(outcome)
        return outcome

    def to_text(self) -> str:
        lines = [o.line() for o in self.outcomes]
        n_bad = sum(not o.ok for o in self.outcomes)
        lines.append(f"{len(self.outcomes) - n_bad}/{len(self.outcomes)} checks ok in {self.seconds:.1f}s"
                     + ("" if self.passed else f"; {n_bad} FAILED"))
        return "\n".join(lines)

    def to_json(self) -> str:
        return json.dumps(
            {
                "passed": self.passed,
                "seconds": self.seconds,
                "checks": [{**o.__dict__, "ok": o.ok} for o in self.outcomes],
            },
            default=float,
        )


# ---------------------------------------------------------------------------
# groups


def corrupted_group() -> Group:
    """C4 with one Cayley entry pointing outside the group."""
    base = cyclic_group(4)
    table = np.array(base.cayley, copy=True)
    table[1, 2] = 7
    return Group("C4_corrupted", base.elements, table)


def verify_groups(report: VerifyReport, num_vectors: int = 10_000) -> None:
    layout = ObservationLayout([geo(), inv(1), geo(), geo()])
    for group in (cyclic_group(1), cyclic_group(4), cyclic_group(8), dihedral_extension(cyclic_group(4))):
        ax = check_group_axioms(group)
        bad = next((w for ok, w in ax.results.values() if not ok), None)
        report.add(CheckOutcome("groups", f"axioms {group.name}", ax.passed, 0.0, 0.0, witness=bad))
        dev = representation_deviations(group, layout, num_vectors)
        worst = max(dev.values())
        report.add(CheckOutcome("groups", f"representation {group.name}", worst <= REP_TOL, worst, REP_TOL,
                                witness=dev if worst > REP_TOL else None))
    ax = check_group_axioms(corrupted_group())
    report.add(CheckOutcome("groups", "axioms corrupted C4 table", ax.passed, 0.0, 0.0, expected_fail=True,
                            witness=ax.results["closure"][1]))


# ---------------------------------------------------------------------------
# environments


def _env_outcome(rep, expected_fail=False) -> CheckOutcome:
    return CheckOutcome("env", f"{rep.check} {rep.env} {rep.group}", rep.passed, rep.max_deviation,
                        rep.tolerance, expected_fail, rep.witness)


def verify_environments(report: VerifyReport, env_names=ENV_NAMES, groups=("C4", "D4"),
                        num_samples: int = 1000, seed: int = 0) -> None:
    for name in env_names:
        env = make_env(name)
        for gname in groups:
            if gname not in env.symmetry_groups:
                continue
            spec = env.symmetry_spec(gname)
            report.add(_env_outcome(check_reward_invariance(env, spec, num_samples, seed)))
            report.add(_env_outcome(check_transition_equivariance(env, spec, num_samples, seed)))
            report.add(_env_outcome(check_observation_consistency(env, spec, min(num_samples, 200), seed)))
    anchored, windy = AnchoredNavigation(), WindyNavigation()
    report.add(_env_outcome(check_reward_invariance(anchored, anchored.symmetry_spec("C4"), num_samples, seed),
                            expected_fail=True))
    report.add(_env_outcome(check_transition_equivariance(windy, windy.symmetry_spec("C4"), num_samples, seed),
                            expected_fail=True))


# ---------------------------------------------------------------------------
# tabular oracle


def verify_tabular(report: VerifyReport, tol: float = 1e-8, vi_tol: float = 1e-10) -> None:
    cases = [
        (build_grid_symmetry_game(3, 2), False),
        (build_grid_symmetry_game(5, 1), False),
        (build_symmetry_broken_game(3, 2), True),
    ]
    for game, broken in cases:
        res = value_iteration_full(game, tol=vi_tol)
        report.add(CheckOutcome("tabular", f"value iteration residual {game.name}", res.residual <= vi_tol,
                                res.residual, vi_tol))
        eq = verify_optimal_value_equivalence(game, res.q, tol)
        report.add(CheckOutcome("tabular", f"optimal value equivalence {game.name}", eq.passed,
                                eq.max_deviation, tol, expected_fail=broken, witness=eq.witness))


# ---------------------------------------------------------------------------
# gradient checks


def tiny_spec(continuous: bool = False, group: str = "C4") -> SymmetrySpec:
    """A two-agent toy layout small enough for exhaustive finite differences."""
    return SymmetrySpec(
        group_by_name(group),
        ObservationLayout([geo("vel"), geo("rel"), inv(1, "flag")]),
        continuous_2d() if continuous else discrete_moves(),
        ObservationLayout([geo("p0"), geo("p1"), geo("target")]),
    )


def _away_from_kinks(logp, rng, clip_eps, margin=1e-3):
    """Old log-probs whose ratios sit at least ``margin`` from the clip edges."""
    while True:
        old = logp + rng.normal(0.0, 0.3, size=logp.shape)
        r = np.exp(logp - old)
        if np.all(np.abs(r - (1 - clip_eps)) > margin) and np.all(np.abs(r - (1 + clip_eps)) > margin):
            return old


def loss_instance(kind: str, rng: np.random.Generator, rows: int = 6, n_agents: int = 2, hidden=(8,)):
    """``(fn, x0)`` with ``fn(Tensor) -> scalar Tensor`` for one random small instance."""
    continuous = kind.endswith("continuous")
    spec = tiny_spec(continuous)
    obs = rng.normal(size=(rows, n_agents, spec.obs_layout.size))
    states = rng.normal(size=(rows, spec.global_layout.size))
    g = spec.group.non_identity[int(rng.integers(len(spec.group.non_identity)))]
    if kind in ("value_mse", "sym_value"):
        critic = Critic(spec.global_layout.size, hidden).init(rng)
        critic.params.values += rng.normal(0.0, 0.1, size=len(critic.params))
        x0 = critic.params.values.copy()
        if kind == "value_mse":
            targets = rng.normal(size=rows)
            return (lambda t: value_loss(critic, t, states, targets)), x0
        return (lambda t: symmetry_value_loss(critic, states, spec, g, t)), x0

    actor = Actor(spec.obs_layout.size, spec.act_layout, hidden).init(rng, out_gain=1.0)
    if continuous:
        actor.params.set("pi.log_std", rng.uniform(-0.5, 0.5, size=2))
    x0 = actor.params.values.copy()
    if kind.startswith("ppo_surrogate"):
        if continuous:
            actions = rng.normal(size=(rows, n_agents, 2))
        else:
            actions = rng.integers(spec.act_layout.n_actions, size=(rows, n_agents))
        clip_eps = 0.2
        old = _away_from_kinks(actor.log_prob(obs, actions), rng, clip_eps)
        mb = Samples(obs, states, actions, old, rng.normal(size=rows), rng.normal(size=rows),
                     np.ones(rows, dtype=bool))
        return (lambda t: surrogate_terms(actor, t, mb, clip_eps)[0]), x0
    if kind.startswith("sym_policy"):
        return (lambda t: symmetry_policy_loss(actor, obs, spec, g, t)), x0
    if kind.startswith("entropy"):
        return (lambda t: actor.distribution(obs, t).entropy().mean()), x0
    raise ValueError(f"unknown loss kind {kind!r}")


def gradient_errors(kind: str, instances: int = 100, seed: int = 0) -> np.ndarray:
    """Relative errors of reverse-mode vs central differences over random instances."""
    rng = np.random.default_rng(seed)
    out = np.empty(instances)
    for i in range(instances):
        fn, x0 = loss_instance(kind, rng)
        out[i] = gradient_check(fn, x0).relative_error
    return out


def verify_gradients(report: VerifyReport, instances: int = 10, seed: int = 0) -> None:
    for kind in GRAD_KINDS:
        errs = gradient_errors(kind, instances, seed)
        worst = float(errs.max())
        report.add(CheckOutcome("gradient", f"{kind} ({instances} instances)", worst < GRAD_TOL, worst, GRAD_TOL))


# ---------------------------------------------------------------------------


def verify(cfg=None, num_samples: int = 1000, grad_instances: int = 10) -> VerifyReport:
    """Run every section. With a config, environment checks cover only its task and group."""
    start = time.perf_counter()
    report = VerifyReport()
    verify_groups(report)
    if cfg is None:
        verify_environments(report, num_samples=num_samples)
    else:
        verify_environments(report, (cfg.env.name,), (cfg.esp.group,), num_samples=num_samples)
    verify_tabular(report)
    verify_gradients(report, grad_instances)
    report.seconds = time.perf_counter() - start
    return report
