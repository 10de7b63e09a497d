"""Finite planar symmetry groups and their action on states and actions.

A :class:`Group` is a list of :class:`GroupElement` plus a Cayley table. Elements
carry their 2x2 planar representation; observation and action layouts turn that
representation into maps on concrete vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from esp_marl.errors import InvalidArgument, LayoutMismatch

REP_TOL = 1e-12
FLIP_X = np.array([[1.0, 0.0], [0.0, -1.0]])

_QUARTER_TURNS = ((1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0))


def rotation_matrix(theta: float) -> np.ndarray:
    """Counter-clockwise planar rotation by ``theta`` radians."""
    if not math.isfinite(theta):
        raise InvalidArgument(f"rotation angle must be finite, got {theta!r}")
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def _exact_rotation(i: int, n: int) -> np.ndarray:
    # Multiples of a quarter turn get exact 0/1 entries so C_4 and D_4 act
    # by signed coordinate swaps with no rounding.
    if (4 * i) % n == 0:
        c, s = _QUARTER_TURNS[(4 * i // n) % 4]
        return np.array([[c, -s], [s, c]])
    return rotation_matrix(2.0 * math.pi * i / n)


def _degrees(i: int, n: int) -> str:
    deg = 360 * i / n
    return f"{deg:g}"


@dataclass(frozen=True, eq=False)
class GroupElement:
    id: int
    kind: str  # "identity" | "rotation" | "reflection"
    theta: float
    linear_rep: np.ndarray = field(repr=False)
    name: str = ""
    group_name: str = ""

    @property
    def is_identity(self) -> bool:
        return self.kind == "identity"

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.linear_rep))

    def __eq__(self, other):
        if not isinstance(other, GroupElement):
            return NotImplemented
        return self.group_name == other.group_name and self.id == other.id

    def __hash__(self):
        return hash((self.group_name, self.id))


@dataclass(eq=False)
class Group:
    """A finite group given by its elements and composition table.

    ``cayley[i][j]`` is the id of ``elements[i] ∘ elements[j]``. The constructor
    does not validate; use :func:`check_group_axioms`.
    """

    name: str
    elements: list
    cayley: np.ndarray

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __getitem__(self, key) -> GroupElement:
        if isinstance(key, str):
            return self.element(key)
        return self.elements[key]

    @property
    def identity(self) -> GroupElement:
        for g in self.elements:
            if g.is_identity:
                return g
        raise InvalidArgument(f"group {self.name} has no identity element")

    @property
    def non_identity(self) -> list:
        return [g for g in self.elements if not g.is_identity]

    def element(self, name: str) -> GroupElement:
        for g in self.elements:
            if g.name == name:
                return g
        raise InvalidArgument(
            f"no element {name!r} in {self.name}; have {[g.name for g in self.elements]}"
        )

    def compose(self, g1: GroupElement, g2: GroupElement) -> GroupElement:
        self._check_member(g1)
        self._check_member(g2)
        return self.elements[int(self.cayley[g1.id, g2.id])]

    def inverse(self, g: GroupElement) -> GroupElement:
        self._check_member(g)
        e = self.identity.id
        row = self.cayley[g.id]
        hits = np.flatnonzero(row == e)
        if hits.size != 1:
            raise InvalidArgument(f"{g.name} has no unique inverse in {self.name}")
        return self.elements[int(hits[0])]

    def _check_member(self, g: GroupElement):
        if g.group_name != self.name or not (0 <= g.id < len(self.elements)):
            raise InvalidArgument(f"element {g.name!r} of {g.group_name} is not in {self.name}")


_GROUPS: dict = {}


def _register(group: Group) -> Group:
    _GROUPS[group.name] = group
    return group


def group_by_name(name: str) -> Group:
    """Look up ``"C4"``, ``"D4"``, ... building the group on first use."""
    if name not in _GROUPS:
        if len(name) >= 2 and name[0] in "CD" and name[1:].isdigit():
            n = int(name[1:])
            g = cyclic_group(n)
            if name[0] == "D":
                g = dihedral_extension(g)
            return g
        raise InvalidArgument(f"unknown group {name!r}")
    return _GROUPS[name]


def _cayley_from_reps(reps: Sequence[np.ndarray]) -> np.ndarray:
    n = len(reps)
    table = np.empty((n, n), dtype=np.int64)
    for i, a in enumerate(reps):
        for j, b in enumerate(reps):
            prod = a @ b
            match = [k for k, c in enumerate(reps) if np.max(np.abs(prod - c)) < 1e-9]
            if len(match) != 1:
                raise InvalidArgument("element products do not close over the element set")
            table[i, j] = match[0]
    return table


@lru_cache(maxsize=None)
def cyclic_group(n: int) -> Group:
    """C_n: rotations by 2*pi*i/n for i = 0..n-1."""
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidArgument(f"cyclic group order must be a positive integer, got {n!r}")
    name = f"C{n}"
    elements = []
    for i in range(n):
        rep = _exact_rotation(i, n)
        if i == 0:
            elements.append(GroupElement(0, "identity", 0.0, np.eye(2), "e", name))
        else:
            elements.append(
                GroupElement(i, "rotation", 2.0 * math.pi * i / n, rep, f"r{_degrees(i, n)}", name)
            )
    cayley = np.array([[(i + j) % n for j in range(n)] for i in range(n)], dtype=np.int64)
    return _register(Group(name, elements, cayley))


@lru_cache(maxsize=None)
def _dihedral(n: int) -> Group:
    name = f"D{n}"
    elements = []
    for i in range(n):
        base = cyclic_group(n).elements[i]
        elements.append(GroupElement(i, base.kind, base.theta, base.linear_rep, base.name, name))
    for i in range(n):
        base = cyclic_group(n).elements[i]
        rep = FLIP_X @ base.linear_rep
        label = "flipx" if i == 0 else f"flipx_{base.name}"
        elements.append(GroupElement(n + i, "reflection", base.theta, rep, label, name))
    cayley = _cayley_from_reps([g.linear_rep for g in elements])
    return _register(Group(name, elements, cayley))


def dihedral_extension(group: Group) -> Group:
    """Extend a cyclic rotation group C_n with the x-axis reflection, giving D_n.

    Element ``n + i`` is ``flip_x ∘ R(2*pi*i/n)``.
    """
    report = check_group_axioms(group)
    if not report.passed:
        raise InvalidArgument(f"input group fails axioms: {report.summary()}")
    if any(g.kind == "reflection" for g in group.elements):
        raise InvalidArgument("dihedral_extension expects a rotation-only group")
    n = len(group)
    if group.name != f"C{n}":
        raise InvalidArgument(f"expected a cyclic group C{n}, got {group.name}")
    return _dihedral(n)


def compose(g1: GroupElement, g2: GroupElement) -> GroupElement:
    """``g1 ∘ g2`` (apply g2 first)."""
    if g1.group_name != g2.group_name:
        raise InvalidArgument(f"cannot compose elements of {g1.group_name} and {g2.group_name}")
    return group_by_name(g1.group_name).compose(g1, g2)


def inverse(g: GroupElement) -> GroupElement:
    return group_by_name(g.group_name).inverse(g)


# ---------------------------------------------------------------------------
# axioms


@dataclass
class AxiomReport:
    group_name: str
    results: dict  # axiom -> (passed, counterexample or None)

    @property
    def passed(self) -> bool:
        return all(ok for ok, _ in self.results.values())

    def summary(self) -> str:
        lines = [f"group {self.group_name}:"]
        for axiom, (ok, witness) in self.results.items():
            line = f"  {axiom:<13} {'pass' if ok else 'FAIL'}"
            if witness is not None:
                line += f"  counterexample={witness}"
            lines.append(line)
        return "\n".join(lines)

    def to_record(self) -> dict:
        return {
            "group": self.group_name,
            "passed": self.passed,
            "axioms": {
                k: {"passed": ok, "counterexample": w} for k, (ok, w) in self.results.items()
            },
        }


def check_group_axioms(group: Group) -> AxiomReport:
    """Exhaustively test closure, identity, inverse and associativity on the table."""
    table = np.asarray(group.cayley)
    n = len(group.elements)
    results = {}

    closure_witness = None
    if table.shape != (n, n):
        closure_witness = {"shape": list(table.shape)}
    else:
        bad = np.argwhere((table < 0) | (table >= n))
        if bad.size:
            i, j = (int(v) for v in bad[0])
            closure_witness = {"a": i, "b": j, "product": int(table[i, j])}
    results["closure"] = (closure_witness is None, closure_witness)
    if closure_witness is not None:
        skipped = {"reason": "closure failed"}
        for axiom in ("identity", "inverse", "associativity"):
            results[axiom] = (False, skipped)
        return AxiomReport(group.name, results)

    ids = np.arange(n)
    identity = None
    for e in range(n):
        if np.array_equal(table[e], ids) and np.array_equal(table[:, e], ids):
            identity = e
            break
    results["identity"] = (identity is not None, None if identity is not None else {"candidates": []})

    inv_witness = None
    if identity is None:
        inv_witness = {"reason": "no identity"}
    else:
        for g in range(n):
            if np.count_nonzero(table[g] == identity) != 1:
                inv_witness = {"element": g}
                break
    results["inverse"] = (inv_witness is None, inv_witness)

    left = table[table[:, :, None], ids[None, None, :]]  # (a∘b)∘c
    right = table[ids[:, None, None], table[None, :, :]]  # a∘(b∘c)
    bad = np.argwhere(left != right)
    assoc_witness = None
    if bad.size:
        a, b, c = (int(v) for v in bad[0])
        assoc_witness = {"a": a, "b": b, "c": c}
    results["associativity"] = (assoc_witness is None, assoc_witness)
    return AxiomReport(group.name, results)


# ---------------------------------------------------------------------------
# layouts


@dataclass(frozen=True)
class Slice:
    kind: str  # "geometric2d" | "invariant"
    length: int
    label: str = ""


def geo(label: str = "") -> Slice:
    return Slice("geometric2d", 2, label)


def inv(length: int, label: str = "") -> Slice:
    return Slice("invariant", length, label)


@dataclass(frozen=True, eq=False)
class ObservationLayout:
    """Ordered tagged slices of a flat observation or state vector."""

    slices: tuple

    def __post_init__(self):
        object.__setattr__(self, "slices", tuple(self.slices))
        for s in self.slices:
            if s.kind == "geometric2d" and s.length != 2:
                raise InvalidArgument("geometric2d slices have length 2")
            if s.kind not in ("geometric2d", "invariant"):
                raise InvalidArgument(f"unknown slice kind {s.kind!r}")
        starts = np.cumsum([0] + [s.length for s in self.slices])
        geo_idx = [
            (int(starts[k]), int(starts[k]) + 1)
            for k, s in enumerate(self.slices)
            if s.kind == "geometric2d"
        ]
        object.__setattr__(self, "size", int(starts[-1]))
        object.__setattr__(self, "geo_index", np.array(geo_idx, dtype=np.int64).reshape(-1, 2))

    def matrix(self, g: GroupElement) -> np.ndarray:
        """Dense matrix of the state map for ``g`` (block diagonal)."""
        m = np.eye(self.size)
        for i, j in self.geo_index:
            m[i : j + 1, i : j + 1] = g.linear_rep
        return m


@dataclass(frozen=True, eq=False)
class ActionLayout:
    """Either ``discrete`` with one canonical displacement per action, or ``continuous2d``."""

    kind: str
    displacements: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind == "discrete":
            if self.displacements is None:
                raise InvalidArgument("discrete layouts need per-action displacements")
            d = np.asarray(self.displacements, dtype=np.float64)
            object.__setattr__(self, "displacements", d)
            object.__setattr__(self, "_perms", {})
        elif self.kind != "continuous2d":
            raise InvalidArgument(f"unknown action layout kind {self.kind!r}")

    @property
    def n_actions(self) -> int:
        return len(self.displacements) if self.kind == "discrete" else 0

    @property
    def dim(self) -> int:
        return 2 if self.kind == "continuous2d" else 1

    def permutation(self, g: GroupElement) -> np.ndarray:
        """``perm[a]`` is the index of K_g applied to action ``a``."""
        if self.kind != "discrete":
            raise InvalidArgument("continuous layouts have no permutation")
        key = (g.group_name, g.id)
        perm = self._perms.get(key)
        if perm is None:
            moved = self.displacements @ g.linear_rep.T
            perm = np.empty(len(moved), dtype=np.int64)
            for a, d in enumerate(moved):
                err = np.max(np.abs(self.displacements - d), axis=1)
                hit = np.flatnonzero(err < 1e-9)
                if hit.size != 1:
                    raise InvalidArgument(
                        f"{g.name} maps action {a} outside the discrete action set"
                    )
                perm[a] = hit[0]
            if len(set(perm.tolist())) != len(perm):
                raise InvalidArgument(f"{g.name} does not permute the action set")
            perm.setflags(write=False)
            self._perms[key] = perm
        return perm


MPE_MOVES = np.array([[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
"""no-op, right, left, up, down"""


def discrete_moves() -> ActionLayout:
    return ActionLayout("discrete", MPE_MOVES)


def continuous_2d() -> ActionLayout:
    return ActionLayout("continuous2d")


# ---------------------------------------------------------------------------
# transforms


def apply_state_transform(g: GroupElement, state, layout: ObservationLayout) -> np.ndarray:
    """Rotate/reflect every geometric slice of ``state`` (last axis) by ``g``."""
    state = np.asarray(state, dtype=np.float64)
    if state.shape[-1] != layout.size:
        raise LayoutMismatch(f"state has length {state.shape[-1]}, layout declares {layout.size}")
    out = state.copy()
    if g.is_identity or layout.geo_index.size == 0:
        return out
    blocks = state[..., layout.geo_index]  # (..., m, 2)
    out[..., layout.geo_index] = blocks @ g.linear_rep.T
    return out


def apply_action_transform(g: GroupElement, action, layout: ActionLayout, *, logits: bool = False):
    """K_g on actions.

    Discrete: integer indices (any shape) are mapped through the permutation. With
    ``logits=True`` the last axis is a per-action vector and is permuted so that
    entry ``perm[a]`` of the output holds entry ``a`` of the input.
    Continuous: the last axis (length 2) is multiplied by the planar rep.
    """
    if layout.kind == "discrete":
        perm = layout.permutation(g)
        k = layout.n_actions
        if logits:
            vec = np.asarray(action)
            if vec.shape[-1] != k:
                raise LayoutMismatch(f"expected {k} action scores, got {vec.shape[-1]}")
            out = np.empty_like(vec)
            out[..., perm] = vec
            return out
        idx = np.asarray(action)
        if not np.issubdtype(idx.dtype, np.integer):
            if not np.all(idx == np.round(idx)):
                raise InvalidArgument("discrete actions must be integers")
            idx = idx.astype(np.int64)
        if np.any((idx < 0) | (idx >= k)):
            raise InvalidArgument(f"discrete action out of range [0, {k})")
        out = perm[idx]
        return int(out) if out.ndim == 0 else out
    vec = np.asarray(action, dtype=np.float64)
    if vec.shape[-1] != 2:
        raise LayoutMismatch(f"continuous actions have length 2, got {vec.shape[-1]}")
    return vec @ g.linear_rep.T


@dataclass(frozen=True)
class TransformPair:
    """h = (L_g, K_g) bound to concrete layouts."""

    element: GroupElement
    obs_layout: ObservationLayout
    act_layout: ActionLayout

    def state(self, s):
        return apply_state_transform(self.element, s, self.obs_layout)

    def action(self, a):
        return apply_action_transform(self.element, a, self.act_layout)

    def inverse(self) -> "TransformPair":
        return TransformPair(inverse(self.element), self.obs_layout, self.act_layout)


def representation_deviations(group: Group, layout: ObservationLayout, num_vectors: int = 10_000,
                              seed=0) -> dict:
    """Largest errors of the representation properties on random vectors.

    Returns ``{"orthogonality", "homomorphism", "state_homomorphism",
    "state_round_trip", "action_round_trip"}``; each should be ~1e-16.
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((num_vectors, layout.size))
    a = rng.standard_normal((num_vectors, 2))
    out = dict.fromkeys(
        ("orthogonality", "homomorphism", "state_homomorphism", "state_round_trip", "action_round_trip"), 0.0
    )
    for g1 in group.elements:
        R = g1.linear_rep
        out["orthogonality"] = max(out["orthogonality"], float(np.max(np.abs(R.T @ R - np.eye(2)))))
        inv_g = group.inverse(g1)
        back = apply_state_transform(inv_g, apply_state_transform(g1, x, layout), layout)
        out["state_round_trip"] = max(out["state_round_trip"], float(np.max(np.abs(back - x))))
        back_a = (a @ R.T) @ inv_g.linear_rep.T
        out["action_round_trip"] = max(out["action_round_trip"], float(np.max(np.abs(back_a - a))))
        for g2 in group.elements:
            g12 = group.compose(g1, g2)
            dev = np.max(np.abs(g12.linear_rep - R @ g2.linear_rep))
            out["homomorphism"] = max(out["homomorphism"], float(dev))
            two = apply_state_transform(g1, apply_state_transform(g2, x, layout), layout)
            dev = np.max(np.abs(two - apply_state_transform(g12, x, layout)))
            out["state_homomorphism"] = max(out["state_homomorphism"], float(dev))
    return out
