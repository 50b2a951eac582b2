"""
Objective algebra
-----------------
Objectives are tagged run predicates. Transition sets and families are given
by membership oracles so they can range over infinite models.

CoBuchi(A) reads as FG A (eventually only A-transitions).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import sympy as sp

from tools.calculator import deficit_level


class Verdict(str, Enum):
    SAT = "sat"
    VIOL = "viol"
    UNDETERMINED = "undetermined"


class ObjectiveKind(str, Enum):
    REACH = "reach"
    REACH_WITHIN = "reach_within"
    SAFETY = "safety"
    BUCHI = "buchi"
    COBUCHI = "cobuchi"
    GF_FAMILY = "gf_family"
    FG_FAMILY = "fg_family"
    LIMSUP_GEQ0 = "limsup_geq0"
    LIMINF_GEQ0 = "liminf_geq0"
    TRANSIENCE = "transience"
    AND = "and"


SHIFT_INVARIANT = {
    ObjectiveKind.BUCHI,
    ObjectiveKind.COBUCHI,
    ObjectiveKind.GF_FAMILY,
    ObjectiveKind.FG_FAMILY,
    ObjectiveKind.LIMSUP_GEQ0,
    ObjectiveKind.LIMINF_GEQ0,
    ObjectiveKind.TRANSIENCE,
}


@dataclass(frozen=True)
class StateSet:
    predicate: Callable = field(compare=True)
    name: str = "T"

    @classmethod
    def of(cls, states, name="T"):
        members = frozenset(states)
        return cls(members.__contains__, name)

    def holds(self, state, tail=None):
        if tail is not None:
            return tail.member
        return bool(self.predicate(state))


@dataclass(frozen=True)
class TransitionSet:
    predicate: Callable = field(compare=True)
    name: str = "A"

    @classmethod
    def of(cls, idents, name="A"):
        """Membership by (source, index) of the root transition."""
        members = frozenset(idents)
        return cls(lambda t: t.ident in members, name)

    @classmethod
    def everything(cls):
        return cls(lambda t: True, "all")

    @classmethod
    def nothing(cls):
        return cls(lambda t: False, "none")

    @classmethod
    def rewards_at_least(cls, bound=0):
        bound = sp.Rational(bound)
        return _DirectSet(lambda t: t.reward >= bound, f"r>={bound}")

    @classmethod
    def local(cls, idents, name="local"):
        """Membership by (source, index) of the transition itself, ignoring origins."""
        members = frozenset(idents)
        return _DirectSet(lambda t: t.ident in members, name)

    def __contains__(self, t):
        if t.forced is not None:
            return t.forced
        return bool(self.predicate(t.root()))


class _DirectSet(TransitionSet):
    """Reads the transition itself: sink rewards and local identities are meaningful."""

    def __contains__(self, t):
        return bool(self.predicate(t))


def reward_level(reward):
    """max{i >= 0 : reward >= -2^-i}; oo iff reward >= 0; None below -1."""
    reward = sp.Rational(reward)
    if reward >= 0:
        return sp.oo
    return deficit_level(-reward)


@dataclass(frozen=True)
class MonotoneFamily:
    """
    A_0 ⊇ A_1 ⊇ ... represented by t ↦ max{i : t ∈ A_i} (oo, int, or None).

    `sets` is an optional explicit i ↦ A_i oracle; when given, spot_check
    compares it against the level function.
    """

    level_fn: Callable
    name: str = "family"
    reward_based: bool = False
    sets: Optional[Callable] = field(default=None, compare=False)

    @classmethod
    def from_rewards(cls):
        return cls(lambda t: reward_level(t.reward), "from_rewards", reward_based=True)

    @classmethod
    def table(cls, levels, name="table"):
        """levels: {(source, index): level} on root transitions; absent means level none."""
        levels = dict(levels)
        return cls(lambda t: levels.get(t.ident), name)

    @classmethod
    def constant(cls, transition_set, name=None):
        """Every A_i equal to one set."""
        return cls(lambda t: sp.oo if t in transition_set else None, name or f"const({transition_set.name})")

    def level(self, t):
        if self.reward_based:
            return reward_level(t.reward)
        if t.forced is not None:
            return sp.oo if t.forced else None
        return self.level_fn(t.root())

    def contains(self, i, t):
        lv = self.level(t)
        return lv is not None and lv >= i

    def member_set(self, i):
        family = self
        return _FamilyLevelSet(family, i)

    def spot_check(self, transitions, upto=8):
        """Monotonicity and level/set consistency on the given transitions."""
        problems = []
        for t in transitions:
            lv = self.level(t)
            if lv is not None and lv != sp.oo and (not isinstance(lv, int) or lv < 0):
                problems.append(f"{t.ident}: bad level {lv!r}")
                continue
            if self.sets is None:
                continue
            previous = True
            for i in range(upto + 1):
                inside = t in self.sets(i)
                if inside and not previous:
                    problems.append(f"{t.ident}: in A_{i} but not in A_{i - 1}")
                if inside != self.contains(i, t):
                    problems.append(f"{t.ident}: level {lv} disagrees with A_{i}")
                previous = inside
        return problems


class _FamilyLevelSet(TransitionSet):
    def __init__(self, family, i):
        object.__setattr__(self, "predicate", None)
        object.__setattr__(self, "name", f"{family.name}_{i}")
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "i", i)

    def __contains__(self, t):
        return self.family.contains(self.i, t)

    def __eq__(self, other):
        return isinstance(other, _FamilyLevelSet) and other.family is self.family and other.i == self.i

    def __hash__(self):
        return hash((id(self.family), self.i))


@dataclass(frozen=True)
class Objective:
    kind: ObjectiveKind
    targets: Optional[StateSet] = None
    steps: Optional[int] = None
    transitions: Optional[TransitionSet] = None
    family: Optional[MonotoneFamily] = None
    parts: tuple = ()

    def __str__(self):
        if self.kind is ObjectiveKind.AND:
            return " ∧ ".join(str(p) for p in self.parts)
        arg = self.targets or self.transitions or self.family
        if arg is None:
            return self.kind.value
        suffix = f",{self.steps}" if self.steps is not None else ""
        return f"{self.kind.value}({arg.name}{suffix})"

    @classmethod
    def reach(cls, targets):
        return cls(ObjectiveKind.REACH, targets=_as_state_set(targets))

    @classmethod
    def reach_within(cls, targets, k):
        if k < 0:
            raise ValueError("step bound must be >= 0")
        return cls(ObjectiveKind.REACH_WITHIN, targets=_as_state_set(targets), steps=int(k))

    @classmethod
    def safety(cls, allowed):
        return cls(ObjectiveKind.SAFETY, transitions=allowed)

    @classmethod
    def buchi(cls, transitions):
        return cls(ObjectiveKind.BUCHI, transitions=transitions)

    @classmethod
    def cobuchi(cls, transitions):
        return cls(ObjectiveKind.COBUCHI, transitions=transitions)

    @classmethod
    def gf_family(cls, family):
        return cls(ObjectiveKind.GF_FAMILY, family=family)

    @classmethod
    def fg_family(cls, family):
        return cls(ObjectiveKind.FG_FAMILY, family=family)

    @classmethod
    def limsup_geq0(cls):
        return cls(ObjectiveKind.LIMSUP_GEQ0)

    @classmethod
    def liminf_geq0(cls):
        return cls(ObjectiveKind.LIMINF_GEQ0)

    @classmethod
    def transience(cls):
        return cls(ObjectiveKind.TRANSIENCE)

    @classmethod
    def conj(cls, *parts):
        flat = []
        for p in parts:
            for q in (p.parts if p.kind is ObjectiveKind.AND else (p,)):
                if q not in flat:
                    flat.append(q)
        if len(flat) == 1:
            return flat[0]
        return cls(ObjectiveKind.AND, parts=tuple(flat))


@dataclass(frozen=True)
class ExpectedPayoff:
    """E(limsup) or E(liminf) of the reward sequence; a measure, not a predicate."""

    which: str

    def __post_init__(self):
        if self.which not in ("limsup", "liminf"):
            raise ValueError(f"expected payoff is limsup or liminf, not {self.which!r}")

    def __str__(self):
        return f"E({self.which})"


def _as_state_set(targets):
    if isinstance(targets, StateSet):
        return targets
    if callable(targets):
        return StateSet(targets)
    return StateSet.of(targets)


def is_shift_invariant(obj):
    if obj.kind is ObjectiveKind.AND:
        return all(is_shift_invariant(p) for p in obj.parts)
    return obj.kind in SHIFT_INVARIANT


def is_conditionable(obj):
    """Objectives whose values telescope along paths: shift-invariant ones and Reach."""
    return obj.kind is ObjectiveKind.REACH or is_shift_invariant(obj)
