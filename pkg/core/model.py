"""
MDP data model
--------------
Countable MDPs are given by a successor oracle and explored lazily; finite
MDPs are dense immutable tables used by the exact solvers. Probabilities,
rewards and values are sympy Rationals throughout.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Hashable, Iterator, NamedTuple, Optional

import sympy as sp

from core.errors import BoundViolation, EmptySuccessors, InfiniteBubble, MdpLabError, OracleFailure

logger = logging.getLogger(__name__)

StateId = Hashable

ZERO = sp.Integer(0)
ONE = sp.Integer(1)


class Key(NamedTuple):
    """Canonical key of a generated state: family name + integer coordinates."""

    family: str
    coords: tuple = ()

    def __str__(self):
        if not self.coords:
            return self.family
        return f"{self.family}[{','.join(str(c) for c in self.coords)}]"


class StateKind(str, Enum):
    CONTROLLED = "controlled"
    RANDOM = "random"


@dataclass(frozen=True)
class TailLabel:
    """
    Closed form of the strategy-independent future of a sink state.

    `transient` marks a chain of fresh states (no state repeats); `member`
    makes every tail transition count as a member of every declared set.
    """

    limsup: sp.Rational
    liminf: sp.Rational
    transient: bool = False
    member: bool = False

    def __post_init__(self):
        object.__setattr__(self, "limsup", sp.Rational(self.limsup))
        object.__setattr__(self, "liminf", sp.Rational(self.liminf))
        if self.liminf > self.limsup:
            raise ValueError(f"tail liminf {self.liminf} above limsup {self.limsup}")


LOSING_CHAIN = TailLabel(-1, -1, transient=True)


@dataclass(frozen=True)
class Edge:
    target: StateId
    reward: sp.Rational
    prob: Optional[sp.Rational] = None
    origin: Optional["Transition"] = None

    def __post_init__(self):
        object.__setattr__(self, "reward", sp.Rational(self.reward))
        if self.prob is not None:
            object.__setattr__(self, "prob", sp.Rational(self.prob))


@dataclass(frozen=True)
class Transition:
    """
    A transition is identified by (source, index). `origin` is the
    transition of the model this one was built from; `forced` overrides set
    membership for sink machinery.
    """

    source: StateId
    index: int
    target: StateId
    reward: sp.Rational
    origin: Optional["Transition"] = None
    forced: Optional[bool] = None

    def root(self):
        t = self
        while t.origin is not None:
            t = t.origin
        return t

    @property
    def ident(self):
        return (self.source, self.index)


@dataclass(frozen=True)
class Branching:
    """
    Successor data of one state. Finite branchings list their edges; infinite
    ones provide `generator(i)` for the i-th edge (i >= 0).
    """

    kind: StateKind
    edges: tuple = ()
    generator: Optional[Callable[[int], Edge]] = None

    @property
    def is_finite(self):
        return self.generator is None

    def __len__(self):
        if not self.is_finite:
            raise InfiniteBubble("infinite branching has no length")
        return len(self.edges)

    def edge(self, i):
        if self.is_finite:
            return self.edges[i]
        return self.generator(i)

    def prefix(self, n):
        if self.is_finite:
            return self.edges[:n]
        return tuple(self.generator(i) for i in range(n))

    def finite_edges(self):
        if not self.is_finite:
            raise InfiniteBubble("state is infinitely branching")
        return self.edges

    def tail_mass(self, n):
        """Probability mass of random edges with index >= n, exactly."""
        if self.kind is not StateKind.RANDOM:
            raise ValueError("tail mass is defined for random states only")
        return ONE - sum((e.prob for e in self.prefix(n)), ZERO)

    def iter_edges(self, limit=None) -> Iterator[tuple[int, Edge]]:
        if self.is_finite:
            yield from enumerate(self.edges)
            return
        i = 0
        while limit is None or i < limit:
            yield i, self.generator(i)
            i += 1


def _check_reward(s, k, reward, bound):
    if abs(reward) > bound:
        raise BoundViolation(f"|reward| {abs(reward)} on {s!r}#{k} exceeds the declared bound {bound}")


class _BoundedGenerator:
    """Edge generator of an infinite branching that checks each edge it produces."""

    def __init__(self, state, generator, bound):
        self.state = state
        self.generator = generator
        self.bound = bound

    def __call__(self, k):
        e = self.generator(k)
        _check_reward(self.state, k, e.reward, self.bound)
        return e


def within_bound(s, branching, bound):
    """Finite edges are checked now, generated edges as they are produced."""
    if branching.is_finite:
        for k, e in enumerate(branching.edges):
            _check_reward(s, k, e.reward, bound)
        return branching
    g = branching.generator
    if isinstance(g, _BoundedGenerator) and g.bound <= bound:
        return branching
    return Branching(branching.kind, generator=_BoundedGenerator(s, g, bound))


def widened_bound(bound, reward):
    """Bound of a derived model that adds edges of reward `reward`; None stays None."""
    return None if bound is None else max(bound, abs(sp.Rational(reward)))


def controlled(*pairs):
    return Branching(StateKind.CONTROLLED, tuple(Edge(t, r) for t, r in pairs))


def random(*triples):
    return Branching(StateKind.RANDOM, tuple(Edge(t, r, p) for t, p, r in triples))


class CountableMdp:
    """
    Lazily generated MDP. The oracle maps a state to its Branching and must be
    deterministic; results are memoized.
    """

    def __init__(
        self,
        initial,
        oracle,
        *,
        name="mdp",
        params=None,
        reward_bound=None,
        tail=None,
        finitely_branching=True,
        universally_transient=False,
        acyclic=False,
        state_reward=None,
    ):
        self.initial = initial
        self._oracle = oracle
        self._tail = tail
        self.name = name
        self.params = dict(params or {})
        self.reward_bound = None if reward_bound is None else sp.Rational(reward_bound)
        self.finitely_branching = finitely_branching
        self.universally_transient = universally_transient
        self.acyclic = acyclic
        self.state_reward = state_reward
        self._memo = {}

    def __repr__(self):
        return f"CountableMdp({self.name}, initial={self.initial!r})"

    def successors(self, s) -> Branching:
        cached = self._memo.get(s)
        if cached is not None:
            return cached
        try:
            result = self._oracle(s)
        except MdpLabError:
            raise
        except Exception as e:
            raise OracleFailure(s, e) from e
        if result.is_finite and not result.edges:
            raise EmptySuccessors(s)
        if self.reward_bound is not None:
            result = within_bound(s, result, self.reward_bound)
        # setdefault keeps concurrent inserts idempotent
        return self._memo.setdefault(s, result)

    def kind(self, s) -> StateKind:
        return self.successors(s).kind

    def tail_label(self, s) -> Optional[TailLabel]:
        return None if self._tail is None else self._tail(s)

    def transition(self, s, i) -> Transition:
        e = self.successors(s).edge(i)
        tail = self.tail_label(s)
        return Transition(s, i, e.target, e.reward, e.origin, None if tail is None else tail.member)

    def transitions(self, s, limit=None):
        branching = self.successors(s)
        tail = self.tail_label(s)
        forced = None if tail is None else tail.member
        for i, e in branching.iter_edges(limit):
            yield Transition(s, i, e.target, e.reward, e.origin, forced)

    def derive(self, **changes):
        """Copy with some flags or metadata replaced; the oracle is shared."""
        kwargs = dict(
            name=self.name,
            params=self.params,
            reward_bound=self.reward_bound,
            tail=self._tail,
            finitely_branching=self.finitely_branching,
            universally_transient=self.universally_transient,
            acyclic=self.acyclic,
            state_reward=self.state_reward,
        )
        initial = changes.pop("initial", self.initial)
        oracle = changes.pop("oracle", self._oracle)
        kwargs.update(changes)
        return CountableMdp(initial, oracle, **kwargs)


# ----------------------------
# Finite MDPs
# ----------------------------

@dataclass(frozen=True)
class FiniteEdge:
    target: int
    reward: sp.Rational
    prob: Optional[sp.Rational] = None
    origin: Optional[Transition] = None


@dataclass(frozen=True)
class FiniteState:
    label: StateId
    kind: StateKind
    edges: tuple
    tail: Optional[TailLabel] = None


@dataclass(frozen=True)
class FiniteMdp:
    states: tuple
    initial: int = 0
    name: str = "finite"
    index: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        lookup = {}
        for i, st in enumerate(self.states):
            if st.label in lookup:
                raise ValueError(f"duplicate state label {st.label!r}")
            lookup[st.label] = i
        object.__setattr__(self, "index", lookup)

    @classmethod
    def build(cls, table, initial, name="finite", tails=None):
        """
        table: {label: (kind, [(target_label, reward)] or [(target_label, prob, reward)])}
        Controlled entries are (target, reward); random entries (target, prob, reward).
        """
        labels = list(table)
        position = {label: i for i, label in enumerate(labels)}
        tails = tails or {}
        states = []
        for label in labels:
            kind, entries = table[label]
            kind = StateKind(kind)
            edges = []
            for entry in entries:
                if kind is StateKind.CONTROLLED:
                    target, reward = entry
                    edges.append(FiniteEdge(position[target], sp.Rational(reward)))
                else:
                    target, prob, reward = entry
                    edges.append(FiniteEdge(position[target], sp.Rational(reward), sp.Rational(prob)))
            states.append(FiniteState(label, kind, tuple(edges), tails.get(label)))
        return cls(tuple(states), position[initial], name)

    def __len__(self):
        return len(self.states)

    @property
    def labels(self):
        return [st.label for st in self.states]

    def kind(self, i):
        return self.states[i].kind

    def edges(self, i):
        return self.states[i].edges

    def state_index(self, label):
        return self.index[label]

    def transition(self, i, k) -> Transition:
        st = self.states[i]
        e = st.edges[k]
        forced = None if st.tail is None else st.tail.member
        return Transition(st.label, k, self.states[e.target].label, e.reward, e.origin, forced)

    def all_transitions(self):
        for i, st in enumerate(self.states):
            for k in range(len(st.edges)):
                yield i, k, self.transition(i, k)

    def with_initial(self, i):
        return FiniteMdp(self.states, i, self.name)

    def with_rewards(self, reward_of):
        """Copy with reward_of(i, k, edge) replacing every transition reward."""
        states = []
        for i, st in enumerate(self.states):
            edges = tuple(
                FiniteEdge(e.target, sp.Rational(reward_of(i, k, e)), e.prob, e.origin)
                for k, e in enumerate(st.edges)
            )
            states.append(FiniteState(st.label, st.kind, edges, st.tail))
        return FiniteMdp(tuple(states), self.initial, self.name)

    def to_countable(self) -> CountableMdp:
        states = self.states
        index = self.index

        def oracle(label):
            st = states[index[label]]
            return Branching(
                st.kind,
                tuple(Edge(states[e.target].label, e.reward, e.prob, e.origin) for e in st.edges),
            )

        def tail(label):
            i = index.get(label)
            return None if i is None else states[i].tail

        return CountableMdp(
            states[self.initial].label,
            oracle,
            name=self.name,
            tail=tail,
            finitely_branching=True,
        )


def validate(mdp: FiniteMdp, reward_bound=None):
    """
    Check distribution sums, successor non-emptiness and kinds, and rewards
    against `reward_bound` when one is declared.
    Returns a list of violation strings; empty means valid.
    """
    violations = []
    n = len(mdp.states)
    if not 0 <= mdp.initial < n:
        violations.append(f"initial index {mdp.initial} out of range")
    for i, st in enumerate(mdp.states):
        name = str(st.label)
        if not isinstance(st.kind, StateKind):
            violations.append(f"{name}: unknown kind {st.kind!r}")
            continue
        if not st.edges:
            violations.append(f"{name}: no successors")
            continue
        for k, e in enumerate(st.edges):
            if not 0 <= e.target < n:
                violations.append(f"{name}#{k}: target {e.target} out of range")
            if reward_bound is not None and abs(e.reward) > reward_bound:
                violations.append(f"{name}#{k}: reward {e.reward} outside ±{reward_bound}")
        if st.kind is StateKind.RANDOM:
            missing = [k for k, e in enumerate(st.edges) if e.prob is None]
            if missing:
                violations.append(f"{name}: random edges without probability {missing}")
                continue
            for k, e in enumerate(st.edges):
                if not 0 < e.prob <= 1:
                    violations.append(f"{name}#{k}: probability {e.prob} outside (0, 1]")
            total = sum((e.prob for e in st.edges), ZERO)
            if total != ONE:
                violations.append(f"{name}: sum {total} ≠ 1")
        else:
            stray = [k for k, e in enumerate(st.edges) if e.prob is not None]
            if stray:
                violations.append(f"{name}: controlled edges carry probabilities {stray}")
    return violations


# ----------------------------
# Runs
# ----------------------------

@dataclass
class RunPrefix:
    """s0 e0 s1 e1 ... as parallel lists; modes[i] is the memory before step i."""

    states: list = field(default_factory=list)
    transitions: list = field(default_factory=list)
    modes: list = field(default_factory=list)
    absorbed: Optional[TailLabel] = None
    overflowed: bool = False

    @property
    def rewards(self):
        return [t.reward for t in self.transitions]

    def __len__(self):
        return len(self.transitions)

    def is_consistent(self, mdp: CountableMdp):
        if len(self.states) != len(self.transitions) + 1:
            return False
        for s, t, nxt in zip(self.states, self.transitions, self.states[1:]):
            if t.source != s or t.target != nxt:
                return False
            e = mdp.successors(s).edge(t.index)
            if e.target != nxt or e.reward != t.reward:
                return False
        return True


@dataclass(frozen=True)
class Lasso:
    stem: tuple
    cycle: tuple

    def __post_init__(self):
        if not self.cycle:
            raise ValueError("lasso cycle must be nonempty")
        object.__setattr__(self, "stem", tuple(self.stem))
        object.__setattr__(self, "cycle", tuple(self.cycle))
