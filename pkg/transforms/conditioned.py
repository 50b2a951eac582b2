"""
Conditioned MDP M*
------------------
Rescales M by the value function of a shift-invariant objective so that a
strategy's attainment in M* is its attainment in M divided by val(s0).
States of value 0 disappear; each controlled move s -> t passes a random
gate that continues to t with probability val(t)/val(s) and otherwise falls
into the losing chain s_⊥.
"""

from __future__ import annotations

import logging
from typing import Hashable, NamedTuple

import sympy as sp

from config.settings import Config
from core.bubble import FrontierPolicy, truncate
from core.errors import InvalidValues, NotShiftInvariant, ZeroValueStart
from core.model import (
    LOSING_CHAIN,
    Branching,
    CountableMdp,
    Edge,
    Key,
    StateKind,
    TailLabel,
    Transition,
    widened_bound,
)
from objectives.objective import ObjectiveKind, is_conditionable

logger = logging.getLogger(__name__)

ZERO = sp.Integer(0)
ONE = sp.Integer(1)
BOTTOM_REWARD = sp.Integer(-1)


class Gate(NamedTuple):
    """Intermediate random state of the controlled move `source#index`."""

    source: Hashable
    index: int

    def __str__(self):
        return f"gate({self.source}#{self.index})"


def _bottom(n):
    return Key("bot", (n,))


def _value_oracle(vals):
    if callable(vals):
        return lambda s: sp.Rational(vals(s))
    return lambda s: sp.Rational(vals.get(s, 0))


def _mentions_transience(obj):
    if obj.kind is ObjectiveKind.AND:
        return any(_mentions_transience(p) for p in obj.parts)
    return obj.kind is ObjectiveKind.TRANSIENCE


def conditioned_mdp(mdp: CountableMdp, vals, obj, scan_limit=None) -> CountableMdp:
    """
    vals: ValueOracle (callable or dict) of `obj` on `mdp`.

    Raises NotShiftInvariant, ZeroValueStart, and InvalidValues when a
    controlled ratio exceeds 1 or a random distribution fails to rescale to 1.
    """
    if not is_conditionable(obj):
        raise NotShiftInvariant(f"{obj} is not shift invariant")
    value = _value_oracle(vals)
    v0 = value(mdp.initial)
    if v0 <= 0:
        raise ZeroValueStart(f"val({mdp.initial!r}) = {v0}")
    if v0 > 1:
        raise InvalidValues(f"val({mdp.initial!r}) = {v0} > 1")
    scan_limit = Config.MC_MAX_BRANCH if scan_limit is None else scan_limit
    # a fresh chain satisfies Transience, so s_⊥ loops in place for it
    bottom_tail = TailLabel(-1, -1) if _mentions_transience(obj) else LOSING_CHAIN

    # the gate repeats the move's reward, so both edges of a gated move carry it
    # and the rewards seen infinitely often are those of M
    def controlled_gate(s, k, e):
        origin = Transition(s, k, e.target, e.reward, e.origin)
        return Edge(Gate(s, k), e.reward, None, origin)

    def oracle(state):
        if isinstance(state, Key) and state.family == "bot":
            (n,) = state.coords
            target = _bottom(n + 1) if bottom_tail.transient else state
            return Branching(StateKind.CONTROLLED, (Edge(target, BOTTOM_REWARD),))

        if isinstance(state, Gate):
            s, k = state
            e = mdp.successors(s).edge(k)
            ratio = value(e.target) / value(s)
            if ratio > 1:
                raise InvalidValues(f"val({e.target!r}) / val({s!r}) = {ratio} > 1")
            origin = Transition(s, k, e.target, e.reward, e.origin)
            edges = []
            if ratio > 0:
                edges.append(Edge(e.target, e.reward, ratio, origin))
            if ratio < 1:
                edges.append(Edge(_bottom(0), e.reward, 1 - ratio))
            return Branching(StateKind.RANDOM, tuple(edges))

        vs = value(state)
        if vs <= 0:
            raise InvalidValues(f"state {state!r} of value 0 is not part of M*")
        branching = mdp.successors(state)
        if branching.kind is StateKind.CONTROLLED:
            if branching.is_finite:
                return Branching(
                    StateKind.CONTROLLED,
                    tuple(controlled_gate(state, k, e) for k, e in enumerate(branching.edges)),
                )
            return Branching(StateKind.CONTROLLED, generator=lambda k: controlled_gate(state, k, branching.edge(k)))

        def scaled(k, e):
            origin = Transition(state, k, e.target, e.reward, e.origin)
            return Edge(e.target, e.reward, e.prob * value(e.target) / vs, origin)

        if branching.is_finite:
            edges = tuple(scaled(k, e) for k, e in enumerate(branching.edges) if value(e.target) > 0)
            total = sum((e.prob for e in edges), ZERO)
            if total != ONE:
                raise InvalidValues(f"rescaled distribution at {state!r} sums to {total}")
            return Branching(StateKind.RANDOM, edges)

        positive = []

        def nth_positive(n):
            k = positive[-1] + 1 if positive else 0
            while len(positive) <= n:
                if k >= scan_limit:
                    raise InvalidValues(f"no positive-value successor #{n} at {state!r} within {scan_limit}")
                if value(branching.edge(k).target) > 0:
                    positive.append(k)
                k += 1
            k = positive[n]
            return scaled(k, branching.edge(k))

        return Branching(StateKind.RANDOM, generator=nth_positive)

    def tail(state):
        if isinstance(state, Key) and state.family == "bot":
            return bottom_tail
        if isinstance(state, Gate):
            return None
        return mdp.tail_label(state)

    logger.debug("conditioned %s w.r.t. %s, val(s0) = %s", mdp.name, obj, v0)
    return CountableMdp(
        mdp.initial,
        oracle,
        name=f"{mdp.name}*",
        params=mdp.params,
        reward_bound=widened_bound(mdp.reward_bound, BOTTOM_REWARD),
        tail=tail,
        finitely_branching=mdp.finitely_branching,
        universally_transient=mdp.universally_transient,
        acyclic=False,
    )


def condition_finite(finite, values, obj, start=None):
    """
    Conditioned version of a FiniteMdp as a FiniteMdp (plus its truncation
    record). values: tuple indexed like `finite`.
    """
    start = finite.initial if start is None else start
    labels = finite.labels
    by_label = {labels[i]: sp.Rational(v) for i, v in enumerate(values)}
    source = finite.with_initial(start).to_countable()
    star = conditioned_mdp(source, by_label, obj)
    depth = 2 * len(finite) + 2
    return truncate(star, depth, FrontierPolicy.LOSING, max_states=4 * len(finite) + sum(
        len(finite.edges(i)) for i in range(len(finite))) + 8)


def transience_plus_safety(mdp: CountableMdp, allowed) -> CountableMdp:
    """
    Redirect every transition outside `allowed` into a losing self-loop sink,
    so Transience ∩ G(allowed) in M becomes plain Transience.
    The redirected edge keeps its origin.
    """

    def redirect(s, k, e):
        t = Transition(s, k, e.target, e.reward, e.origin)
        if t in allowed:
            return Edge(e.target, e.reward, e.prob, t)
        return Edge(_bottom(0), e.reward, e.prob, t)

    def oracle(state):
        if isinstance(state, Key) and state.family == "bot":
            return Branching(StateKind.CONTROLLED, (Edge(state, BOTTOM_REWARD),))
        branching = mdp.successors(state)
        if mdp.tail_label(state) is not None:
            return branching
        if branching.is_finite:
            return Branching(branching.kind, tuple(redirect(state, k, e) for k, e in enumerate(branching.edges)))
        return Branching(branching.kind, generator=lambda k: redirect(state, k, branching.edge(k)))

    def tail(state):
        if isinstance(state, Key) and state.family == "bot":
            return TailLabel(-1, -1, transient=False)
        return mdp.tail_label(state)

    return mdp.derive(
        oracle=oracle,
        tail=tail,
        name=f"{mdp.name}+safe",
        reward_bound=widened_bound(mdp.reward_bound, BOTTOM_REWARD),
        universally_transient=False,
        acyclic=False,
    )
