"""
Drift bounds under a fixed positional strategy on a finite model.

transient_drift_horizon: a step count after which the run stays out of a
finite set with all but delta of the probability it eventually does so.
transient_drift_support: a finite set the run stays inside up to step n
with probability at least 1 - delta.
"""

from __future__ import annotations

import logging
from collections import deque
from typing import NamedTuple

import networkx as nx
import sympy as sp

from config.settings import Config
from core.errors import BudgetExhausted
from core.model import StateKind
from solve.linear import solve_fixed_point

logger = logging.getLogger(__name__)

ZERO = sp.Integer(0)
ONE = sp.Integer(1)


class DriftHorizon(NamedTuple):
    steps: int
    value: sp.Rational      # P(G^{>=steps} not X)
    limit: sp.Rational      # P(FG not X)


class DriftSupport(NamedTuple):
    states: frozenset
    kept: sp.Rational       # lower bound on P(G^{<=n} states)


def _choice(strategy, i):
    if strategy is None:
        return 0
    if isinstance(strategy, dict):
        return strategy.get(i, 0)
    return strategy[i]


def strategy_moves(finite, strategy, i):
    """[(prob, edge)] at state i: P(i) at random states, the strategy's pick otherwise."""
    if finite.kind(i) is StateKind.RANDOM:
        return [(e.prob, k) for k, e in enumerate(finite.edges(i))]
    choice = _choice(strategy, i)
    if choice is None:
        choice = 0
    if isinstance(choice, int):
        return [(ONE, choice)]
    return [(sp.Rational(p), k) for p, k in choice if p != 0]


def step_distribution(finite, strategy, dist):
    nxt = {}
    for i, mass in dist.items():
        for p, k in strategy_moves(finite, strategy, i):
            j = finite.edges(i)[k].target
            nxt[j] = nxt.get(j, ZERO) + mass * p
    return nxt


def chain_reach(finite, strategy, goal_states=frozenset(), goal_edges=frozenset()):
    """Per-state probability of visiting goal_states or taking a goal edge."""
    goal_states = frozenset(goal_states)
    n = len(finite)
    reverse = {}
    seeds = set(goal_states)
    for i in range(n):
        if i in goal_states:
            continue
        for _, k in strategy_moves(finite, strategy, i):
            if (i, k) in goal_edges:
                seeds.add(i)
            else:
                reverse.setdefault(finite.edges(i)[k].target, []).append(i)
    live = set(seeds)
    queue = deque(seeds)
    while queue:
        j = queue.popleft()
        for i in reverse.get(j, ()):
            if i not in live:
                live.add(i)
                queue.append(i)

    equations = {}
    for i in live - goal_states:
        constant, terms = ZERO, []
        for p, k in strategy_moves(finite, strategy, i):
            j = finite.edges(i)[k].target
            if (i, k) in goal_edges or j in goal_states:
                constant += p
            elif j in live:
                terms.append((p, j))
        equations[i] = (constant, terms)
    solved = solve_fixed_point(equations)
    return [ONE if i in goal_states else solved.get(i, ZERO) for i in range(n)]


def bottom_components(finite, strategy):
    graph = nx.DiGraph()
    graph.add_nodes_from(range(len(finite)))
    for i in range(len(finite)):
        for _, k in strategy_moves(finite, strategy, i):
            graph.add_edge(i, finite.edges(i)[k].target)
    return [frozenset(c) for c in nx.attracting_components(graph)]


def transient_drift_horizon(finite, strategy, avoid, delta, start=None, limit=None):
    """
    Least l with P(G^{>=l} not avoid) >= P(FG not avoid) - delta.
    BudgetExhausted when no l <= limit qualifies.
    """
    avoid = frozenset(avoid)
    delta = sp.Rational(delta)
    start = finite.initial if start is None else start
    limit = Config.BUDGET_LASSO_STEPS if limit is None else limit

    recurrent = frozenset().union(*(c for c in bottom_components(finite, strategy) if c & avoid))
    eventual = ONE - chain_reach(finite, strategy, recurrent)[start]
    never = [ONE - v for v in chain_reach(finite, strategy, avoid)]

    dist = {start: ONE}
    for steps in range(limit + 1):
        value = sum((mass * never[i] for i, mass in dist.items()), ZERO)
        if value >= eventual - delta:
            logger.debug("drift horizon %d for |X| = %d: %s of %s", steps, len(avoid), value, eventual)
            return DriftHorizon(steps, value, eventual)
        dist = step_distribution(finite, strategy, dist)
    raise BudgetExhausted(f"no drift horizon within {limit} steps (delta {delta})")


def transient_drift_support(finite, strategy, n, delta, start=None):
    """
    Grow a support set round by round, cutting the least likely new states
    while the cut mass stays within delta / n per round.
    """
    delta = sp.Rational(delta)
    start = finite.initial if start is None else start
    per_round = delta / n if n else ZERO
    support = {start}
    dist = {start: ONE}
    for _ in range(n):
        nxt = step_distribution(finite, strategy, dist)
        ranked = sorted(nxt.items(), key=lambda item: (item[1], -item[0]))
        dropped = ZERO
        for i, mass in ranked:
            if i in support:
                continue
            if dropped + mass > per_round:
                break
            dropped += mass
            del nxt[i]
        support.update(nxt)
        dist = nxt
    kept = sum(dist.values(), ZERO)
    return DriftSupport(frozenset(support), kept)
