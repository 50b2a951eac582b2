"""
Expected payoff -> threshold
----------------------------
Given an optimal E(limsup) strategy σ on a finite model with state-based
rewards, restrict the model to σ's support (M^r), mark A_i = {s : r(s) >=
val(s) - 2^-i}, and relabel with u(s) in {0, -2^-i, -1}. Threshold-optimal
strategies of the relabelled model M^u are then E(limsup)-optimal in M^r.
The liminf variant swaps in E(liminf) values and the FG reading.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import sympy as sp

from core.errors import NotOptimal
from core.model import FiniteEdge, FiniteMdp, FiniteState, StateKind, Transition
from objectives.objective import ExpectedPayoff, MonotoneFamily
from objectives.reductions import reward_for_level
from solve.chains import TableStrategy, evaluate_chain, induced_chain
from solve.solvers import solve_expected
from tools.calculator import deficit_level

logger = logging.getLogger(__name__)

ONE = sp.Integer(1)


def state_rewards(finite):
    """r(s) per state; every edge of a state must carry the same reward."""
    rewards = []
    for i, st in enumerate(finite.states):
        seen = {e.reward for e in st.edges}
        if len(seen) != 1:
            raise ValueError(f"state {st.label!r} has edge rewards {sorted(seen)}, not a state reward")
        rewards.append(seen.pop())
    return tuple(rewards)


def _as_table(strategy):
    if isinstance(strategy, TableStrategy):
        return strategy
    if isinstance(strategy, dict) and strategy and isinstance(next(iter(strategy.values())), list):
        return TableStrategy.randomized(strategy)
    return TableStrategy.positional(strategy)


def support_restriction(finite, strategy):
    """
    Sub-model of the states and transitions a one-mode strategy uses with
    positive probability from the initial state. Labels are kept and every
    edge points back at the transition of `finite` it copies.
    """
    table = _as_table(strategy)
    if table.modes != 1:
        raise ValueError("support restriction needs a memoryless strategy")
    chain = induced_chain(finite, table)
    used = {}
    for out in chain.moves:
        for _, _, i, k in out:
            used.setdefault(i, set()).add(k)
    keep = sorted({i for i, _ in chain.nodes})
    position = {i: n for n, i in enumerate(keep)}
    states = []
    for i in keep:
        st = finite.states[i]
        edges = []
        for k in sorted(used.get(i, ())):
            e = st.edges[k]
            origin = finite.transition(i, k)
            edges.append(FiniteEdge(position[e.target], e.reward, e.prob, origin))
        states.append(FiniteState(st.label, st.kind, tuple(edges), st.tail))
    return FiniteMdp(tuple(states), position[finite.initial], f"{finite.name}^r")


@dataclass(frozen=True)
class ThresholdReduction:
    restricted: FiniteMdp        # M^r
    relabelled: FiniteMdp        # M^u
    family: MonotoneFamily       # A_i by level, on transitions of the input model
    values: tuple                # E(which) values in M^r
    levels: tuple                # max{i : s in A_i} per state of M^r (oo / int / None)
    which: str


def expected_to_threshold(finite, strategy, vals=None, which="limsup"):
    """
    finite: FiniteMdp with state-based rewards; strategy: the claimed optimal
    memoryless strategy; vals: E(which) values of `finite` (solved when None).
    """
    measure = ExpectedPayoff(which)
    rewards = state_rewards(finite)
    if vals is None:
        vals = solve_expected(finite, which).values
    attained = evaluate_chain(finite, _as_table(strategy), measure)
    if attained != vals[finite.initial]:
        raise NotOptimal(f"strategy attains {attained}, value is {vals[finite.initial]}")

    restricted = support_restriction(finite, strategy)
    values = solve_expected(restricted, which).values
    for i in range(len(restricted)):
        if restricted.kind(i) is not StateKind.CONTROLLED:
            continue
        for e in restricted.edges(i):
            if values[e.target] != values[i]:
                raise NotOptimal(
                    f"{restricted.states[i].label!r} -> {restricted.states[e.target].label!r} "
                    f"is not value preserving ({values[i]} -> {values[e.target]})"
                )

    source_index = {st.label: finite.state_index(st.label) for st in restricted.states}
    levels = tuple(
        deficit_level(values[i] - rewards[source_index[st.label]])
        for i, st in enumerate(restricted.states)
    )
    relabelled = restricted.with_rewards(lambda i, k, e: reward_for_level(levels[i]))
    by_ident = {}
    for i, st in enumerate(restricted.states):
        for k in range(len(st.edges)):
            by_ident[restricted.transition(i, k).root().ident] = levels[i]
    family = MonotoneFamily.table(by_ident, name=f"A[{which}]")
    logger.info(
        "%s -> threshold: %d of %d states kept, levels %s",
        finite.name, len(restricted), len(finite), [str(lv) for lv in levels],
    )
    return ThresholdReduction(restricted, FiniteMdp(relabelled.states, relabelled.initial, f"{finite.name}^u"),
                              family, values, levels, which)


def thrifty_uniform_strategy(finite, vals=None):
    """
    MR strategy mixing uniformly over the value-preserving edges of every
    controlled state; optimal for E(limsup) on finite models.
    """
    vals = solve_expected(finite, "limsup").values if vals is None else vals
    dist = {}
    for i in range(len(finite)):
        if finite.kind(i) is not StateKind.CONTROLLED:
            continue
        keep = [k for k, e in enumerate(finite.edges(i)) if vals[e.target] == vals[i]]
        dist[i] = [(sp.Rational(1, len(keep)), k) for k in keep]
    return TableStrategy.randomized(dist)


def transition_of(reduction, i, k) -> Transition:
    """The transition of the input model behind edge k of state i of M^u."""
    return reduction.relabelled.transition(i, k).root()
