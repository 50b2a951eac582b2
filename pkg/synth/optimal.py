"""
Optimal strategies from almost-sure ones
----------------------------------------
For a shift-invariant objective (or Reach) a strategy is optimal from s in M
exactly when it wins almost surely from s in the conditioned model M*. So:
condition on the values, ask an almost-sure synthesizer for a positional
strategy of M*, read its choices back on M (a choice of edge k at s in M*
enters Gate(s, k), which is edge k of M), and stitch the strategies of
different start states greedily: a region keeps the choices of the first
start state whose strategy reached it.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import sympy as sp

from config.settings import Config
from core.bubble import FrontierPolicy, truncate
from core.errors import NoOptimal
from core.model import CountableMdp, StateKind
from objectives.objective import ExpectedPayoff
from solve.chains import TableStrategy, evaluate_chain
from solve.solvers import solve_expected, solve_objective
from transforms.conditioned import condition_finite

logger = logging.getLogger(__name__)

ONE = sp.Integer(1)


@dataclass(frozen=True)
class OptimalStrategy:
    mdp: object
    values: tuple
    choices: dict                       # state index -> edge index
    regions: tuple = ()                 # (start index, frozenset of states it fixed)
    no_optimal: frozenset = frozenset()
    attained: dict = field(default_factory=dict)

    def table(self):
        return TableStrategy.positional(self.choices)

    def is_optimal_from(self, i):
        return i in self.attained and self.attained[i] == self.values[i]

    def to_dict(self):
        labels = self.mdp.labels
        return {
            "model": self.mdp.name,
            "strategy": {str(labels[i]): k for i, k in sorted(self.choices.items())},
            "regions": [
                {"start": str(labels[s]), "states": sorted(str(labels[i]) for i in states)}
                for s, states in self.regions
            ],
            "no_optimal": sorted(str(labels[i]) for i in self.no_optimal),
            "attained": {str(labels[i]): str(v) for i, v in sorted(self.attained.items())},
        }


def solver_as_synthesizer(star, obj):
    """Exact solver on the conditioned model; succeeds when it wins with probability 1."""
    solution = solve_objective(star, obj)
    if solution.values[star.initial] != ONE:
        return None
    return solution.strategy


def _finite(mdp, depth, branch_cap):
    if isinstance(mdp, CountableMdp):
        depth = Config.DEFAULT_DEPTH if depth is None else depth
        return truncate(mdp, depth, FrontierPolicy.LOSING, branch_cap).mdp
    return mdp


def _indexed(finite, vals, default):
    if vals is None:
        return default
    if callable(vals):
        return tuple(sp.Rational(vals(label)) for label in finite.labels)
    if isinstance(vals, dict):
        return tuple(sp.Rational(vals.get(label, 0)) for label in finite.labels)
    if isinstance(vals, (list, tuple)):
        return tuple(sp.Rational(v) for v in vals)
    return tuple(sp.Rational(vals) for _ in finite.labels)


def _requested(finite, starts, values):
    if starts is None:
        return [i for i, v in enumerate(values) if v > 0]
    return [s if isinstance(s, int) else finite.state_index(s) for s in starts]


def _optimal_expected(finite, measure, vals, starts, strict):
    best = solve_expected(finite, measure.which)
    demand = _indexed(finite, vals, best.values)
    requested = list(range(len(finite))) if starts is None else _requested(finite, starts, demand)
    missing = frozenset(i for i in requested if best.values[i] < demand[i])
    choices = {i: k for i, k in enumerate(best.strategy) if k is not None}
    table = TableStrategy.positional(choices)
    attained = {i: evaluate_chain(finite, table, measure, i) for i in requested if i not in missing}
    if missing and strict:
        raise NoOptimal([finite.labels[i] for i in missing])
    return OptimalStrategy(finite, demand, choices, (), missing, attained)


def _reachable(finite, start, choices):
    seen = {start}
    queue = deque([start])
    while queue:
        i = queue.popleft()
        if finite.kind(i) is StateKind.RANDOM:
            nxt = [e.target for e in finite.edges(i)]
        else:
            nxt = [finite.edges(i)[choices.get(i, 0)].target]
        for j in nxt:
            if j not in seen:
                seen.add(j)
                queue.append(j)
    return seen


def optimal_from_as(mdp, obj, as_synthesizer=None, vals=None, starts=None, depth=None,
                    branch_cap=None, strict=True):
    """
    Optimal positional strategy from every requested start state that has
    one. vals defaults to the exact solver's values; for an ExpectedPayoff
    it is the demanded payoff per state (a number, dict or callable).

    Raises NoOptimal naming the requested states without an optimal
    strategy unless strict is False, in which case they are reported in
    the result.
    """
    finite = _finite(mdp, depth, branch_cap)
    if isinstance(obj, ExpectedPayoff):
        return _optimal_expected(finite, obj, vals, starts, strict)

    synthesize = as_synthesizer or solver_as_synthesizer
    values = _indexed(finite, vals, None)
    if values is None:
        values = solve_objective(finite, obj).values
    requested = _requested(finite, starts, values)

    choices, regions, missing = {}, [], set()
    covered = set()
    for s in requested:
        if s in covered or values[s] == 0:
            continue
        star = condition_finite(finite, values, obj, start=s).mdp
        strategy = synthesize(star, obj)
        if strategy is None:
            logger.info("no almost-sure strategy in the conditioned model from %s", finite.labels[s])
            missing.add(s)
            continue
        carried = {}
        for j, st in enumerate(star.states):
            i = finite.index.get(st.label)
            if i is None or finite.kind(i) is not StateKind.CONTROLLED:
                continue
            k = strategy[j]
            if k is not None:
                carried[i] = k if isinstance(k, int) else k[0][1]
        merged = dict(carried)
        merged.update(choices)
        region = _reachable(finite, s, merged) - covered
        for i in region:
            if finite.kind(i) is StateKind.CONTROLLED and i not in choices:
                choices[i] = carried.get(i, 0)
        covered |= region
        regions.append((s, frozenset(region)))
        logger.debug("region of %s: %d states", finite.labels[s], len(region))

    table = TableStrategy.positional(choices)
    attained = {}
    for s in requested:
        if s in missing:
            continue
        attained[s] = evaluate_chain(finite, table, obj, s)
        if attained[s] != values[s]:
            logger.warning("stitched strategy attains %s < %s from %s", attained[s], values[s], finite.labels[s])
    if missing and strict:
        raise NoOptimal([finite.labels[i] for i in missing])
    return OptimalStrategy(finite, tuple(values), choices, tuple(regions), frozenset(missing), attained)
