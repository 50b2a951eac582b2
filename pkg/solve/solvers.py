"""
Exact solvers on FiniteMdp
--------------------------
Reachability, safety, Büchi, co-Büchi (FG A), limsup/liminf thresholds and
expected limsup/liminf. Each one builds an optimal-stopping instance and then
completes the stopping policy into an MD strategy by fixing "winning region"
choices (MEC cover or stay choices) wherever the policy stops.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import sympy as sp

from core.errors import UnsupportedObjective
from core.model import StateKind
from objectives.objective import ExpectedPayoff, ObjectiveKind, TransitionSet
from solve.graph import cover_choices, edge_set, mec_decomposition, stay_choices, sure_safe_set
from solve.stopping import STOP, bellman_residual, solve_stopping

logger = logging.getLogger(__name__)

ONE = sp.Integer(1)


@dataclass(frozen=True)
class Solution:
    values: tuple            # exact value per state index
    strategy: tuple          # edge index per controlled state, None at random states
    measure: str
    stop: dict = None
    terminal: dict = None
    shift: sp.Rational = sp.Integer(0)

    def value_at(self, i):
        return self.values[i]

    def residual(self, mdp):
        """Bellman residual of the underlying stopping problem."""
        shifted = [v - self.shift for v in self.values]
        return bellman_residual(mdp, shifted, self.stop, self.terminal)


def _extract(mdp, sol, regions):
    """
    regions: list of (states, choices). A region whose states include a
    stopping state plays its own choices everywhere inside.
    """
    strategy = []
    for i in range(len(mdp)):
        p = sol.policy[i]
        strategy.append(None if mdp.kind(i) is StateKind.RANDOM else (0 if p == STOP else p))
    for states, choices in regions:
        if any(sol.policy[i] == STOP for i in states):
            for i, k in choices.items():
                strategy[i] = k
    return tuple(strategy)


def target_indices(mdp, targets):
    return frozenset(
        i for i, st in enumerate(mdp.states) if targets.holds(st.label, st.tail)
    )


def solve_reachability(mdp, targets=None, target_edges=None):
    """
    Max probability to visit `targets` (StateSet or index set) or take an edge
    of `target_edges` (TransitionSet or {(i, k)}).
    """
    if targets is None:
        goal = frozenset()
    elif isinstance(targets, (set, frozenset)):
        goal = frozenset(targets)
    else:
        goal = target_indices(mdp, targets)
    edges = frozenset()
    if target_edges is not None:
        edges = target_edges if isinstance(target_edges, (set, frozenset)) else edge_set(mdp, target_edges)
    stop = {i: ONE for i in goal}
    terminal = {ik: ONE for ik in edges if ik[0] not in goal}
    sol = solve_stopping(mdp, stop, terminal)
    return Solution(sol.values, _extract(mdp, sol, []), "reach", stop, terminal)


def solve_safety(mdp, allowed):
    """Max probability to use only allowed transitions forever."""
    allowed_edges = allowed if isinstance(allowed, (set, frozenset)) else edge_set(mdp, allowed)
    safe = sure_safe_set(mdp, allowed_edges)
    stop = {i: ONE for i in safe}
    terminal = {
        (i, k): sp.Integer(0)
        for i in range(len(mdp)) for k in range(len(mdp.edges(i)))
        if (i, k) not in allowed_edges
    }
    sol = solve_stopping(mdp, stop, terminal)
    inside = {}
    for i in safe:
        if mdp.kind(i) is StateKind.CONTROLLED:
            inside[i] = next(
                k for k, e in enumerate(mdp.edges(i)) if (i, k) in allowed_edges and e.target in safe
            )
    return Solution(sol.values, _extract(mdp, sol, [(safe, inside)]), "safety", stop, terminal)


def solve_buchi(mdp, transitions):
    """Max probability to take transitions of A infinitely often."""
    accepting = transitions if isinstance(transitions, (set, frozenset)) else edge_set(mdp, transitions)
    stop, regions = {}, []
    for mec in mec_decomposition(mdp):
        goals = sorted(mec.edges & accepting)
        if not goals:
            continue
        for i in mec.states:
            stop[i] = ONE
        regions.append((mec.states, cover_choices(mdp, mec, goals[0])))
    sol = solve_stopping(mdp, stop)
    return Solution(sol.values, _extract(mdp, sol, regions), "buchi", stop, {})


def solve_cobuchi(mdp, transitions):
    """Max probability to eventually take only transitions of A (FG A)."""
    inside = transitions if isinstance(transitions, (set, frozenset)) else edge_set(mdp, transitions)
    stop, regions = {}, []
    for mec in mec_decomposition(mdp, allowed=inside):
        for i in mec.states:
            stop[i] = ONE
        regions.append((mec.states, stay_choices(mdp, mec)))
    sol = solve_stopping(mdp, stop)
    return Solution(sol.values, _extract(mdp, sol, regions), "cobuchi", stop, {})


def solve_threshold(mdp, which):
    """limsup_PP(>=0) as Büchi of {r >= 0}; liminf_PP(>=0) as co-Büchi of it."""
    nonneg = TransitionSet.rewards_at_least(0)
    if which == "limsup":
        result = solve_buchi(mdp, nonneg)
    elif which == "liminf":
        result = solve_cobuchi(mdp, nonneg)
    else:
        raise ValueError(f"threshold is limsup or liminf, not {which!r}")
    return Solution(result.values, result.strategy, f"{which}_geq0", result.stop, result.terminal)


def _limsup_weights(mdp):
    stop, regions = {}, []
    for mec in mec_decomposition(mdp):
        best = max(mdp.edges(i)[k].reward for i, k in mec.edges)
        goal = min(ik for ik in mec.edges if mdp.edges(ik[0])[ik[1]].reward == best)
        for i in mec.states:
            stop[i] = best
        regions.append((mec.states, cover_choices(mdp, mec, goal)))
    return stop, regions


def _liminf_weights(mdp):
    """Best min-reward over sub-end-components, by descending thresholds."""
    rewards = sorted({e.reward for i in range(len(mdp)) for e in mdp.edges(i)}, reverse=True)
    stop, regions = {}, []
    for c in rewards:
        allowed = frozenset(
            (i, k) for i in range(len(mdp)) for k, e in enumerate(mdp.edges(i)) if e.reward >= c
        )
        for mec in mec_decomposition(mdp, allowed=allowed):
            fresh = mec.states - stop.keys()
            if not fresh:
                continue
            for i in fresh:
                stop[i] = c
            regions.append((mec.states, stay_choices(mdp, mec)))
    return stop, regions


def solve_expected(mdp, which):
    """Optimal E(limsup) / E(liminf) of the reward sequence."""
    if which == "limsup":
        weights, regions = _limsup_weights(mdp)
    elif which == "liminf":
        weights, regions = _liminf_weights(mdp)
    else:
        raise ValueError(f"expected payoff is limsup or liminf, not {which!r}")
    shift = min(weights.values())
    stop = {i: w - shift for i, w in weights.items()}
    sol = solve_stopping(mdp, stop)
    values = tuple(v + shift for v in sol.values)
    # regions only make sense where the stop value is the region's own weight
    regions = [(states, choices) for states, choices in regions
               if all(sol.values[i] + shift == weights[i] for i in states)]
    return Solution(values, _extract(mdp, sol, regions), f"E({which})", stop, {}, shift)


def _tail_states(mdp, predicate):
    return frozenset(i for i, st in enumerate(mdp.states) if st.tail is not None and predicate(st.tail))


def solve_objective(mdp, obj):
    """Dispatch an Objective or ExpectedPayoff to its exact solver."""
    if isinstance(obj, ExpectedPayoff):
        return solve_expected(mdp, obj.which)
    kind = obj.kind
    if kind is ObjectiveKind.REACH:
        return solve_reachability(mdp, obj.targets)
    if kind is ObjectiveKind.REACH_WITHIN:
        from solve.horizon import horizon_values
        values = horizon_values(mdp, obj.steps, targets=target_indices(mdp, obj.targets))
        return Solution(tuple(values), tuple(None if mdp.kind(i) is StateKind.RANDOM else 0 for i in range(len(mdp))),
                        "reach_within")
    if kind is ObjectiveKind.SAFETY:
        return solve_safety(mdp, obj.transitions)
    if kind is ObjectiveKind.BUCHI:
        return solve_buchi(mdp, obj.transitions)
    if kind is ObjectiveKind.COBUCHI:
        return solve_cobuchi(mdp, obj.transitions)
    if kind in (ObjectiveKind.GF_FAMILY, ObjectiveKind.FG_FAMILY):
        family = obj.family
        top = frozenset(
            (i, k) for i, k, t in mdp.all_transitions() if family.level(t) == sp.oo
        )
        return solve_buchi(mdp, top) if kind is ObjectiveKind.GF_FAMILY else solve_cobuchi(mdp, top)
    if kind is ObjectiveKind.LIMSUP_GEQ0:
        return solve_threshold(mdp, "limsup")
    if kind is ObjectiveKind.LIMINF_GEQ0:
        return solve_threshold(mdp, "liminf")
    if kind is ObjectiveKind.TRANSIENCE:
        # on a finite model only fresh-chain tails are transient
        return solve_reachability(mdp, _tail_states(mdp, lambda tail: tail.transient))
    raise UnsupportedObjective(f"no exact solver for {obj}")
