"""
Bounded-horizon reachability and the bounded-avoidance horizon.
"""

from __future__ import annotations

import sympy as sp

from core.model import StateKind
from solve.graph import edge_set
from solve.solvers import solve_safety

ZERO = sp.Integer(0)
ONE = sp.Integer(1)


def horizon_sweep(mdp, targets=frozenset(), target_edges=frozenset(), mode="max", strategy=None):
    """
    Yield the bounded-reach values for horizons 0, 1, 2, ... (endless).

    mode: "max" / "min" over controlled choices, or "fixed" with `strategy`
    mapping a controlled state to an edge index or to [(prob, edge), ...].
    """
    if not isinstance(target_edges, (set, frozenset)):
        target_edges = edge_set(mdp, target_edges)
    n = len(mdp)
    values = [ONE if i in targets else ZERO for i in range(n)]

    def edge_value(i, k_, e):
        return ONE if (i, k_) in target_edges else values[e.target]

    while True:
        yield values
        nxt = []
        for i in range(n):
            if i in targets:
                nxt.append(ONE)
                continue
            edges = mdp.edges(i)
            if mdp.kind(i) is StateKind.RANDOM:
                nxt.append(sum((e.prob * edge_value(i, j, e) for j, e in enumerate(edges)), ZERO))
            elif mode == "fixed":
                choice = strategy[i]
                if isinstance(choice, int):
                    nxt.append(edge_value(i, choice, edges[choice]))
                else:
                    nxt.append(sum((p * edge_value(i, j, edges[j]) for p, j in choice), ZERO))
            else:
                options = [edge_value(i, j, e) for j, e in enumerate(edges)]
                nxt.append(max(options) if mode == "max" else min(options))
        values = nxt


def horizon_values(mdp, k, targets=frozenset(), target_edges=frozenset(), mode="max", strategy=None):
    """Probability to visit `targets` or take a `target_edges` edge within k steps."""
    sweep = horizon_sweep(mdp, targets, target_edges, mode, strategy)
    for _ in range(k):
        next(sweep)
    return next(sweep)


def bounded_avoidance_horizon(mdp, avoid_edges, state=None):
    """
    For a finitely branching model and a transition set T: if T cannot be
    avoided surely (val(¬F T) < 1), return the least k <= |states| with
    val(¬F^{<=k} T) < 1; None when T is avoidable with probability 1.
    """
    state = mdp.initial if state is None else state
    if not isinstance(avoid_edges, (set, frozenset)):
        avoid_edges = edge_set(mdp, avoid_edges)
    allowed = frozenset(
        (i, j) for i in range(len(mdp)) for j in range(len(mdp.edges(i))) if (i, j) not in avoid_edges
    )
    if solve_safety(mdp, allowed).values[state] == ONE:
        return None
    for k in range(len(mdp) + 1):
        hit = horizon_values(mdp, k, target_edges=avoid_edges, mode="min")
        if hit[state] > 0:
            return k
    raise AssertionError("bounded avoidance failed on a finitely branching model")
