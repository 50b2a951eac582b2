"""
Optimal stopping by exact policy iteration
------------------------------------------
Every exact value computation reduces to this game: at each state the
controller may stop and collect stop[i] (when offered), controlled states pick
an edge, random states move by their distribution, and some edges end the
game with a fixed payoff (terminal). Plays that never end are worth 0. All
payoffs are >= 0.

Policy iteration starts from an attractor policy that reaches a positive payoff
from every state that can, and switches an action only on strict improvement;
every policy it visits therefore leaves the unknown states with positive
probability and the evaluation systems stay regular.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import sympy as sp

from core.model import StateKind
from solve.graph import positive_reach
from solve.linear import solve_fixed_point

logger = logging.getLogger(__name__)

ZERO = sp.Integer(0)
STOP = "stop"
GO = "go"


@dataclass(frozen=True)
class StoppingSolution:
    values: tuple
    policy: tuple           # STOP, GO or an edge index
    positive: frozenset     # states with positive value

    def chooses_stop(self, i):
        return self.policy[i] == STOP


def _action_value(mdp, i, action, values, stop, terminal):
    if action == STOP:
        return stop[i]
    if action == GO:
        total = ZERO
        for k, e in enumerate(mdp.edges(i)):
            total += e.prob * terminal.get((i, k), values[e.target])
        return total
    e = mdp.edges(i)[action]
    return terminal[(i, action)] if (i, action) in terminal else values[e.target]


def _actions(mdp, i, stop):
    actions = [STOP] if i in stop else []
    if mdp.kind(i) is StateKind.RANDOM:
        actions.append(GO)
    else:
        actions.extend(range(len(mdp.edges(i))))
    return actions


def _initial_policy(mdp, positive, stop, terminal):
    policy = {}
    for i in sorted(positive):
        if stop.get(i, ZERO) > 0:
            policy[i] = STOP
        elif mdp.kind(i) is StateKind.CONTROLLED:
            best = max(
                ((terminal[(i, k)], -k) for k in range(len(mdp.edges(i))) if terminal.get((i, k), ZERO) > 0),
                default=None,
            )
            if best is not None:
                policy[i] = -best[1]
        elif any(terminal.get((i, k), ZERO) > 0 for k in range(len(mdp.edges(i)))):
            policy[i] = GO
    # attractor layers towards the positive payoffs
    progress = True
    while progress:
        progress = False
        for i in sorted(positive - policy.keys()):
            edges = mdp.edges(i)
            if mdp.kind(i) is StateKind.CONTROLLED:
                k = next(
                    (k for k, e in enumerate(edges) if (i, k) not in terminal and e.target in policy),
                    None,
                )
                if k is not None:
                    policy[i] = k
                    progress = True
            elif any((i, k) not in terminal and e.target in policy for k, e in enumerate(edges)):
                policy[i] = GO
                progress = True
    return policy


def _evaluate(mdp, policy, positive, stop, terminal):
    values = [ZERO] * len(mdp)
    equations = {}
    for i in positive:
        action = policy[i]
        if action == STOP:
            values[i] = stop[i]
            continue
        constant = ZERO
        terms = []
        edge_list = list(enumerate(mdp.edges(i))) if action == GO else [(action, mdp.edges(i)[action])]
        for k, e in edge_list:
            weight = e.prob if action == GO else sp.Integer(1)
            if (i, k) in terminal:
                constant += weight * terminal[(i, k)]
            elif e.target in positive and policy[e.target] != STOP:
                terms.append((weight, e.target))
            elif e.target in positive:
                constant += weight * stop[e.target]
        equations[i] = (constant, terms)
    for i, v in solve_fixed_point(equations).items():
        values[i] = v
    return values


def solve_stopping(mdp, stop=None, terminal=None):
    """
    stop: {state: payoff >= 0}; terminal: {(state, edge): payoff >= 0}.
    Returns the optimal values and an optimal stationary policy; ties go to
    STOP, then to the lowest edge index.
    """
    stop = {i: sp.Rational(v) for i, v in (stop or {}).items()}
    terminal = {ik: sp.Rational(v) for ik, v in (terminal or {}).items()}
    if any(v < 0 for v in stop.values()) or any(v < 0 for v in terminal.values()):
        raise ValueError("stopping payoffs must be non-negative")

    goal_states = {i for i, v in stop.items() if v > 0}
    goal_edges = frozenset(ik for ik, v in terminal.items() if v > 0)
    blocked = frozenset(terminal) - goal_edges
    positive = positive_reach(mdp, goal_states, goal_edges, blocked)

    policy = _initial_policy(mdp, positive, stop, terminal)
    rounds = 0
    while True:
        rounds += 1
        values = _evaluate(mdp, policy, positive, stop, terminal)
        switched = 0
        for i in sorted(positive):
            current = values[i]
            best_action, best_value = None, current
            for action in _actions(mdp, i, stop):
                v = _action_value(mdp, i, action, values, stop, terminal)
                if v > best_value:
                    best_action, best_value = action, v
            if best_action is not None:
                policy[i] = best_action
                switched += 1
        if not switched:
            break
    logger.debug("policy iteration on %s: %d states positive, %d rounds", mdp.name, len(positive), rounds)

    full_policy = []
    for i in range(len(mdp)):
        if i in policy:
            full_policy.append(policy[i])
        elif mdp.kind(i) is StateKind.RANDOM:
            full_policy.append(GO)
        else:
            full_policy.append(0)
    return StoppingSolution(tuple(values), tuple(full_policy), positive)


def bellman_residual(mdp, values, stop=None, terminal=None):
    """max_i |v(i) - max_a Q(i, a)|; zero for a solution of solve_stopping."""
    stop = {i: sp.Rational(v) for i, v in (stop or {}).items()}
    terminal = {ik: sp.Rational(v) for ik, v in (terminal or {}).items()}
    residual = ZERO
    for i in range(len(mdp)):
        best = max(_action_value(mdp, i, a, values, stop, terminal) for a in _actions(mdp, i, stop))
        residual = max(residual, abs(values[i] - best))
    return residual
