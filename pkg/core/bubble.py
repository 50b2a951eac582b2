"""
Distances, bubbles and truncation
---------------------------------
bubble(n, base) is the set of states within BFS distance n of base. A
truncation keeps bubble(depth, {s0}) and reroutes everything that leaves it
into one frontier sink.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from enum import Enum

import sympy as sp

from config.settings import Config
from core.errors import BudgetExceeded, InfiniteBubble
from core.model import (
    FiniteEdge,
    FiniteMdp,
    FiniteState,
    Key,
    StateKind,
    TailLabel,
    Transition,
)

logger = logging.getLogger(__name__)


class FrontierPolicy(str, Enum):
    LOSING = "losing"
    WINNING = "winning"
    SELF_LOOP_ZERO = "zero"

    @property
    def tail(self):
        return {
            FrontierPolicy.LOSING: TailLabel(-1, -1),
            FrontierPolicy.WINNING: TailLabel(0, 0, member=True),
            FrontierPolicy.SELF_LOOP_ZERO: TailLabel(0, 0),
        }[self]


FRONTIER = Key("frontier")


def _edges_within(mdp, s, branch_cap):
    branching = mdp.successors(s)
    if branching.is_finite:
        return branching.edges, False
    if branch_cap is None:
        raise InfiniteBubble(f"{s!r} is infinitely branching; pass a branch cap")
    return branching.prefix(branch_cap), True


def distances(mdp, base, n, branch_cap=None, stop_at_tails=True):
    """BFS distances (<= n) from base. Tail-labelled states are leaves unless `stop_at_tails` is off."""
    if not mdp.finitely_branching and branch_cap is None:
        raise InfiniteBubble(f"{mdp.name} does not claim finite branching")
    dist = {s: 0 for s in base}
    queue = deque(base)
    while queue:
        s = queue.popleft()
        if dist[s] >= n:
            continue
        if stop_at_tails and mdp.tail_label(s) is not None:
            continue
        edges, _ = _edges_within(mdp, s, branch_cap)
        for e in edges:
            if e.target not in dist:
                dist[e.target] = dist[s] + 1
                queue.append(e.target)
    return dist


def distance_and_bubble(mdp, base, n, branch_cap=None, stop_at_tails=True):
    """States at BFS distance <= n from base."""
    return set(distances(mdp, base, n, branch_cap, stop_at_tails))


@dataclass(frozen=True)
class Truncation:
    mdp: FiniteMdp
    state_map: dict          # original state -> index in mdp
    distance: dict           # original state -> BFS distance from s0
    sink: int
    policy: FrontierPolicy
    depth: int
    rerouted: int            # number of edges sent to the sink

    def index_of(self, state):
        return self.state_map[state]

    def layer(self, i):
        label = self.mdp.states[i].label
        return self.distance.get(label)


def _tail_loop_edges(tail, self_index, aux_index):
    """A sink with the given tail: a self loop, or a 2-cycle when limsup != liminf."""
    if tail.limsup == tail.liminf:
        return (FiniteEdge(self_index, tail.limsup),), None
    return (
        (FiniteEdge(aux_index, tail.limsup),),
        FiniteState(Key("tail", (aux_index,)), StateKind.CONTROLLED,
                    (FiniteEdge(self_index, tail.liminf),), tail),
    )


def truncate(mdp, depth, frontier_policy=FrontierPolicy.LOSING, branch_cap=None, max_states=None):
    """
    Finite instance on bubble(depth, {s0}) plus one frontier sink.

    Edges leaving the bubble, and the unexplored tail of infinite branchings
    (first `branch_cap` edges kept), go to the sink. Tail-labelled states are
    kept as sinks of their own closed form.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    frontier_policy = FrontierPolicy(frontier_policy)
    max_states = Config.BUDGET_STATES if max_states is None else max_states
    dist = distances(mdp, [mdp.initial], depth, branch_cap)
    if len(dist) > max_states:
        raise BudgetExceeded("truncation states", len(dist), max_states)

    order = sorted(dist, key=lambda s: (dist[s], str(s)))
    order.remove(mdp.initial)
    order.insert(0, mdp.initial)
    state_map = {s: i for i, s in enumerate(order)}
    sink = len(order)
    extra = []          # aux states appended after the sink
    states = []
    rerouted = 0

    def next_aux():
        return sink + 1 + len(extra)

    for s in order:
        i = state_map[s]
        tail = mdp.tail_label(s)
        if tail is not None:
            edges, aux = _tail_loop_edges(tail, i, next_aux())
            if aux is not None:
                extra.append(aux)
            states.append(FiniteState(s, StateKind.CONTROLLED, edges, tail))
            continue
        branching = mdp.successors(s)
        raw, capped = _edges_within(mdp, s, branch_cap)
        edges = []
        for k, e in enumerate(raw):
            origin = Transition(s, k, e.target, e.reward, e.origin)
            if e.target in state_map:
                edges.append(FiniteEdge(state_map[e.target], e.reward, e.prob, origin))
            else:
                rerouted += 1
                edges.append(FiniteEdge(sink, e.reward, e.prob, origin))
        if capped and branching.kind is StateKind.RANDOM:
            rest = branching.tail_mass(len(raw))
            if rest > 0:
                rerouted += 1
                edges.append(FiniteEdge(sink, sp.Integer(-1), rest))
        states.append(FiniteState(s, branching.kind, tuple(edges)))

    tail = frontier_policy.tail
    sink_edges, aux = _tail_loop_edges(tail, sink, next_aux())
    states.append(FiniteState(FRONTIER, StateKind.CONTROLLED, sink_edges, tail))
    if aux is not None:
        extra.append(aux)
    states.extend(extra)

    finite = FiniteMdp(tuple(states), 0, f"{mdp.name}@{depth}")
    logger.debug("truncated %s at depth %d: %d states, %d rerouted", mdp.name, depth, len(finite), rerouted)
    return Truncation(finite, state_map, dist, sink, frontier_policy, depth, rerouted)
