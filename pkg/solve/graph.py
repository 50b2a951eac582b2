"""
Graph machinery on FiniteMdp: maximal end components, sure-safety sets and
positive-probability reachability.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass

import networkx as nx

from core.model import StateKind

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Mec:
    states: frozenset
    edges: frozenset        # {(state, edge index)}

    def edges_of(self, i):
        return sorted(k for (j, k) in self.edges if j == i)


def edge_set(mdp, transitions):
    """{(i, k)} of the FiniteMdp transitions inside a TransitionSet."""
    return frozenset((i, k) for i, k, t in mdp.all_transitions() if t in transitions)


def mec_decomposition(mdp, allowed=None, states=None):
    """
    MECs of the sub-MDP that keeps only `allowed` edges (all when None).
    Controlled states lose disallowed edges; random states with any
    disallowed or escaping edge are removed.
    """
    alive = set(range(len(mdp))) if states is None else set(states)
    block = {i: 0 for i in alive}

    while True:
        kept = {}
        removed = True
        while removed:
            removed = False
            kept = {}
            for i in sorted(alive):
                edges = mdp.edges(i)
                ks = [
                    k for k, e in enumerate(edges)
                    if (allowed is None or (i, k) in allowed)
                    and e.target in alive
                    and block[e.target] == block[i]
                ]
                if not ks or (mdp.kind(i) is StateKind.RANDOM and len(ks) < len(edges)):
                    alive.discard(i)
                    removed = True
                else:
                    kept[i] = ks

        graph = nx.DiGraph()
        graph.add_nodes_from(alive)
        for i, ks in kept.items():
            for k in ks:
                graph.add_edge(i, mdp.edges(i)[k].target)
        components = sorted(nx.strongly_connected_components(graph), key=min)
        refined = {}
        for c, members in enumerate(components):
            for i in members:
                refined[i] = c

        crossing = any(
            refined[mdp.edges(i)[k].target] != refined[i]
            for i, ks in kept.items() for k in ks
        )
        block = refined
        if not crossing:
            break

    mecs = []
    groups = {}
    for i in alive:
        groups.setdefault(block[i], set()).add(i)
    for c in sorted(groups, key=lambda c: min(groups[c])):
        members = groups[c]
        edges = frozenset((i, k) for i in members for k in kept[i])
        mecs.append(Mec(frozenset(members), edges))
    logger.debug("found %d MECs in %s", len(mecs), mdp.name)
    return mecs


def sure_safe_set(mdp, allowed):
    """Greatest set W where controlled states keep an allowed edge into W and
    random states have all edges allowed and inside W."""
    alive = set(range(len(mdp)))
    changed = True
    while changed:
        changed = False
        for i in sorted(alive):
            edges = mdp.edges(i)
            inside = [(i, k) in allowed and e.target in alive for k, e in enumerate(edges)]
            ok = any(inside) if mdp.kind(i) is StateKind.CONTROLLED else all(inside)
            if not ok:
                alive.discard(i)
                changed = True
    return frozenset(alive)


def positive_reach(mdp, goal_states, goal_edges=frozenset(), blocked=frozenset()):
    """States that reach goal_states, or take a goal edge, with positive probability."""
    predecessors = {}
    reached = set(goal_states)
    for i in range(len(mdp)):
        for k, e in enumerate(mdp.edges(i)):
            if (i, k) in goal_edges:
                reached.add(i)
            elif (i, k) not in blocked:
                predecessors.setdefault(e.target, []).append(i)
    queue = deque(reached)
    while queue:
        j = queue.popleft()
        for i in predecessors.get(j, ()):
            if i not in reached:
                reached.add(i)
                queue.append(i)
    return frozenset(reached)


def cover_choices(mdp, mec, goal):
    """
    MD choices inside a MEC that reach the source of `goal` = (u, k) with
    probability 1 and then take it (when u is controlled).
    """
    u, k_goal = goal
    choices = {}
    if mdp.kind(u) is StateKind.CONTROLLED:
        choices[u] = k_goal
    done = {u}
    # backward attractor inside the MEC; controlled states pick an edge to a closer state
    progress = True
    while progress:
        progress = False
        for i in sorted(mec.states - done):
            ks = mec.edges_of(i)
            if mdp.kind(i) is StateKind.CONTROLLED:
                step = next((k for k in ks if mdp.edges(i)[k].target in done), None)
                if step is not None:
                    choices[i] = step
                    done.add(i)
                    progress = True
            elif any(mdp.edges(i)[k].target in done for k in ks):
                done.add(i)
                progress = True
    return choices


def stay_choices(mdp, mec):
    """Lowest-index MEC edge at every controlled MEC state."""
    return {i: mec.edges_of(i)[0] for i in mec.states if mdp.kind(i) is StateKind.CONTROLLED}
