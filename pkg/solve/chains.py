"""
Exact analysis of the Markov chain a fixed strategy induces on a FiniteMdp.

Strategies here are finite tables: modes 0..m-1, a choice distribution over
(edge, next mode) at controlled states and a mode update after each random
move. MD and MR strategies are one-mode tables.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import networkx as nx
import sympy as sp

from core.errors import UnsupportedObjective
from core.model import StateKind
from objectives.objective import ExpectedPayoff, ObjectiveKind
from solve.linear import solve_fixed_point
from solve.solvers import target_indices

logger = logging.getLogger(__name__)

ZERO = sp.Integer(0)
ONE = sp.Integer(1)


@dataclass(frozen=True)
class TableStrategy:
    modes: int
    choice: dict                      # (mode, state) -> ((prob, edge, next_mode), ...)
    update: dict = field(default_factory=dict)   # (mode, state, edge) -> ((prob, next_mode), ...)
    initial_mode: int = 0
    tag: str = "FD"

    @classmethod
    def positional(cls, choices):
        """choices: state -> edge index (None entries are random states)."""
        items = choices.items() if isinstance(choices, dict) else enumerate(choices)
        table = {(0, i): ((ONE, k, 0),) for i, k in items if k is not None}
        return cls(1, table, tag="MD")

    @classmethod
    def randomized(cls, distributions):
        """distributions: state -> [(prob, edge), ...]."""
        table = {
            (0, i): tuple((sp.Rational(p), k, 0) for p, k in dist)
            for i, dist in distributions.items()
        }
        return cls(1, table, tag="MR")

    def choose(self, mode, i):
        return self.choice.get((mode, i), ((ONE, 0, mode),))

    def after(self, mode, i, k):
        return self.update.get((mode, i, k), ((ONE, mode),))


@dataclass(frozen=True)
class InducedChain:
    nodes: tuple                 # (state, mode)
    moves: tuple                 # per node: ((prob, node index, state, edge), ...)
    start: int


def induced_chain(mdp, strategy, start=None):
    start_state = mdp.initial if start is None else start
    root = (start_state, strategy.initial_mode)
    index = {root: 0}
    nodes = [root]
    moves = []
    queue = deque([root])
    while queue:
        node = queue.popleft()
        i, mode = node
        out = {}
        if mdp.kind(i) is StateKind.CONTROLLED:
            options = [(p, k, m2) for p, k, m2 in strategy.choose(mode, i)]
        else:
            options = [
                (e.prob * q, k, m2)
                for k, e in enumerate(mdp.edges(i))
                for q, m2 in strategy.after(mode, i, k)
            ]
        for p, k, m2 in options:
            if p == 0:
                continue
            succ = (mdp.edges(i)[k].target, m2)
            if succ not in index:
                index[succ] = len(nodes)
                nodes.append(succ)
                queue.append(succ)
            key = (index[succ], k)
            out[key] = out.get(key, ZERO) + p
        # FIFO order: the n-th node popped is nodes[n]
        moves.append(tuple((p, j, i, k) for (j, k), p in out.items()))
    return InducedChain(tuple(nodes), tuple(moves), 0)


def _bottom_components(chain):
    graph = nx.DiGraph()
    graph.add_nodes_from(range(len(chain.nodes)))
    for n, out in enumerate(chain.moves):
        for _, j, _, _ in out:
            graph.add_edge(n, j)
    return [frozenset(c) for c in nx.attracting_components(graph)]


def _component_score(mdp, chain, component, obj):
    """Value of staying in a bottom component forever (all its edges recur)."""
    edges = [(i, k) for n in component for _, _, i, k in chain.moves[n]]
    transitions = [mdp.transition(i, k) for i, k in edges]
    if isinstance(obj, ExpectedPayoff):
        rewards = [t.reward for t in transitions]
        return max(rewards) if obj.which == "limsup" else min(rewards)
    kind = obj.kind
    if kind is ObjectiveKind.AND:
        return ONE if all(_component_score(mdp, chain, component, p) == ONE
                          for p in obj.parts if p.kind is not ObjectiveKind.SAFETY) else ZERO
    if kind is ObjectiveKind.SAFETY:
        return ONE
    if kind is ObjectiveKind.BUCHI:
        return ONE if any(t in obj.transitions for t in transitions) else ZERO
    if kind is ObjectiveKind.COBUCHI:
        return ONE if all(t in obj.transitions for t in transitions) else ZERO
    if kind is ObjectiveKind.GF_FAMILY:
        return ONE if any(obj.family.level(t) == sp.oo for t in transitions) else ZERO
    if kind is ObjectiveKind.FG_FAMILY:
        return ONE if all(obj.family.level(t) == sp.oo for t in transitions) else ZERO
    if kind is ObjectiveKind.LIMSUP_GEQ0:
        return ONE if max(t.reward for t in transitions) >= 0 else ZERO
    if kind is ObjectiveKind.LIMINF_GEQ0:
        return ONE if min(t.reward for t in transitions) >= 0 else ZERO
    if kind is ObjectiveKind.TRANSIENCE:
        states = {i for i, _ in edges}
        return ONE if all(mdp.states[i].tail is not None and mdp.states[i].tail.transient for i in states) else ZERO
    raise UnsupportedObjective(f"chain analysis does not handle {obj}")


def _safety_parts(obj):
    if isinstance(obj, ExpectedPayoff):
        return []
    if obj.kind is ObjectiveKind.SAFETY:
        return [obj]
    if obj.kind is ObjectiveKind.AND:
        return [p for p in obj.parts if p.kind is ObjectiveKind.SAFETY]
    return []


def evaluate_chain(mdp, strategy, obj, start=None):
    """Exact value of `obj` (Objective or ExpectedPayoff) under `strategy`."""
    chain = induced_chain(mdp, strategy, start)
    return evaluate_induced(mdp, chain, obj)


def evaluate_induced(mdp, chain, obj):
    if not isinstance(obj, ExpectedPayoff) and obj.kind in (ObjectiveKind.REACH, ObjectiveKind.REACH_WITHIN):
        return _reach_value(mdp, chain, obj)
    if not isinstance(obj, ExpectedPayoff) and obj.kind is ObjectiveKind.AND and any(
            p.kind in (ObjectiveKind.REACH, ObjectiveKind.REACH_WITHIN) for p in obj.parts):
        raise UnsupportedObjective("reachability inside a conjunction")

    safety = _safety_parts(obj)

    def blocked(i, k):
        t = mdp.transition(i, k)
        return any(t not in s.transitions for s in safety)

    components = _bottom_components(chain)
    fixed = {}
    for comp in components:
        score = _component_score(mdp, chain, comp, obj)
        if safety and any(blocked(i, k) for n in comp for _, _, i, k in chain.moves[n]):
            score = ZERO
        for n in comp:
            fixed[n] = score

    if isinstance(obj, ExpectedPayoff):
        live = set(range(len(chain.nodes)))
    else:
        # nodes that can still reach a component of positive score without a blocked move
        good = {n for n, v in fixed.items() if v > 0}
        live = set(good)
        reverse = {}
        for n, out in enumerate(chain.moves):
            for _, j, i, k in out:
                if not (safety and blocked(i, k)):
                    reverse.setdefault(j, []).append(n)
        queue = deque(good)
        while queue:
            j = queue.popleft()
            for n in reverse.get(j, ()):
                if n not in live:
                    live.add(n)
                    queue.append(n)

    equations = {}
    for n in live:
        if n in fixed:
            continue
        constant, terms = ZERO, []
        for p, j, i, k in chain.moves[n]:
            if safety and blocked(i, k):
                continue
            if j in fixed:
                constant += p * fixed[j]
            elif j in live:
                terms.append((p, j))
        equations[n] = (constant, terms)
    solved = solve_fixed_point(equations)
    if chain.start in fixed:
        return fixed[chain.start]
    return solved.get(chain.start, ZERO)


def _reach_value(mdp, chain, obj):
    goal = target_indices(mdp, obj.targets)
    if obj.kind is ObjectiveKind.REACH_WITHIN:
        dist = {chain.start: ONE}
        if chain.nodes[chain.start][0] in goal:
            return ONE
        total = ZERO
        for _ in range(obj.steps):
            nxt = {}
            for n, mass in dist.items():
                for p, j, _, _ in chain.moves[n]:
                    if chain.nodes[j][0] in goal:
                        total += mass * p
                    else:
                        nxt[j] = nxt.get(j, ZERO) + mass * p
            dist = nxt
        return total

    hits = {n for n, (i, _) in enumerate(chain.nodes) if i in goal}
    if chain.start in hits:
        return ONE
    live = set(hits)
    reverse = {}
    for n, out in enumerate(chain.moves):
        for _, j, _, _ in out:
            reverse.setdefault(j, []).append(n)
    queue = deque(hits)
    while queue:
        j = queue.popleft()
        for n in reverse.get(j, ()):
            if n not in live:
                live.add(n)
                queue.append(n)
    equations = {}
    for n in live - hits:
        constant, terms = ZERO, []
        for p, j, _, _ in chain.moves[n]:
            if j in hits:
                constant += p
            elif j in live:
                terms.append((p, j))
        equations[n] = (constant, terms)
    return solve_fixed_point(equations).get(chain.start, ZERO)
