"""
Ladder gadget
-------------
Replaces every state of branching degree > 2 by a chain of rungs. Rung j
exits to the j-th original successor with the original reward; moving up a
rung costs reward -1. The replaced state itself is the first rung. Random
rungs exit with p_j' = p_j / prod_{l<j}(1 - p_l') so the gadget leaves at y_j
with probability p_j. Infinite branchings are cut after `branch_bound` rungs
and the rest of the ladder becomes a losing chain.

Only sound for limsup_PP(>=0) and GF families: staying on a ladder loses.
"""

from __future__ import annotations

import logging
from typing import Hashable, NamedTuple

import sympy as sp

from config.settings import Config
from core.errors import MassMismatch, ProbOverflow, UnsupportedObjective
from core.model import LOSING_CHAIN, Branching, CountableMdp, Edge, Key, StateKind, Transition, widened_bound
from objectives.objective import ObjectiveKind
from sim.strategy import Choice, StrategyMachine

logger = logging.getLogger(__name__)

ZERO = sp.Integer(0)
ONE = sp.Integer(1)
RUNG_REWARD = sp.Integer(-1)
LADDER_OBJECTIVES = (ObjectiveKind.LIMSUP_GEQ0, ObjectiveKind.GF_FAMILY)


class Rung(NamedTuple):
    state: Hashable
    step: int               # >= 1; step 0 is the replaced state itself

    def __str__(self):
        return f"rung({self.state},{self.step})"


def _off_ladder(state):
    return Key("off_ladder", (str(state),))


def gadget_probabilities(probs):
    """p_j' for the exit probabilities p_j, in order (the last one is 1 for a full distribution)."""
    result = []
    remaining = ONE
    for p in probs:
        p = sp.Rational(p)
        if remaining == 0:
            raise ProbOverflow("gadget probabilities beyond exhausted mass")
        q = p / remaining
        if q > 1:
            raise ProbOverflow(f"p' = {q} > 1")
        result.append(q)
        remaining *= 1 - q
    return result


def _rung_state(x, j):
    return x if j == 0 else Rung(x, j)


def _exit(x, j, e):
    return Edge(e.target, e.reward, None, Transition(x, j, e.target, e.reward, e.origin))


def ladder_binarize(mdp: CountableMdp, branch_bound=None, objective=None) -> CountableMdp:
    """Branching <= 2 everywhere. `objective`, when given, must be limsup_PP(>=0) or a GF family."""
    if objective is not None and objective.kind not in LADDER_OBJECTIVES:
        raise UnsupportedObjective(f"the ladder gadget does not preserve {objective}")
    branch_bound = Config.DEFAULT_BRANCH_CAP if branch_bound is None else branch_bound

    def rungs(x):
        """Number of rungs of the gadget at x, or 0 when x is kept as it is."""
        branching = mdp.successors(x)
        if mdp.tail_label(x) is not None:
            return 0
        if branching.is_finite:
            return len(branching.edges) - 1 if len(branching.edges) > 2 else 0
        return branch_bound

    def rung_branching(x, j):
        branching = mdp.successors(x)
        n = rungs(x)
        random = branching.kind is StateKind.RANDOM
        if branching.is_finite:
            edges = branching.edges
            last = j == n - 1
            e = edges[j]
            exits = [(j, e)]
            up = None if last else _rung_state(x, j + 1)
            if last:
                exits.append((j + 1, edges[j + 1]))
        else:
            e = branching.edge(j)
            exits = [(j, e)]
            up = _rung_state(x, j + 1) if j + 1 < n else _off_ladder(x)
        if not random:
            out = [_exit(x, k, e) for k, e in exits]
            if up is not None:
                out.append(Edge(up, RUNG_REWARD))
            return Branching(StateKind.CONTROLLED, tuple(out))
        probs = gadget_probabilities([e.prob for e in branching.prefix(j + 1)])
        q = probs[j]
        out = []
        if up is None:
            # final binary step: both remaining exits
            k2, e2 = exits[1]
            out.append(Edge(e.target, e.reward, q, Transition(x, j, e.target, e.reward, e.origin)))
            if 1 - q > 0:
                out.append(Edge(e2.target, e2.reward, 1 - q, Transition(x, k2, e2.target, e2.reward, e2.origin)))
        else:
            out.append(Edge(e.target, e.reward, q, Transition(x, j, e.target, e.reward, e.origin)))
            if 1 - q > 0:
                out.append(Edge(up, RUNG_REWARD, 1 - q))
        return Branching(StateKind.RANDOM, tuple(out))

    def oracle(state):
        if isinstance(state, Key) and state.family == "off_ladder":
            return Branching(StateKind.CONTROLLED, (Edge(state, RUNG_REWARD),))
        if isinstance(state, Rung):
            return rung_branching(state.state, state.step)
        if rungs(state):
            return rung_branching(state, 0)
        return mdp.successors(state)

    def tail(state):
        if isinstance(state, Key) and state.family == "off_ladder":
            return LOSING_CHAIN
        if isinstance(state, Rung):
            return None
        return mdp.tail_label(state)

    return CountableMdp(
        mdp.initial,
        oracle,
        name=f"ladder({mdp.name})",
        params=dict(mdp.params, branch_bound=branch_bound),
        reward_bound=widened_bound(mdp.reward_bound, RUNG_REWARD),
        tail=tail,
        finitely_branching=True,
        universally_transient=mdp.universally_transient,
        acyclic=mdp.acyclic,
    )


def gadget_rungs(binarized, x):
    """Rung states of the gadget at x in order, starting with x."""
    chain = [x]
    while True:
        b = binarized.successors(chain[-1])
        nxt = [e.target for e in b.edges if isinstance(e.target, Rung) and e.target.state == x]
        if not nxt:
            return chain
        chain.append(nxt[0])


def gadget_exit_distribution(binarized, machine, x, mode):
    """
    ExitDistribution of `machine` entering the gadget at x in `mode`:
    ({(original edge index, mode'): prob}, non-exit mass). Exact; the rung
    chain is acyclic.
    """
    mass = {(x, mode): ONE}
    exits = {}
    stuck = ZERO
    for rung in gadget_rungs(binarized, x):
        layer = {m: p for (r, m), p in mass.items() if r == rung}
        for m, p in layer.items():
            branching = binarized.successors(rung)
            if branching.kind is StateKind.CONTROLLED:
                moves = [(c.prob, c.edge, c.mode) for c in machine.choose(m, rung, branching)]
            else:
                moves = [
                    (e.prob * q, k, m2)
                    for k, e in enumerate(branching.edges)
                    for q, m2 in machine.observe(m, rung, k, branching)
                ]
            for w, k, m2 in moves:
                e = branching.edges[k]
                if e.origin is not None and e.origin.source == x:
                    key = (e.origin.index, m2)
                    exits[key] = exits.get(key, ZERO) + p * w
                elif isinstance(e.target, Rung):
                    mass[(e.target, m2)] = mass.get((e.target, m2), ZERO) + p * w
                else:
                    stuck += p * w
    return exits, stuck


class LadderCarryBack(StrategyMachine):
    """
    Finite-memory strategy on M from one on the binarized model: at a replaced
    controlled state pick (y_i, mode) with the gadget's exit probabilities,
    folding the non-exit mass into (y_1, first mode); at a replaced random
    state resample the mode conditioned on the observed exit.
    """

    def __init__(self, inner, binarized, original):
        self.inner = inner
        self.binarized = binarized
        self.original = original
        self.modes = inner.modes
        self.initial_mode = inner.initial_mode
        self.tag = inner.tag
        self._cache = {}

    def _replaced(self, state):
        return self.binarized.successors(state) is not self.original.successors(state)

    def _distribution(self, state, mode):
        key = (state, mode)
        if key not in self._cache:
            exits, stuck = gadget_exit_distribution(self.binarized, self.inner, state, mode)
            total = sum(exits.values(), ZERO) + stuck
            if total != ONE:
                raise MassMismatch(f"exit mass {total} at {state!r} mode {mode!r}")
            self._cache[key] = (exits, stuck)
        return self._cache[key]

    def choose(self, mode, state, branching):
        if not self._replaced(state):
            return self.inner.choose(mode, state, branching)
        exits, stuck = self._distribution(state, mode)
        first_mode = self.modes[0] if self.modes else mode
        out = dict(exits)
        if stuck:
            out[(0, first_mode)] = out.get((0, first_mode), ZERO) + stuck
        return tuple(Choice(p, k, m2) for (k, m2), p in sorted(out.items(), key=lambda kv: str(kv[0])) if p > 0)

    def observe(self, mode, state, edge, branching):
        if not self._replaced(state):
            return self.inner.observe(mode, state, edge, branching)
        exits, _ = self._distribution(state, mode)
        here = {m2: p for (k, m2), p in exits.items() if k == edge}
        total = sum(here.values(), ZERO)
        if total == 0:
            return ((ONE, mode),)
        return tuple((p / total, m2) for m2, p in here.items())


def carry_back_finite_memory(inner, binarized, original):
    return LadderCarryBack(inner, binarized, original)
