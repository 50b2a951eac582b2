"""
Bubble construction for ⋂ GF A_i
---------------------------------
Builds a deterministic positional strategy on a truncation of a universally
transient model, one stage at a time. Stage i+1 solves reachability of the
A_{i+1} transitions that do not lie inside an earlier shell, finds the least
horizon k at which that reach strategy hits them with probability >= 1/2 from
every state of the current bubble S_i, and freezes its choices on the grown
bubble of radius n_i + k.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass

import sympy as sp

from config.settings import Config
from core.bubble import FrontierPolicy, Truncation, truncate
from core.errors import StageFailure
from core.model import FiniteEdge, FiniteMdp, FiniteState, StateKind
from objectives.objective import MonotoneFamily
from sim.strategy import PositionalMachine, RandomizedPositional
from solve.chains import TableStrategy
from solve.horizon import horizon_sweep
from solve.linear import solve_fixed_point
from solve.solvers import solve_reachability
from synth.drift import strategy_moves

logger = logging.getLogger(__name__)

ZERO = sp.Integer(0)
ONE = sp.Integer(1)


@dataclass(frozen=True)
class Stage:
    index: int
    radius: int
    horizon: int
    goals: frozenset            # {(state, edge)} counted for this stage
    certificate: sp.Rational    # min over the previous bubble of the bounded hit probability
    fixed: dict                 # state index -> ((prob, edge), ...) frozen at this stage
    reach_bound: sp.Rational = None
    mixing: sp.Rational = None

    def to_dict(self, finite):
        out = {
            "stage": self.index,
            "radius": self.radius,
            "horizon": self.horizon,
            "goals": len(self.goals),
            "certificate": str(self.certificate),
            "fixed": {
                str(finite.states[i].label): [[str(p), k] for p, k in dist] for i, dist in sorted(self.fixed.items())
            },
        }
        if self.mixing is not None:
            out["mixing"] = str(self.mixing)
            out["reach_bound"] = str(self.reach_bound)
        return out


@dataclass(frozen=True)
class BubblePlan:
    truncation: Truncation
    family: MonotoneFamily
    stages: tuple
    strategy: tuple             # per state: None at random states, else ((prob, edge), ...)
    kind: str = "MD"
    bound: sp.Rational = sp.Rational(1, 2)

    @property
    def mdp(self):
        return self.truncation.mdp

    @property
    def radii(self):
        return (0,) + tuple(s.radius for s in self.stages)

    @property
    def certificates(self):
        return tuple(s.certificate for s in self.stages)

    def choices(self):
        """{state label: ((prob, edge), ...)} at controlled states."""
        return {
            self.mdp.states[i].label: dist for i, dist in enumerate(self.strategy) if dist is not None
        }

    def table(self):
        if self.kind == "MD":
            return TableStrategy.positional(
                {i: dist[0][1] for i, dist in enumerate(self.strategy) if dist is not None}
            )
        return TableStrategy.randomized(
            {i: list(dist) for i, dist in enumerate(self.strategy) if dist is not None}
        )

    def machine(self):
        choices = self.choices()
        if self.kind == "MD":
            return PositionalMachine({label: dist[0][1] for label, dist in choices.items()})
        return RandomizedPositional(lambda s, b: choices.get(s, ((ONE, 0),)))

    def to_dict(self):
        finite = self.mdp
        return {
            "kind": self.kind,
            "model": finite.name,
            "bound": str(self.bound),
            "radii": list(self.radii),
            "stages": [s.to_dict(finite) for s in self.stages],
            "strategy": {
                str(label): [[str(p), k] for p, k in dist] for label, dist in self.choices().items()
            },
        }


# ----------------------------
# Truncation geometry
# ----------------------------

def layers(truncation):
    return [truncation.layer(i) for i in range(len(truncation.mdp))]


def bubble(layer, radius):
    return frozenset(i for i, d in enumerate(layer) if d is not None and d <= radius)


def live_edges(finite, layer):
    """Edges between explored states; the frontier sink and its helpers are excluded."""
    return frozenset(
        (i, k)
        for i, st in enumerate(finite.states) if layer[i] is not None
        for k, e in enumerate(st.edges) if layer[e.target] is not None
    )


def family_edges(finite, family, level, edges):
    return frozenset((i, k) for i, k in edges if family.contains(level, finite.transition(i, k)))


def _shells(layer, radii):
    """Shell index j of every state (X_0 = {d = 0}, X_j = {radii[j-1] < d <= radii[j]})."""
    out = []
    for d in layer:
        if d is None or d > radii[-1]:
            out.append(None)
            continue
        out.append(next(j for j, r in enumerate(radii) if d <= r))
    return out


def restrict(finite, fixed):
    """
    Freeze `fixed` choices. A single choice leaves a one-edge controlled
    state; a mixture turns the state into a random one.
    """
    states = []
    for i, st in enumerate(finite.states):
        dist = fixed.get(i)
        if dist is None:
            states.append(st)
        elif len(dist) == 1:
            states.append(FiniteState(st.label, st.kind, (st.edges[dist[0][1]],), st.tail))
        else:
            edges = tuple(
                FiniteEdge(st.edges[k].target, st.edges[k].reward, p, st.edges[k].origin) for p, k in dist
            )
            states.append(FiniteState(st.label, StateKind.RANDOM, edges, st.tail))
    return FiniteMdp(tuple(states), finite.initial, f"{finite.name}|fixed")


def restrict_edges(fixed, edges):
    """Re-index an edge set of the original truncation into restrict(finite, fixed)."""
    out = set()
    for i, k in edges:
        dist = fixed.get(i)
        if dist is None:
            out.add((i, k))
            continue
        kept = [kk for _, kk in dist]
        if k in kept:
            out.add((i, kept.index(k)))
    return frozenset(out)


def first_horizon(mdp, goals, sources, bound, limit, strategy=None, mode="fixed"):
    """Least k in 1..limit with min over sources of P(F^{<=k} goals) >= bound; (None, best) otherwise."""
    sweep = horizon_sweep(mdp, target_edges=goals, mode=mode, strategy=strategy)
    next(sweep)
    best = ZERO
    for k in range(1, limit + 1):
        values = next(sweep)
        worst = min(values[i] for i in sources)
        if worst >= bound:
            return k, worst
        best = max(best, worst)
    return None, best


# ----------------------------
# Synthesis
# ----------------------------

def warn_if_recurrent(mdp):
    if not (mdp.universally_transient or mdp.acyclic):
        logger.warning("%s does not claim universal transience; certificates cover the truncation only", mdp.name)


def synth_positional_as_gf(mdp, family, stages, depth, bound=None, branch_cap=None, max_states=None):
    """
    Returns a BubblePlan whose strategy is deterministic positional on the
    depth-`depth` truncation. StageFailure(i, gap) when stage i cannot reach
    the bound within the depth budget.
    """
    bound = sp.Rational(Config.STAGE_BOUND if bound is None else bound)
    warn_if_recurrent(mdp)
    trunc = truncate(mdp, depth, FrontierPolicy.LOSING, branch_cap, max_states)
    finite = trunc.mdp
    layer = layers(trunc)
    live = live_edges(finite, layer)

    fixed, radii, records = {}, [0], []
    sigma = None
    for stage in range(1, stages + 1):
        radius = radii[-1]
        sources = bubble(layer, radius)
        shell = _shells(layer, radii)
        goals = frozenset(
            (i, k) for i, k in family_edges(finite, family, stage, live)
            if shell[i] is None or shell[i] != shell[finite.edges(i)[k].target]
        )
        restricted = restrict(finite, fixed)
        local_goals = restrict_edges(fixed, goals)
        reach = solve_reachability(restricted, target_edges=local_goals)
        sigma = reach.strategy
        logger.debug("stage %d: reach value %s from the bubble", stage, min(reach.values[i] for i in sources))

        horizon, worst = first_horizon(restricted, local_goals, sources, bound, depth - radius, sigma)
        if horizon is None:
            raise StageFailure(stage, bound - worst, f"best bounded hit probability {worst} within depth {depth}")
        grown = {
            i: ((ONE, sigma[i]),)
            for i in sorted(bubble(layer, radius + horizon))
            if i not in fixed and finite.kind(i) is StateKind.CONTROLLED
        }
        fixed.update(grown)
        radii.append(radius + horizon)
        records.append(Stage(stage, radius + horizon, horizon, goals, worst, grown))
        logger.info("stage %d: radius %d, horizon %d, certified %s", stage, radius + horizon, horizon, worst)

    strategy = tuple(
        None if finite.kind(i) is StateKind.RANDOM
        else fixed.get(i, ((ONE, sigma[i] if sigma is not None else 0),))
        for i in range(len(finite))
    )
    return BubblePlan(trunc, family, tuple(records), strategy, "MD", bound)


def ordered_progress(finite, strategy, goals, start=None):
    """
    Probability that the run takes an edge of goals[0], later one of
    goals[1], and so on through the last stage.
    """
    stages = len(goals)
    if stages == 0:
        return ONE
    start = finite.initial if start is None else start
    root = (start, 0)
    seen = {root}
    queue = deque([root])
    moves = {}
    while queue:
        node = queue.popleft()
        i, j = node
        out = []
        for p, k in strategy_moves(finite, strategy, i):
            step = j + 1 if (i, k) in goals[j] else j
            if step == stages:
                out.append((p, None))
                continue
            nxt = (finite.edges(i)[k].target, step)
            out.append((p, nxt))
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
        moves[node] = out

    done = {node for node, out in moves.items() if any(nxt is None for _, nxt in out)}
    reverse = {}
    for node, out in moves.items():
        for _, nxt in out:
            if nxt is not None:
                reverse.setdefault(nxt, []).append(node)
    live = set(done)
    queue = deque(done)
    while queue:
        nxt = queue.popleft()
        for node in reverse.get(nxt, ()):
            if node not in live:
                live.add(node)
                queue.append(node)
    if root not in live:
        return ZERO

    equations = {}
    for node in live:
        constant, terms = ZERO, []
        for p, nxt in moves[node]:
            if nxt is None:
                constant += p
            elif nxt in live:
                terms.append((p, nxt))
        equations[node] = (constant, terms)
    return solve_fixed_point(equations)[root]


def stage_progress_value(plan, start=None):
    """Exact probability that the plan's strategy sees every stage goal, in stage order."""
    return ordered_progress(plan.mdp, plan.strategy, [s.goals for s in plan.stages], start)
