"""
Good-set reductions
-------------------
Turn a (near-)optimal strategy for a GF or FG family on a truncation into
finitely many finite transition sets Good_1, Good_2, ... whose union is a
single Büchi (limsup side) or safety (liminf side) target that loses at most
a few epsilons of the family's value.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import sympy as sp

from core.bubble import FrontierPolicy, truncate
from core.errors import BudgetExhausted
from objectives.objective import Objective, TransitionSet
from solve.solvers import solve_objective, solve_safety
from synth.bubble_plan import BubblePlan, family_edges, layers, live_edges, ordered_progress, synth_positional_as_gf
from synth.drift import bottom_components, chain_reach, step_distribution, transient_drift_horizon, transient_drift_support
from tools.calculator import two_pow_neg

logger = logging.getLogger(__name__)

ZERO = sp.Integer(0)
ONE = sp.Integer(1)


@dataclass(frozen=True)
class GoodSets:
    side: str                   # "limsup" or "liminf"
    truncation: object
    horizons: tuple             # n_1 < n_2 < ... < n_K
    good: tuple                 # Good_i as frozensets of (state, edge)
    objective: Objective        # derived single-set objective on the truncation
    value: sp.Rational          # family value the reduction started from
    certified: sp.Rational      # exact lower bound for the derived objective
    losses: tuple = ()
    eps: sp.Rational = ZERO
    strategy: tuple = None      # MD safety strategy on the liminf side

    @property
    def mdp(self):
        return self.truncation.mdp

    @property
    def union(self):
        return frozenset().union(*self.good) if self.good else frozenset()

    @property
    def slack(self):
        return 2 if self.side == "limsup" else 3

    @property
    def meets_claim(self):
        return self.certified >= self.value - self.slack * self.eps

    def transition_set(self):
        return _local(self.mdp, self.union, f"Good[{self.side}]")

    def inclusion_violations(self, family):
        """Edges of Good_i whose family level is below i."""
        finite = self.mdp
        return [
            (i, (s, k)) for i, goods in enumerate(self.good, start=1) for s, k in sorted(goods)
            if not family.contains(i, finite.transition(s, k))
        ]

    def to_dict(self):
        finite = self.mdp
        return {
            "side": self.side,
            "model": finite.name,
            "horizons": list(self.horizons),
            "good": [sorted(f"{finite.states[s].label}#{k}" for s, k in goods) for goods in self.good],
            "objective": str(self.objective),
            "value": str(self.value),
            "certified": str(self.certified),
            "losses": [str(x) for x in self.losses],
            "eps": str(self.eps),
            "meets_claim": self.meets_claim,
        }


def _local(finite, edges, name):
    return TransitionSet.local(((finite.states[i].label, k) for i, k in edges), name)


# ----------------------------
# limsup side: GF family -> Transience ∧ Büchi(Good)
# ----------------------------

def _windows(finite, layer, targets, radii, n, stage):
    """
    Stage goals with stage `stage` cut at radius n: earlier stages live in
    their own shells, later ones only beyond n.
    """
    out = []
    for j, edges in enumerate(targets, start=1):
        if j < stage:
            lo, hi = radii[j - 1], radii[j]
        elif j == stage:
            lo, hi = radii[j - 1], n
        else:
            lo, hi = n, None
        out.append(frozenset(
            (i, k) for i, k in edges
            if layer[finite.edges(i)[k].target] > lo
            and (hi is None or (layer[i] <= hi and layer[finite.edges(i)[k].target] <= hi))
        ))
    return out


def good_sets_limsup(mdp, family, eps, depth=None, stages=3, reference=None, value=None,
                     branch_cap=None, max_states=None):
    """
    reference: a BubblePlan (its truncation and strategy are reused), a
    per-state strategy tuple on the depth-`depth` truncation, or None to
    synthesize a positional plan first.
    """
    eps = sp.Rational(eps)
    if isinstance(reference, BubblePlan):
        plan = reference
    elif reference is None:
        plan = synth_positional_as_gf(mdp, family, stages, depth, branch_cap=branch_cap, max_states=max_states)
    else:
        plan = None
    if plan is not None:
        trunc, strategy = plan.truncation, plan.strategy
    else:
        trunc = truncate(mdp, depth, FrontierPolicy.LOSING, branch_cap, max_states)
        strategy = tuple(reference)
    finite = trunc.mdp
    depth = trunc.depth
    layer = layers(trunc)
    live = live_edges(finite, layer)
    targets = [family_edges(finite, family, j, live) for j in range(1, stages + 1)]

    radii = [0]
    bound = ordered_progress(finite, strategy, _windows(finite, layer, targets, radii, 0, 0))
    reference_value = bound
    value = reference_value if value is None else sp.Rational(value)
    losses = []
    for stage in range(1, stages + 1):
        budget = eps * two_pow_neg(stage)
        for n in range(radii[-1] + 1, depth + 1):
            progress = ordered_progress(finite, strategy, _windows(finite, layer, targets, radii, n, stage))
            if progress >= bound - budget:
                break
        else:
            raise BudgetExhausted(f"stage {stage}: no radius up to depth {depth} keeps the loss within {budget}")
        losses.append(bound - progress)
        bound = progress
        radii.append(n)
        logger.info("good set %d: radius %d, progress %s", stage, n, progress)

    good = tuple(
        frozenset(
            (i, k) for i, k in targets[j - 1]
            if layer[i] <= radii[j] and layer[finite.edges(i)[k].target] <= radii[j]
        )
        for j in range(1, stages + 1)
    )
    objective = Objective.conj(
        Objective.transience(), Objective.buchi(_local(finite, frozenset().union(*good), "Good[limsup]"))
    )
    result = GoodSets(
        "limsup", trunc, tuple(radii[1:]), good, objective, value, bound, tuple(losses), eps,
    )
    if not result.meets_claim:
        logger.warning("certified %s is below %s - 2·%s", bound, value, eps)
    return result


# ----------------------------
# liminf side: FG family -> Safety(Good)
# ----------------------------

def _sinks(finite):
    return frozenset(i for i, st in enumerate(finite.states) if st.tail is not None)


def _stay_horizon(finite, strategy, inside, outside, delta, start, cap):
    """Least m with P(G^{>=m}(inside edges, away from `outside`)) >= P(FG(...)) - delta."""
    bad = frozenset(
        (i, k) for i in range(len(finite)) for k in range(len(finite.edges(i))) if (i, k) not in inside
    )
    stay = [ONE - v for v in chain_reach(finite, strategy, outside, bad)]
    closed = [
        c for c in bottom_components(finite, strategy)
        if not (c & outside) and all(stay[i] == ONE for i in c)
    ]
    limit = chain_reach(finite, strategy, frozenset().union(*closed))[start] if closed else ZERO
    dist = {start: ONE}
    for m in range(cap + 1):
        if sum((mass * stay[i] for i, mass in dist.items()), ZERO) >= limit - delta:
            return m
        dist = step_distribution(finite, strategy, dist)
    return None


def good_sets_liminf(mdp, family, eps, depth=None, stages=3, reference=None, value=None,
                     branch_cap=None, max_states=None):
    """
    The truncation's frontier counts as winning: a run that reaches it has
    survived the finite prefix. Supports never contain sink states, which
    stand for their infinite futures.
    """
    eps = sp.Rational(eps)
    trunc = truncate(mdp, depth, FrontierPolicy.WINNING, branch_cap, max_states)
    finite = trunc.mdp
    depth = trunc.depth
    start = finite.initial
    objective = Objective.fg_family(family)
    solution = solve_objective(finite, objective)
    strategy = solution.strategy if reference is None else tuple(reference)
    value = solution.values[start] if value is None else sp.Rational(value)

    everything = frozenset(
        (i, k) for i in range(len(finite)) for k in range(len(finite.edges(i)))
    )
    targets = [family_edges(finite, family, j, everything) for j in range(1, stages + 1)]
    sinks = _sinks(finite)

    supports = [frozenset()]
    horizons = [0]
    for stage in range(1, stages + 1):
        budget = eps * two_pow_neg(stage) / 3
        previous = supports[-1]
        drift = transient_drift_horizon(finite, strategy, previous, budget, start, depth).steps if previous else 0
        m = _stay_horizon(finite, strategy, targets[stage - 1], previous, budget, start, depth)
        if m is None:
            raise BudgetExhausted(f"stage {stage}: the run does not settle in A_{stage} within {depth} steps")
        n = max(m, drift, horizons[-1] + 1)
        if n > depth:
            raise BudgetExhausted(f"stage {stage}: horizon {n} exceeds depth {depth}")
        kept = transient_drift_support(finite, strategy, n, budget, start)
        supports.append(previous | (kept.states - sinks))
        horizons.append(n)
        logger.info("stage %d: horizon %d, support %d states", stage, n, len(supports[-1]))

    shells = supports + [frozenset(range(len(finite)))]
    good = []
    for i in range(1, stages + 1):
        band = shells[i + 1] - shells[i - 1]
        good.append(frozenset(
            (s, k) for s, k in targets[i - 1] if s in band and finite.edges(s)[k].target in band
        ))
    good = tuple(good)
    allowed = frozenset().union(*good) | frozenset(
        (i, k) for i in sinks for k in range(len(finite.edges(i)))
    )
    safety = solve_safety(finite, allowed)
    derived = Objective.safety(_local(finite, allowed, "Good[liminf]"))
    if not (mdp.acyclic or mdp.universally_transient):
        derived = Objective.conj(Objective.transience(), derived)
    result = GoodSets("liminf", trunc, tuple(horizons[1:]), good, derived, value, safety.values[start],
                      (), eps, safety.strategy)
    if not result.meets_claim:
        logger.warning("safety value %s is below %s - 3·%s", result.certified, value, eps)
    return result
