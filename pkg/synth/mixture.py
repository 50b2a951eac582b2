"""
Randomized positional a.s. strategies for ⋂ GF A_i.

Same staged bubbles as the deterministic construction, but on each new shell
the stage's reach strategy is played with probability p and the uniform
reach strategy tau^j for A_j with probability (1 - p)·2^-j. Only finitely
many tau^j exist on a truncation, so the last weight is doubled to keep the
mixture an exact distribution. p is the least multiple of 2^-bits that keeps
the stage's bounded hit probability >= 1/4.
"""

from __future__ import annotations

import logging

import sympy as sp

from config.settings import Config
from core.bubble import FrontierPolicy, truncate
from core.errors import StageFailure
from core.model import StateKind
from solve.horizon import horizon_values
from solve.solvers import solve_reachability
from synth.bubble_plan import (
    BubblePlan,
    Stage,
    warn_if_recurrent,
    bubble,
    family_edges,
    first_horizon,
    layers,
    live_edges,
    restrict,
    restrict_edges,
)
from tools.calculator import two_pow_neg

logger = logging.getLogger(__name__)

ZERO = sp.Integer(0)
ONE = sp.Integer(1)


def mixture_weights(p, count):
    """Weights (1-p)·2^-j for j = 1..count, the last one doubled."""
    p = sp.Rational(p)
    if count < 1:
        raise ValueError("need at least one reach strategy")
    weights = [(ONE - p) * two_pow_neg(j) for j in range(1, count + 1)]
    weights[-1] *= 2
    return tuple(weights)


def _mix(i, p, sigma, taus):
    dist = {}
    if p > 0:
        dist[sigma[i]] = dist.get(sigma[i], ZERO) + p
    for w, tau in zip(mixture_weights(p, len(taus)), taus):
        if w > 0:
            dist[tau[i]] = dist.get(tau[i], ZERO) + w
    return tuple((w, k) for k, w in sorted(dist.items()))


def synth_mr_as_gf(mdp, family, stages, depth, bound=None, reach_bound=None, bits=None,
                   branch_cap=None, max_states=None):
    """
    Returns a randomized BubblePlan. Stage certificates are exact bounded hit
    probabilities >= `bound` (1/4) under the frozen mixtures.
    """
    bound = sp.Rational(Config.MR_STAGE_BOUND if bound is None else bound)
    reach_bound = sp.Rational(Config.STAGE_BOUND if reach_bound is None else reach_bound)
    bits = Config.MR_SEARCH_BITS if bits is None else bits
    scale = 2 ** bits
    warn_if_recurrent(mdp)
    trunc = truncate(mdp, depth, FrontierPolicy.LOSING, branch_cap, max_states)
    finite = trunc.mdp
    layer = layers(trunc)
    live = live_edges(finite, layer)

    targets = [family_edges(finite, family, j, live) for j in range(1, stages + 1)]
    taus = [solve_reachability(finite, target_edges=goal).strategy for goal in targets]

    fixed, radii, records = {}, [0], []
    sigma = None
    for stage in range(1, stages + 1):
        radius = radii[-1]
        sources = bubble(layer, radius)
        goals = targets[stage - 1]
        restricted = restrict(finite, fixed)
        local_goals = restrict_edges(fixed, goals)
        sigma = solve_reachability(restricted, target_edges=local_goals).strategy
        horizon, reach_value = first_horizon(restricted, local_goals, sources, reach_bound, depth - radius, sigma)
        if horizon is None:
            raise StageFailure(stage, reach_bound - reach_value, f"reach strategy peaks at {reach_value}")
        shell = [
            i for i in sorted(bubble(layer, radius + horizon))
            if i not in fixed and finite.kind(i) is StateKind.CONTROLLED
        ]

        def attempt(m):
            p = sp.Rational(m, scale)
            trial = dict(fixed)
            trial.update({i: _mix(i, p, sigma, taus) for i in shell})
            values = horizon_values(
                restrict(finite, trial), horizon, target_edges=restrict_edges(trial, goals), mode="min"
            )
            return min(values[i] for i in sources)

        top = scale - 1
        near_one = attempt(top)
        if near_one < bound:
            raise StageFailure(stage, bound - near_one, f"no mixing weight below 1 keeps {bound}")
        if attempt(0) >= bound:
            m = 0
        else:
            lo, hi = 0, top
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if attempt(mid) >= bound:
                    hi = mid
                else:
                    lo = mid
            m = hi
        p = sp.Rational(m, scale)
        grown = {i: _mix(i, p, sigma, taus) for i in shell}
        fixed.update(grown)
        certificate = attempt(m)
        radii.append(radius + horizon)
        records.append(Stage(stage, radius + horizon, horizon, goals, certificate, grown, reach_value, p))
        logger.info("stage %d: radius %d, mixing %s, certified %s", stage, radius + horizon, p, certificate)

    strategy = tuple(
        None if finite.kind(i) is StateKind.RANDOM
        else fixed.get(i, ((ONE, sigma[i] if sigma is not None else 0),))
        for i in range(len(finite))
    )
    return BubblePlan(trunc, family, tuple(records), strategy, "MR", bound)
