from __future__ import annotations

import pytest
import sympy as sp

from core.bubble import FrontierPolicy, truncate
from core.errors import NoOptimal
from objectives.objective import ExpectedPayoff, MonotoneFamily, Objective, TransitionSet
from paperlab.experiments import two_level_toy
from solve.solvers import solve_objective
from synth.bubble_plan import stage_progress_value, synth_positional_as_gf
from synth.good_sets import GoodSets
from synth.mixture import mixture_weights, synth_mr_as_gf
from synth.optimal import optimal_from_as
from synth.safe_gadget import GADGET, safe_gadget_transform, safe_states
from tools.calculator import two_pow_neg

pytestmark = pytest.mark.exact

HALF = sp.Rational(1, 2)
S, COIN, SAFE, WIN, LOSE = range(5)


def test_mixture_weights():
    assert mixture_weights(HALF, 3) == (sp.Rational(1, 4), sp.Rational(1, 8), sp.Rational(1, 8))
    assert mixture_weights(0, 1) == (1,)
    with pytest.raises(ValueError):
        mixture_weights(HALF, 0)


def test_positional_plan_certificates():
    mdp, family = two_level_toy()
    plan = synth_positional_as_gf(mdp, family, 3, 20)
    assert plan.kind == "MD"
    assert len(plan.stages) == 3
    assert all(c >= HALF for c in plan.certificates)
    assert list(plan.radii) == sorted(plan.radii)
    assert all(dist is None or len(dist) == 1 for dist in plan.strategy)
    progress = stage_progress_value(plan)
    assert progress >= sp.prod(plan.certificates)
    assert progress >= two_pow_neg(3)
    assert len(plan.to_dict()["stages"]) == 3


def test_randomized_plan_certificates():
    mdp, family = two_level_toy()
    plan = synth_mr_as_gf(mdp, family, 2, 20)
    assert plan.kind == "MR"
    assert all(c >= sp.Rational(1, 4) for c in plan.certificates)
    for stage in plan.stages:
        assert stage.mixing + sum(mixture_weights(stage.mixing, 2)) == 1
        assert all(sum(p for p, _ in dist) == 1 for dist in stage.fixed.values())


def _good_sets(side, certified, good):
    mdp, family = two_level_toy()
    trunc = truncate(mdp, 4)
    return GoodSets(side, trunc, (2,), (good,), Objective.transience(), HALF, certified, eps=sp.Rational(1, 8)), family


def _levelled_edges(finite, family, wanted):
    return frozenset((i, k) for i, k, t in finite.all_transitions() if family.level(t) == wanted)


def test_good_set_claim_slack():
    mdp, family = two_level_toy()
    finite = truncate(mdp, 4).mdp
    top = _levelled_edges(finite, family, sp.oo)
    assert top
    limsup, _ = _good_sets("limsup", sp.Rational(1, 4), top)
    assert limsup.meets_claim
    assert not limsup.inclusion_violations(family)
    assert not _good_sets("limsup", sp.Rational(1, 8), top)[0].meets_claim
    assert _good_sets("liminf", sp.Rational(1, 8), top)[0].meets_claim


def test_good_set_inclusion_violations():
    mdp, family = two_level_toy()
    finite = truncate(mdp, 4).mdp
    low = _levelled_edges(finite, family, 0)
    result, _ = _good_sets("limsup", HALF, low)
    assert len(result.inclusion_violations(family)) == len(low)


def test_safe_gadget_collapses_the_win_loop(gamble):
    family = MonotoneFamily.constant(TransitionSet.of({("win", 0)}))
    assert safe_states(gamble, family) == frozenset({WIN})
    gadget = safe_gadget_transform(gamble, family)
    assert GADGET in gadget.index
    assert len(gadget) == len(gamble)
    obj = Objective.fg_family(family)
    assert solve_objective(gadget, obj).values[gadget.initial] == solve_objective(gamble, obj).values[S] == HALF


def test_safe_gadget_without_safe_region(gamble):
    family = MonotoneFamily.constant(TransitionSet.nothing())
    assert safe_gadget_transform(gamble, family) is gamble


def test_safe_gadget_on_a_truncation():
    mdp, family = two_level_toy(fg=True)
    finite = truncate(mdp, 10, FrontierPolicy.WINNING).mdp
    gadget = safe_gadget_transform(finite, family)
    obj = Objective.fg_family(family)
    assert solve_objective(gadget, obj).values[gadget.initial] == solve_objective(finite, obj).values[finite.initial]


def test_optimal_strategy_from_almost_sure_synthesis(gamble):
    result = optimal_from_as(gamble, Objective.limsup_geq0())
    assert result.choices[S] == 1
    for i in (S, COIN, WIN):
        assert result.is_optimal_from(i)
    assert not result.no_optimal
    assert result.to_dict()["strategy"]["s"] == 1


def test_expected_payoff_demand_without_optimum(gamble):
    with pytest.raises(NoOptimal):
        optimal_from_as(gamble, ExpectedPayoff("limsup"), vals={"s": 0, "win": 0})
    result = optimal_from_as(gamble, ExpectedPayoff("limsup"), vals={"s": 0, "win": 0}, strict=False)
    assert S in result.no_optimal
    assert WIN not in result.no_optimal
    assert result.attained[WIN] == 0


def test_expected_payoff_optimum_is_attained(gamble):
    result = optimal_from_as(gamble, ExpectedPayoff("limsup"))
    assert not result.no_optimal
    assert result.attained[S] == -HALF
