from __future__ import annotations

import pytest
import sympy as sp

from core.bubble import FrontierPolicy, truncate
from core.errors import BudgetExceeded
from objectives.objective import ExpectedPayoff, MonotoneFamily, Objective, StateSet, TransitionSet
from paperlab.corpus import corpus
from paperlab.figures import cobuchi_infbranch, incomparable, ladder_limsup, randf_ladder
from solve.chains import TableStrategy, evaluate_chain
from solve.enumerate import enumerate_strategies, parse_class, strategy_count
from solve.graph import mec_decomposition, sure_safe_set
from solve.horizon import bounded_avoidance_horizon, horizon_values
from solve.linear import solve_fixed_point
from solve.solvers import (
    solve_buchi,
    solve_cobuchi,
    solve_expected,
    solve_objective,
    solve_reachability,
    solve_safety,
    solve_threshold,
)

pytestmark = pytest.mark.exact

HALF = sp.Rational(1, 2)
S, COIN, SAFE, WIN, LOSE = range(5)


def _all_edges_but(mdp, *excluded):
    return frozenset(
        (i, k) for i in range(len(mdp)) for k in range(len(mdp.edges(i))) if (i, k) not in excluded
    )


def test_fixed_point_solves_cyclic_blocks():
    solution = solve_fixed_point({
        "a": (HALF, [(HALF, "b")]),
        "b": (sp.Rational(1, 4), [(HALF, "a")]),
    })
    assert solution == {"a": sp.Rational(5, 6), "b": sp.Rational(2, 3)}


def test_mecs_of_the_gamble(gamble):
    mecs = {m.states for m in mec_decomposition(gamble)}
    assert mecs == {frozenset({SAFE}), frozenset({WIN}), frozenset({LOSE})}


def test_sure_safe_set(gamble):
    assert sure_safe_set(gamble, _all_edges_but(gamble, (LOSE, 0))) == frozenset({S, SAFE, WIN})


def test_reachability(gamble):
    sol = solve_reachability(gamble, StateSet.of({"win"}))
    assert sol.values == (HALF, HALF, 0, 1, 0)
    assert sol.strategy[S] == 1
    assert sol.strategy[COIN] is None
    assert sol.residual(gamble) == 0


def test_reachability_by_index_set(gamble):
    assert solve_reachability(gamble, {WIN}).values == solve_reachability(gamble, StateSet.of({"win"})).values


def test_safety(gamble):
    sol = solve_safety(gamble, _all_edges_but(gamble, (LOSE, 0)))
    assert sol.values[S] == 1
    assert sol.values[COIN] == HALF
    assert sol.values[LOSE] == 0
    assert sol.strategy[S] == 0


def test_buchi_and_cobuchi(gamble):
    win_loop = TransitionSet.of({("win", 0)})
    assert solve_buchi(gamble, win_loop).values[S] == HALF
    assert solve_cobuchi(gamble, win_loop).values[S] == HALF
    assert solve_cobuchi(gamble, TransitionSet.nothing()).values[S] == 0


def test_thresholds(gamble):
    for which in ("limsup", "liminf"):
        sol = solve_threshold(gamble, which)
        assert sol.values[S] == HALF
        assert sol.strategy[S] == 1
    with pytest.raises(ValueError):
        solve_threshold(gamble, "mean")


def test_expected_payoffs(gamble):
    for which in ("limsup", "liminf"):
        sol = solve_expected(gamble, which)
        assert sol.values == (-HALF, -HALF, -1, 0, -1)
        assert sol.strategy[S] == 1


def test_dispatch_matches_dedicated_solvers(gamble):
    assert solve_objective(gamble, ExpectedPayoff("limsup")).values == solve_expected(gamble, "limsup").values
    family = MonotoneFamily.from_rewards()
    assert solve_objective(gamble, Objective.gf_family(family)).values[S] == HALF
    assert solve_objective(gamble, Objective.fg_family(family)).values[S] == HALF
    assert solve_objective(gamble, Objective.transience()).values[S] == 0


def test_reach_within(gamble):
    assert horizon_values(gamble, 1, targets={WIN})[S] == 0
    assert horizon_values(gamble, 1, targets={WIN})[COIN] == HALF
    obj = Objective.reach_within({"win"}, 2)
    assert solve_objective(gamble, obj).values[S] == HALF


def test_bounded_avoidance(gamble):
    assert bounded_avoidance_horizon(gamble, {(LOSE, 0)}) is None
    assert bounded_avoidance_horizon(gamble, {(SAFE, 0), (LOSE, 0)}) == 3


def test_chain_evaluation(gamble):
    stay = TableStrategy.positional({S: 0})
    gamble_once = TableStrategy.positional({S: 1})
    assert evaluate_chain(gamble, stay, Objective.limsup_geq0()) == 0
    assert evaluate_chain(gamble, gamble_once, Objective.limsup_geq0()) == HALF
    assert evaluate_chain(gamble, gamble_once, Objective.reach({"win"})) == HALF
    assert evaluate_chain(gamble, gamble_once, ExpectedPayoff("limsup")) == -HALF
    assert evaluate_chain(gamble, stay, ExpectedPayoff("limsup")) == -1


def test_randomized_chain(gamble):
    mixed = TableStrategy.randomized({S: [(HALF, 0), (HALF, 1)]})
    assert evaluate_chain(gamble, mixed, Objective.reach({"win"})) == sp.Rational(1, 4)


def test_enumeration_finds_the_optimum(gamble):
    assert strategy_count(gamble) == 2
    result = enumerate_strategies(gamble, Objective.limsup_geq0(), "md")
    assert result.value == HALF
    assert result.evaluated == 2
    assert len(result.argmax) == 1
    assert result.argmax[0].choose(0, S) == ((1, 1, 0),)


def test_enumeration_budget(gamble):
    with pytest.raises(BudgetExceeded):
        enumerate_strategies(gamble, Objective.limsup_geq0(), "fd:2", budget=100)


def test_strategy_classes():
    assert parse_class("md") == ("md", 1)
    assert parse_class("FD:3") == ("fd", 3)
    for bad in ("fd:0", "hd"):
        with pytest.raises(ValueError):
            parse_class(bad)


def test_md_enumeration_agrees_with_solvers():
    obj = Objective.limsup_geq0()
    for finite in corpus(4, seed=5, max_states=4):
        if strategy_count(finite) > 500:
            continue
        assert enumerate_strategies(finite, obj).value == solve_threshold(finite, "limsup").values[finite.initial]


def test_truncated_ladder_values():
    losing = truncate(ladder_limsup(), 4, FrontierPolicy.LOSING).mdp
    winning = truncate(ladder_limsup(), 4, FrontierPolicy.WINNING).mdp
    assert solve_threshold(losing, "limsup").values[losing.initial] == 0
    assert solve_threshold(winning, "limsup").values[winning.initial] == 1


def test_incomparable_truncation_optimum():
    finite = truncate(incomparable(), 5).mdp
    assert solve_expected(finite, "limsup").values[finite.initial] == 1 - sp.Rational(1, 32)


@pytest.mark.parametrize(
    "obj",
    [Objective.limsup_geq0(), Objective.liminf_geq0(), ExpectedPayoff("limsup"), ExpectedPayoff("liminf")],
    ids=["limsup", "liminf", "e-limsup", "e-liminf"],
)
def test_more_reward_never_lowers_values(obj):
    for finite in corpus(4, seed=13, max_states=5):
        base = solve_objective(finite, obj).values
        for i, k, _ in finite.all_transitions():
            raised = finite.with_rewards(lambda j, m, e: e.reward + HALF if (j, m) == (i, k) else e.reward)
            assert all(a >= b for a, b in zip(solve_objective(raised, obj).values, base)), (finite.name, i, k)


@pytest.mark.parametrize(
    ("build", "obj", "cap"),
    [
        (incomparable, ExpectedPayoff("limsup"), None),
        (randf_ladder, Objective.limsup_geq0(), None),
        (cobuchi_infbranch, Objective.liminf_geq0(), 3),
    ],
    ids=["incomparable", "randf_ladder", "cobuchi_infbranch"],
)
def test_losing_truncations_improve_with_depth(build, obj, cap):
    values = []
    for depth in range(1, 8):
        finite = truncate(build(), depth, FrontierPolicy.LOSING, branch_cap=cap).mdp
        values.append(solve_objective(finite, obj).values[finite.initial])
    assert values == sorted(values)


def test_losing_truncations_improve_with_depth_on_the_corpus():
    for finite in corpus(5, seed=17, max_states=7):
        mdp = finite.to_countable()
        for obj in (Objective.limsup_geq0(), ExpectedPayoff("liminf")):
            values = []
            for depth in range(len(finite) + 1):
                trunc = truncate(mdp, depth, FrontierPolicy.LOSING).mdp
                values.append(solve_objective(trunc, obj).values[trunc.initial])
            assert values == sorted(values), (finite.name, obj)
            assert values[-1] == solve_objective(finite, obj).values[finite.initial]
