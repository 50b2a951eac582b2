from __future__ import annotations

import math

import pytest
import sympy as sp

from core.errors import InvalidStrategy, NoLassoFound, UnsupportedSpec
from core.model import Key, StateKind
from objectives.objective import Objective, StateSet, Verdict
from paperlab.corpus import corpus
from paperlab.figures import incomparable, ladder_limsup
from sim.cycles import StrategySpec, cycle_analysis, cycles_until
from sim.estimate import estimate_attainment, hoeffding_slack
from sim.lasso import lasso_attainment, reset_rewards
from sim.runner import frequency_check, run_strategy
from sim.strategy import BranchDistribution, LadderEscalating, PositionalMachine, machine_from_dict
from solve.chains import TableStrategy, evaluate_chain

pytestmark = pytest.mark.sim

HALF = sp.Rational(1, 2)


def _gamble_once():
    return PositionalMachine({"s": 1})


# ---------- sampling ----------

def test_hoeffding_slack():
    assert hoeffding_slack(1000, 0.01) == pytest.approx(math.sqrt(math.log(200) / 2000))


def test_runs_are_reproducible(gamble_with_tails):
    mdp = gamble_with_tails.to_countable()
    first = run_strategy(mdp, _gamble_once(), seed=3, horizon=10)
    second = run_strategy(mdp, _gamble_once(), seed=3, horizon=10)
    assert first.states == second.states
    assert first.states[:2] == ["s", "coin"]
    assert len(first.transitions) == 2
    assert first.absorbed is not None


def test_estimate_brackets_the_exact_value(gamble_with_tails):
    mdp = gamble_with_tails.to_countable()
    est = estimate_attainment(mdp, _gamble_once(), Objective.limsup_geq0(), horizon=10, samples=400,
                              delta=1e-6, seed=11, threads=1)
    assert est.sat + est.viol == est.samples == 400
    assert est.undetermined == 0
    assert est.contains(HALF)
    parallel = estimate_attainment(mdp, _gamble_once(), Objective.limsup_geq0(), horizon=10, samples=400,
                                   delta=1e-6, seed=11, threads=2)
    assert parallel == est


@pytest.mark.parametrize("seed", range(6))
def test_brackets_contain_exact_values_across_seeds(seed):
    for finite in corpus(4, seed=9, max_states=6):
        target = finite.labels[-1]
        obj = Objective.reach(StateSet.of({target}))
        choice = {i: 0 for i in range(len(finite)) if finite.kind(i) is StateKind.CONTROLLED}
        exact = evaluate_chain(finite, TableStrategy.positional(choice), obj)
        est = estimate_attainment(finite.to_countable(), PositionalMachine({}), obj, horizon=30, samples=200,
                                  delta=1e-6, seed=seed, threads=1)
        assert est.contains(exact), (finite.name, exact, est)


def test_machines_must_pick_existing_edges(gamble):
    mdp = gamble.to_countable()
    with pytest.raises(InvalidStrategy):
        run_strategy(mdp, PositionalMachine(lambda s, b: 7), seed=0, horizon=3)
    with pytest.raises(InvalidStrategy):
        lasso_attainment(mdp, PositionalMachine({"s": -1}), Objective.limsup_geq0())


def test_frequency_check_on_a_fair_coin(gamble):
    statistic, dof = frequency_check(gamble.to_countable(), "coin", samples=2000, seed=1)
    assert dof == 1
    assert 0 <= statistic < 20


def test_strategy_files():
    machine = machine_from_dict({"type": "positional", "choices": {"s": 1}})
    assert machine.choose(0, "s", None)[0].edge == 1
    with pytest.raises(InvalidStrategy):
        machine_from_dict({"type": "mystery"})
    with pytest.raises(InvalidStrategy):
        BranchDistribution(Key("s"), ["1/2", "1/4"])


# ---------- lassos ----------

def test_lasso_leaving_for_a_good_loop():
    machine = PositionalMachine({Key("S", (1,)): 1})
    assert lasso_attainment(incomparable(), machine, Objective.limsup_geq0()) is Verdict.SAT


def test_lasso_of_an_immediate_reset():
    machine = PositionalMachine(lambda s, b: 0)
    assert lasso_attainment(ladder_limsup(), machine, Objective.limsup_geq0()) is Verdict.VIOL


def test_unbounded_memory_never_closes_a_lasso():
    with pytest.raises(NoLassoFound):
        lasso_attainment(ladder_limsup(), LadderEscalating(), Objective.limsup_geq0(), budget=50)


def test_escalating_resets_see_each_reward_once():
    run = run_strategy(ladder_limsup(), LadderEscalating(), seed=0, horizon=9)
    assert reset_rewards(run) == [-1, -HALF, -sp.Rational(1, 3)]


# ---------- closed forms ----------

def test_strategy_specs():
    assert StrategySpec.parse("escalating").offset == 0
    assert str(StrategySpec.parse("table:1/2,1/2")) == "table:1/2,1/2"
    for bad in ("fixed:x", "teleport:3"):
        with pytest.raises(UnsupportedSpec):
            StrategySpec.parse(bad)


def test_cycles_until():
    assert cycles_until(HALF) == 20
    assert cycles_until(1) == 1


@pytest.mark.parametrize(
    ("figure", "spec", "expected"),
    [
        ("incomparable", "fixed:3", sp.Rational(7, 8)),
        ("ladder_limsup", "escalating:0", 1),
        ("ladder_limsup", "fixed:2", 0),
        ("cobuchi_infbranch", "escalating:0", 1),
    ],
)
def test_exact_cycle_values(figure, spec, expected):
    result = cycle_analysis(figure, spec)
    assert result.exact
    assert result.attainment == expected


def test_vanishing_cycle_losses():
    fixed = cycle_analysis("randf_ladder", "fixed:1")
    assert fixed.attainment == 0
    assert fixed.per_cycle_loss == HALF
    assert fixed.cycles_to_vanish == 20
    table = cycle_analysis("cobuchi_infbranch", "table:1/2,1/2")
    assert table.per_cycle_loss == sp.Rational(3, 8)


def test_escalating_down_ladder_is_bracketed():
    result = cycle_analysis("randf_ladder", "escalating:10")
    assert not result.exact
    assert result.lower > sp.Rational(99, 100)
    assert result.lower <= result.upper <= 1


def test_unsupported_cycle_specs():
    with pytest.raises(UnsupportedSpec):
        cycle_analysis("incomparable", "escalating:0")
    with pytest.raises(UnsupportedSpec):
        cycle_analysis("moebius", "fixed:1")
