from __future__ import annotations

import pytest
import sympy as sp

from core.errors import InvalidModel
from core.model import LOSING_CHAIN, Key, Lasso, RunPrefix, TailLabel, Transition
from objectives.objective import (
    ExpectedPayoff,
    MonotoneFamily,
    Objective,
    ObjectiveKind,
    StateSet,
    TransitionSet,
    Verdict,
    is_conditionable,
    reward_level,
)
from objectives.reductions import (
    family_from_rewards,
    liminf_family_from_rewards,
    liminf_rewards_from_family,
    relabel_with_family,
    reward_for_level,
    rewards_from_family,
    threshold_counterpart,
)
from objectives.serialization import objective_from_dict, parse_transition_id
from objectives.verdicts import classify_prefix, lasso_verdict
from paperlab.corpus import corpus
from paperlab.figures import randf_ladder
from sim.runner import run_strategy
from sim.strategy import RandomizedPositional
from tools.calculator import deficit_level, parse_rational, two_pow_neg

pytestmark = pytest.mark.exact


def _t(source, index, reward, target="x", origin=None, forced=None):
    return Transition(source, index, target, sp.Rational(reward), origin, forced)


def test_parse_rational_is_strict():
    assert parse_rational("3/4") == sp.Rational(3, 4)
    assert parse_rational("-2") == -2
    for bad in ("0.5", "1e-3", "1/0", "half"):
        with pytest.raises(ValueError):
            parse_rational(bad)


def test_deficit_levels():
    assert two_pow_neg(3) == sp.Rational(1, 8)
    assert deficit_level(sp.Rational(1, 4)) == 2
    assert deficit_level(sp.Rational(3, 8)) == 1
    assert deficit_level(0) == sp.oo
    assert deficit_level(2) is None


def test_reward_levels():
    assert reward_level(sp.Rational(1, 2)) == sp.oo
    assert reward_level(-1) == 0
    assert reward_level(sp.Rational(-1, 4)) == 2
    assert reward_level(sp.Rational(-3, 2)) is None


def test_reward_for_level_inverts_reward_level():
    for level in (None, 0, 1, 5, sp.oo):
        assert reward_level(reward_for_level(level)) == (0 if level is None else level)


def test_transition_sets_read_the_root():
    original = _t("a", 1, 0)
    copy = _t("x", 0, 0, origin=original)
    assert copy in TransitionSet.of({("a", 1)})
    assert copy not in TransitionSet.local({("a", 1)})
    assert copy in TransitionSet.local({("x", 0)})


def test_forced_membership_wins():
    assert _t("a", 0, -1, forced=True) in TransitionSet.nothing()
    assert _t("a", 0, 0, forced=False) not in TransitionSet.everything()


def test_family_levels():
    family = MonotoneFamily.table({("a", 0): 2, ("b", 0): sp.oo})
    assert family.level(_t("a", 0, 0)) == 2
    assert family.contains(2, _t("a", 0, 0))
    assert not family.contains(3, _t("a", 0, 0))
    assert family.level(_t("c", 0, 0)) is None
    assert _t("b", 0, 0) in family.member_set(100)


def test_reward_family_reads_the_reward_itself():
    family = MonotoneFamily.from_rewards()
    relabelled = _t("x", 0, sp.Rational(-1, 2), origin=_t("a", 0, 0))
    assert family.level(relabelled) == 1


def test_family_spot_check_finds_non_monotone_sets():
    family = MonotoneFamily(lambda t: 1, sets=lambda i: TransitionSet.nothing() if i == 0 else TransitionSet.everything())
    assert family.spot_check([_t("a", 0, 0)], upto=2)


def test_conjunction_flattens_and_deduplicates():
    reach = Objective.reach({"win"})
    both = Objective.conj(reach, Objective.conj(reach, Objective.limsup_geq0()))
    assert both.kind is ObjectiveKind.AND
    assert len(both.parts) == 2
    assert Objective.conj(reach) is reach


def test_conditionable_objectives():
    assert is_conditionable(Objective.reach({"win"}))
    assert is_conditionable(Objective.limsup_geq0())
    assert not is_conditionable(Objective.reach_within({"win"}, 3))


def test_expected_payoff_validates_its_measure():
    with pytest.raises(ValueError):
        ExpectedPayoff("average")


def test_threshold_counterparts():
    assert threshold_counterpart(Objective.gf_family(MonotoneFamily.from_rewards())).kind is ObjectiveKind.LIMSUP_GEQ0
    assert threshold_counterpart(Objective.liminf_geq0()).kind is ObjectiveKind.FG_FAMILY
    with pytest.raises(ValueError):
        threshold_counterpart(Objective.transience())


def test_reward_family_round_trip():
    family = family_from_rewards()
    reward = rewards_from_family(family)
    assert reward(_t("a", 0, sp.Rational(-1, 4))) == sp.Rational(-1, 4)
    assert reward(_t("a", 0, sp.Rational(-1, 3))) == sp.Rational(-1, 2)
    assert reward(_t("a", 0, 2)) == 0
    assert reward(_t("a", 0, -3)) == -1
    dual = liminf_rewards_from_family(liminf_family_from_rewards())
    for r in (0, sp.Rational(-1, 8), sp.Rational(-3, 4), -5):
        assert dual(_t("a", 0, r)) == reward(_t("a", 0, r))


def test_relabel_with_family(gamble):
    family = MonotoneFamily.table({("win", 0): sp.oo, ("coin", 0): 1})
    relabelled = relabel_with_family(gamble, family)
    assert relabelled.edges(3)[0].reward == 0
    assert relabelled.edges(1)[0].reward == sp.Rational(-1, 2)
    assert relabelled.edges(4)[0].reward == -1


def test_lasso_verdicts():
    lasso = Lasso([_t("a", 0, -1)], [_t("b", 0, sp.Rational(-1, 2)), _t("c", 0, 0)])
    assert lasso_verdict(lasso, Objective.limsup_geq0()) is Verdict.SAT
    assert lasso_verdict(lasso, Objective.liminf_geq0()) is Verdict.VIOL
    assert lasso_verdict(lasso, Objective.gf_family(MonotoneFamily.from_rewards())) is Verdict.SAT
    assert lasso_verdict(lasso, Objective.fg_family(MonotoneFamily.from_rewards())) is Verdict.VIOL
    assert lasso_verdict(lasso, Objective.buchi(TransitionSet.of({("c", 0)}))) is Verdict.SAT
    assert lasso_verdict(lasso, Objective.cobuchi(TransitionSet.of({("c", 0)}))) is Verdict.VIOL
    assert lasso_verdict(lasso, Objective.safety(TransitionSet.of({("b", 0), ("c", 0)}))) is Verdict.VIOL
    assert lasso_verdict(lasso, Objective.transience()) is Verdict.VIOL


def test_lasso_needs_a_cycle():
    with pytest.raises(ValueError):
        Lasso([_t("a", 0, 0)], [])


def test_prefix_verdicts_wait_for_evidence():
    run = RunPrefix(states=["s", "x"], transitions=[_t("s", 0, -1)])
    assert classify_prefix(run, Objective.limsup_geq0()) is Verdict.UNDETERMINED
    assert classify_prefix(run, Objective.reach({"x"})) is Verdict.SAT
    assert classify_prefix(run, Objective.reach_within({"y"}, 0)) is Verdict.VIOL
    assert classify_prefix(run, Objective.safety(TransitionSet.nothing())) is Verdict.VIOL


def _uniform():
    return RandomizedPositional(lambda s, b: [(sp.Rational(1, len(b.edges)), k) for k in range(len(b.edges))])


def _prefixes(run):
    n = len(run.transitions)
    for k in range(n + 1):
        yield RunPrefix(states=run.states[: k + 1], transitions=run.transitions[:k],
                        absorbed=run.absorbed if k == n else None)


def _assert_settled_verdicts_hold(run, objectives):
    for obj in objectives:
        settled = None
        for prefix in _prefixes(run):
            verdict = classify_prefix(prefix, obj)
            if settled is not None:
                assert verdict is settled, (obj, len(prefix))
            elif verdict is not Verdict.UNDETERMINED:
                settled = verdict


def test_prefix_verdicts_never_flip_on_the_corpus():
    for n, finite in enumerate(corpus(8, seed=5, max_states=6)):
        target = finite.labels[-1]
        allowed = TransitionSet.of({t.ident for _, _, t in finite.all_transitions() if t.reward >= 0})
        objectives = [
            Objective.reach({target}),
            Objective.reach_within({target}, 3),
            Objective.safety(allowed),
            Objective.conj(Objective.reach({target}), Objective.safety(allowed)),
            Objective.limsup_geq0(),
        ]
        for seed in range(5):
            run = run_strategy(finite.to_countable(), _uniform(), seed=[n, seed], horizon=12)
            _assert_settled_verdicts_hold(run, objectives)


def test_prefix_verdicts_never_flip_into_a_tail():
    mdp = randf_ladder()
    objectives = [
        Objective.reach({Key("T", (1,))}),
        Objective.safety(TransitionSet.of({(Key("s0"), 0), (Key("L", (1,)), 1)})),
        Objective.limsup_geq0(),
        Objective.transience(),
    ]
    absorbed = 0
    for seed in range(20):
        run = run_strategy(mdp, _uniform(), seed=seed, horizon=40)
        absorbed += run.absorbed is not None
        _assert_settled_verdicts_hold(run, objectives)
    assert absorbed


def test_prefix_verdicts_use_the_tail():
    losing = RunPrefix(states=["s", "x"], transitions=[_t("s", 0, 0)], absorbed=LOSING_CHAIN)
    assert classify_prefix(losing, Objective.limsup_geq0()) is Verdict.VIOL
    assert classify_prefix(losing, Objective.transience()) is Verdict.SAT
    assert classify_prefix(losing, Objective.reach({"y"})) is Verdict.VIOL

    winning = RunPrefix(states=["s", "x"], transitions=[_t("s", 0, 0)], absorbed=TailLabel(0, 0, member=True))
    both = Objective.conj(Objective.limsup_geq0(), Objective.buchi(TransitionSet.nothing()))
    assert classify_prefix(winning, both) is Verdict.SAT


def test_objective_json():
    obj = objective_from_dict({"kind": "reach_within", "targets": ["s1"], "steps": 3})
    assert obj.kind is ObjectiveKind.REACH_WITHIN and obj.steps == 3
    assert obj.targets.holds("s1") and not obj.targets.holds("s2")

    gf = objective_from_dict({"kind": "gf_family", "family": {"type": "table", "levels": {"s0#0": 2, "s1#1": "inf"}}})
    assert gf.family.level(_t("s1", 1, -1)) == sp.oo

    expected = objective_from_dict({"kind": "expected", "which": "liminf"})
    assert expected == ExpectedPayoff("liminf")

    parts = objective_from_dict({"kind": "and", "parts": [{"kind": "transience"}, {"kind": "safety", "transitions": ["a#0"]}]})
    assert [p.kind for p in parts.parts] == [ObjectiveKind.TRANSIENCE, ObjectiveKind.SAFETY]


@pytest.mark.parametrize("data", [{}, {"kind": "mean_payoff"}, {"kind": "gf_family", "family": {"type": "table", "levels": {"a#0": -1}}}])
def test_objective_json_rejects(data):
    with pytest.raises(InvalidModel):
        objective_from_dict(data)


def test_transition_ids():
    assert parse_transition_id("r[3]#0") == ("r[3]", 0)
    assert parse_transition_id("a#b#12") == ("a#b", 12)
    with pytest.raises(InvalidModel):
        parse_transition_id("no-index")
