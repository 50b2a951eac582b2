from __future__ import annotations

import pytest
import sympy as sp

from core.bubble import truncate
from core.errors import BoundViolation, NotOptimal, NotShiftInvariant, ProbOverflow, UnsupportedObjective, ZeroValueStart
from core.model import FiniteMdp, Key, StateKind
from objectives.objective import ExpectedPayoff, Objective, StateSet, TransitionSet, Verdict
from paperlab.corpus import corpus
from paperlab.figures import incomparable, ladder_limsup
from sim.lasso import lasso_attainment
from sim.runner import run_strategy
from sim.strategy import PositionalMachine, RandomizedPositional
from solve.chains import evaluate_chain
from solve.horizon import horizon_values
from solve.solvers import solve_reachability, solve_threshold
from transforms.conditioned import condition_finite, conditioned_mdp, transience_plus_safety
from transforms.expected import expected_to_threshold, state_rewards, thrifty_uniform_strategy, transition_of
from transforms.ladder import Rung, carry_back_finite_memory, gadget_probabilities, gadget_rungs, ladder_binarize
from transforms.reward_placement import (
    Port,
    Split,
    lift_to_split,
    lift_to_states,
    state_rewards_to_transition_rewards,
    transition_rewards_to_state_rewards,
)
from transforms.step_counter import Stamped, carry_back_step_counter, step_counter_encode

pytestmark = pytest.mark.exact

HALF = sp.Rational(1, 2)
QUARTER = sp.Rational(1, 4)


def build_three_way():
    return FiniteMdp.build(
        {
            "x": ("random", [("a", HALF, 0), ("b", QUARTER, -1), ("c", QUARTER, 0)]),
            "a": ("controlled", [("a", 0)]),
            "b": ("controlled", [("b", 0)]),
            "c": ("controlled", [("c", 0)]),
        },
        "x",
        name="three_way",
    )


# ---------- step counter ----------

def test_step_counter_stamps_steps():
    encoded = step_counter_encode(ladder_limsup())
    assert encoded.initial == Stamped(Key("s0"), 0)
    assert encoded.universally_transient and encoded.acyclic
    edge = encoded.successors(encoded.initial).edges[0]
    assert edge.target == Stamped(Key("r", (1,)), 1)
    assert edge.reward == -1


def test_step_counter_keeps_transition_identity():
    encoded = step_counter_encode(ladder_limsup())
    state = Stamped(Key("r", (2,)), 5)
    t = encoded.transition(state, 0)
    assert t.root().ident == (Key("r", (2,)), 0)
    assert t.reward == -HALF


def test_step_counter_strategy_plays_on_the_original():
    mdp = ladder_limsup()
    climb_early = PositionalMachine(lambda s, b: 1 if s.state.family == "r" and s.step < 3 else 0)
    machine = carry_back_step_counter(climb_early, step_counter_encode(mdp))
    assert machine.tag == "Det(SC)"
    run = run_strategy(mdp, machine, seed=0, horizon=6)
    assert run.states == [Key("s0"), Key("r", (1,)), Key("r", (2,)), Key("r", (3,)), Key("s0"), Key("r", (1,)), Key("s0")]
    assert run.modes[-1] == (5, 0)


def test_step_counter_truncations_match_bounded_reach():
    depth = 5
    for finite in corpus(5, seed=7, max_states=5):
        target = finite.labels[-1]
        trunc = truncate(step_counter_encode(finite.to_countable()), depth)
        stamped = StateSet(lambda s: isinstance(s, Stamped) and s.state == target, "stamped")
        bounded = horizon_values(finite, depth, targets={finite.index[target]})
        assert solve_reachability(trunc.mdp, stamped).values[0] == bounded[finite.initial]


# ---------- ladder gadget ----------

def test_gadget_probabilities():
    assert gadget_probabilities([HALF, QUARTER, QUARTER]) == [HALF, HALF, 1]
    with pytest.raises(ProbOverflow):
        gadget_probabilities([HALF, sp.Rational(3, 4)])


def test_ladder_binarizes_random_states():
    binarized = ladder_binarize(build_three_way().to_countable())
    assert gadget_rungs(binarized, "x") == ["x", Rung("x", 1)]
    first = binarized.successors("x")
    assert first.kind is StateKind.RANDOM
    assert [(e.target, e.prob) for e in first.edges] == [("a", HALF), (Rung("x", 1), HALF)]
    last = binarized.successors(Rung("x", 1))
    assert [(e.target, e.prob) for e in last.edges] == [("b", HALF), ("c", HALF)]
    assert binarized.transition(Rung("x", 1), 0).root().ident == ("x", 1)


def test_ladder_binarizes_infinite_controlled_branching():
    binarized = ladder_binarize(incomparable(), branch_bound=3)
    assert binarized.finitely_branching
    hub = binarized.successors(Key("S", (1,)))
    assert len(hub.edges) <= 2


def test_ladder_rejects_other_objectives():
    with pytest.raises(UnsupportedObjective):
        ladder_binarize(ladder_limsup(), objective=Objective.liminf_geq0())


def test_ladder_keeps_limsup_threshold_values():
    for finite in corpus(6, seed=11, max_states=5):
        binarized = ladder_binarize(finite.to_countable(), objective=Objective.limsup_geq0())
        trunc = truncate(binarized, 3 * len(finite))
        assert trunc.rerouted == 0
        expected = solve_threshold(finite, "limsup").values[finite.initial]
        assert solve_threshold(trunc.mdp, "limsup").values[0] == expected


def build_three_choices():
    return FiniteMdp.build(
        {
            "y": ("controlled", [("a", 0), ("b", 0), ("c", 0)]),
            "a": ("controlled", [("a", 0)]),
            "b": ("controlled", [("b", 0)]),
            "c": ("controlled", [("c", 0)]),
        },
        "y",
        name="three_choices",
    )


def test_finite_memory_carry_back_at_a_controlled_gadget():
    original = build_three_choices().to_countable()
    binarized = ladder_binarize(original)
    climb = PositionalMachine({"y": 1, Rung("y", 1): 1})
    machine = carry_back_finite_memory(climb, binarized, original)
    assert machine.choose(0, "y", original.successors("y")) == ((1, 2, 0),)
    mixed = RandomizedPositional(lambda s, b: [(HALF, 0), (HALF, 1)] if s == "y" else [(1, 0)])
    machine = carry_back_finite_memory(mixed, binarized, original)
    assert [(c.prob, c.edge) for c in machine.choose(0, "y", original.successors("y"))] == [(HALF, 0), (HALF, 1)]
    assert machine.choose(0, "a", original.successors("a")) == mixed.choose(0, "a", original.successors("a"))


def test_finite_memory_carry_back_at_a_random_gadget():
    original = build_three_way().to_countable()
    binarized = ladder_binarize(original)
    machine = carry_back_finite_memory(PositionalMachine({}), binarized, original)
    assert machine.observe(0, "x", 1, original.successors("x")) == ((1, 0),)


# ---------- reward placement ----------

def test_transition_rewards_become_state_rewards():
    encoded = transition_rewards_to_state_rewards(ladder_limsup(), 1)
    s0 = Key("s0")
    assert encoded.successors(s0).edges[0].target == Split(s0, 0)
    assert encoded.state_reward(Split(s0, 0)) == -1
    assert encoded.state_reward(s0) == -1
    r2 = Key("r", (2,))
    assert encoded.state_reward(Split(r2, 0)) == -HALF


def test_reward_bound_is_enforced():
    encoded = transition_rewards_to_state_rewards(ladder_limsup(), HALF)
    with pytest.raises(BoundViolation):
        encoded.state_reward(Split(Key("s0"), 0))


def test_state_rewards_become_transition_rewards():
    encoded = transition_rewards_to_state_rewards(ladder_limsup(), 1, mode="liminf")
    back = state_rewards_to_transition_rewards(encoded, 1, mode="liminf")
    assert back.initial == Port(Key("s0"), "in")
    step = back.successors(back.initial).edges[0]
    assert step.target == Port(Key("s0"), "out")
    assert step.reward == 1
    assert back.successors(Port(Key("s0"), "out")).edges[0].reward == 1


def test_state_rewards_required():
    with pytest.raises(ValueError):
        state_rewards_to_transition_rewards(ladder_limsup(), 1)


def test_lifting_transitions_into_the_state_encoding():
    mdp = ladder_limsup()
    encoded = transition_rewards_to_state_rewards(mdp, 1)
    lifted = lift_to_states(encoded, [mdp.transition(Key("r", (1,)), 1)])
    assert [t.target for t in lifted] == [Split(Key("r", (1,)), 1), Key("r", (2,))]


def test_lifting_transitions_into_the_split_encoding(state_rewarded):
    rewards = dict(zip(state_rewarded.labels, state_rewards(state_rewarded)))
    source = state_rewarded.to_countable().derive(state_reward=rewards.__getitem__)
    encoded = state_rewards_to_transition_rewards(source, 1)
    lifted = lift_to_split(encoded, [source.transition("a", 1)])
    assert [t.target for t in lifted] == [Port("a", "out"), Port("c", "in")]
    assert [t.reward for t in lifted] == [-HALF, -1]


# ---------- conditioned MDP ----------

def test_conditioned_gamble_wins_almost_surely(gamble):
    obj = Objective.reach(StateSet.of({"win"}))
    values = solve_reachability(gamble, obj.targets).values
    star = condition_finite(gamble, values, obj).mdp
    assert solve_reachability(star, obj.targets).values[star.initial] == 1


def test_conditioned_probabilities_rescale(gamble):
    obj = Objective.reach(StateSet.of({"win"}))
    values = dict(zip(gamble.labels, solve_reachability(gamble, obj.targets).values))
    star = conditioned_mdp(gamble.to_countable(), values, obj)
    coin = star.successors("coin")
    assert [(e.target, e.prob) for e in coin.edges] == [("win", 1)]


def test_conditioning_needs_positive_value(gamble):
    obj = Objective.reach(StateSet.of({"win"}))
    with pytest.raises(ZeroValueStart):
        condition_finite(gamble, (0, 0, 0, 1, 0), obj)


def test_conditioning_needs_shift_invariance(gamble):
    with pytest.raises(NotShiftInvariant):
        conditioned_mdp(gamble.to_countable(), lambda s: 1, Objective.reach_within({"win"}, 2))


def test_gated_moves_keep_their_reward():
    finite = FiniteMdp.build({"s": ("controlled", [("s", -1), ("w", 0)]), "w": ("controlled", [("w", 0)])}, "s")
    obj = Objective.limsup_geq0()
    star = conditioned_mdp(finite.to_countable(), {"s": 1, "w": 1}, obj)
    gate = star.successors("s").edges[0]
    assert gate.reward == -1
    assert [(e.target, e.reward) for e in star.successors(gate.target).edges] == [("s", -1)]
    assert lasso_attainment(star, PositionalMachine({"s": 0}), obj) is Verdict.VIOL


def test_transience_plus_safety_redirects(gamble):
    allowed = TransitionSet.of({("s", 1), ("coin", 0), ("coin", 1), ("win", 0)})
    mdp = transience_plus_safety(gamble.to_countable(), allowed)
    redirected = mdp.successors("s").edges[0]
    assert redirected.target == Key("bot", (0,))
    assert redirected.origin.ident == ("s", 0)
    assert mdp.successors("s").edges[1].target == "coin"


# ---------- expected payoff -> threshold ----------

def test_state_rewards(state_rewarded):
    assert state_rewards(state_rewarded) == (-HALF, 0, -1)
    broken = FiniteMdp.build({"x": ("controlled", [("x", 0), ("x", -1)])}, "x")
    with pytest.raises(ValueError):
        state_rewards(broken)


def test_expected_to_threshold(state_rewarded):
    reduction = expected_to_threshold(state_rewarded, {0: 0})
    assert reduction.restricted.labels == ["a", "b"]
    assert reduction.values == (0, 0)
    assert reduction.levels == (1, sp.oo)
    assert [e.reward for e in reduction.relabelled.edges(0)] == [-HALF]
    assert transition_of(reduction, 0, 0).ident == ("a", 0)
    assert reduction.family.level(state_rewarded.transition(0, 0)) == 1


def test_expected_to_threshold_rejects_suboptimal(state_rewarded):
    with pytest.raises(NotOptimal):
        expected_to_threshold(state_rewarded, {0: 1})


def test_thrifty_uniform_strategy_is_optimal(state_rewarded):
    strategy = thrifty_uniform_strategy(state_rewarded)
    assert strategy.choose(0, 0) == ((1, 0, 0),)
    assert evaluate_chain(state_rewarded, strategy, ExpectedPayoff("limsup")) == 0
