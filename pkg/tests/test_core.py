from __future__ import annotations

import dataclasses

import pytest
import sympy as sp

from core.bubble import FRONTIER, FrontierPolicy, distance_and_bubble, truncate
from core.errors import BoundViolation, BudgetExceeded, EmptySuccessors, InfiniteBubble, InvalidModel, OracleFailure
from core.model import Branching, CountableMdp, Edge, FiniteMdp, Key, StateKind, TailLabel, controlled, validate
from core.serialization import dump_finite_mdp, finite_mdp_from_dict, finite_mdp_to_dict, load_finite_mdp
from paperlab.corpus import corpus
from paperlab.figures import cobuchi_infbranch, incomparable, ladder_limsup, randf_ladder
from sim.runner import run_strategy
from sim.strategy import PositionalMachine

pytestmark = pytest.mark.exact


def _coin_dict(**edge):
    trans = [{"to": "a", "prob": "1/2", "reward": "0"}, dict({"to": "b", "prob": "1/2", "reward": "-1"}, **edge)]
    return {
        "initial": "c",
        "states": [
            {"id": "c", "kind": "random", "trans": trans},
            {"id": "a", "kind": "controlled", "trans": [{"to": "a", "reward": "0"}]},
            {"id": "b", "kind": "controlled", "trans": [{"to": "b", "reward": "-1/4"}],
             "tail": {"limsup": "-1/4", "liminf": "-1/4"}},
        ],
    }


def test_build_indexes_states_in_table_order(gamble):
    assert gamble.labels == ["s", "coin", "safe", "win", "lose"]
    assert gamble.state_index("win") == 3
    assert gamble.kind(1) is StateKind.RANDOM
    assert validate(gamble) == []


def test_finite_transition_identity_is_label_and_index(gamble):
    t = gamble.transition(1, 1)
    assert t.ident == ("coin", 1)
    assert t.target == "lose"
    assert t.root() is t


def test_validate_reports_bad_distribution():
    bad = FiniteMdp.build(
        {"x": ("random", [("x", sp.Rational(1, 2), 0), ("x", sp.Rational(1, 3), 0)])},
        "x",
    )
    problems = validate(bad)
    assert len(problems) == 1
    assert "sum" in problems[0]


def test_tail_label_rejects_liminf_above_limsup():
    with pytest.raises(ValueError):
        TailLabel(-1, 0)


def test_countable_view_shares_rewards(gamble):
    mdp = gamble.to_countable()
    assert mdp.initial == "s"
    branching = mdp.successors("coin")
    assert branching.kind is StateKind.RANDOM
    assert [e.prob for e in branching.edges] == [sp.Rational(1, 2), sp.Rational(1, 2)]
    assert mdp.transition("safe", 0).reward == -1


def test_oracle_errors_are_wrapped():
    with pytest.raises(OracleFailure):
        ladder_limsup().successors(Key("nowhere"))


def test_empty_successors_raise():
    mdp = CountableMdp("x", lambda s: Branching(StateKind.CONTROLLED, ()))
    with pytest.raises(EmptySuccessors):
        mdp.successors("x")


def test_successors_are_memoized():
    calls = []

    def oracle(s):
        calls.append(s)
        return controlled((s, 0))

    mdp = CountableMdp("x", oracle)
    assert mdp.successors("x") is mdp.successors("x")
    assert calls == ["x"]


def test_infinite_branching_tail_mass():
    mdp = cobuchi_infbranch()
    hub = mdp.successors(Key("s"))
    assert not hub.is_finite
    with pytest.raises(InfiniteBubble):
        len(hub)
    assert hub.edge(4).target == Key("r", (5,))
    coin = mdp.successors(Key("r", (2,)))
    assert coin.tail_mass(1) == sp.Rational(3, 4)


def test_declared_reward_bound_is_enforced():
    mdp = CountableMdp(Key("s"), lambda s: controlled((s, 5)), reward_bound=1)
    with pytest.raises(BoundViolation):
        mdp.successors(Key("s"))


def test_reward_bound_checks_generated_edges():
    mdp = CountableMdp(
        Key("s"),
        lambda s: Branching(StateKind.CONTROLLED, generator=lambda k: Edge(s, k)),
        reward_bound=1,
        finitely_branching=False,
    )
    hub = mdp.successors(Key("s"))
    assert hub.edge(1).reward == 1
    with pytest.raises(BoundViolation):
        hub.edge(2)


def test_validate_reports_rewards_beyond_the_bound(gamble):
    assert validate(gamble, reward_bound=1) == []
    assert validate(gamble, reward_bound=sp.Rational(1, 2)) == [
        "safe#0: reward -1 outside ±1/2",
        "lose#0: reward -1 outside ±1/2",
    ]


def test_bubble_of_the_ladder():
    bubble = distance_and_bubble(ladder_limsup(), [Key("s0")], 2)
    assert bubble == {Key("s0"), Key("r", (1,)), Key("r", (2,))}


@pytest.mark.parametrize("build", [ladder_limsup, incomparable, randf_ladder])
@pytest.mark.parametrize("depth", [0, 1, 3, 6])
def test_truncation_state_set_is_the_bubble(build, depth):
    mdp = build()
    trunc = truncate(mdp, depth)
    assert set(trunc.mdp.labels[: trunc.sink]) == distance_and_bubble(mdp, [mdp.initial], depth)


def test_truncation_state_set_is_the_bubble_on_the_corpus():
    for finite in corpus(6, seed=3, max_states=8):
        mdp = finite.to_countable()
        for depth in range(4):
            trunc = truncate(mdp, depth)
            assert set(trunc.mdp.labels[: trunc.sink]) == distance_and_bubble(mdp, [mdp.initial], depth)
    hub = cobuchi_infbranch()
    trunc = truncate(hub, 2, branch_cap=3)
    assert set(trunc.mdp.labels[: trunc.sink]) == distance_and_bubble(hub, [hub.initial], 2, branch_cap=3)


def test_bubble_stops_at_tail_states():
    mdp = FiniteMdp.build(
        {
            "s": ("controlled", [("t", 0)]),
            "t": ("controlled", [("u", 0)]),
            "u": ("controlled", [("u", 0)]),
        },
        "s",
        tails={"t": TailLabel(-1, -1)},
    ).to_countable()
    assert distance_and_bubble(mdp, ["s"], 3) == {"s", "t"}
    assert distance_and_bubble(mdp, ["s"], 3, stop_at_tails=False) == {"s", "t", "u"}
    assert "u" not in truncate(mdp, 3).state_map


def _without_tails(finite, start):
    states = tuple(dataclasses.replace(st, tail=None) for st in finite.states)
    return FiniteMdp(states, start, finite.name)


def _assert_suffix_bounds(rewards, label):
    for cut in (0, 10, 1000, len(rewards) // 2, len(rewards) - 10):
        assert max(rewards[cut:]) == label.limsup
        assert min(rewards[cut:]) == label.liminf


@pytest.mark.sim
def test_tail_sinks_replay_their_declared_bounds():
    label = TailLabel(0, sp.Rational(-1, 2))
    finite = FiniteMdp.build(
        {"s": ("controlled", [("t", -1)]), "t": ("controlled", [("t", -1)])},
        "s",
        tails={"t": label},
    )
    trunc = truncate(finite.to_countable(), 2)
    loop = _without_tails(trunc.mdp, trunc.index_of("t")).to_countable()
    run = run_strategy(loop, PositionalMachine({}), seed=0, horizon=10_000)
    assert len(run.rewards) == 10_000
    _assert_suffix_bounds(run.rewards, label)


@pytest.mark.sim
def test_figure_tails_replay_their_declared_bounds():
    mdp = randf_ladder()
    bottom = Key("bot", (3,))
    label = mdp.tail_label(bottom)
    unlabelled = mdp.derive(initial=bottom, tail=None)
    run = run_strategy(unlabelled, PositionalMachine({}), seed=0, horizon=10_000)
    assert run.absorbed is None
    _assert_suffix_bounds(run.rewards, label)


def test_truncation_reroutes_leaving_edges():
    trunc = truncate(ladder_limsup(), 2)
    assert len(trunc.mdp) == 4
    assert trunc.sink == 3
    assert trunc.rerouted == 1
    assert trunc.mdp.states[trunc.sink].label == FRONTIER
    assert trunc.mdp.states[trunc.sink].tail == FrontierPolicy.LOSING.tail
    assert trunc.layer(trunc.index_of(Key("r", (2,)))) == 2
    assert validate(trunc.mdp) == []


def test_truncation_keeps_origins():
    trunc = truncate(incomparable(), 3)
    i = trunc.index_of(Key("S", (2,)))
    assert trunc.mdp.transition(i, 1).root().ident == (Key("S", (2,)), 1)


def test_truncation_of_infinite_branching_needs_a_cap():
    with pytest.raises(InfiniteBubble):
        truncate(cobuchi_infbranch(), 2)
    trunc = truncate(cobuchi_infbranch(), 2, branch_cap=3)
    hub = trunc.index_of(Key("s"))
    assert len(trunc.mdp.edges(hub)) == 3
    assert validate(trunc.mdp) == []


def test_truncation_budget():
    with pytest.raises(BudgetExceeded):
        truncate(ladder_limsup(), 20, max_states=5)


def test_model_json_loads_with_tails():
    mdp = finite_mdp_from_dict(_coin_dict())
    assert mdp.labels == ["c", "a", "b"]
    assert mdp.edges(0)[1].prob == sp.Rational(1, 2)
    assert mdp.states[2].tail.limsup == sp.Rational(-1, 4)


@pytest.mark.parametrize("edge", [{"prob": "0.5"}, {"prob": "1/3"}, {"to": "nowhere"}])
def test_model_json_rejects_bad_input(edge):
    with pytest.raises(InvalidModel):
        finite_mdp_from_dict(_coin_dict(**edge))


def test_model_json_rejects_probability_on_controlled_edge():
    data = _coin_dict()
    data["states"][1]["trans"][0]["prob"] = "1"
    with pytest.raises(InvalidModel):
        finite_mdp_from_dict(data)


def test_model_json_checks_a_declared_reward_bound():
    with pytest.raises(InvalidModel):
        finite_mdp_from_dict(dict(_coin_dict(), reward_bound="1/2"))
    assert len(finite_mdp_from_dict(dict(_coin_dict(), reward_bound="1"))) == 3


def test_model_file_round_trip(tmp_path, gamble):
    path = tmp_path / "gamble.json"
    dump_finite_mdp(gamble, path)
    loaded = load_finite_mdp(path)
    assert finite_mdp_to_dict(loaded) == finite_mdp_to_dict(gamble)


def test_model_file_with_broken_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{", encoding="utf-8")
    with pytest.raises(InvalidModel):
        load_finite_mdp(path)
