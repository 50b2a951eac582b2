"""
Built-in model families
-----------------------
ladder_limsup      reset ladder: s0 -> r_1 (-1); at r_i reset to s0 (-1/i)
                   or climb to r_{i+1} (-1)
randf_ladder       down ladder: L_i climbs (-1) or goes down (+0) to a coin
                   R_i that is lost with probability 2^-i, else walks back
                   T_i -> T_{i-1} -> ... -> T_1 -> s0 (+0)
cobuchi_infbranch  infinitely branching hub s -> r_i (+0); r_i enters t
                   (-1) with probability 2^-i and returns to s otherwise;
                   t -> s (+1)
incomparable       S_i -> S_{i+1} (+0) or S_i -> T_i (+0) where T_i loops
                   with reward 1 - 2^-i
buchi_relabel      any model with a state set F, rewards -1 / +1 on leaving
                   a state outside / inside F
"""

from __future__ import annotations

import logging

import sympy as sp

from core.errors import BadParams
from core.model import (
    LOSING_CHAIN,
    Branching,
    CountableMdp,
    Edge,
    FiniteMdp,
    Key,
    StateKind,
    Transition,
    controlled,
)
from tools.calculator import two_pow_neg

logger = logging.getLogger(__name__)

ZERO = sp.Integer(0)
ONE = sp.Integer(1)
MINUS_ONE = sp.Integer(-1)

FIGURES = ("ladder_limsup", "randf_ladder", "cobuchi_infbranch", "incomparable", "buchi_relabel")


def _coord(state):
    return state.coords[0]


# ----------------------------
# Families
# ----------------------------

def ladder_limsup():
    def oracle(state):
        if state == Key("s0"):
            return controlled((Key("r", (1,)), MINUS_ONE))
        if state.family == "r":
            i = _coord(state)
            return controlled(
                (Key("s0"), -sp.Rational(1, i)),
                (Key("r", (i + 1,)), MINUS_ONE),
            )
        raise KeyError(state)

    return CountableMdp(Key("s0"), oracle, name="ladder_limsup", reward_bound=1)


def randf_ladder():
    def oracle(state):
        family = state.family
        if family == "s0":
            return controlled((Key("L", (1,)), MINUS_ONE))
        i = _coord(state) if state.coords else None
        if family == "L":
            return controlled((Key("L", (i + 1,)), MINUS_ONE), (Key("R", (i,)), ZERO))
        if family == "R":
            lose = two_pow_neg(i)
            return Branching(StateKind.RANDOM, (
                Edge(Key("bot", (i,)), ZERO, lose),
                Edge(Key("T", (i,)), ZERO, ONE - lose),
            ))
        if family == "T":
            return controlled((Key("T", (i - 1,)) if i > 1 else Key("s0"), ZERO))
        if family == "bot":
            return controlled((state, MINUS_ONE))
        raise KeyError(state)

    def tail(state):
        return LOSING_CHAIN if state.family == "bot" else None

    return CountableMdp(Key("s0"), oracle, name="randf_ladder", reward_bound=1, tail=tail)


def cobuchi_infbranch():
    hub = Key("s")

    def branch(k):
        return Edge(Key("r", (k + 1,)), ZERO)

    def oracle(state):
        if state == hub:
            return Branching(StateKind.CONTROLLED, generator=branch)
        if state == Key("t"):
            return controlled((hub, ONE))
        if state.family == "r":
            fire = two_pow_neg(_coord(state))
            return Branching(StateKind.RANDOM, (
                Edge(Key("t"), MINUS_ONE, fire),
                Edge(hub, ZERO, ONE - fire),
            ))
        raise KeyError(state)

    return CountableMdp(hub, oracle, name="cobuchi_infbranch", reward_bound=1, finitely_branching=False)


def incomparable():
    def oracle(state):
        i = _coord(state)
        if state.family == "S":
            return controlled((Key("S", (i + 1,)), ZERO), (Key("T", (i,)), ZERO))
        if state.family == "T":
            return controlled((state, ONE - two_pow_neg(i)))
        raise KeyError(state)

    return CountableMdp(Key("S", (1,)), oracle, name="incomparable", reward_bound=1)


def buchi_relabel(mdp, accepting):
    """
    Rewards -1 on transitions leaving a state outside F and +1 on those
    leaving F, so that limsup_PP(>=0) and GF F coincide. `accepting` is a
    state collection or a predicate; FiniteMdps are relabelled through
    their countable view.
    """
    if isinstance(mdp, FiniteMdp):
        mdp = mdp.to_countable()
    inside = accepting if callable(accepting) else frozenset(accepting).__contains__

    def relabel(s, k, e):
        reward = ONE if inside(s) else MINUS_ONE
        return Edge(e.target, reward, e.prob, Transition(s, k, e.target, e.reward, e.origin))

    def oracle(state):
        branching = mdp.successors(state)
        if branching.is_finite:
            return Branching(branching.kind, tuple(relabel(state, k, e) for k, e in enumerate(branching.edges)))
        return Branching(branching.kind, generator=lambda k: relabel(state, k, branching.edge(k)))

    return mdp.derive(oracle=oracle, name=f"{mdp.name}+buchi", reward_bound=1, tail=None)


# ----------------------------
# Dispatch
# ----------------------------

_BUILDERS = {
    "ladder_limsup": ladder_limsup,
    "randf_ladder": randf_ladder,
    "cobuchi_infbranch": cobuchi_infbranch,
    "incomparable": incomparable,
}


def generate(figure, params=None):
    """
    params: {"step_counter": bool} for every family; buchi_relabel also
    needs {"model": CountableMdp | FiniteMdp, "accepting": states}.
    """
    params = dict(params or {})
    step_counter = params.pop("step_counter", False)
    if not isinstance(step_counter, bool):
        raise BadParams(f"step_counter must be a boolean, got {step_counter!r}")

    if figure == "buchi_relabel":
        if "model" not in params or "accepting" not in params:
            raise BadParams("buchi_relabel needs 'model' and 'accepting'")
        model = params.pop("model")
        if not isinstance(model, (CountableMdp, FiniteMdp)):
            raise BadParams(f"buchi_relabel model must be an MDP, got {type(model).__name__}")
        mdp = buchi_relabel(model, params.pop("accepting"))
    elif figure in _BUILDERS:
        mdp = _BUILDERS[figure]()
    else:
        raise BadParams(f"unknown figure {figure!r} (one of {', '.join(FIGURES)})")
    if params:
        raise BadParams(f"unknown parameters for {figure}: {', '.join(sorted(params))}")

    if step_counter:
        from transforms.step_counter import step_counter_encode
        mdp = step_counter_encode(mdp)
    logger.debug("generated %s", mdp.name)
    return mdp
