"""
State rewards <-> transition rewards.

A state-reward model is a CountableMdp with `state_reward`; its edges carry
the reward of their source state, so the run's reward sequence is
r(s0) r(s1) ... either way. The forward encoding splits s into s_in -> s_out
(reward r(s)) and pads every original move with a buffer reward -m (limsup)
or +m (liminf); the reverse encoding turns each transition into a state.
"""

from __future__ import annotations

import logging
from typing import Hashable, NamedTuple

import sympy as sp

from core.errors import BoundViolation
from core.model import Branching, CountableMdp, Edge, StateKind, Transition

logger = logging.getLogger(__name__)


class Port(NamedTuple):
    state: Hashable
    side: str               # "in" or "out"

    def __str__(self):
        return f"{self.state}.{self.side}"


class Split(NamedTuple):
    source: Hashable
    index: int

    def __str__(self):
        return f"{self.source}#{self.index}"


def _buffer(m, mode):
    if mode == "limsup":
        return -sp.Rational(m)
    if mode == "liminf":
        return sp.Rational(m)
    raise ValueError(f"mode is limsup or liminf, not {mode!r}")


def _checked(value, m, where):
    value = sp.Rational(value)
    if abs(value) > m:
        raise BoundViolation(f"|reward| {abs(value)} at {where!r} exceeds {m}")
    return value


def _map_branching(branching, edge_of):
    if branching.is_finite:
        return Branching(branching.kind, tuple(edge_of(k, e) for k, e in enumerate(branching.edges)))
    return Branching(branching.kind, generator=lambda k: edge_of(k, branching.edge(k)))


def state_rewards_to_transition_rewards(mdp: CountableMdp, m, mode="limsup") -> CountableMdp:
    if mdp.state_reward is None:
        raise ValueError(f"{mdp.name} carries no state rewards")
    m = sp.Rational(m)
    buffer = _buffer(m, mode)

    def oracle(port):
        s, side = port
        if side == "in":
            r = _checked(mdp.state_reward(s), m, s)
            return Branching(StateKind.CONTROLLED, (Edge(Port(s, "out"), r),))

        def edge_of(k, e):
            origin = Transition(s, k, e.target, e.reward, e.origin)
            return Edge(Port(e.target, "in"), buffer, e.prob, origin)

        return _map_branching(mdp.successors(s), edge_of)

    def tail(port):
        return mdp.tail_label(port.state)

    return CountableMdp(
        Port(mdp.initial, "in"),
        oracle,
        name=f"{mdp.name}/{mode}-split",
        params=dict(mdp.params, buffer=m),
        reward_bound=max(m, mdp.reward_bound or 0),
        tail=tail,
        finitely_branching=mdp.finitely_branching,
        universally_transient=mdp.universally_transient,
        acyclic=mdp.acyclic,
    )


def transition_rewards_to_state_rewards(mdp: CountableMdp, m, mode="limsup") -> CountableMdp:
    """Each transition becomes a state carrying its reward; original states carry -m (limsup) / +m (liminf)."""
    m = sp.Rational(m)
    buffer = _buffer(m, mode)

    def state_reward(state):
        if isinstance(state, Split):
            return _checked(mdp.successors(state.source).edge(state.index).reward, m, state)
        return buffer

    def oracle(state):
        if isinstance(state, Split):
            e = mdp.successors(state.source).edge(state.index)
            origin = Transition(state.source, state.index, e.target, e.reward, e.origin)
            return Branching(StateKind.CONTROLLED, (Edge(e.target, state_reward(state), None, origin),))
        return _map_branching(
            mdp.successors(state),
            lambda k, e: Edge(Split(state, k), buffer, e.prob),
        )

    def tail(state):
        return mdp.tail_label(state.source if isinstance(state, Split) else state)

    return CountableMdp(
        mdp.initial,
        oracle,
        name=f"{mdp.name}/{mode}-states",
        params=dict(mdp.params, buffer=m),
        reward_bound=m,
        tail=tail,
        finitely_branching=mdp.finitely_branching,
        universally_transient=mdp.universally_transient,
        acyclic=mdp.acyclic,
        state_reward=state_reward,
    )


def lift_to_split(encoded, transitions):
    """Transitions of the source model -> the matching transitions of the forward encoding."""
    lifted = []
    for t in transitions:
        lifted.append(encoded.transition(Port(t.source, "in"), 0))
        lifted.append(encoded.transition(Port(t.source, "out"), t.index))
    return lifted


def lift_to_states(encoded, transitions):
    """Transitions of the source model -> the matching transitions of the reverse encoding."""
    lifted = []
    for t in transitions:
        lifted.append(encoded.transition(t.source, t.index))
        lifted.append(encoded.transition(Split(t.source, t.index), 0))
    return lifted
