"""
Step-counter encoding S(M): states (s, n) with n the number of steps taken.
S(M) is acyclic, hence universally transient, and runs of M and S(M) see the
same reward sequences.
"""

from __future__ import annotations

import dataclasses
import logging
from typing import Hashable, NamedTuple

from core.model import Branching, CountableMdp, Edge, Transition
from sim.strategy import Choice, StrategyMachine

logger = logging.getLogger(__name__)


class Stamped(NamedTuple):
    state: Hashable
    step: int

    def __str__(self):
        return f"({self.state},{self.step})"


def _stamp_edge(source, index, e, step):
    origin = Transition(source, index, e.target, e.reward, e.origin)
    return Edge(Stamped(e.target, step + 1), e.reward, e.prob, origin)


def step_counter_encode(mdp: CountableMdp) -> CountableMdp:
    def oracle(stamped):
        s, n = stamped
        branching = mdp.successors(s)
        if branching.is_finite:
            return Branching(
                branching.kind,
                tuple(_stamp_edge(s, k, e, n) for k, e in enumerate(branching.edges)),
            )
        return Branching(branching.kind, generator=lambda k: _stamp_edge(s, k, branching.edge(k), n))

    def tail(stamped):
        label = mdp.tail_label(stamped.state)
        return None if label is None else dataclasses.replace(label, transient=True)

    encoded = CountableMdp(
        Stamped(mdp.initial, 0),
        oracle,
        name=f"S({mdp.name})",
        params=mdp.params,
        reward_bound=mdp.reward_bound,
        tail=tail,
        finitely_branching=mdp.finitely_branching,
        universally_transient=True,
        acyclic=True,
    )
    logger.debug("step-counter encoding of %s", mdp.name)
    return encoded


class StepCounterCarryBack(StrategyMachine):
    """Plays σ' of S(M) on M, keeping the step count next to σ''s own mode."""

    def __init__(self, inner, encoded):
        self.inner = inner
        self.encoded = encoded
        self.initial_mode = (0, inner.initial_mode)
        self.custom_joint = inner.custom_joint
        base = inner.tag
        if base == "MD":
            self.tag = "Det(SC)"
        elif base == "MR":
            self.tag = "Rand(SC)"
        elif base.endswith(")") and "(" in base:
            head, rest = base.split("(", 1)
            self.tag = f"{head}(SC+{rest}"
        else:
            self.tag = f"{base}+SC"

    def _lifted(self, state, n):
        stamped = Stamped(state, n)
        return stamped, self.encoded.successors(stamped)

    def choose(self, mode, state, branching):
        n, inner_mode = mode
        stamped, lifted = self._lifted(state, n)
        return tuple(
            Choice(c.prob, c.edge, (n + 1, c.mode))
            for c in self.inner.choose(inner_mode, stamped, lifted)
        )

    def observe(self, mode, state, edge, branching):
        n, inner_mode = mode
        stamped, lifted = self._lifted(state, n)
        return tuple((q, (n + 1, m2)) for q, m2 in self.inner.observe(inner_mode, stamped, edge, lifted))

    def joint(self, mode, state, branching):
        n, inner_mode = mode
        stamped, lifted = self._lifted(state, n)
        return tuple((p, k, (n + 1, m2)) for p, k, m2 in self.inner.joint(inner_mode, stamped, lifted))


def carry_back_step_counter(inner: StrategyMachine, encoded: CountableMdp) -> StrategyMachine:
    """Strategy on M from a strategy σ' on `encoded` = step_counter_encode(M)."""
    return StepCounterCarryBack(inner, encoded)
