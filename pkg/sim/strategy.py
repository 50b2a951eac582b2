"""
Strategy machines
-----------------
A strategy with memory: at a controlled state it picks a distribution over
(edge, next mode); after a random move it may update its mode. Machines are
stateless objects; the current mode is passed in, so one machine can drive
many runs at once.
"""

from __future__ import annotations

import logging
from typing import Hashable, NamedTuple

import sympy as sp

from core.errors import InvalidStrategy
from core.model import Key

logger = logging.getLogger(__name__)

ONE = sp.Integer(1)


class Choice(NamedTuple):
    prob: sp.Rational
    edge: int
    mode: Hashable


class StrategyMachine:
    """
    Base class. Subclasses implement `choose`; `observe` defaults to keeping
    the mode. Machines that couple the random successor with the next mode
    override `joint` and set `custom_joint`.
    """

    tag = "FR"
    modes = None            # finite tuple of modes, or None for an unbounded memory
    initial_mode = 0
    custom_joint = False

    def choose(self, mode, state, branching):
        raise NotImplementedError

    def observe(self, mode, state, edge, branching):
        return ((ONE, mode),)

    def joint(self, mode, state, branching):
        """[(prob, edge, next mode)] at a random state with finite branching."""
        return tuple(
            (e.prob * q, k, m2)
            for k, e in enumerate(branching.finite_edges())
            for q, m2 in self.observe(mode, state, k, branching)
        )

    def check_joint(self, mode, state, branching):
        """The successor marginal of `joint` must equal the state's distribution."""
        marginal = {}
        for p, k, _ in self.joint(mode, state, branching):
            marginal[k] = marginal.get(k, 0) + p
        for k, e in enumerate(branching.finite_edges()):
            if marginal.get(k, 0) != e.prob:
                raise InvalidStrategy(
                    f"{self.tag} at {state!r} mode {mode!r}: edge {k} gets {marginal.get(k, 0)}, P = {e.prob}"
                )

    def describe(self):
        return {"tag": self.tag, "modes": None if self.modes is None else len(self.modes)}


class PositionalMachine(StrategyMachine):
    """MD: `pick(state, branching) -> edge index` or a {state: edge} table (default edge 0)."""

    tag = "MD"
    modes = (0,)

    def __init__(self, pick):
        self._pick = pick

    def choose(self, mode, state, branching):
        if callable(self._pick):
            k = self._pick(state, branching)
        else:
            k = self._pick.get(state, 0)
        return (Choice(ONE, k, mode),)


class RandomizedPositional(StrategyMachine):
    """MR: `dist(state, branching) -> [(prob, edge)]`."""

    tag = "MR"
    modes = (0,)

    def __init__(self, dist):
        self._dist = dist

    def choose(self, mode, state, branching):
        return tuple(Choice(sp.Rational(p), k, mode) for p, k in self._dist(state, branching))


class PartitionTable(StrategyMachine):
    """
    Finite-memory table over a named state partition.

    part(state) -> name; rules {(mode, name): [(prob, edge, next_mode)]} with
    `default` used for pairs not in the table; updates {(mode, name, edge):
    [(prob, next_mode)]} after random moves. Deterministic tables are Det(F).
    """

    def __init__(self, part, rules, modes, default=None, updates=None, initial_mode=0):
        self.part = part
        self.rules = {key: tuple(Choice(sp.Rational(p), k, m) for p, k, m in v) for key, v in rules.items()}
        self.modes = tuple(modes)
        self.default = default
        self.updates = dict(updates or {})
        self.initial_mode = initial_mode
        deterministic = all(len(v) == 1 for v in self.rules.values()) and all(
            len(v) == 1 for v in self.updates.values()
        )
        self.tag = f"{'Det' if deterministic else 'Rand'}(F{len(self.modes)})"

    def choose(self, mode, state, branching):
        rule = self.rules.get((mode, self.part(state)))
        if rule is not None:
            return rule
        if self.default is None:
            return (Choice(ONE, 0, mode),)
        return tuple(Choice(sp.Rational(p), k, m) for p, k, m in self.default(mode, state, branching))

    def observe(self, mode, state, edge, branching):
        return self.updates.get((mode, self.part(state), edge), ((ONE, mode),))


class TableMachine(StrategyMachine):
    """Runs a solve.chains.TableStrategy on the countable view of its FiniteMdp."""

    def __init__(self, table, finite):
        self.table = table
        self.finite = finite
        self.modes = tuple(range(table.modes))
        self.initial_mode = table.initial_mode
        self.tag = table.tag

    def choose(self, mode, state, branching):
        i = self.finite.state_index(state)
        return tuple(Choice(p, k, m2) for p, k, m2 in self.table.choose(mode, i))

    def observe(self, mode, state, edge, branching):
        return self.table.after(mode, self.finite.state_index(state), edge)


class LadderEscalating(StrategyMachine):
    """
    Ladder reset strategy with an unbounded counter: on the n-th pass from s0
    it climbs to rung n + offset and resets there, so every reset reward is
    seen once.
    """

    tag = "Det(inf)"

    def __init__(self, offset=0):
        self.offset = offset
        self.initial_mode = 1

    def choose(self, mode, state, branching):
        if isinstance(state, Key) and state.family == "r":
            (i,) = state.coords
            if i >= mode + self.offset:
                return (Choice(ONE, 0, mode + 1),)      # reset
            return (Choice(ONE, 1, mode),)              # climb
        return (Choice(ONE, 0, mode),)


class RandfEscalating(StrategyMachine):
    """Down-ladder strategy on the Rand(F) ladder: on pass k go down at rung k + offset."""

    tag = "Det(SC)"

    def __init__(self, offset=10):
        self.offset = offset
        self.initial_mode = 1

    def choose(self, mode, state, branching):
        if isinstance(state, Key) and state.family == "L":
            (i,) = state.coords
            if i >= mode + self.offset:
                return (Choice(ONE, 1, mode + 1),)      # down
            return (Choice(ONE, 0, mode),)              # climb
        return (Choice(ONE, 0, mode),)


class RandfMemoryless(StrategyMachine):
    """MR strategy on the Rand(F) ladder: at rung i go down with probability q[i-1] (1 past the table)."""

    tag = "MR"
    modes = (0,)

    def __init__(self, down):
        self.down = tuple(sp.Rational(q) for q in down)

    def choose(self, mode, state, branching):
        if isinstance(state, Key) and state.family == "L":
            (i,) = state.coords
            q = self.down[i - 1] if i <= len(self.down) else ONE
            choices = []
            if q < 1:
                choices.append(Choice(1 - q, 0, mode))
            if q > 0:
                choices.append(Choice(q, 1, mode))
            return tuple(choices)
        return (Choice(ONE, 0, mode),)


class BranchSequence(StrategyMachine):
    """
    Branch choice at one infinitely branching controlled hub: on the k-th visit
    (k >= 1) take edge index(k) - 1. `index` is an integer-valued k -> i map.
    """

    tag = "Det(inf)"

    def __init__(self, hub, index, name="sequence"):
        self.hub = hub
        self.index = index
        self.name = name
        self.initial_mode = 1

    def choose(self, mode, state, branching):
        if state == self.hub:
            return (Choice(ONE, int(self.index(mode)) - 1, mode + 1),)
        return (Choice(ONE, 0, mode),)


class BranchDistribution(StrategyMachine):
    """MR choice at the hub: edge i-1 with probability weights[i-1]."""

    tag = "MR"
    modes = (0,)

    def __init__(self, hub, weights):
        self.hub = hub
        self.weights = tuple(sp.Rational(w) for w in weights)
        if sum(self.weights) != ONE:
            raise InvalidStrategy(f"branch weights sum to {sum(self.weights)}")

    def choose(self, mode, state, branching):
        if state == self.hub:
            return tuple(Choice(w, i, mode) for i, w in enumerate(self.weights) if w > 0)
        return (Choice(ONE, 0, mode),)


class StepCounterFlag(StrategyMachine):
    """
    Det(SC+1-bit): memory (n, bit); rule(n, bit, state, branching) -> (edge, bit').
    Random moves advance the counter and keep the bit.
    """

    tag = "Det(SC+1-bit)"
    initial_mode = (0, 0)

    def __init__(self, rule):
        self.rule = rule

    def choose(self, mode, state, branching):
        n, bit = mode
        k, flag = self.rule(n, bit, state, branching)
        return (Choice(ONE, k, (n + 1, flag)),)

    def observe(self, mode, state, edge, branching):
        n, bit = mode
        return ((ONE, (n + 1, bit)),)


def machine_from_dict(data, finite=None):
    """
    JSON strategy file: {"type": "positional", "choices": {"state": edge}} or
    {"type": "randomized", "choices": {"state": [[p, edge], ...]}}; state ids
    are FiniteMdp labels as strings.
    """
    kind = data.get("type", "positional")
    labels = {str(lbl): lbl for lbl in finite.labels} if finite is not None else {}
    raw = data.get("choices", {})
    table = {labels.get(str(s), s): v for s, v in raw.items()}
    if kind == "positional":
        return PositionalMachine({s: int(k) for s, k in table.items()})
    if kind == "randomized":
        dist = {s: [(sp.Rational(str(p)), int(k)) for p, k in v] for s, v in table.items()}
        return RandomizedPositional(lambda s, b: dist.get(s, [(ONE, 0)]))
    raise InvalidStrategy(f"unknown strategy type {kind!r}")


def check_edges(machine, state, branching, choices):
    """Every chosen edge must exist at `state`."""
    for c in choices:
        if c.edge < 0 or (branching.is_finite and c.edge >= len(branching.edges)):
            raise InvalidStrategy(f"{machine.tag} picks edge {c.edge} at {state!r}, which has no such edge")
    return choices
