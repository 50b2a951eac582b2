"""
Brute-force strategy oracle: evaluate every MD or FD(k) strategy of a small
FiniteMdp on its induced chain and keep the exact best value.
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from config.settings import Config
from core.errors import BudgetExceeded
from core.model import StateKind
from solve.chains import ONE, TableStrategy, evaluate_chain

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Enumeration:
    value: object
    argmax: tuple          # TableStrategy objects in enumeration order
    evaluated: int
    strategy_class: str


def parse_class(text):
    """'md' -> ('md', 1); 'fd:3' -> ('fd', 3)."""
    text = text.strip().lower()
    if text == "md":
        return "md", 1
    if text.startswith("fd:"):
        k = int(text[3:])
        if k < 1:
            raise ValueError("FD memory size must be >= 1")
        return "fd", k
    raise ValueError(f"unknown strategy class {text!r} (md | fd:k)")


def strategy_count(mdp, cls="md", k=1):
    controlled = [i for i in range(len(mdp)) if mdp.kind(i) is StateKind.CONTROLLED]
    if cls == "md":
        return math.prod(len(mdp.edges(i)) for i in controlled)
    random_edges = sum(len(mdp.edges(i)) for i in range(len(mdp)) if mdp.kind(i) is StateKind.RANDOM)
    choice = math.prod(len(mdp.edges(i)) * k for i in controlled) ** k
    return choice * k ** (random_edges * k)


def _md_strategies(mdp):
    controlled = [i for i in range(len(mdp)) if mdp.kind(i) is StateKind.CONTROLLED]
    for picks in itertools.product(*(range(len(mdp.edges(i))) for i in controlled)):
        yield TableStrategy.positional(dict(zip(controlled, picks)))


def _fd_strategies(mdp, k):
    modes = range(k)
    choice_slots = [(m, i) for m in modes for i in range(len(mdp)) if mdp.kind(i) is StateKind.CONTROLLED]
    update_slots = [
        (m, i, e) for m in modes for i in range(len(mdp)) if mdp.kind(i) is StateKind.RANDOM
        for e in range(len(mdp.edges(i)))
    ]
    choice_ranges = [list(itertools.product(range(len(mdp.edges(i))), modes)) for _, i in choice_slots]
    for picks in itertools.product(*choice_ranges):
        choice = {slot: ((ONE, e, m2),) for slot, (e, m2) in zip(choice_slots, picks)}
        for updates in itertools.product(modes, repeat=len(update_slots)):
            update = {slot: ((ONE, m2),) for slot, m2 in zip(update_slots, updates)}
            yield TableStrategy(k, choice, update, 0, tag=f"FD({k})")


def enumerate_strategies(mdp, obj, strategy_class="md", budget=None, threads=None, start=None):
    """
    Exhaustively evaluate the class ('md' or 'fd:k'); BudgetExceeded when the
    class holds more strategies than `budget`.
    """
    cls, k = parse_class(strategy_class)
    budget = Config.BUDGET_STRATEGIES if budget is None else budget
    threads = Config.THREADS if threads is None else threads
    count = strategy_count(mdp, cls, k)
    if count > budget:
        raise BudgetExceeded("strategies", count, budget)
    strategies = list(_md_strategies(mdp) if cls == "md" else _fd_strategies(mdp, k))
    logger.info("enumerating %d %s strategies on %s", len(strategies), strategy_class, mdp.name)

    def score(strategy):
        return evaluate_chain(mdp, strategy, obj, start)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(score, strategies))
    else:
        values = [score(s) for s in strategies]

    best = max(values)
    argmax = tuple(s for s, v in zip(strategies, values) if v == best)
    return Enumeration(best, argmax, len(strategies), strategy_class)
