"""
Seeded corpus of small random FiniteMdps and lasso enumeration over them.

Every instance is drawn from its own numpy generator seeded with
(seed, instance index), so a corpus is the same whatever subset of it a
caller asks for.
"""

from __future__ import annotations

import logging

import numpy as np
import sympy as sp

from config.settings import Config
from core.model import FiniteEdge, FiniteMdp, FiniteState, Lasso, StateKind, validate
from objectives.objective import MonotoneFamily

logger = logging.getLogger(__name__)

REWARDS = tuple(sp.Rational(r) for r in ("-1", "-1/2", "-1/4", "0", "1/2", "1"))
LEVELS = (None, 0, 1, 2, sp.oo)


def _probabilities(rng, count):
    weights = [int(w) for w in rng.integers(1, 4, size=count)]
    total = sum(weights)
    return [sp.Rational(w, total) for w in weights]


def random_finite_mdp(seed=None, index=0, min_states=2, max_states=12, max_edges=3,
                      random_share=0.4, state_rewards=False, name=None):
    """
    One corpus instance. With state_rewards every edge leaving a state
    carries that state's reward, the shape the expected-payoff reductions
    start from.
    """
    seed = Config.SEED if seed is None else seed
    rng = np.random.default_rng([seed, index])
    n = int(rng.integers(min_states, max_states + 1))
    labels = [f"q{i}" for i in range(n)]
    own = [REWARDS[int(rng.integers(len(REWARDS)))] for _ in range(n)]

    states = []
    for i in range(n):
        kind = StateKind.RANDOM if rng.random() < random_share else StateKind.CONTROLLED
        count = int(rng.integers(1, max_edges + 1))
        targets = [int(t) for t in rng.integers(0, n, size=count)]
        if kind is StateKind.RANDOM:
            targets = sorted(set(targets))
            probs = _probabilities(rng, len(targets))
        else:
            probs = [None] * count
        edges = []
        for target, prob in zip(targets, probs):
            reward = own[i] if state_rewards else REWARDS[int(rng.integers(len(REWARDS)))]
            edges.append(FiniteEdge(target, reward, prob))
        states.append(FiniteState(labels[i], kind, tuple(edges)))

    mdp = FiniteMdp(tuple(states), 0, name or f"corpus[{seed}:{index}]")
    problems = validate(mdp)
    if problems:
        raise ValueError(f"{mdp.name}: generated an invalid model: {'; '.join(problems)}")
    return mdp


def corpus(count, seed=None, **kwargs):
    seed = Config.SEED if seed is None else seed
    models = [random_finite_mdp(seed, i, **kwargs) for i in range(count)]
    logger.debug("corpus of %d models (seed %s), %d states in total", count, seed, sum(map(len, models)))
    return models


def random_family(finite, seed=None, index=0):
    """Table family with levels drawn from {none, 0, 1, 2, oo} per transition."""
    seed = Config.SEED if seed is None else seed
    rng = np.random.default_rng([seed, index, 1])
    levels = {}
    for _, _, t in finite.all_transitions():
        level = LEVELS[int(rng.integers(len(LEVELS)))]
        if level is not None:
            levels[t.ident] = level
    return MonotoneFamily.table(levels, name=f"random[{index}]")


def enumerate_lassos(finite, max_len=6, limit=None):
    """
    Every path of at most `max_len` transitions from the initial state that
    ends in a state it already visited, cut there into stem and cycle.
    Random and controlled states branch alike; the order is fixed for a
    given model.
    """
    produced = 0
    stack = [(finite.initial, (), {finite.initial: 0})]
    while stack:
        i, path, position = stack.pop()
        if len(path) >= max_len:
            continue
        for k in reversed(range(len(finite.edges(i)))):
            t = finite.transition(i, k)
            j = finite.edges(i)[k].target
            extended = path + (t,)
            if j in position:
                yield Lasso(extended[: position[j]], extended[position[j]:])
                produced += 1
                if limit is not None and produced >= limit:
                    return
                continue
            seen = dict(position)
            seen[j] = len(extended)
            stack.append((j, extended, seen))
