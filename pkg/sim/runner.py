"""
Run a strategy machine on a countable MDP.
"""

from __future__ import annotations

import logging

import numpy as np

from config.settings import Config
from core.errors import InvalidStrategy
from core.model import RunPrefix, StateKind
from sim.strategy import check_edges

logger = logging.getLogger(__name__)


def sample_index(rng, weights):
    """Inverse-CDF draw over a finite list of rational weights."""
    u = rng.random()
    acc = 0.0
    for k, w in enumerate(weights):
        acc += float(w)
        if u < acc:
            return k
    return len(weights) - 1


def sample_edge(rng, branching, max_branch):
    """
    Index of a random edge, or None when the draw falls beyond `max_branch`
    edges of an infinite branching (the overflow branch).
    """
    if branching.is_finite:
        return sample_index(rng, [e.prob for e in branching.edges])
    u = rng.random()
    acc = 0.0
    for k in range(max_branch):
        acc += float(branching.edge(k).prob)
        if u < acc:
            return k
    return None


def _controlled_step(rng, machine, mode, state, branching):
    choices = machine.choose(mode, state, branching)
    if not choices:
        raise InvalidStrategy(f"{machine.tag} offers no choice at {state!r}")
    check_edges(machine, state, branching, choices)
    total = sum(c.prob for c in choices)
    if total != 1:
        raise InvalidStrategy(f"{machine.tag} choice at {state!r} sums to {total}")
    c = choices[sample_index(rng, [c.prob for c in choices])]
    return c.edge, c.mode


def _random_step(rng, machine, mode, state, branching, max_branch, checked):
    if machine.custom_joint and branching.is_finite:
        if (state, mode) not in checked:
            machine.check_joint(mode, state, branching)
            checked.add((state, mode))
        joint = machine.joint(mode, state, branching)
        p, k, m2 = joint[sample_index(rng, [p for p, _, _ in joint])]
        return k, m2
    k = sample_edge(rng, branching, max_branch)
    if k is None:
        return None, mode
    updates = machine.observe(mode, state, k, branching)
    _, m2 = updates[sample_index(rng, [q for q, _ in updates])]
    return k, m2


def run_strategy(mdp, machine, seed=None, horizon=None, rng=None, max_branch=None):
    """
    Sample one run prefix: stops after `horizon` steps, at a tail-labelled
    state (recorded in `absorbed`) or at the inverse-CDF overflow branch.
    Identical seeds give identical runs.
    """
    if rng is None:
        rng = np.random.default_rng(Config.SEED if seed is None else seed)
    horizon = Config.MC_HORIZON if horizon is None else horizon
    max_branch = Config.MC_MAX_BRANCH if max_branch is None else max_branch

    run = RunPrefix(states=[mdp.initial])
    state, mode = mdp.initial, machine.initial_mode
    checked = set()
    for _ in range(horizon):
        tail = mdp.tail_label(state)
        if tail is not None:
            run.absorbed = tail
            break
        branching = mdp.successors(state)
        if branching.kind is StateKind.CONTROLLED:
            k, next_mode = _controlled_step(rng, machine, mode, state, branching)
        else:
            k, next_mode = _random_step(rng, machine, mode, state, branching, max_branch, checked)
            if k is None:
                run.overflowed = True
                break
        t = mdp.transition(state, k)
        run.modes.append(mode)
        run.transitions.append(t)
        run.states.append(t.target)
        state, mode = t.target, next_mode
    else:
        tail = mdp.tail_label(state)
        if tail is not None:
            run.absorbed = tail
    return run


def frequency_check(mdp, state, samples=100_000, seed=0, max_branch=None):
    """
    Chi-square statistic of sampled successor counts at a random state against
    P(state). Logs a warning on drift; returns (statistic, degrees of freedom).
    """
    max_branch = Config.MC_MAX_BRANCH if max_branch is None else max_branch
    rng = np.random.default_rng(seed)
    branching = mdp.successors(state)
    counts = {}
    for _ in range(samples):
        k = sample_edge(rng, branching, max_branch)
        counts[k] = counts.get(k, 0) + 1
    observed = [k for k in counts if k is not None]
    expected = np.array([float(branching.edge(k).prob) * samples for k in observed])
    actual = np.array([counts[k] for k in observed], dtype=float)
    statistic = float(np.sum((actual - expected) ** 2 / expected))
    dof = max(len(observed) - 1, 1)
    if statistic > dof + 4 * np.sqrt(2 * dof):
        logger.warning("successor frequencies at %r drift: chi2 = %.2f on %d dof", state, statistic, dof)
    return statistic, dof
