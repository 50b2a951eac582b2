"""
Exact verdicts of deterministic strategies whose (state, mode) product is
eventually periodic.
"""

from __future__ import annotations

import logging

from config.settings import Config
from core.errors import InvalidStrategy, NoLassoFound
from core.model import LOSING_CHAIN, Key, Lasso, RunPrefix, StateKind
from objectives.verdicts import classify_prefix, lasso_verdict
from sim.strategy import check_edges

logger = logging.getLogger(__name__)


def _deterministic_step(mdp, machine, mode, state):
    branching = mdp.successors(state)
    if branching.kind is StateKind.RANDOM:
        edges = branching.finite_edges()
        if len(edges) != 1:
            raise InvalidStrategy(f"random state {state!r} makes the product nondeterministic")
        _, m2 = machine.observe(mode, state, 0, branching)[0]
        return 0, m2
    offered = check_edges(machine, state, branching, machine.choose(mode, state, branching))
    choices = [c for c in offered if c.prob > 0]
    if len(choices) != 1:
        raise InvalidStrategy(f"{machine.tag} randomizes at {state!r}")
    return choices[0].edge, choices[0].mode


def lasso_attainment(mdp, machine, obj, budget=None, divergence=None):
    """
    Walk the deterministic product until a (state, mode) pair repeats and
    return the lasso's verdict. A tail-labelled state ends the walk with its
    closed-form verdict. `divergence(run)` may certify, before the budget
    runs out, that the run climbs forever; it returns the TailLabel of that
    future or None.
    """
    budget = Config.BUDGET_LASSO_STEPS if budget is None else budget
    seen = {}
    run = RunPrefix(states=[mdp.initial])
    state, mode = mdp.initial, machine.initial_mode
    for step in range(budget):
        tail = mdp.tail_label(state)
        if tail is not None:
            run.absorbed = tail
            return classify_prefix(run, obj)
        node = (state, mode)
        if node in seen:
            j = seen[node]
            lasso = Lasso(run.transitions[:j], run.transitions[j:])
            logger.debug("lasso after %d steps: stem %d, cycle %d", step, j, len(lasso.cycle))
            return lasso_verdict(lasso, obj)
        seen[node] = step
        if divergence is not None:
            future = divergence(run, mode)
            if future is not None:
                run.absorbed = future
                return classify_prefix(run, obj)
        k, next_mode = _deterministic_step(mdp, machine, mode, state)
        t = mdp.transition(state, k)
        run.modes.append(mode)
        run.transitions.append(t)
        run.states.append(t.target)
        state, mode = t.target, next_mode
    raise NoLassoFound(f"no repeat of (state, mode) within {budget} steps")


def ladder_divergence(explicit_rungs, modes):
    """
    Divergence rule for finite tables on the reset ladder: rungs above
    `explicit_rungs` share one partition class, so a table that climbs
    |modes| + 1 times in a row inside that class repeats a mode there and
    never resets. The rest of such a run is a fresh -1 chain.
    """
    window = len(modes) + 1

    def rule(run, mode):
        recent = run.transitions[-window:]
        if len(recent) < window:
            return None
        for t in recent:
            s = t.source
            if not (isinstance(s, Key) and s.family == "r" and s.coords[0] > explicit_rungs):
                return None
            if not (isinstance(t.target, Key) and t.target.family == "r"):
                return None
        return LOSING_CHAIN

    return rule


def reset_rewards(run):
    """Rewards of the reset transitions (r_i -> s0) seen along a run."""
    return [t.reward for t in run.transitions if isinstance(t.target, Key) and t.target.family == "s0"]
