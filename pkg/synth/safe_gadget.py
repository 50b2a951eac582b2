"""
Safe-region gadget for FG families on finitely branching models.

From every state of S_safe the controller can surely keep to transitions of
level oo forever. Those states are collapsed into one gadget state whose
future is the winning chain x_0 -> x_1 -> ..., kept here as a member
self-loop with a transient tail label. Edges into S_safe are rewired to the
gadget and keep their original transition as origin.
"""

from __future__ import annotations

import logging

import sympy as sp

from core.model import FiniteEdge, FiniteMdp, FiniteState, Key, StateKind, TailLabel
from solve.graph import sure_safe_set

logger = logging.getLogger(__name__)

GADGET = Key("safe_gadget")
GADGET_TAIL = TailLabel(0, 0, transient=True, member=True)


def safe_states(finite, family):
    top = frozenset((i, k) for i, k, t in finite.all_transitions() if family.level(t) == sp.oo)
    return sure_safe_set(finite, top)


def safe_gadget_transform(finite, family):
    safe = safe_states(finite, family)
    if not safe:
        return finite
    kept = [i for i in range(len(finite)) if i not in safe]
    position = {i: n for n, i in enumerate(kept)}
    gadget = len(kept)

    states = []
    for i in kept:
        st = finite.states[i]
        edges = tuple(
            FiniteEdge(position.get(e.target, gadget), e.reward, e.prob, finite.transition(i, k))
            for k, e in enumerate(st.edges)
        )
        states.append(FiniteState(st.label, st.kind, edges, st.tail))
    states.append(FiniteState(GADGET, StateKind.CONTROLLED, (FiniteEdge(gadget, sp.Integer(0)),), GADGET_TAIL))

    initial = position.get(finite.initial, gadget)
    logger.debug("safe gadget on %s: %d of %d states collapsed", finite.name, len(safe), len(finite))
    return FiniteMdp(tuple(states), initial, f"{finite.name}+gsafe")
