"""
Reward <-> family reductions
----------------------------
limsup_PP(>=0) is the GF family A_i = {t : r(t) >= -2^-i} and conversely a GF
family is limsup_PP(>=0) of the rewards 0 / -2^-level / -1. The liminf / FG
duals use the same formulas.
"""

from __future__ import annotations

import sympy as sp

from objectives.objective import MonotoneFamily, Objective, ObjectiveKind
from tools.calculator import two_pow_neg


def family_from_rewards():
    return MonotoneFamily.from_rewards()


def reward_for_level(level):
    if level is None:
        return sp.Integer(-1)
    if level == sp.oo:
        return sp.Integer(0)
    return -two_pow_neg(level)


def rewards_from_family(family):
    """Reward function t ↦ 0 (level oo), -2^-i (level i), -1 (not in A_0)."""

    def reward(t):
        return reward_for_level(family.level(t))

    return reward


def liminf_family_from_rewards():
    return family_from_rewards()


def liminf_rewards_from_family(family):
    return rewards_from_family(family)


def relabel_with_family(mdp, family):
    """FiniteMdp whose rewards encode `family`; origins are kept."""
    reward = rewards_from_family(family)
    return mdp.with_rewards(lambda i, k, e: reward(mdp.transition(i, k)))


def threshold_counterpart(obj):
    """GF family ↔ limsup_PP(>=0), FG family ↔ liminf_PP(>=0), as the reductions pair them."""
    if obj.kind is ObjectiveKind.GF_FAMILY:
        return Objective.limsup_geq0()
    if obj.kind is ObjectiveKind.FG_FAMILY:
        return Objective.liminf_geq0()
    if obj.kind is ObjectiveKind.LIMSUP_GEQ0:
        return Objective.gf_family(family_from_rewards())
    if obj.kind is ObjectiveKind.LIMINF_GEQ0:
        return Objective.fg_family(liminf_family_from_rewards())
    raise ValueError(f"{obj.kind.value} has no threshold counterpart")
