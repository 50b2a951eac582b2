"""
Finite-observation verdicts: prefixes (possibly absorbed in a tail sink) and
lassos of finite models.
"""

from __future__ import annotations

import sympy as sp

from objectives.objective import ObjectiveKind, Verdict


def _combine(verdicts):
    verdicts = list(verdicts)
    if any(v is Verdict.VIOL for v in verdicts):
        return Verdict.VIOL
    if all(v is Verdict.SAT for v in verdicts):
        return Verdict.SAT
    return Verdict.UNDETERMINED


def _of(flag):
    return Verdict.SAT if flag else Verdict.VIOL


def _tail_verdict(obj, tail):
    """Verdict of a run whose remainder is the closed-form tail."""
    kind = obj.kind
    if kind in (ObjectiveKind.LIMSUP_GEQ0,):
        return _of(tail.limsup >= 0)
    if kind in (ObjectiveKind.LIMINF_GEQ0,):
        return _of(tail.liminf >= 0)
    if kind is ObjectiveKind.GF_FAMILY:
        return _of(tail.limsup >= 0 if obj.family.reward_based else tail.member)
    if kind is ObjectiveKind.FG_FAMILY:
        return _of(tail.liminf >= 0 if obj.family.reward_based else tail.member)
    if kind is ObjectiveKind.TRANSIENCE:
        return _of(tail.transient)
    # set-based objectives: tail transitions are inside every set iff member
    return _of(tail.member)


def classify_prefix(run, obj):
    """
    Sat/Viol only when every extension agrees; otherwise Undetermined.
    A run with `absorbed` set ends in a tail state whose future is known.
    """
    kind = obj.kind
    if kind is ObjectiveKind.AND:
        return _combine(classify_prefix(run, p) for p in obj.parts)

    tail = run.absorbed
    states = run.states

    if kind is ObjectiveKind.REACH:
        plain = states[:-1] if tail is not None else states
        if any(obj.targets.holds(s) for s in plain):
            return Verdict.SAT
        if tail is not None:
            return _of(obj.targets.holds(states[-1], tail))
        return Verdict.UNDETERMINED

    if kind is ObjectiveKind.REACH_WITHIN:
        k = obj.steps
        window = states[: k + 1]
        last_is_tail = tail is not None and len(states) <= k + 1
        plain = window[:-1] if last_is_tail else window
        if any(obj.targets.holds(s) for s in plain):
            return Verdict.SAT
        if last_is_tail:
            return _of(obj.targets.holds(states[-1], tail))
        if len(states) > k:
            return Verdict.VIOL
        return Verdict.UNDETERMINED

    if kind is ObjectiveKind.SAFETY:
        if any(t not in obj.transitions for t in run.transitions):
            return Verdict.VIOL
        if tail is not None:
            return _of(tail.member)
        return Verdict.UNDETERMINED

    if tail is not None:
        return _tail_verdict(obj, tail)
    return Verdict.UNDETERMINED


def _visited_sources(lasso):
    return [t for t in lasso.stem + lasso.cycle]


def lasso_verdict(lasso, obj):
    """Exact verdict of stem·cycle^ω; lassos are always decided."""
    kind = obj.kind
    cycle = lasso.cycle

    if kind is ObjectiveKind.AND:
        return _combine(lasso_verdict(lasso, p) for p in obj.parts)

    if kind is ObjectiveKind.REACH:
        return _of(any(_source_hits(t, obj.targets) for t in _visited_sources(lasso)))

    if kind is ObjectiveKind.REACH_WITHIN:
        k = obj.steps
        steps = list(lasso.stem)
        while len(steps) < k + 1:
            steps.extend(cycle)
        return _of(any(_source_hits(t, obj.targets) for t in steps[: k + 1]))

    if kind is ObjectiveKind.SAFETY:
        return _of(all(t in obj.transitions for t in lasso.stem + cycle))
    if kind is ObjectiveKind.BUCHI:
        return _of(any(t in obj.transitions for t in cycle))
    if kind is ObjectiveKind.COBUCHI:
        return _of(all(t in obj.transitions for t in cycle))
    if kind is ObjectiveKind.GF_FAMILY:
        return _of(any(obj.family.level(t) == sp.oo for t in cycle))
    if kind is ObjectiveKind.FG_FAMILY:
        return _of(all(obj.family.level(t) == sp.oo for t in cycle))
    if kind is ObjectiveKind.LIMSUP_GEQ0:
        return _of(max(t.reward for t in cycle) >= 0)
    if kind is ObjectiveKind.LIMINF_GEQ0:
        return _of(min(t.reward for t in cycle) >= 0)
    if kind is ObjectiveKind.TRANSIENCE:
        return Verdict.VIOL
    raise ValueError(f"unknown objective kind {kind}")


def _source_hits(t, targets):
    if t.forced is not None:
        return t.forced
    return targets.holds(t.source)
