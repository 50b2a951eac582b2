"""
Objective JSON.

{"kind": "reach", "targets": ["s1"]}
{"kind": "reach_within", "targets": ["s1"], "steps": 3}
{"kind": "safety" | "buchi" | "cobuchi", "transitions": ["s0#1", ...]}
{"kind": "gf_family" | "fg_family",
 "family": {"type": "from_rewards"} | {"type": "table", "levels": {"s0#0": 2, "s1#0": "inf"}}}
{"kind": "limsup_geq0" | "liminf_geq0" | "transience"}
{"kind": "and", "parts": [...]}
{"kind": "expected", "which": "limsup" | "liminf"}
"""

import sympy as sp

from core.errors import InvalidModel
from objectives.objective import (
    ExpectedPayoff,
    MonotoneFamily,
    Objective,
    ObjectiveKind,
    StateSet,
    TransitionSet,
)


def parse_transition_id(text):
    source, sep, index = str(text).rpartition("#")
    if not sep or not index.isdigit():
        raise InvalidModel(f"transition ids look like 'state#index', got {text!r}")
    return source, int(index)


def _family(data):
    kind = data.get("type")
    if kind == "from_rewards":
        return MonotoneFamily.from_rewards()
    if kind == "table":
        levels = {}
        for tid, level in data.get("levels", {}).items():
            if level in ("inf", "oo"):
                level = sp.oo
            elif not isinstance(level, int) or level < 0:
                raise InvalidModel(f"level of {tid} must be a natural or 'inf'")
            levels[parse_transition_id(tid)] = level
        return MonotoneFamily.table(levels, name=data.get("name", "table"))
    raise InvalidModel(f"unknown family type {kind!r}")


def objective_from_dict(data):
    if not isinstance(data, dict) or "kind" not in data:
        raise InvalidModel("objective needs a 'kind'")
    kind = data["kind"]
    if kind == "expected":
        return ExpectedPayoff(data.get("which", "limsup"))
    try:
        kind = ObjectiveKind(kind)
    except ValueError:
        raise InvalidModel(f"unknown objective kind {data['kind']!r}")

    if kind is ObjectiveKind.REACH:
        return Objective.reach(StateSet.of(data.get("targets", []), name="targets"))
    if kind is ObjectiveKind.REACH_WITHIN:
        return Objective.reach_within(StateSet.of(data.get("targets", []), name="targets"), int(data["steps"]))
    if kind in (ObjectiveKind.SAFETY, ObjectiveKind.BUCHI, ObjectiveKind.COBUCHI):
        ids = [parse_transition_id(t) for t in data.get("transitions", [])]
        tset = TransitionSet.of(ids, name=data.get("name", "A"))
        return Objective(kind, transitions=tset)
    if kind in (ObjectiveKind.GF_FAMILY, ObjectiveKind.FG_FAMILY):
        return Objective(kind, family=_family(data.get("family", {"type": "from_rewards"})))
    if kind is ObjectiveKind.AND:
        return Objective.conj(*(objective_from_dict(p) for p in data.get("parts", [])))
    return Objective(kind)
