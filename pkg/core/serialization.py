"""
FiniteMdp JSON format.

{"states": [{"id": str, "kind": "controlled"|"random",
             "trans": [{"to": str, "prob": "n/d", "reward": "n/d"}],
             "tail": {"limsup": "n/d", "liminf": "n/d", "member": bool}}],
 "initial": str,
 "reward_bound": "n/d"}

"prob" only on random states; "tail" and "reward_bound" are optional. A
declared bound is checked against every reward at load time.
"""

import json
import logging

from core.errors import InvalidModel
from core.model import FiniteEdge, FiniteMdp, FiniteState, StateKind, TailLabel, validate
from tools.calculator import Calculator, format_rational, parse_rational

logger = logging.getLogger(__name__)


def _rational(value, where):
    try:
        return parse_rational(value)
    except ValueError as e:
        raise InvalidModel(f"{where}: {e}") from e


def _probability(value, where):
    checked = Calculator().check_probability_bounds(value)
    if not checked["valid"]:
        raise InvalidModel(f"{where}: probability {value!r} is not an exact rational in [0, 1]")
    return checked["value"]


def finite_mdp_from_dict(data, name="finite"):
    if not isinstance(data, dict) or "states" not in data or "initial" not in data:
        raise InvalidModel("model needs 'states' and 'initial'")
    ids = [entry.get("id") for entry in data["states"]]
    if any(not isinstance(i, str) for i in ids):
        raise InvalidModel("every state needs a string 'id'")
    position = {sid: i for i, sid in enumerate(ids)}
    if len(position) != len(ids):
        raise InvalidModel("duplicate state ids")
    if data["initial"] not in position:
        raise InvalidModel(f"unknown initial state {data['initial']!r}")

    states = []
    for entry in data["states"]:
        sid = entry["id"]
        try:
            kind = StateKind(entry.get("kind"))
        except ValueError:
            raise InvalidModel(f"{sid}: kind must be 'controlled' or 'random'")
        edges = []
        for k, tr in enumerate(entry.get("trans", [])):
            where = f"{sid}#{k}"
            if tr.get("to") not in position:
                raise InvalidModel(f"{where}: unknown target {tr.get('to')!r}")
            reward = _rational(tr.get("reward", "0"), where)
            prob = None
            if kind is StateKind.RANDOM:
                if "prob" not in tr:
                    raise InvalidModel(f"{where}: random transitions need 'prob'")
                prob = _probability(tr["prob"], where)
            elif "prob" in tr:
                raise InvalidModel(f"{where}: controlled transitions take no 'prob'")
            edges.append(FiniteEdge(position[tr["to"]], reward, prob))
        tail = None
        if "tail" in entry:
            t = entry["tail"]
            tail = TailLabel(
                _rational(t["limsup"], sid),
                _rational(t["liminf"], sid),
                member=bool(t.get("member", False)),
            )
        states.append(FiniteState(sid, kind, tuple(edges), tail))

    mdp = FiniteMdp(tuple(states), position[data["initial"]], name)
    bound = None if data.get("reward_bound") is None else _rational(data["reward_bound"], "reward_bound")
    problems = validate(mdp, bound)
    if problems:
        raise InvalidModel("; ".join(problems))
    return mdp


def finite_mdp_to_dict(mdp):
    states = []
    for st in mdp.states:
        entry = {"id": str(st.label), "kind": st.kind.value, "trans": []}
        for e in st.edges:
            tr = {"to": str(mdp.states[e.target].label), "reward": format_rational(e.reward)}
            if e.prob is not None:
                tr["prob"] = format_rational(e.prob)
            entry["trans"].append(tr)
        if st.tail is not None:
            entry["tail"] = {
                "limsup": format_rational(st.tail.limsup),
                "liminf": format_rational(st.tail.liminf),
                "member": st.tail.member,
            }
        states.append(entry)
    return {"states": states, "initial": str(mdp.states[mdp.initial].label)}


def load_finite_mdp(path):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as e:
            raise InvalidModel(f"{path}: {e}") from e
    logger.debug("loaded model from %s", path)
    return finite_mdp_from_dict(data, name=str(path))


def dump_finite_mdp(mdp, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(finite_mdp_to_dict(mdp), fh, indent=2)
