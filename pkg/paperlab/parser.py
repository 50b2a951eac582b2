"""
Argument Parser
---------------
Turns the text the CLI receives into models, objectives and strategy
machines:

  model      file.json | gen:<family>[:k=v,k=v]
  objective  file.json | inline JSON | limsup | liminf | gf | fg | transience
             | expected:limsup | expected:liminf | reach:s|t
             | safety:s#0|t#1 | buchi:... | cobuchi:...
  strategy   file.json | builtin:<name>[:k=v,k=v]

State and transition names are compared by their printed form, so
"r[3]#0" names edge 0 of Key("r", (3,)).
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import sympy as sp

from core.errors import BadParams, InvalidModel, MdpLabError, UnsupportedSpec
from core.model import FiniteMdp, Key
from core.serialization import load_finite_mdp
from objectives.objective import ExpectedPayoff, MonotoneFamily, Objective, StateSet, TransitionSet
from objectives.serialization import objective_from_dict, parse_transition_id
from paperlab.corpus import random_finite_mdp
from paperlab.figures import generate
from sim.strategy import (
    BranchDistribution,
    BranchSequence,
    LadderEscalating,
    PositionalMachine,
    RandfEscalating,
    RandfMemoryless,
    machine_from_dict,
)
from tools.calculator import Calculator, parse_rational

logger = logging.getLogger(__name__)

SHORT_OBJECTIVES = {
    "limsup": Objective.limsup_geq0,
    "liminf": Objective.liminf_geq0,
    "transience": Objective.transience,
    "gf": lambda: Objective.gf_family(MonotoneFamily.from_rewards()),
    "fg": lambda: Objective.fg_family(MonotoneFamily.from_rewards()),
    "expected:limsup": lambda: ExpectedPayoff("limsup"),
    "expected:liminf": lambda: ExpectedPayoff("liminf"),
}

BUILTIN_STRATEGIES = (
    "ladder_escalating", "randf_escalating", "randf_memoryless",
    "branch_sequence", "branch_distribution", "positional",
)


def parse_value(text):
    """true/false, integers, exact rationals, and |-separated lists of those."""
    text = text.strip()
    if "|" in text:
        return [parse_value(part) for part in text.split("|") if part.strip()]
    lowered = text.lower()
    if lowered in ("true", "yes"):
        return True
    if lowered in ("false", "no"):
        return False
    if lowered in ("inf", "oo"):
        return sp.oo
    try:
        value = parse_rational(text)
    except ValueError:
        return text
    return int(value) if value.q == 1 else value


def parse_params(text):
    params = {}
    for item in filter(None, (p.strip() for p in (text or "").split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            raise BadParams(f"parameters look like key=value, got {item!r}")
        params[key.strip()] = parse_value(value)
    return params


def _names(value):
    return value if isinstance(value, list) else [value]


class SpecParser:
    def __init__(self, calculator=None):
        self.calculator = calculator or Calculator()

    # ---------- models ----------

    def model(self, text):
        text = text.strip()
        if not text.startswith("gen:"):
            return load_finite_mdp(text)
        family, _, raw = text[4:].partition(":")
        params = parse_params(raw)
        if family == "corpus":
            try:
                return random_finite_mdp(**params)
            except TypeError as e:
                raise BadParams(f"corpus: {e}") from e
        if family == "buchi_relabel":
            if "model" in params:
                params["model"] = load_finite_mdp(str(params["model"]))
            if "accepting" in params:
                params["accepting"] = self._state_matcher(_names(params["accepting"]))
        return generate(family, params)

    # ---------- objectives ----------

    def objective(self, text):
        text = text.strip()
        if text.startswith("{"):
            try:
                return objective_from_dict(json.loads(text))
            except json.JSONDecodeError as e:
                raise InvalidModel(f"inline objective: {e}") from e
        if text.endswith(".json"):
            data = json.loads(Path(text).read_text(encoding="utf-8"))
            return objective_from_dict(data)
        if text in SHORT_OBJECTIVES:
            return SHORT_OBJECTIVES[text]()

        kind, sep, arg = text.partition(":")
        names = [n for n in arg.split("|") if n] if sep else []
        if kind == "reach":
            return Objective.reach(StateSet(self._state_matcher(names), "targets"))
        if kind in ("safety", "buchi", "cobuchi"):
            ids = frozenset(self._transition_name(n) for n in names)
            tset = TransitionSet(lambda t: (str(t.source), t.index) in ids, kind)
            return getattr(Objective, kind)(tset)
        raise InvalidModel(f"unknown objective {text!r}")

    # ---------- strategies ----------

    def strategy(self, text, model=None):
        text = text.strip()
        if not text.startswith("builtin:"):
            data = json.loads(Path(text).read_text(encoding="utf-8"))
            return machine_from_dict(data, model if isinstance(model, FiniteMdp) else None)
        name, _, raw = text[8:].partition(":")
        params = parse_params(raw)
        try:
            return self._builtin(name, params)
        except TypeError as e:
            raise UnsupportedSpec(f"builtin {name}: {e}") from e

    def _builtin(self, name, params):
        if name == "ladder_escalating":
            return LadderEscalating(**params)
        if name == "randf_escalating":
            return RandfEscalating(**params)
        if name == "randf_memoryless":
            return RandfMemoryless(_names(params.get("down", [])))
        if name == "branch_sequence":
            index = self.calculator.index_sequence(str(params.get("index", "k")))
            return BranchSequence(Key("s"), index, name=f"sequence:{index.expression}")
        if name == "branch_distribution":
            return BranchDistribution(Key("s"), _names(params.get("weights", [1])))
        if name == "positional":
            picks = {key: int(value) for key, value in params.items()}
            return PositionalMachine(lambda s, branching: picks.get(str(s), 0))
        raise UnsupportedSpec(f"unknown builtin strategy {name!r} (one of {', '.join(BUILTIN_STRATEGIES)})")

    # ---------- helpers ----------

    def _state_matcher(self, names):
        wanted = frozenset(str(n) for n in names)
        return lambda state: str(state) in wanted

    def _transition_name(self, text):
        source, index = parse_transition_id(text)
        return str(source), index

    def parse(self, model=None, objective=None, strategy=None):
        """
        Parse whatever was given. Never raises: failures come back as
        {"success": False, "errors": [...]} with the parts that did parse.
        """
        result = {"success": True, "model": None, "objective": None, "strategy": None, "errors": []}
        steps = (
            ("model", model, lambda: self.model(model)),
            ("objective", objective, lambda: self.objective(objective)),
            ("strategy", strategy, lambda: self.strategy(strategy, result["model"])),
        )
        for key, text, build in steps:
            if text is None:
                continue
            try:
                result[key] = build()
            except (MdpLabError, OSError, ValueError) as e:
                logger.warning("could not parse %s %r: %s", key, text, e)
                result["success"] = False
                result["errors"].append(f"{key}: {e}")
        return result
