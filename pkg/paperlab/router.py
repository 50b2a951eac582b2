"""
Objective Router
----------------
Decides which solver answers an (model, objective, method) request and runs
it. Countable models are truncated first; the frontier policy is taken from
the request or from Config.
"""

from __future__ import annotations

import logging

from config.settings import Config
from core.bubble import FrontierPolicy, truncate
from core.errors import MdpLabError, UnsupportedObjective
from core.model import CountableMdp
from objectives.objective import ExpectedPayoff, ObjectiveKind
from solve.enumerate import enumerate_strategies
from solve.solvers import (
    solve_buchi,
    solve_cobuchi,
    solve_expected,
    solve_objective,
    solve_reachability,
    solve_safety,
    solve_threshold,
)
from tools.calculator import format_rational

logger = logging.getLogger(__name__)

ROUTES = {
    ObjectiveKind.REACH: ("reachability", lambda m, o: solve_reachability(m, o.targets)),
    ObjectiveKind.SAFETY: ("safety", lambda m, o: solve_safety(m, o.transitions)),
    ObjectiveKind.BUCHI: ("buchi", lambda m, o: solve_buchi(m, o.transitions)),
    ObjectiveKind.COBUCHI: ("cobuchi", lambda m, o: solve_cobuchi(m, o.transitions)),
    ObjectiveKind.LIMSUP_GEQ0: ("threshold", lambda m, o: solve_threshold(m, "limsup")),
    ObjectiveKind.LIMINF_GEQ0: ("threshold", lambda m, o: solve_threshold(m, "liminf")),
}


class ObjectiveRouter:
    def __init__(self, depth=None, branch_cap=None, frontier=None):
        self.depth = Config.DEFAULT_DEPTH if depth is None else depth
        self.branch_cap = Config.DEFAULT_BRANCH_CAP if branch_cap is None else branch_cap
        self.frontier = FrontierPolicy(frontier or Config.FRONTIER_POLICY)

    def route(self, mdp, obj, method="exact", strategy_class="md"):
        """
        Returns {"solver", "method", "truncate", "strategy_class"}; raises
        UnsupportedObjective for unknown methods.
        """
        needs_truncation = isinstance(mdp, CountableMdp)

        # ---------- 1. Brute force on request ----------
        if method == "enumerate":
            return self._build_route("enumerate", method, needs_truncation, strategy_class)
        if method != "exact":
            raise UnsupportedObjective(f"unknown method {method!r} (exact | enumerate)")

        # ---------- 2. Measures and single-set objectives ----------
        if isinstance(obj, ExpectedPayoff):
            return self._build_route(f"expected_{obj.which}", method, needs_truncation)
        if obj.kind in ROUTES:
            return self._build_route(ROUTES[obj.kind][0], method, needs_truncation)

        # ---------- 3. Everything else through the generic dispatcher ----------
        return self._build_route("objective", method, needs_truncation)

    def _build_route(self, solver, method, truncate_first, strategy_class=None):
        return {
            "solver": solver,
            "method": method,
            "truncate": truncate_first,
            "strategy_class": strategy_class,
        }

    def finite(self, mdp):
        if isinstance(mdp, CountableMdp):
            trunc = truncate(mdp, self.depth, self.frontier, self.branch_cap)
            if trunc.rerouted:
                logger.info("truncated %s at depth %d: %d edges into the frontier sink",
                            mdp.name, self.depth, trunc.rerouted)
            return trunc.mdp
        return mdp

    def run(self, mdp, obj, method="exact", strategy_class="md"):
        """Route and solve; returns the finite model, the route and the raw result."""
        plan = self.route(mdp, obj, method, strategy_class)
        finite = self.finite(mdp)
        solver = plan["solver"]
        logger.debug("routing %s on %s to %s", obj, finite.name, solver)
        if solver == "enumerate":
            result = enumerate_strategies(finite, obj, strategy_class)
        elif isinstance(obj, ExpectedPayoff):
            result = solve_expected(finite, obj.which)
        elif solver == "objective":
            result = solve_objective(finite, obj)
        else:
            result = ROUTES[obj.kind][1](finite, obj)
        return finite, plan, result

    def solve(self, mdp, obj, method="exact", strategy_class="md"):
        """
        ValueVector-style dict. Never raises on solver errors: they come
        back with "success": False.
        """
        try:
            finite, plan, result = self.run(mdp, obj, method, strategy_class)
        except MdpLabError as e:
            logger.warning("solve failed for %s: %s", obj, e)
            return {"success": False, "objective": str(obj), "error": f"{type(e).__name__}: {e}"}

        labels = [str(label) for label in finite.labels]
        out = {
            "success": True,
            "model": finite.name,
            "objective": str(obj),
            "route": plan,
        }
        if plan["solver"] == "enumerate":
            best = result.argmax[0]
            out["values"] = {labels[finite.initial]: format_rational(result.value)}
            out["evaluated"] = result.evaluated
            out["strategy"] = {
                labels[i]: [[format_rational(p), k, m] for p, k, m in dist]
                for (mode, i), dist in sorted(best.choice.items())
                if mode == best.initial_mode
            }
        else:
            out["values"] = {label: format_rational(v) for label, v in zip(labels, result.values)}
            out["strategy"] = {label: k for label, k in zip(labels, result.strategy) if k is not None}
        out["initial_value"] = out["values"][labels[finite.initial]]
        return out
