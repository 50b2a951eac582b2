"""
Experiment orchestration
------------------------
Runs the acceptance cells (1-10) and the summary-table cells, each one a
desk-scale instance of a strategy-complexity claim. Every cell produces
checks, an evidence dict written to ARTIFACT_DIR as JSON, and a verdict from
the CellVerifier. A cell that raises becomes an ERROR cell; the rest of the
table still runs.
"""

from __future__ import annotations

import itertools
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import sympy as sp

from config.settings import Config
from core.bubble import FrontierPolicy, truncate
from core.errors import BudgetExceeded, NotOptimal
from core.model import FiniteEdge, FiniteMdp, FiniteState, Key, Lasso, StateKind
from objectives.objective import ExpectedPayoff, MonotoneFamily, Objective, StateSet, TransitionSet, Verdict
from objectives.reductions import relabel_with_family
from objectives.verdicts import lasso_verdict
from paperlab.corpus import corpus, enumerate_lassos, random_family
from paperlab.figures import cobuchi_infbranch, incomparable, ladder_limsup, randf_ladder
from paperlab.verifier import ERROR, PASS, CellVerifier, check, validate_report
from sim.cycles import StrategySpec, cycle_analysis
from sim.estimate import estimate_attainment, hoeffding_slack
from sim.lasso import ladder_divergence, lasso_attainment, reset_rewards
from sim.runner import run_strategy
from sim.strategy import LadderEscalating, PartitionTable, PositionalMachine, RandfEscalating
from solve.chains import TableStrategy, evaluate_chain
from solve.enumerate import enumerate_strategies, strategy_count
from solve.horizon import bounded_avoidance_horizon
from solve.solvers import solve_expected, solve_objective, solve_reachability, solve_safety, solve_threshold
from synth.bubble_plan import stage_progress_value, synth_positional_as_gf
from synth.good_sets import good_sets_liminf, good_sets_limsup
from synth.mixture import mixture_weights, synth_mr_as_gf
from synth.optimal import optimal_from_as
from synth.safe_gadget import GADGET, safe_gadget_transform
from tools.calculator import format_rational, two_pow_neg
from transforms.conditioned import condition_finite
from transforms.expected import expected_to_threshold, thrifty_uniform_strategy
from transforms.step_counter import step_counter_encode

logger = logging.getLogger(__name__)

ZERO = sp.Integer(0)
ONE = sp.Integer(1)

# (modes, explicit rungs) pairs of the Det(F) ladder table space
LADDER_SPACE = ((1, 0), (1, 1), (1, 2), (2, 0), (2, 1), (3, 0))


@dataclass
class ExperimentConfig:
    cells: tuple = None                 # keys to run; None runs everything
    seed: int = None
    threads: int = None
    artifact_dir: str = None

    ladder_horizon: int = 400
    randf_offset: int = 10
    samples: int = None
    horizon: int = None
    delta: float = None
    mr_tables: int = 6

    conditioned_models: int = 50
    conditioned_states: int = 12
    conditioned_strategies: int = 64

    lasso_models: int = 30
    lasso_length: int = 6
    lasso_limit: int = 60

    expected_models: int = 30
    expected_states: int = 8

    crosscheck_models: int = 12
    crosscheck_states: int = 5

    synth_stages: int = 5
    synth_depth: int = 64

    incomparable_depths: tuple = tuple(range(2, 21))

    avoidance_models: int = 30
    avoidance_states: int = 10

    optimal_models: int = 10
    optimal_states: int = 6
    good_set_stages: int = 3
    good_set_depth: int = 24
    good_set_eps: str = "1/8"

    def __post_init__(self):
        self.seed = Config.SEED if self.seed is None else self.seed
        self.threads = Config.THREADS if self.threads is None else self.threads
        self.artifact_dir = Config.ARTIFACT_DIR if self.artifact_dir is None else self.artifact_dir
        self.samples = Config.MC_SAMPLES if self.samples is None else self.samples
        self.horizon = Config.MC_HORIZON if self.horizon is None else self.horizon
        self.delta = Config.MC_DELTA if self.delta is None else self.delta

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise KeyError(f"unknown experiment settings: {', '.join(unknown)}")
        values = dict(data)
        for key in ("cells", "incomparable_depths"):
            if values.get(key) is not None:
                values[key] = tuple(values[key])
        return cls(**values)

    @classmethod
    def quick(cls, **overrides):
        """Small sizes for smoke runs and tests."""
        values = dict(
            ladder_horizon=120, samples=200, horizon=300, mr_tables=3,
            conditioned_models=6, conditioned_states=6, conditioned_strategies=16,
            lasso_models=6, lasso_length=5, lasso_limit=40,
            expected_models=5, expected_states=5,
            crosscheck_models=3, crosscheck_states=4,
            synth_stages=3, synth_depth=20, incomparable_depths=tuple(range(2, 9)),
            avoidance_models=6, avoidance_states=6,
            optimal_models=3, optimal_states=4, good_set_stages=2, good_set_depth=12,
        )
        values.update(overrides)
        return cls.from_dict(values)


@dataclass
class Cell:
    key: str
    section: str
    title: str
    citation: str
    asserted: bool = True
    status: str = ERROR
    checks: list = field(default_factory=list)
    issues: list = field(default_factory=list)
    evidence: dict = field(default_factory=dict)
    artifact: str = None
    seconds: float = 0.0

    def to_dict(self):
        return asdict(self)


@dataclass
class ExperimentReport:
    cells: tuple
    config: dict
    seconds: float
    validation: list = field(default_factory=list)

    @property
    def passed(self):
        asserted = [c for c in self.cells if c.asserted]
        return not self.validation and all(c.status == PASS for c in asserted)

    def cell(self, key):
        return next(c for c in self.cells if c.key == key)

    @classmethod
    def from_dict(cls, data):
        """Inverse of to_dict, for re-rendering a report written earlier."""
        cells = tuple(Cell(**entry) for entry in data.get("cells", []))
        return cls(cells, data.get("config", {}), data.get("seconds", 0.0), list(data.get("validation", [])))

    def to_dict(self):
        return {
            "passed": self.passed,
            "seconds": round(self.seconds, 3),
            "config": self.config,
            "validation": list(self.validation),
            "cells": [c.to_dict() for c in self.cells],
        }


# ----------------------------
# Shared models
# ----------------------------

def two_level_toy(fg=False):
    """
    Controlled c either loops (c#0) or moves to the coin r (c#1); r returns to
    c over r#0 or r#1 with probability 1/2 each. The GF family puts only r#0
    at level oo, so every stage needs fresh coin flips; the FG family also
    puts the loop c#0 at level oo.
    """
    half = sp.Rational(1, 2)
    finite = FiniteMdp.build(
        {
            "c": ("controlled", [("c", 0), ("r", 0)]),
            "r": ("random", [("c", half, 0), ("c", half, 0)]),
        },
        "c",
        name="two_level",
    )
    if fg:
        levels = {("c", 0): sp.oo, ("c", 1): 1, ("r", 0): sp.oo, ("r", 1): 0}
    else:
        levels = {("c", 0): 0, ("c", 1): 0, ("r", 0): sp.oo, ("r", 1): 0}
    family = MonotoneFamily.table(levels, name="fg_toy" if fg else "gf_toy")
    return step_counter_encode(finite.to_countable()), family


def _rational(value):
    return format_rational(value)


# ----------------------------
# 1. Ladder dichotomy
# ----------------------------

def _ladder_part(explicit):
    def part(state):
        if state.family == "s0":
            return "s0"
        (i,) = state.coords
        return f"r{i}" if i <= explicit else "r>"

    return part


def ladder_tables(modes, explicit):
    """Every deterministic table with `modes` modes over {s0, r_1..r_explicit, r_>explicit}."""
    classes = [f"r{i}" for i in range(1, explicit + 1)] + ["r>"]
    s_slots = [(m, "s0") for m in range(modes)]
    r_slots = [(m, name) for m in range(modes) for name in classes]
    part = _ladder_part(explicit)
    for s_picks in itertools.product(range(modes), repeat=len(s_slots)):
        for r_picks in itertools.product(itertools.product((0, 1), range(modes)), repeat=len(r_slots)):
            rules = {slot: [(1, 0, m2)] for slot, m2 in zip(s_slots, s_picks)}
            rules.update({slot: [(1, e, m2)] for slot, (e, m2) in zip(r_slots, r_picks)})
            yield PartitionTable(part, rules, range(modes))


def cell_ladder(cfg):
    obj = Objective.limsup_geq0()
    closed = cycle_analysis("ladder_limsup", "escalating:0")
    mdp = ladder_limsup()
    run = run_strategy(mdp, LadderEscalating(), seed=cfg.seed, horizon=cfg.ladder_horizon)
    resets = reset_rewards(run)
    expected = [-sp.Rational(1, n) for n in range(1, len(resets) + 1)]

    tried, violated, counts = 0, 0, {}
    for modes, explicit in LADDER_SPACE:
        divergence = ladder_divergence(explicit, range(modes))
        n = 0
        for table in ladder_tables(modes, explicit):
            verdict = lasso_attainment(mdp, table, obj, divergence=divergence)
            n += 1
            violated += verdict is Verdict.VIOL
        counts[f"k={modes},explicit={explicit}"] = n
        tried += n

    checks = [
        check("escalating limsup is 0", closed.detail.get("limsup") == 0 and closed.attainment == ONE,
              f"limsup {closed.detail.get('limsup')}"),
        check("escalating resets climb -1, -1/2, -1/3, ...", len(resets) >= 3 and resets == expected,
              f"{len(resets)} resets in {cfg.ladder_horizon} steps"),
        check("every finite table violates limsup >= 0", tried > 0 and violated == tried,
              f"{violated} of {tried} tables"),
    ]
    evidence = {
        "escalating": closed.to_dict(),
        "first_resets": [_rational(r) for r in resets[:8]],
        "tables": counts,
        "violated": violated,
    }
    return checks, evidence


# ----------------------------
# 2. Rand(F) insufficiency
# ----------------------------

def _mr_down_tables(cfg):
    rng = np.random.default_rng([cfg.seed, 2])
    tables = [
        [sp.Rational(1, 2)] * 8,
        [sp.Rational(1, 4)] * 8,
        [sp.Rational(1, 8)] * 8,
    ]
    while len(tables) < cfg.mr_tables:
        tables.append([sp.Rational(int(rng.integers(0, 5)), 4) for _ in range(8)])
    return tables[: cfg.mr_tables]


def cell_randf(cfg):
    obj = Objective.limsup_geq0()
    c = cfg.randf_offset
    claim = ONE - two_pow_neg(c)
    slack = hoeffding_slack(cfg.samples, cfg.delta)
    closed = cycle_analysis("randf_ladder", f"escalating:{c}")

    def tail_risk(run):
        mode = run.modes[-1] if run.modes else 1
        return two_pow_neg(mode + c - 1)

    estimate = estimate_attainment(
        randf_ladder(), RandfEscalating(c), obj, cfg.horizon, cfg.samples, cfg.delta,
        cfg.seed, 1, tail_risk=tail_risk,
    )

    memoryless = []
    for i in range(1, 9):
        memoryless.append(cycle_analysis("randf_ladder", f"fixed:{i}"))
    for weights in _mr_down_tables(cfg):
        memoryless.append(cycle_analysis("randf_ladder", StrategySpec("table", weights=tuple(weights))))
    worst = max(r.upper for r in memoryless)

    checks = [
        check("escalating attains 1 - 2^-c", closed.lower >= claim,
              f"closed form >= {sp.N(closed.lower, 12)}"),
        check("sampled bracket supports the claim", estimate.lower >= float(claim) - 2 * slack,
              f"[{estimate.lower:.4f}, {estimate.upper:.4f}]"),
        check("sampled bracket is consistent with the closed form", estimate.upper >= float(closed.lower),
              f"upper {estimate.upper:.4f}"),
        check("memoryless down tables attain <= 0.05", worst <= sp.Rational(5, 100), f"best {worst}"),
        check("memoryless tables lose mass every pass", all(r.per_cycle_loss > 0 for r in memoryless)),
    ]
    evidence = {
        "escalating": closed.to_dict(),
        "estimate": estimate.to_dict(),
        "slack": slack,
        "memoryless": [r.to_dict() for r in memoryless],
    }
    return checks, evidence


# ----------------------------
# 3. co-Büchi on an infinitely branching hub
# ----------------------------

BRANCH_TABLES = ("1/2,1/4,1/4", "1/3,1/3,1/3", "1/8,1/8,1/8,1/8,1/8,1/8,1/8,1/8")


def cell_cobuchi(cfg):
    growing = cycle_analysis("cobuchi_infbranch", "sequence:k")
    fixed = [cycle_analysis("cobuchi_infbranch", f"fixed:{i}") for i in range(1, 9)]
    fixed += [cycle_analysis("cobuchi_infbranch", f"table:{w}") for w in BRANCH_TABLES]
    vanish = all((1.0 - float(r.per_cycle_loss)) ** r.cycles_to_vanish < 1e-6 for r in fixed)
    checks = [
        check("i_k = k attains 1", growing.attainment == ONE, growing.detail.get("series")),
        check("every fixed table attains 0", all(r.attainment == ZERO for r in fixed)),
        check("per-cycle fire probability is positive", all(r.per_cycle_loss > 0 for r in fixed)),
        check("(1 - loss)^n < 1e-6 at the reported n", vanish),
    ]
    evidence = {"sequence": growing.to_dict(), "tables": [r.to_dict() for r in fixed],
                "model": cobuchi_infbranch().name}
    return checks, evidence


# ----------------------------
# 4. Conditioned MDP scaling
# ----------------------------

def _positional(finite, limit):
    controlled = [i for i in range(len(finite)) if finite.kind(i) is StateKind.CONTROLLED]
    picks = itertools.product(*(range(len(finite.edges(i))) for i in controlled))
    for choice in itertools.islice(picks, limit):
        yield dict(zip(controlled, choice))


def absorbing(finite, i):
    """Copy where state i only loops on itself; Reach is decided there."""
    st = finite.states[i]
    states = list(finite.states)
    states[i] = FiniteState(st.label, StateKind.CONTROLLED, (FiniteEdge(i, ZERO),), st.tail)
    return FiniteMdp(tuple(states), finite.initial, finite.name)


def cell_conditioned(cfg):
    checked, skipped, capped, mismatches = 0, 0, 0, []
    for raw in corpus(cfg.conditioned_models, cfg.seed, max_states=cfg.conditioned_states):
        finite = absorbing(raw, len(raw) - 1)
        target = finite.labels[-1]
        obj = Objective.reach(StateSet.of({target}, name="target"))
        values = solve_reachability(finite, obj.targets).values
        v0 = values[finite.initial]
        if v0 == 0:
            skipped += 1
            continue
        star = condition_finite(finite, values, obj).mdp
        if strategy_count(finite) > cfg.conditioned_strategies:
            capped += 1
        for choice in _positional(finite, cfg.conditioned_strategies):
            lifted = {
                j: choice[finite.index[st.label]]
                for j, st in enumerate(star.states)
                if st.label in finite.index and star.kind(j) is StateKind.CONTROLLED
            }
            in_m = evaluate_chain(finite, TableStrategy.positional(choice), obj)
            in_star = evaluate_chain(star, TableStrategy.positional(lifted), obj)
            checked += 1
            if v0 * in_star != in_m:
                mismatches.append({"model": finite.name, "choice": str(choice),
                                   "M": _rational(in_m), "M*": _rational(in_star), "v0": _rational(v0)})
    checks = [
        check("some strategies were compared", checked > 0, f"{checked} strategies"),
        check("val(s0) * P_M*(Reach) = P_M(Reach)", not mismatches, f"{len(mismatches)} mismatches"),
    ]
    evidence = {"compared": checked, "zero_value_models": skipped, "capped_models": capped,
                "mismatches": mismatches[:10]}
    return checks, evidence


# ----------------------------
# 5. Reduction equivalences on lassos
# ----------------------------

def cell_reductions(cfg):
    limsup, liminf = Objective.limsup_geq0(), Objective.liminf_geq0()
    gf_rewards = Objective.gf_family(MonotoneFamily.from_rewards())
    fg_rewards = Objective.fg_family(MonotoneFamily.from_rewards())
    total, disagreements = 0, []
    for n, finite in enumerate(corpus(cfg.lasso_models, cfg.seed)):
        family = random_family(finite, cfg.seed, n)
        relabelled = relabel_with_family(finite, family)
        gf, fg = Objective.gf_family(family), Objective.fg_family(family)

        def moved(transitions):
            return tuple(relabelled.transition(finite.state_index(t.source), t.index) for t in transitions)

        for lasso in enumerate_lassos(finite, cfg.lasso_length, cfg.lasso_limit):
            total += 1
            twin = Lasso(moved(lasso.stem), moved(lasso.cycle))
            pairs = (
                ("limsup vs GF(rewards)", lasso_verdict(lasso, limsup), lasso_verdict(lasso, gf_rewards)),
                ("liminf vs FG(rewards)", lasso_verdict(lasso, liminf), lasso_verdict(lasso, fg_rewards)),
                ("GF(family) vs limsup(relabelled)", lasso_verdict(lasso, gf), lasso_verdict(twin, limsup)),
                ("FG(family) vs liminf(relabelled)", lasso_verdict(lasso, fg), lasso_verdict(twin, liminf)),
            )
            for name, left, right in pairs:
                if left is not right:
                    disagreements.append({"model": finite.name, "pair": name, "left": left.value,
                                          "right": right.value})
    checks = [
        check("lassos were enumerated", total > 0, f"{total} lassos"),
        check("verdicts agree on every lasso", not disagreements, f"{len(disagreements)} disagreements"),
    ]
    return checks, {"lassos": total, "disagreements": disagreements[:10]}


# ----------------------------
# 6. Expected payoff -> threshold
# ----------------------------

def _reduction(finite):
    values = solve_expected(finite, "limsup").values
    try:
        return expected_to_threshold(finite, thrifty_uniform_strategy(finite, values), values), "thrifty"
    except NotOptimal as e:
        logger.info("uniform thrifty strategy rejected on %s (%s); using the solver's strategy", finite.name, e)
        solution = solve_expected(finite, "limsup")
        return expected_to_threshold(finite, solution.strategy, values), "solver"


def cell_expected(cfg):
    measure = ExpectedPayoff("limsup")
    threshold = Objective.limsup_geq0()
    checked, failures, sources = 0, [], {}
    for finite in corpus(cfg.expected_models, cfg.seed + 6, max_states=cfg.expected_states, state_rewards=True):
        reduction, source = _reduction(finite)
        sources[source] = sources.get(source, 0) + 1
        mr, mu = reduction.restricted, reduction.relabelled
        optimum = reduction.values[mr.initial]
        best = enumerate_strategies(mu, threshold, "md")
        full = enumerate_strategies(mr, measure, "md")
        if full.value != optimum:
            failures.append({"model": finite.name, "issue": f"enumeration {full.value} vs solver {optimum}"})
        for strategy in best.argmax:
            checked += 1
            attained = evaluate_chain(mr, strategy, measure)
            if attained != optimum:
                failures.append({"model": finite.name, "issue": f"threshold-optimal attains {attained} < {optimum}"})
    checks = [
        check("threshold-optimal strategies were checked", checked > 0, f"{checked} strategies"),
        check("each is E(limsup)-optimal in the restriction", not failures, f"{len(failures)} failures"),
    ]
    return checks, {"strategies": checked, "witness": sources, "failures": failures[:10]}


# ----------------------------
# 7. Solver cross-checks
# ----------------------------

def _crosscheck_objectives(finite, rng):
    idents = [t.ident for _, _, t in finite.all_transitions()]

    def subset(name):
        chosen = [x for x in idents if rng.random() < 0.5]
        return TransitionSet.of(chosen, name=name)

    return (
        Objective.reach(StateSet.of({finite.labels[-1]}, name="last")),
        Objective.safety(subset("S")),
        Objective.buchi(subset("B")),
        Objective.cobuchi(subset("C")),
        Objective.limsup_geq0(),
        Objective.liminf_geq0(),
        ExpectedPayoff("limsup"),
        ExpectedPayoff("liminf"),
    )


def cell_crosscheck(cfg):
    compared, skipped, mismatches = 0, 0, []
    for n, finite in enumerate(corpus(cfg.crosscheck_models, cfg.seed + 7, max_states=cfg.crosscheck_states)):
        rng = np.random.default_rng([cfg.seed, 7, n])
        for obj in _crosscheck_objectives(finite, rng):
            try:
                brute = enumerate_strategies(finite, obj, "md", threads=1)
            except BudgetExceeded:
                skipped += 1
                continue
            exact = solve_objective(finite, obj).values[finite.initial]
            compared += 1
            if brute.value != exact:
                mismatches.append({"model": finite.name, "objective": str(obj),
                                   "enumerated": _rational(brute.value), "solver": _rational(exact)})
    checks = [
        check("instances compared", compared > 0, f"{compared} compared"),
        check("enumeration equals the exact solvers", not mismatches, f"{len(mismatches)} mismatches"),
        check("every instance fit the strategy budget", None if skipped else True, f"{skipped} over budget"),
    ]
    return checks, {"compared": compared, "over_budget": skipped, "mismatches": mismatches[:10]}


# ----------------------------
# 8. Synthesis certificates
# ----------------------------

def cell_synthesis(cfg):
    mdp, family = two_level_toy()
    k = cfg.synth_stages
    plan = synth_positional_as_gf(mdp, family, k, cfg.synth_depth)
    progress = stage_progress_value(plan)
    product = sp.prod(plan.certificates)
    mixed = synth_mr_as_gf(mdp, family, k, cfg.synth_depth)
    sums_ok = all(
        s.mixing + sum(mixture_weights(s.mixing, k)) == ONE
        and all(sum(p for p, _ in dist) == ONE for dist in s.fixed.values())
        for s in mixed.stages
    )
    checks = [
        check("MD stage certificates >= 1/2", all(c >= sp.Rational(1, 2) for c in plan.certificates),
              [str(c) for c in plan.certificates]),
        check("ordered stage progress >= product of certificates", progress >= product,
              f"{progress} vs {product}"),
        check("ordered stage progress >= 2^-K", progress >= two_pow_neg(k), f"K = {k}"),
        check("MR stage certificates >= 1/4", all(c >= sp.Rational(1, 4) for c in mixed.certificates),
              [str(c) for c in mixed.certificates]),
        check("mixture weights sum to exactly 1", sums_ok),
    ]
    evidence = {"md": plan.to_dict(), "progress": _rational(progress), "mr": mixed.to_dict()}
    return checks, evidence


# ----------------------------
# 9. Incomparability
# ----------------------------

def _exit_at(i):
    hub = Key("S", (i,))
    return PositionalMachine(lambda state, branching: 1 if state == hub else 0)


def cell_incomparable(cfg):
    mdp = incomparable()
    exits = [cycle_analysis("incomparable", f"fixed:{i}").attainment for i in range(1, 9)]
    optima = []
    for d in cfg.incomparable_depths:
        finite = truncate(mdp, d, FrontierPolicy.LOSING).mdp
        optima.append(solve_expected(finite, "limsup").values[finite.initial])
    winning = truncate(mdp, max(cfg.incomparable_depths), FrontierPolicy.WINNING).mdp
    threshold = solve_threshold(winning, "limsup").values[winning.initial]
    sat = [lasso_attainment(mdp, _exit_at(i), Objective.limsup_geq0()) for i in range(1, 6)]
    checks = [
        check("exit at i attains 1 - 2^-i", exits == [ONE - two_pow_neg(i) for i in range(1, 9)]),
        check("truncation optimum is non-decreasing in depth", all(a <= b for a, b in zip(optima, optima[1:]))),
        check("truncation optimum is 1 - 2^-d", optima == [ONE - two_pow_neg(d) for d in cfg.incomparable_depths]),
        check("no single depth reaches 1", all(v < ONE for v in optima)),
        check("threshold value is 1", threshold == ONE),
        check("every exit strategy satisfies limsup >= 0", all(v is Verdict.SAT for v in sat)),
    ]
    evidence = {
        "exits": [_rational(v) for v in exits],
        "optima": {str(d): _rational(v) for d, v in zip(cfg.incomparable_depths, optima)},
        "threshold": _rational(threshold),
    }
    return checks, evidence


# ----------------------------
# 10. Bounded avoidance
# ----------------------------

def cell_avoidance(cfg):
    checked, failures, avoidable = 0, [], 0
    for n, finite in enumerate(corpus(cfg.avoidance_models, cfg.seed + 10, max_states=cfg.avoidance_states)):
        rng = np.random.default_rng([cfg.seed, 10, n])
        avoid = frozenset(
            (i, k) for i in range(len(finite)) for k in range(len(finite.edges(i))) if rng.random() < 0.3
        )
        allowed = frozenset(
            (i, k) for i in range(len(finite)) for k in range(len(finite.edges(i))) if (i, k) not in avoid
        )
        horizon = bounded_avoidance_horizon(finite, avoid)
        safe = solve_safety(finite, allowed).values[finite.initial]
        checked += 1
        if horizon is None:
            avoidable += 1
            if safe != ONE:
                failures.append({"model": finite.name, "issue": f"no horizon but safety value {safe}"})
        elif not (0 <= horizon <= len(finite)) or safe == ONE:
            failures.append({"model": finite.name, "issue": f"horizon {horizon}, safety value {safe}"})
    checks = [
        check("instances checked", checked > 0, f"{checked} instances"),
        check("unavoidable sets are hit within |S| steps", not failures, f"{len(failures)} failures"),
    ]
    return checks, {"instances": checked, "avoidable": avoidable, "failures": failures[:10]}


# ----------------------------
# Summary-table cells with their own runs
# ----------------------------

def cell_liminf_md(cfg):
    obj = Objective.liminf_geq0()
    starts, failures = 0, []
    for finite in corpus(cfg.optimal_models, cfg.seed + 11, max_states=cfg.optimal_states):
        result = optimal_from_as(finite, obj, strict=False)
        for i, value in result.attained.items():
            starts += 1
            if value != result.values[i]:
                failures.append({"model": finite.name, "state": str(finite.labels[i])})
        failures.extend({"model": finite.name, "state": str(finite.labels[i]), "issue": "no optimal"}
                        for i in result.no_optimal)
    checks = [
        check("start states with positive value", starts > 0, f"{starts}"),
        check("stitched MD strategy is optimal from each", not failures, f"{len(failures)} failures"),
    ]
    return checks, {"starts": starts, "failures": failures[:10]}


def cell_good_limsup(cfg):
    mdp, family = two_level_toy()
    result = good_sets_limsup(mdp, family, cfg.good_set_eps, cfg.good_set_depth, cfg.good_set_stages)
    checks = [
        check("certified value within 2 eps of the reference", result.meets_claim,
              f"{result.certified} vs {result.value}"),
        check("Good_i only holds A_i transitions", not result.inclusion_violations(family)),
    ]
    return checks, result.to_dict()


def cell_good_liminf(cfg):
    mdp, family = two_level_toy(fg=True)
    result = good_sets_liminf(mdp, family, cfg.good_set_eps, cfg.good_set_depth, cfg.good_set_stages)
    checks = [
        check("safety value within 3 eps of the FG value", result.meets_claim,
              f"{result.certified} vs {result.value}"),
        check("Good_i only holds A_i transitions", not result.inclusion_violations(family)),
    ]
    return checks, result.to_dict()


def cell_safe_gadget(cfg):
    mdp, family = two_level_toy(fg=True)
    finite = truncate(mdp, cfg.good_set_depth, FrontierPolicy.WINNING).mdp
    obj = Objective.fg_family(family)
    gadget = safe_gadget_transform(finite, family)
    before = solve_objective(finite, obj).values[finite.initial]
    after = solve_objective(gadget, obj).values[gadget.initial]
    checks = [
        check("a safe region was collapsed", GADGET in gadget.index),
        check("FG value is preserved", before == after, f"{before} vs {after}"),
    ]
    return checks, {"states_before": len(finite), "states_after": len(gadget),
                    "value": _rational(before)}


def _refers(*keys):
    def judge(cfg, done):
        statuses = {k: done[k].status for k in keys}
        checks = [check(f"cell {k} passed", s == PASS, s) for k, s in statuses.items()]
        return checks, {"from": {k: done[k].artifact for k in keys}}

    judge.refers = keys
    return judge


# ----------------------------
# Registry
# ----------------------------

# key -> (section, title, citation, runner, asserted)
ACCEPTANCE = {
    "1": ("acceptance", "ladder dichotomy",
          "limsup_PP(>=0): infinite memory attains 1, every Det(F) strategy attains 0 on the reset ladder",
          cell_ladder, True),
    "2": ("acceptance", "Rand(F) insufficiency",
          "limsup_PP(>=0): a step-counter strategy is near-optimal, randomized memoryless ones are not",
          cell_randf, True),
    "3": ("acceptance", "co-Büchi infinite branching",
          "FG / liminf_PP(>=0) with infinite branching: growing branch indices win, fixed finite tables lose",
          cell_cobuchi, True),
    "4": ("acceptance", "conditioned MDP scaling",
          "conditioned MDP: attainment in M* times val(s0) is attainment in M",
          cell_conditioned, True),
    "5": ("acceptance", "reduction equivalences",
          "limsup/liminf_PP(>=0) and GF/FG families reduce to each other",
          cell_reductions, True),
    "6": ("acceptance", "expected -> threshold",
          "threshold-optimal strategies of the relabelled support model are E(limsup)-optimal",
          cell_expected, True),
    "7": ("acceptance", "solver cross-checks",
          "MD strategies are optimal for these objectives on finite MDPs",
          cell_crosscheck, True),
    "8": ("acceptance", "synthesis certificates",
          "⋂GF A_i: almost-sure MD (staged bubbles) and MR (mixtures) strategies on universally transient models",
          cell_synthesis, True),
    "9": ("acceptance", "incomparability",
          "E(limsup): no optimal strategy exists while the threshold objective is won by every strategy",
          cell_incomparable, True),
    "10": ("acceptance", "bounded avoidance",
           "finitely branching: an unavoidable transition set is hit with positive probability within |S| steps",
           cell_avoidance, True),
}

TABLE = {
    "gf-detf": ("GF / limsup", "ε-optimal: Det(F) insufficient",
                "limsup_PP(>=0): ε-optimal strategies need infinite memory", _refers("1"), True),
    "gf-randf": ("GF / limsup", "ε-optimal: Rand(F) insufficient",
                 "limsup_PP(>=0): randomization does not replace the step counter", _refers("2"), True),
    "gf-as-md": ("GF / limsup", "almost-sure: MD / MR on transient models",
                 "⋂GF A_i almost-sure strategies on universally transient models", _refers("8"), True),
    "gf-good-sets": ("GF / limsup", "Good-set Büchi reduction",
                     "⋂GF A_i reduces to Transience ∧ Büchi(Good) at the cost of 2ε",
                     lambda cfg, done: cell_good_limsup(cfg), False),
    "fg-fb-optimal": ("FG / liminf", "optimal, finitely branching: MD",
                      "liminf_PP(>=0): optimal strategies are MD on finitely branching models",
                      lambda cfg, done: cell_liminf_md(cfg), True),
    "fg-ib": ("FG / liminf", "infinitely branching: infinite memory",
              "liminf_PP(>=0) with infinite branching: finite memory cannot be ε-optimal", _refers("3"), True),
    "fg-good-sets": ("FG / liminf", "Good-set safety reduction",
                     "⋂FG A_i reduces to Safety(Good) at the cost of 3ε",
                     lambda cfg, done: cell_good_liminf(cfg), False),
    "fg-safe-gadget": ("FG / liminf", "safe-region gadget",
                       "collapsing the surely safe region keeps the FG value",
                       lambda cfg, done: cell_safe_gadget(cfg), False),
    "e-limsup": ("expected payoff", "E(limsup): incomparable optimum",
                 "E(limsup) may have no optimal strategy", _refers("9"), True),
    "e-threshold": ("expected payoff", "E(limsup) via thresholds",
                    "optimal E(limsup) strategies come from threshold-optimal ones", _refers("6"), True),
    "e-liminf-ib": ("expected payoff", "E(liminf), infinitely branching: infinite memory",
                    "E(liminf) with infinite branching requires infinite memory", _refers("3"), True),
}

CELL_KEYS = tuple(ACCEPTANCE) + tuple(TABLE)


def _write_artifact(directory, key, payload):
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, f"cell-{key}.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, default=str)
    return path


def _run_cell(cfg, key, spec, runner, verifier):
    section, title, citation, _, asserted = spec
    cell = Cell(key, section, title, citation, asserted)
    started = time.perf_counter()
    try:
        checks, evidence = runner()
        verdict = verifier.verify(checks)
        cell.checks, cell.evidence = checks, evidence
    except Exception as e:                      # a cell never takes the table down
        logger.exception("cell %s failed", key)
        verdict = verifier.verify([], error=f"{type(e).__name__}: {e}")
        cell.evidence = {"error": f"{type(e).__name__}: {e}"}
    cell.status, cell.issues = verdict["status"], verdict["issues"]
    cell.seconds = round(time.perf_counter() - started, 3)
    cell.artifact = _write_artifact(cfg.artifact_dir, key, cell.to_dict())
    logger.info("cell %s (%s): %s in %.2fs", key, title, cell.status, cell.seconds)
    return cell


def run_table_experiments(config=None):
    """
    Runs the selected cells (all by default): acceptance cells in parallel,
    then the table cells, which may read the acceptance results. Cell order
    in the report is the registry order whatever the thread count.
    """
    cfg = config if isinstance(config, ExperimentConfig) else ExperimentConfig.from_dict(config or {})
    wanted = CELL_KEYS if cfg.cells is None else tuple(cfg.cells)
    unknown = [k for k in wanted if k not in CELL_KEYS]
    if unknown:
        raise KeyError(f"unknown cells: {', '.join(unknown)}")
    verifier = CellVerifier()
    started = time.perf_counter()

    # table cells that refer to acceptance cells pull them in
    needed = set(wanted)
    for key in wanted:
        if key in TABLE:
            needed.update(getattr(TABLE[key][3], "refers", ()))
    first = [k for k in ACCEPTANCE if k in needed]

    def acceptance(key):
        spec = ACCEPTANCE[key]
        return _run_cell(cfg, key, spec, lambda: spec[3](cfg), verifier)

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            done = dict(zip(first, pool.map(acceptance, first)))
    else:
        done = {key: acceptance(key) for key in first}

    for key in TABLE:
        if key in wanted:
            spec = TABLE[key]
            done[key] = _run_cell(cfg, key, spec, lambda spec=spec: spec[3](cfg, done), verifier)

    cells = tuple(done[k] for k in CELL_KEYS if k in wanted)
    report = ExperimentReport(cells, {k: v for k, v in asdict(cfg).items()}, time.perf_counter() - started)
    report.validation = validate_report(report)
    for issue in report.validation:
        logger.warning("report self-check: %s", issue)
    return report
