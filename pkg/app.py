"""
mdplab command line
-------------------
  eval        run the experiment table and write the report
  solve       exact values and an optimal strategy table
  transform   apply a model transformation, write FiniteMdp JSON
  synthesize  staged strategy synthesis with certificates
  simulate    Monte Carlo bracket (or exact lasso verdict) for a strategy
  figures     list, analyse or export the built-in model families
  report      re-render a report written by `eval`

Exit code 0 means success; for `eval` and `report` it means every asserted
cell passed.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from config.settings import Config
from core.bubble import FrontierPolicy, truncate
from core.errors import MdpLabError
from core.model import FiniteMdp
from core.serialization import dump_finite_mdp, finite_mdp_to_dict
from objectives.objective import ExpectedPayoff, MonotoneFamily, ObjectiveKind
from paperlab.explainer import ReportExplainer
from paperlab.experiments import CELL_KEYS, ExperimentConfig, ExperimentReport, run_table_experiments
from paperlab.figures import FIGURES
from paperlab.parser import SpecParser
from paperlab.router import ObjectiveRouter
from sim.cycles import cycle_analysis
from sim.estimate import estimate_attainment
from sim.lasso import lasso_attainment
from solve.solvers import solve_objective
from synth.bubble_plan import stage_progress_value, synth_positional_as_gf
from synth.good_sets import good_sets_liminf, good_sets_limsup
from synth.mixture import synth_mr_as_gf
from synth.safe_gadget import safe_gadget_transform, safe_states
from transforms.conditioned import condition_finite, transience_plus_safety
from transforms.expected import expected_to_threshold, state_rewards, thrifty_uniform_strategy
from transforms.ladder import ladder_binarize
from transforms.reward_placement import state_rewards_to_transition_rewards, transition_rewards_to_state_rewards
from transforms.step_counter import step_counter_encode

logger = logging.getLogger("mdplab")

TRANSFORMS = (
    "step-counter", "conditioned", "ladder", "state-to-transition", "transition-to-state",
    "expected-threshold", "transience-safety",
)
SYNTH_METHODS = ("bubble", "mr", "good-limsup", "good-liminf", "safe-gadget")


def _emit(payload, output=None):
    text = json.dumps(payload, indent=2, default=str)
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        print(f"✅ written to {output}")
    else:
        print(text)


def _parsed(args, model=None, objective=None, strategy=None):
    result = SpecParser().parse(model, objective, strategy)
    if not result["success"]:
        raise MdpLabError("; ".join(result["errors"]))
    return result


def _finite(mdp, depth, frontier=None):
    if isinstance(mdp, FiniteMdp):
        return mdp
    return truncate(mdp, depth, frontier or Config.FRONTIER_POLICY, Config.DEFAULT_BRANCH_CAP).mdp


def _countable(mdp):
    return mdp.to_countable() if isinstance(mdp, FiniteMdp) else mdp


def _family(obj):
    if isinstance(obj, ExpectedPayoff) or obj.family is None:
        return MonotoneFamily.from_rewards()
    return obj.family


# ----------------------------
# Subcommands
# ----------------------------

def cmd_eval(args):
    settings = dict(args.experiments)
    if args.cells:
        settings["cells"] = tuple(c.strip() for c in args.cells.split(",") if c.strip())
    for key in ("samples", "horizon"):
        if getattr(args, key) is not None:
            settings[key] = getattr(args, key)
    cfg = ExperimentConfig.quick(**settings) if args.quick else ExperimentConfig.from_dict(settings)

    print(f"🧪 running {len(cfg.cells or CELL_KEYS)} cells (seed {cfg.seed}, {cfg.threads} threads)")
    report = run_table_experiments(cfg)
    explainer = ReportExplainer()
    json_path, _ = explainer.write(report, cfg.artifact_dir)
    print(explainer.explain(report)["text"])
    print(f"📄 {json_path}")
    return 0 if report.passed else 1


def cmd_report(args):
    path = args.input or os.path.join(Config.ARTIFACT_DIR, "report.json")
    with open(path, "r", encoding="utf-8") as fh:
        report = ExperimentReport.from_dict(json.load(fh))
    if args.format == "json":
        _emit(report.to_dict())
    else:
        print(ReportExplainer().explain(report)["text"])
    return 0 if report.passed else 1


def cmd_solve(args):
    parsed = _parsed(args, model=args.model, objective=args.objective)
    router = ObjectiveRouter(depth=args.depth, frontier=args.frontier)
    result = router.solve(parsed["model"], parsed["objective"], args.method, args.strategy_class)
    _emit(result, args.output)
    return 0 if result["success"] else 1


def cmd_transform(args):
    parsed = _parsed(args, model=args.model, objective=args.objective)
    mdp, obj = parsed["model"], parsed["objective"]
    depth = args.depth or Config.DEFAULT_DEPTH

    if args.kind == "step-counter":
        out = step_counter_encode(_countable(mdp))
    elif args.kind == "conditioned":
        if obj is None:
            raise MdpLabError("the conditioned transform needs --objective")
        finite = _finite(mdp, depth)
        out = condition_finite(finite, solve_objective(finite, obj).values, obj).mdp
    elif args.kind == "ladder":
        out = ladder_binarize(_countable(mdp), args.branch_bound, obj if not isinstance(obj, ExpectedPayoff) else None)
    elif args.kind == "state-to-transition":
        finite = _finite(mdp, depth)
        rewards = dict(zip(finite.labels, state_rewards(finite)))
        source = finite.to_countable().derive(state_reward=rewards.__getitem__)
        out = state_rewards_to_transition_rewards(source, args.bound, args.mode)
    elif args.kind == "transition-to-state":
        out = transition_rewards_to_state_rewards(_countable(mdp), args.bound, args.mode)
    elif args.kind == "expected-threshold":
        finite = _finite(mdp, depth)
        reduction = expected_to_threshold(finite, thrifty_uniform_strategy(finite), which=args.mode)
        out = reduction.relabelled
    elif args.kind == "transience-safety":
        if obj is None or obj.kind is not ObjectiveKind.SAFETY:
            raise MdpLabError("transience-safety needs a safety --objective")
        out = transience_plus_safety(_countable(mdp), obj.transitions)
    else:
        raise MdpLabError(f"unknown transform {args.kind!r}")

    finite = _finite(out, depth)
    if args.output:
        dump_finite_mdp(finite, args.output)
        print(f"✅ {finite.name}: {len(finite)} states written to {args.output}")
    else:
        _emit(finite_mdp_to_dict(finite))
    return 0


def cmd_synthesize(args):
    parsed = _parsed(args, model=args.model, objective=args.objective or "gf")
    mdp, obj = parsed["model"], parsed["objective"]
    family = _family(obj)
    depth = args.depth or Config.DEFAULT_DEPTH
    if args.step_counter:
        mdp = step_counter_encode(_countable(mdp))
    countable = _countable(mdp)

    if args.method == "bubble":
        plan = synth_positional_as_gf(countable, family, args.stages, depth, branch_cap=Config.DEFAULT_BRANCH_CAP)
        payload = dict(plan.to_dict(), progress=str(stage_progress_value(plan)))
    elif args.method == "mr":
        plan = synth_mr_as_gf(countable, family, args.stages, depth, branch_cap=Config.DEFAULT_BRANCH_CAP)
        payload = dict(plan.to_dict(), progress=str(stage_progress_value(plan)))
    elif args.method == "good-limsup":
        payload = good_sets_limsup(countable, family, args.eps, depth, args.stages,
                                   branch_cap=Config.DEFAULT_BRANCH_CAP).to_dict()
    elif args.method == "good-liminf":
        payload = good_sets_liminf(countable, family, args.eps, depth, args.stages,
                                   branch_cap=Config.DEFAULT_BRANCH_CAP).to_dict()
    elif args.method == "safe-gadget":
        finite = _finite(mdp, depth, FrontierPolicy.WINNING)
        gadget = safe_gadget_transform(finite, family)
        payload = {
            "collapsed": sorted(str(finite.labels[i]) for i in safe_states(finite, family)),
            "model": finite_mdp_to_dict(gadget),
        }
    else:
        raise MdpLabError(f"unknown synthesis method {args.method!r}")
    _emit(payload, args.output)
    return 0


def cmd_simulate(args):
    parsed = _parsed(args, model=args.model, objective=args.objective, strategy=args.strategy)
    mdp = _countable(parsed["model"])
    obj, machine = parsed["objective"], parsed["strategy"]
    if args.lasso:
        verdict = lasso_attainment(mdp, machine, obj)
        _emit({"model": mdp.name, "strategy": machine.tag, "objective": str(obj), "verdict": verdict.value})
        return 0
    estimate = estimate_attainment(mdp, machine, obj, args.horizon, args.samples, args.delta,
                                   Config.SEED, Config.THREADS)
    _emit(dict(estimate.to_dict(), model=mdp.name, strategy=machine.tag, objective=str(obj)), args.output)
    return 0


def cmd_figures(args):
    if not args.name:
        for name in FIGURES:
            print(f"  {name}")
        return 0
    if args.analyze:
        _emit(cycle_analysis(args.name, args.analyze).to_dict())
        return 0
    spec = f"gen:{args.name}:{args.params}" if args.params else f"gen:{args.name}"
    mdp = _parsed(args, model=spec)["model"]
    depth = args.depth or Config.DEFAULT_DEPTH
    finite = _finite(mdp, depth)
    if args.output:
        dump_finite_mdp(finite, args.output)
        print(f"✅ {finite.name}: {len(finite)} states written to {args.output}")
    else:
        _emit(finite_mdp_to_dict(finite))
    return 0


# ----------------------------
# Argument parsing
# ----------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="mdplab", description="Strategy complexity lab for countable MDPs")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--threads", type=int)
    parser.add_argument("--budget-states", type=int)
    parser.add_argument("--budget-strategies", type=int)
    parser.add_argument("--artifact-dir")
    parser.add_argument("--config", help="JSON file whose keys mirror the flags")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="run the experiment table")
    p.add_argument("--cells", help=f"comma separated subset of {','.join(CELL_KEYS)}")
    p.add_argument("--quick", action="store_true", help="small sizes")
    p.add_argument("--samples", type=int)
    p.add_argument("--horizon", type=int)
    p.set_defaults(run=cmd_eval)

    p = sub.add_parser("report", help="re-render a written report")
    p.add_argument("--input")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(run=cmd_report)

    p = sub.add_parser("solve", help="exact values")
    p.add_argument("--model", required=True)
    p.add_argument("--objective", required=True)
    p.add_argument("--method", choices=("exact", "enumerate"), default="exact")
    p.add_argument("--class", dest="strategy_class", default="md")
    p.add_argument("--depth", type=int)
    p.add_argument("--frontier", choices=[f.value for f in FrontierPolicy])
    p.add_argument("--output")
    p.set_defaults(run=cmd_solve)

    p = sub.add_parser("transform", help="transform a model")
    p.add_argument("--model", required=True)
    p.add_argument("--kind", choices=TRANSFORMS, required=True)
    p.add_argument("--objective")
    p.add_argument("--depth", type=int)
    p.add_argument("--bound", default="1", help="reward bound m for the reward placement encodings")
    p.add_argument("--mode", choices=("limsup", "liminf"), default="limsup")
    p.add_argument("--branch-bound", type=int)
    p.add_argument("--output")
    p.set_defaults(run=cmd_transform)

    p = sub.add_parser("synthesize", help="staged synthesis with certificates")
    p.add_argument("--model", required=True)
    p.add_argument("--objective")
    p.add_argument("--method", choices=SYNTH_METHODS, default="bubble")
    p.add_argument("--depth", type=int)
    p.add_argument("--stages", type=int, default=3)
    p.add_argument("--eps", default="1/8")
    p.add_argument("--step-counter", action="store_true", help="step-counter encode the model first")
    p.add_argument("--output")
    p.set_defaults(run=cmd_synthesize)

    p = sub.add_parser("simulate", help="attainment of a strategy")
    p.add_argument("--model", required=True)
    p.add_argument("--strategy", required=True)
    p.add_argument("--objective", required=True)
    p.add_argument("--horizon", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--lasso", action="store_true", help="exact verdict of a deterministic strategy")
    p.add_argument("--output")
    p.set_defaults(run=cmd_simulate)

    p = sub.add_parser("figures", help="built-in model families")
    p.add_argument("name", nargs="?")
    p.add_argument("--params", help="k=v,k=v")
    p.add_argument("--analyze", help="closed-form attainment of a strategy spec, e.g. fixed:3")
    p.add_argument("--depth", type=int)
    p.add_argument("--output")
    p.set_defaults(run=cmd_figures)
    return parser


def load_settings(args):
    """Config file first, flags on top. Returns the experiment section of the file."""
    data = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    experiments = data.pop("experiments", {})
    data = {k.replace("-", "_"): v for k, v in data.items()}
    flags = {
        "seed": args.seed,
        "threads": args.threads,
        "budget_states": args.budget_states,
        "budget_strategies": args.budget_strategies,
        "artifact_dir": args.artifact_dir,
    }
    data.update({k: v for k, v in flags.items() if v is not None})
    Config.override(**data)
    return experiments


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.experiments = load_settings(args)
    except (OSError, ValueError, KeyError) as e:
        parser.error(f"bad configuration: {e}")

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else getattr(logging, str(Config.LOG_LEVEL).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.run(args)
    except (MdpLabError, OSError, ValueError) as e:
        logger.error("%s failed: %s", args.command, e)
        print(f"❌ {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
