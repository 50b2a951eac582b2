from __future__ import annotations

import json
import os

import pytest
import sympy as sp

import app
from conftest import build_gamble
from core.errors import BadParams, UnsupportedObjective, UnsupportedSpec
from core.model import CountableMdp, validate
from core.serialization import dump_finite_mdp, finite_mdp_to_dict
from objectives.objective import ExpectedPayoff, Objective, ObjectiveKind
from paperlab.corpus import enumerate_lassos, random_finite_mdp
from paperlab.experiments import Cell, ExperimentConfig, ExperimentReport, run_table_experiments
from paperlab.explainer import ReportExplainer
from paperlab.figures import FIGURES, generate, ladder_limsup
from paperlab.parser import SpecParser, parse_params, parse_value
from paperlab.router import ObjectiveRouter
from paperlab.verifier import ERROR, FAIL, PARTIAL, PASS, CellVerifier, check, validate_report
from sim.strategy import LadderEscalating
from transforms.step_counter import Stamped

pytestmark = pytest.mark.exact


@pytest.fixture
def gamble_file(tmp_path):
    path = tmp_path / "gamble.json"
    dump_finite_mdp(build_gamble(), path)
    return str(path)


def _report(tmp_path, *statuses):
    cells = []
    for n, status in enumerate(statuses):
        artifact = tmp_path / f"cell-{n}.json"
        artifact.write_text("{}", encoding="utf-8")
        cells.append(Cell(str(n), "section", f"claim {n}", "a cited claim", status=status,
                          checks=[check("ok", status == PASS)], artifact=str(artifact)))
    return ExperimentReport(tuple(cells), {}, 0.5)


# ---------- figures ----------

def test_generate_builds_each_family():
    for name in FIGURES:
        if name != "buchi_relabel":
            assert isinstance(generate(name), CountableMdp)


def test_generate_with_step_counter():
    mdp = generate("ladder_limsup", {"step_counter": True})
    assert isinstance(mdp.initial, Stamped)


@pytest.mark.parametrize(
    ("figure", "params"),
    [("moebius", {}), ("ladder_limsup", {"step_counter": "yes"}), ("ladder_limsup", {"depth": 3}),
     ("buchi_relabel", {})],
)
def test_generate_rejects_bad_params(figure, params):
    with pytest.raises(BadParams):
        generate(figure, params)


def test_buchi_relabel_rewards(gamble):
    mdp = generate("buchi_relabel", {"model": gamble, "accepting": {"win"}})
    assert mdp.transition("win", 0).reward == 1
    assert mdp.transition("s", 1).reward == -1


# ---------- parser ----------

def test_parse_values():
    assert parse_value("3/4") == sp.Rational(3, 4)
    assert parse_value("2") == 2
    assert parse_value("True") is True
    assert parse_value("oo") == sp.oo
    assert parse_value("a|b") == ["a", "b"]
    assert parse_params("offset=2, down=1/2|1") == {"offset": 2, "down": [sp.Rational(1, 2), 1]}
    with pytest.raises(BadParams):
        parse_params("offset")


def test_parser_reads_all_three_parts(gamble_file):
    result = SpecParser().parse(model=gamble_file, objective="reach:win", strategy="builtin:positional:s=1")
    assert result["success"]
    assert result["model"].labels == ["s", "coin", "safe", "win", "lose"]
    assert result["objective"].targets.holds("win")
    assert result["strategy"].choose(0, "s", None)[0].edge == 1


def test_parser_short_objectives():
    parser = SpecParser()
    assert parser.objective("liminf").kind is ObjectiveKind.LIMINF_GEQ0
    assert parser.objective("expected:limsup") == ExpectedPayoff("limsup")
    safety = parser.objective("safety:lose#0")
    assert safety.kind is ObjectiveKind.SAFETY
    assert build_gamble().transition(4, 0) in safety.transitions
    assert build_gamble().transition(3, 0) not in safety.transitions


def test_parser_builtin_strategies():
    parser = SpecParser()
    machine = parser.strategy("builtin:ladder_escalating:offset=2")
    assert isinstance(machine, LadderEscalating) and machine.offset == 2
    with pytest.raises(UnsupportedSpec):
        parser.strategy("builtin:teleport")


def test_parser_collects_errors():
    result = SpecParser().parse(model="gen:moebius", objective="mean_payoff")
    assert not result["success"]
    assert [e.split(":")[0] for e in result["errors"]] == ["model", "objective"]


def test_parser_corpus_models():
    model = SpecParser().model("gen:corpus:seed=4,index=1,max_states=5")
    assert finite_mdp_to_dict(model) == finite_mdp_to_dict(random_finite_mdp(4, 1, max_states=5))


# ---------- router ----------

def test_router_routes(gamble):
    router = ObjectiveRouter()
    assert router.route(gamble, ExpectedPayoff("limsup"))["solver"] == "expected_limsup"
    assert router.route(gamble, Objective.reach({"win"}))["solver"] == "reachability"
    assert router.route(gamble, Objective.transience())["solver"] == "objective"
    assert router.route(ladder_limsup(), Objective.limsup_geq0())["truncate"]
    with pytest.raises(UnsupportedObjective):
        router.route(gamble, Objective.limsup_geq0(), method="guess")


def test_router_solves(gamble):
    out = ObjectiveRouter().solve(gamble, Objective.reach({"win"}))
    assert out["success"]
    assert out["initial_value"] == "1/2"
    assert out["strategy"]["s"] == 1


def test_router_enumerates(gamble):
    out = ObjectiveRouter().solve(gamble, Objective.limsup_geq0(), method="enumerate")
    assert out["initial_value"] == "1/2"
    assert out["evaluated"] == 2


def test_router_reports_failures(gamble):
    out = ObjectiveRouter().solve(gamble, Objective.limsup_geq0(), method="guess")
    assert out["success"] is False
    assert out["error"].startswith("UnsupportedObjective")


def test_router_truncates_countable_models():
    out = ObjectiveRouter(depth=4, frontier="winning").solve(ladder_limsup(), Objective.limsup_geq0())
    assert out["initial_value"] == "1"


# ---------- corpus ----------

def test_corpus_is_reproducible():
    first = random_finite_mdp(7, 3, max_states=6)
    again = random_finite_mdp(7, 3, max_states=6)
    assert finite_mdp_to_dict(first) == finite_mdp_to_dict(again)
    assert validate(first) == []
    assert 2 <= len(first) <= 6


def test_lasso_enumeration(gamble):
    lassos = list(enumerate_lassos(gamble, max_len=4))
    assert lassos
    assert all(lasso.cycle for lasso in lassos)
    assert len(list(enumerate_lassos(gamble, max_len=4, limit=2))) == 2


# ---------- verifier and explainer ----------

def test_verifier_statuses():
    verifier = CellVerifier()
    assert verifier.verify([check("a", True)])["status"] == PASS
    assert verifier.verify([check("a", True), check("b", False, "off by one")])["issues"] == ["b: off by one"]
    assert verifier.verify([check("a", True), check("b", None)])["status"] == PARTIAL
    assert verifier.verify([])["status"] == FAIL
    assert verifier.verify([], error="boom")["status"] == ERROR


def test_report_self_check(tmp_path):
    report = _report(tmp_path, PASS)
    assert validate_report(report) == []
    os.remove(report.cells[0].artifact)
    assert validate_report(report) == [f"0: artifact {report.cells[0].artifact} is missing"]


def test_explainer(tmp_path):
    report = _report(tmp_path, PASS, FAIL)
    frames = ReportExplainer().frames(report)
    assert list(frames) == ["section"]
    assert list(frames["section"]["status"]) == [PASS, FAIL]
    explained = ReportExplainer().explain(report)
    assert explained["summary"]["passed"] == 1
    assert "FAILED" in explained["text"]
    json_path, text_path = ReportExplainer().write(report, str(tmp_path / "out"))
    with open(json_path, encoding="utf-8") as fh:
        assert ExperimentReport.from_dict(json.load(fh)).cells == report.cells
    assert os.path.exists(text_path)


# ---------- experiments ----------

def test_experiment_config():
    with pytest.raises(KeyError):
        ExperimentConfig.from_dict({"samples": 10, "bogus": 1})
    cfg = ExperimentConfig.quick(samples=10, cells=["9"])
    assert cfg.samples == 10
    assert cfg.cells == ("9",)
    with pytest.raises(KeyError):
        run_table_experiments({"cells": ["99"]})


@pytest.mark.slow
def test_selected_cells_pass(tmp_path):
    cfg = ExperimentConfig.quick(cells=("9", "10", "e-limsup"), artifact_dir=str(tmp_path))
    report = run_table_experiments(cfg)
    assert [c.key for c in report.cells] == ["9", "10", "e-limsup"]
    assert all(c.status == PASS for c in report.cells)
    assert report.passed
    assert all(os.path.exists(c.artifact) for c in report.cells)


# ---------- command line ----------

def test_cli_lists_figures(capsys):
    assert app.main(["figures"]) == 0
    assert "ladder_limsup" in capsys.readouterr().out


def test_cli_analyses_a_figure(capsys):
    assert app.main(["figures", "incomparable", "--analyze", "fixed:2"]) == 0
    assert json.loads(capsys.readouterr().out)["lower"] == "3/4"


def test_cli_solves_a_model_file(tmp_path, gamble_file):
    out = tmp_path / "values.json"
    assert app.main(["solve", "--model", gamble_file, "--objective", "reach:win", "--output", str(out)]) == 0
    assert json.loads(out.read_text(encoding="utf-8"))["initial_value"] == "1/2"


def test_cli_reports_bad_input(tmp_path, capsys):
    missing = str(tmp_path / "missing.json")
    assert app.main(["solve", "--model", missing, "--objective", "limsup"]) == 1
    assert "❌" in capsys.readouterr().err


@pytest.mark.slow
def test_cli_eval_then_report(tmp_path):
    artifacts = str(tmp_path / "artifacts")
    assert app.main(["--artifact-dir", artifacts, "eval", "--quick", "--cells", "9"]) == 0
    assert os.path.exists(os.path.join(artifacts, "report.json"))
    assert app.main(["--artifact-dir", artifacts, "report", "--format", "json"]) == 0
