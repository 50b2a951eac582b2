"""
Report Explainer
----------------
Turns an ExperimentReport into the human-readable table and the JSON
record. Only finished reports are explained; nothing is recomputed here.
"""

from __future__ import annotations

import json
import logging
import os

import pandas as pd

from config.settings import Config
from paperlab.verifier import PASS

logger = logging.getLogger(__name__)

COLUMNS = ["cell", "claim", "status", "checks", "seconds", "artifact"]


class ReportExplainer:
    def __init__(self, width=None):
        self.width = width or 160

    def frames(self, report):
        """One DataFrame per report section, in first-seen order."""
        rows = {}
        for cell in report.cells:
            passed = sum(1 for c in cell.checks if c["passed"] is True)
            status = cell.status if cell.asserted else f"{cell.status} (info)"
            rows.setdefault(cell.section, []).append({
                "cell": cell.key,
                "claim": cell.title,
                "status": status,
                "checks": f"{passed}/{len(cell.checks)}",
                "seconds": cell.seconds,
                "artifact": os.path.basename(cell.artifact) if cell.artifact else "",
            })
        return {section: pd.DataFrame(items, columns=COLUMNS) for section, items in rows.items()}

    def explain(self, report):
        """
        Returns {"text", "summary"}. Failing or erroring cells get their
        issues listed under the tables.
        """
        lines = []
        for section, frame in self.frames(report).items():
            lines.append(f"== {section} ==")
            lines.append(frame.to_string(index=False, max_colwidth=60, line_width=self.width))
            lines.append("")

        trouble = [c for c in report.cells if c.status != PASS]
        if trouble:
            lines.append("Issues:")
            for cell in trouble:
                for issue in cell.issues or ["(no detail)"]:
                    lines.append(f"  [{cell.key}] {issue}")
            lines.append("")
        for issue in report.validation:
            lines.append(f"self-check: {issue}")

        summary = self._build_summary(report)
        lines.append(
            f"{summary['passed']} of {summary['asserted']} asserted cells passed"
            f" ({summary['informational']} informational) in {summary['seconds']}s:"
            f" {'OK' if report.passed else 'FAILED'}"
        )
        return {"text": "\n".join(lines), "summary": summary}

    def _build_summary(self, report):
        asserted = [c for c in report.cells if c.asserted]
        return {
            "asserted": len(asserted),
            "passed": sum(1 for c in asserted if c.status == PASS),
            "informational": len(report.cells) - len(asserted),
            "seconds": round(report.seconds, 2),
            "ok": report.passed,
        }

    def write(self, report, directory=None):
        """Writes report.json and report.txt; returns their paths."""
        directory = directory or Config.ARTIFACT_DIR
        os.makedirs(directory, exist_ok=True)
        explained = self.explain(report)
        json_path = os.path.join(directory, "report.json")
        text_path = os.path.join(directory, "report.txt")
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2, default=str)
        with open(text_path, "w", encoding="utf-8") as fh:
            fh.write(explained["text"] + "\n")
        logger.info("report written to %s", directory)
        return json_path, text_path
