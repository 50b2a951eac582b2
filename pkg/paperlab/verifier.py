"""
Cell Verifier
-------------
Judges an experiment cell from its checks:

  PASS     every check passed
  FAIL     some check failed
  PARTIAL  nothing failed, but some checks were skipped (budget, size)
  ERROR    the cell raised before producing checks
"""

from __future__ import annotations

import os

PASS = "PASS"
FAIL = "FAIL"
PARTIAL = "PARTIAL"
ERROR = "ERROR"


def check(name, passed, detail=""):
    """passed: True / False, or None for a check that was skipped."""
    return {"name": name, "passed": None if passed is None else bool(passed), "detail": str(detail)}


class CellVerifier:
    def verify(self, checks, error=None):
        """
        Returns {"status", "issues", "passed", "failed", "skipped"}.
        """
        if error is not None:
            return self._build_verdict(ERROR, [error], 0, 0, 0)
        if not checks:
            return self._build_verdict(FAIL, ["cell produced no checks"], 0, 0, 0)

        failed = [c for c in checks if c["passed"] is False]
        skipped = [c for c in checks if c["passed"] is None]
        passed = len(checks) - len(failed) - len(skipped)
        issues = [f"{c['name']}: {c['detail']}" if c["detail"] else c["name"] for c in failed + skipped]

        if failed:
            return self._build_verdict(FAIL, issues, passed, len(failed), len(skipped))
        if skipped:
            return self._build_verdict(PARTIAL, issues, passed, 0, len(skipped))
        return self._build_verdict(PASS, [], passed, 0, 0)

    def _build_verdict(self, status, issues, passed, failed, skipped):
        return {
            "status": status,
            "issues": issues,
            "passed": passed,
            "failed": failed,
            "skipped": skipped,
        }


def validate_report(report):
    """Self-check of a finished report: every cell cited and backed by an artifact on disk."""
    issues = []
    for cell in report.cells:
        if not cell.citation:
            issues.append(f"{cell.key}: no citation")
        if not cell.artifact:
            issues.append(f"{cell.key}: no evidence artifact")
        elif not os.path.exists(cell.artifact):
            issues.append(f"{cell.key}: artifact {cell.artifact} is missing")
    return issues
