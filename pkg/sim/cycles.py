"""
Closed-form attainment for the parametric figure families.

Strategy specs:
  fixed:i          always the same branch / rung i
  escalating:c     on the k-th pass use index k + c
  sequence:<expr>  on the k-th pass use index expr(k), e.g. "k" or "2*k"
  table:w1,w2,...  memoryless randomized over finitely many indices
  never            never leave the ladder
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import sympy as sp

from config.settings import Config
from core.errors import UnsupportedSpec
from tools.calculator import K, Calculator, parse_rational, two_pow_neg

logger = logging.getLogger(__name__)

ZERO = sp.Integer(0)
ONE = sp.Integer(1)
FIGURES = ("ladder_limsup", "randf_ladder", "cobuchi_infbranch", "incomparable")


@dataclass(frozen=True)
class StrategySpec:
    kind: str
    index: int = None
    offset: int = None
    expression: str = None
    weights: tuple = ()

    @classmethod
    def parse(cls, text):
        kind, _, arg = text.partition(":")
        kind = kind.strip()
        try:
            if kind == "fixed":
                return cls(kind, index=int(arg))
            if kind == "escalating":
                return cls(kind, offset=int(arg or 0))
            if kind == "sequence":
                return cls(kind, expression=arg.strip())
            if kind == "table":
                return cls(kind, weights=tuple(parse_rational(w) for w in arg.split(",")))
            if kind == "never":
                return cls(kind)
        except ValueError as e:
            raise UnsupportedSpec(f"bad strategy spec {text!r}: {e}") from e
        raise UnsupportedSpec(f"unknown strategy spec {text!r}")

    def index_expression(self):
        if self.kind == "escalating":
            return f"k + {self.offset}"
        if self.kind == "sequence":
            return self.expression
        return None

    def __str__(self):
        if self.kind == "fixed":
            return f"fixed:{self.index}"
        if self.kind == "escalating":
            return f"escalating:{self.offset}"
        if self.kind == "sequence":
            return f"sequence:{self.expression}"
        if self.kind == "table":
            return "table:" + ",".join(str(w) for w in self.weights)
        return self.kind


@dataclass(frozen=True)
class CycleResult:
    figure: str
    spec: str
    lower: sp.Expr
    upper: sp.Expr
    exact: bool
    per_cycle_loss: sp.Expr = None
    cycles_to_vanish: int = None
    detail: dict = field(default_factory=dict)

    @property
    def attainment(self):
        return self.lower if self.exact else None

    def to_dict(self):
        out = {
            "figure": self.figure,
            "spec": self.spec,
            "lower": str(self.lower),
            "upper": str(self.upper),
            "exact": self.exact,
        }
        if self.per_cycle_loss is not None:
            out["per_cycle_loss"] = str(self.per_cycle_loss)
            out["cycles_to_vanish"] = self.cycles_to_vanish
        out.update({k: str(v) for k, v in self.detail.items()})
        return out


def cycles_until(loss, level=1e-6):
    """Least n with (1 - loss)^n < level."""
    loss = float(loss)
    if loss >= 1:
        return 1
    return math.floor(math.log(level) / math.log1p(-loss)) + 1


def _exact(figure, spec, value, **detail):
    return CycleResult(figure, str(spec), value, value, True, detail=detail)


def _vanishing(figure, spec, loss, **detail):
    return CycleResult(figure, str(spec), ZERO, ZERO, True, loss, cycles_until(loss), detail)


def _randf_table_loss(weights):
    """Per-pass loss of a memoryless down-probability table q_1..q_n (down surely past n)."""
    loss, survive = ZERO, ONE
    for i, q in enumerate(weights, start=1):
        loss += survive * q * two_pow_neg(i)
        survive *= ONE - q
    n = len(weights) + 1
    return loss + survive * two_pow_neg(n)


def _branch_loss(weights):
    if sum(weights) != ONE:
        raise UnsupportedSpec(f"branch weights sum to {sum(weights)}")
    return sum((w * two_pow_neg(i) for i, w in enumerate(weights, start=1)), ZERO)


def cycle_analysis(figure, spec, calculator=None, tolerance=None):
    """Attainment of `spec` (StrategySpec or text) on `figure`; UnsupportedSpec otherwise."""
    spec = StrategySpec.parse(spec) if isinstance(spec, str) else spec
    calc = calculator or Calculator()
    tolerance = Config.SERIES_TOLERANCE if tolerance is None else tolerance

    if figure == "ladder_limsup":
        # limsup_PP(>=0); the unique run of a deterministic spec
        if spec.kind == "never":
            return _exact(figure, spec, ZERO, limsup=-1)
        if spec.kind == "fixed":
            return _exact(figure, spec, ZERO, limsup=-sp.Rational(1, spec.index))
        if spec.kind in ("escalating", "sequence"):
            index = calc.index_sequence(spec.index_expression()).expression
            limsup = sp.limit(-1 / index, K, sp.oo)
            return _exact(figure, spec, ONE if limsup >= 0 else ZERO, limsup=limsup)

    elif figure == "randf_ladder":
        if spec.kind == "never":
            return _exact(figure, spec, ZERO, limsup=-1)
        if spec.kind == "fixed":
            return _vanishing(figure, spec, two_pow_neg(spec.index))
        if spec.kind == "table":
            return _vanishing(figure, spec, _randf_table_loss(spec.weights))
        if spec.kind in ("escalating", "sequence"):
            text = spec.index_expression()
            if not calc.series_converges(text):
                return _exact(figure, spec, ZERO, series="diverges")
            lower, upper, terms = calc.survival_product(calc.index_sequence(text), tolerance)
            return CycleResult(figure, str(spec), lower, upper, False, detail={"terms": terms})

    elif figure == "cobuchi_infbranch":
        if spec.kind == "fixed":
            return _vanishing(figure, spec, two_pow_neg(spec.index))
        if spec.kind == "table":
            return _vanishing(figure, spec, _branch_loss(spec.weights))
        if spec.kind in ("escalating", "sequence"):
            converges = calc.series_converges(spec.index_expression())
            return _exact(figure, spec, ONE if converges else ZERO,
                          series="converges" if converges else "diverges")

    elif figure == "incomparable":
        if spec.kind == "never":
            return _exact(figure, spec, ZERO, threshold=1)
        if spec.kind == "fixed":
            return _exact(figure, spec, ONE - two_pow_neg(spec.index), threshold=1)

    else:
        raise UnsupportedSpec(f"unknown figure {figure!r} (one of {', '.join(FIGURES)})")
    raise UnsupportedSpec(f"{spec} is not supported on {figure}")
