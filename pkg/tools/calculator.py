"""
Exact rational calculator.
Used by the model loaders (strict "num/den" parsing), the reward/family
reductions (levels of 2^-i thresholds) and the closed-form cycle analysis
(index sequences and infinite series/products).
"""

import re

import sympy as sp
from sympy.parsing.sympy_parser import parse_expr, standard_transformations

RATIONAL_PATTERN = re.compile(r"^\s*([+-]?\d+)\s*(?:/\s*(\d+)\s*)?$")

# The only symbol an index-sequence expression may mention
K = sp.Symbol("k", integer=True, positive=True)

ALLOWED_SYMBOLS = {
    "k": K,
    "Min": sp.Min,
    "Max": sp.Max,
    "floor": sp.floor,
    "ceiling": sp.ceiling,
    "log": sp.log,
}

ONE = sp.Integer(1)
ZERO = sp.Integer(0)


def parse_rational(text):
    """
    Parse an exact rational written as "n" or "n/d".
    Decimal literals ("0.5", "1e-3") are rejected on purpose.
    """
    if isinstance(text, bool):
        raise ValueError(f"not a rational: {text!r}")
    if isinstance(text, int):
        return sp.Integer(text)
    if isinstance(text, sp.Rational):
        return text
    if not isinstance(text, str):
        raise ValueError(f"rationals must be strings, got {type(text).__name__}")
    match = RATIONAL_PATTERN.match(text)
    if match is None:
        raise ValueError(f"not an exact rational: {text!r}")
    numerator = int(match.group(1))
    denominator = int(match.group(2)) if match.group(2) is not None else 1
    if denominator == 0:
        raise ValueError(f"zero denominator: {text!r}")
    return sp.Rational(numerator, denominator)


def format_rational(value):
    if value == sp.oo:
        return "inf"
    return str(sp.Rational(value))


def two_pow_neg(i):
    """2^-i as an exact rational."""
    return sp.Rational(1, 2 ** int(i))


def deficit_level(deficit):
    """
    Largest i >= 0 with deficit <= 2^-i.
    sp.oo when deficit <= 0, None when deficit > 1.
    """
    deficit = sp.Rational(deficit)
    if deficit <= 0:
        return sp.oo
    p, q = deficit.p, deficit.q
    if q < p:
        return None
    return (q // p).bit_length() - 1


class Calculator:
    """
    Exact math engine using SymPy.
    """

    def evaluate(self, expression: str):
        """
        Evaluate an index expression in k.
        Example:
            "k + 10"
            "3"
        """
        try:
            expr = parse_expr(
                expression,
                local_dict=ALLOWED_SYMBOLS,
                transformations=standard_transformations,
                evaluate=True
            )
            stray = expr.free_symbols - {K}
            if stray:
                raise ValueError(f"unknown symbols: {sorted(map(str, stray))}")
            return {
                "success": True,
                "expression": expr,
                "result": str(expr)
            }
        except Exception as e:
            return {
                "success": False,
                "error": str(e)
            }

    def index_sequence(self, expression: str):
        """
        Turn "k + c" style text into a function k -> positive int.
        Raises ValueError when the expression does not parse.
        """
        parsed = self.evaluate(expression)
        if not parsed["success"]:
            raise ValueError(parsed["error"])
        expr = parsed["expression"]

        def index(k):
            value = expr.subs(K, k)
            if not value.is_integer or value < 1:
                raise ValueError(f"{expression} gives {value} at k={k}")
            return int(value)

        index.expression = expr
        return index

    def series_converges(self, expression: str):
        """
        Decide whether sum_{k>=1} 2^-(index(k)) converges.
        """
        index = self.index_sequence(expression).expression
        series = sp.Sum(sp.Integer(2) ** (-index), (K, 1, sp.oo))
        verdict = series.is_convergent()
        if verdict is None:
            raise ValueError(f"cannot decide convergence of {series}")
        return bool(verdict)

    def survival_product(self, index, tolerance=1e-12, max_terms=100_000):
        """
        Bracket prod_{k>=1} (1 - 2^-index(k)) for a strictly increasing index.

        Partial products stop once the tail bound sum_{j>K} 2^-index(j)
        (at most 2^-(index(K+1) - 1)) is under tolerance.
        Returns (lower, upper, terms).
        """
        product = ONE
        k = 0
        tail = ONE
        while k < max_terms:
            k += 1
            if index(k + 1) <= index(k):
                raise ValueError("survival_product needs a strictly increasing index")
            product *= ONE - two_pow_neg(index(k))
            tail = two_pow_neg(index(k + 1) - 1)
            if tail < sp.Rational(tolerance):
                break
        lower = product * max(ZERO, ONE - tail)
        return lower, product, k

    def check_probability_bounds(self, value):
        """
        Ensure probability is within [0,1], exactly.
        """
        try:
            val = parse_rational(value)
            return {
                "valid": bool(0 <= val <= 1),
                "value": val
            }
        except (ValueError, TypeError):
            return {
                "valid": False,
                "value": None
            }
