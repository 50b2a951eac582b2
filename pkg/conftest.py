from __future__ import annotations

import pytest
import sympy as sp

from config.settings import Config
from core.model import FiniteMdp, TailLabel

HALF = sp.Rational(1, 2)


def pytest_configure(config):
    config.addinivalue_line("markers", "exact: exact rational solvers and transformations")
    config.addinivalue_line("markers", "sim: seeded Monte Carlo and strategy runs")
    config.addinivalue_line("markers", "slow: experiment table cells")


@pytest.fixture(autouse=True)
def restore_config():
    """CLI runs call Config.override; every test starts from the same settings."""
    saved = {k: v for k, v in vars(Config).items() if k.isupper()}
    yield
    for key, value in saved.items():
        setattr(Config, key, value)


def build_gamble(tails=False):
    """
    s picks the safe loop (reward -1 forever) or a fair coin between an
    absorbing win (reward 0) and an absorbing loss (reward -1).
    Index order: s, coin, safe, win, lose.
    """
    return FiniteMdp.build(
        {
            "s": ("controlled", [("safe", 0), ("coin", 0)]),
            "coin": ("random", [("win", HALF, 0), ("lose", HALF, 0)]),
            "safe": ("controlled", [("safe", -1)]),
            "win": ("controlled", [("win", 0)]),
            "lose": ("controlled", [("lose", -1)]),
        },
        "s",
        name="gamble",
        tails={"win": TailLabel(0, 0, member=True), "lose": TailLabel(-1, -1)} if tails else None,
    )


def build_state_rewarded():
    """a (reward -1/2) moves to b (reward 0 forever) or c (reward -1 forever)."""
    minus_half = sp.Rational(-1, 2)
    return FiniteMdp.build(
        {
            "a": ("controlled", [("b", minus_half), ("c", minus_half)]),
            "b": ("controlled", [("b", 0)]),
            "c": ("controlled", [("c", -1)]),
        },
        "a",
        name="state_rewarded",
    )


@pytest.fixture
def gamble():
    return build_gamble()


@pytest.fixture
def gamble_with_tails():
    return build_gamble(tails=True)


@pytest.fixture
def state_rewarded():
    return build_state_rewarded()
