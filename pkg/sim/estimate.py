"""
Monte Carlo attainment brackets with Hoeffding slack.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from config.settings import Config
from objectives.objective import Verdict
from objectives.verdicts import classify_prefix
from sim.runner import run_strategy

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BracketedEstimate:
    lower: float
    upper: float
    samples: int
    delta: float
    horizon: int
    sat: int
    viol: int
    undetermined: int
    overflowed: int = 0

    def contains(self, value):
        return self.lower <= float(value) <= self.upper

    def to_dict(self):
        return dict(self.__dict__)


def hoeffding_slack(samples, delta):
    return math.sqrt(math.log(2 / delta) / (2 * samples))


def _sample(mdp, machine, obj, horizon, seed, i, tail_risk):
    rng = np.random.default_rng([seed, i])
    run = run_strategy(mdp, machine, horizon=horizon, rng=rng)
    verdict = classify_prefix(run, obj)
    credit = 0.0
    if verdict is Verdict.UNDETERMINED and tail_risk is not None:
        credit = max(0.0, 1.0 - float(tail_risk(run)))
    return verdict, credit, run.overflowed


def estimate_attainment(mdp, machine, obj, horizon=None, samples=None, delta=None, seed=None,
                        threads=None, tail_risk=None):
    """
    Bracket P(obj) under `machine` from `samples` runs of length `horizon`.

    lower = Sat fraction - slack, upper = 1 - Viol fraction + slack. When
    `tail_risk(run)` bounds the chance that an undetermined run still fails,
    each such run adds 1 - risk to the lower side.
    """
    horizon = Config.MC_HORIZON if horizon is None else horizon
    samples = Config.MC_SAMPLES if samples is None else samples
    delta = Config.MC_DELTA if delta is None else delta
    seed = Config.SEED if seed is None else seed
    threads = Config.THREADS if threads is None else threads

    def one(i):
        return _sample(mdp, machine, obj, horizon, seed, i, tail_risk)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(one, range(samples)))
    else:
        outcomes = [one(i) for i in range(samples)]

    sat = sum(1 for v, _, _ in outcomes if v is Verdict.SAT)
    viol = sum(1 for v, _, _ in outcomes if v is Verdict.VIOL)
    undetermined = samples - sat - viol
    overflowed = sum(1 for _, _, o in outcomes if o)
    credit = math.fsum(c for _, c, _ in outcomes)
    slack = hoeffding_slack(samples, delta)
    lower = max(0.0, (sat + credit) / samples - slack)
    upper = min(1.0, 1.0 - viol / samples + slack)
    logger.info(
        "%s under %s: sat %d viol %d undetermined %d of %d -> [%.4f, %.4f]",
        obj, machine.tag, sat, viol, undetermined, samples, lower, upper,
    )
    return BracketedEstimate(lower, upper, samples, delta, horizon, sat, viol, undetermined, overflowed)
