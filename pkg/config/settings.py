import os
from dotenv import load_dotenv

load_dotenv()


def _env_int(name, default):
    value = os.getenv(name)
    return int(value) if value not in (None, "") else default


def _env_float(name, default):
    value = os.getenv(name)
    return float(value) if value not in (None, "") else default


class Config:
    # ----------------------------
    # Determinism
    # ----------------------------
    SEED = _env_int("MDPLAB_SEED", 0)
    THREADS = _env_int("MDPLAB_THREADS", 1)

    # ----------------------------
    # Budgets
    # ----------------------------
    BUDGET_STATES = _env_int("MDPLAB_BUDGET_STATES", 5000)
    BUDGET_STRATEGIES = _env_int("MDPLAB_BUDGET_STRATEGIES", 200_000)
    BUDGET_LASSO_STEPS = _env_int("MDPLAB_BUDGET_LASSO_STEPS", 100_000)

    # ----------------------------
    # Truncation
    # ----------------------------
    DEFAULT_DEPTH = _env_int("MDPLAB_DEPTH", 8)
    DEFAULT_BRANCH_CAP = _env_int("MDPLAB_BRANCH_CAP", 16)
    FRONTIER_POLICY = os.getenv("MDPLAB_FRONTIER", "losing")

    # ----------------------------
    # Monte Carlo
    # ----------------------------
    MC_SAMPLES = _env_int("MDPLAB_SAMPLES", 1000)
    MC_HORIZON = _env_int("MDPLAB_HORIZON", 1000)
    MC_DELTA = _env_float("MDPLAB_DELTA", 0.01)
    # Inverse-CDF sampling gives up after this many edges of an infinite branching
    MC_MAX_BRANCH = _env_int("MDPLAB_MAX_BRANCH", 4096)

    # ----------------------------
    # Synthesis
    # ----------------------------
    STAGE_BOUND = "1/2"
    MR_STAGE_BOUND = "1/4"
    MR_SEARCH_BITS = _env_int("MDPLAB_MR_SEARCH_BITS", 20)

    # ----------------------------
    # Series / closed forms
    # ----------------------------
    SERIES_TOLERANCE = _env_float("MDPLAB_SERIES_TOLERANCE", 1e-12)

    # ----------------------------
    # Output
    # ----------------------------
    ARTIFACT_DIR = os.getenv("MDPLAB_ARTIFACT_DIR", "./artifacts")
    LOG_LEVEL = os.getenv("MDPLAB_LOG_LEVEL", "INFO")

    @classmethod
    def override(cls, **values):
        """
        Set attributes for one run (CLI flags, config files).
        Unknown keys are rejected; None values are skipped.
        Returns the previous values so callers can restore them.
        """
        previous = {}
        for key, value in values.items():
            if value is None:
                continue
            attr = key.upper()
            if not hasattr(cls, attr):
                raise KeyError(f"unknown setting: {key}")
            previous[attr] = getattr(cls, attr)
            setattr(cls, attr, value)
        return previous
