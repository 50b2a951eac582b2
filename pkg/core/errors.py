"""
Error types
-----------
One base class so callers (experiment cells, the CLI) can catch everything the
library raises on purpose without swallowing programming errors.
"""


class MdpLabError(Exception):
    pass


# ---------- core ----------

class OracleFailure(MdpLabError):
    def __init__(self, state, cause):
        super().__init__(f"successor oracle failed at {state!r}: {cause}")
        self.state = state
        self.cause = cause


class EmptySuccessors(MdpLabError):
    def __init__(self, state):
        super().__init__(f"state {state!r} has no successors")
        self.state = state


class InfiniteBubble(MdpLabError):
    pass


class InvalidModel(MdpLabError):
    """Malformed JSON or a model that fails validation."""


class BudgetExceeded(MdpLabError):
    def __init__(self, what, attempted, budget):
        super().__init__(f"{what}: {attempted} exceeds budget {budget}")
        self.attempted = attempted
        self.budget = budget


# ---------- transforms ----------

class ZeroValueStart(MdpLabError):
    pass


class InvalidValues(MdpLabError):
    pass


class NotShiftInvariant(MdpLabError):
    pass


class ProbOverflow(MdpLabError):
    pass


class MassMismatch(MdpLabError):
    pass


class BoundViolation(MdpLabError):
    pass


class NotOptimal(MdpLabError):
    pass


class UnsupportedObjective(MdpLabError):
    pass


# ---------- synth ----------

class StageFailure(MdpLabError):
    def __init__(self, stage, gap, detail=""):
        super().__init__(f"stage {stage} failed (gap {gap}){': ' + detail if detail else ''}")
        self.stage = stage
        self.gap = gap


class BudgetExhausted(MdpLabError):
    pass


class NoOptimal(MdpLabError):
    def __init__(self, states):
        states = sorted(map(str, states))
        super().__init__(f"no optimal strategy from: {', '.join(states)}")
        self.states = states


# ---------- sim ----------

class InvalidStrategy(MdpLabError):
    pass


class NoLassoFound(MdpLabError):
    pass


class UnsupportedSpec(MdpLabError):
    pass


# ---------- paperlab ----------

class BadParams(MdpLabError):
    pass
