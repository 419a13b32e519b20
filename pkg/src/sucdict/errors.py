"""Exception types raised across the package."""


class SucdError(Exception):
    """Base class for all package errors."""


class InvOfZero(SucdError, ZeroDivisionError):
    pass


class Singular(SucdError):
    """The selected rows of a linear system are dependent; retry with a new seed."""


class AllTrialsFailed(SucdError):
    pass


class DegenerateParameters(SucdError, ValueError):
    pass


class OverflowBlock(SucdError):
    """A block of the tree received a load outside its admissible window."""


class InsufficientAugmented(SucdError, ValueError):
    pass


class SizeOutOfRange(SucdError, ValueError):
    pass


class RankOutOfRange(SucdError, ValueError):
    pass


class PreconditionViolated(SucdError, ValueError):
    pass


class ParamViolation(SucdError, ValueError):
    pass


class BuildFailed(SucdError):
    pass


class RetriesExhausted(SucdError):
    pass
