"""Exception hierarchy.

Every domain failure raises a subclass of :class:`QbinferError`; the CLI
maps them to exit code 1 and prints the class name, so the names below are
part of the command-line contract.
"""


class QbinferError(Exception):
    """Base class for all domain errors raised by this package."""


# ---- matrix kernel ----------------------------------------------------------

class NotHermitian(QbinferError):
    pass


class DimensionMismatch(QbinferError):
    pass


# ---- states and observables -------------------------------------------------

class NotAPovm(QbinferError):
    pass


class NotFullRank(QbinferError):
    pass


class InconsistentNullSet(QbinferError):
    """Effect is nonzero but its induced mass vanished; numerical breakdown."""


class MalformedProductLabels(QbinferError):
    pass


# ---- instruments -------------------------------------------------------------

class UnknownLabel(QbinferError):
    pass


class DimensionChainMismatch(QbinferError):
    pass


class OutcomeExplosion(QbinferError):
    pass


class NotCommuting(QbinferError):
    pass


class CompletionFailure(QbinferError):
    pass


class IncompatibleOutcomeSpaces(QbinferError):
    pass


# ---- posterior updates --------------------------------------------------------

class ZeroProbabilityOutcome(QbinferError):
    """Posterior state requested on an outcome of (numerically) zero mass."""


class ZeroEvidence(QbinferError):
    pass


# ---- inference ----------------------------------------------------------------

class DegenerateWeight(QbinferError):
    pass


class MalformedPartition(QbinferError):
    pass


# ---- decision theory ------------------------------------------------------------

class MissingThetaStates(QbinferError):
    pass


class UnknownTheta(QbinferError):
    pass


class MissingPriorWeights(QbinferError):
    pass


class IncompatibleAction(QbinferError):
    pass


class BudgetExceeded(QbinferError):
    pass


# ---- asymptotics ----------------------------------------------------------------

class NotAProjection(QbinferError):
    pass


class NoSpectralGap(QbinferError):
    pass


class AlreadyConverged(QbinferError):
    pass


class PositivityCertificateFailed(QbinferError):
    pass


class CommutingInput(QbinferError):
    pass


# ---- CLI --------------------------------------------------------------------------

class ParseError(QbinferError):
    pass


class EmptyRunDir(QbinferError):
    pass
