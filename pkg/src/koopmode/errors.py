"""Exception hierarchy shared by all koopmode modules.

Two branches matter for exit-code mapping in the CLI: ``DataError`` covers
malformed or inconsistent inputs, ``NumericalError`` covers failures of the
numerics themselves (singular solves, non-convergence, ...).
"""


class KoopmodeError(Exception):
    """Base class for all package-specific errors."""


class DataError(KoopmodeError):
    """Input data is malformed, inconsistent, or out of range."""


class NumericalError(KoopmodeError):
    """A numerical procedure failed or would return garbage."""


# -- time series ingestion ---------------------------------------------------

class EmptyFile(DataError):
    pass


class MissingHeader(DataError):
    pass


class RaggedRows(DataError):
    def __init__(self, row: int, expected: int, got: int):
        super().__init__(f"row {row}: expected {expected} cells, got {got}")
        self.row = row
        self.expected = expected
        self.got = got


class NonFinite(DataError):
    def __init__(self, row: int, col: int, cell: str):
        super().__init__(f"row {row}, column {col}: non-finite or non-numeric cell {cell!r}")
        self.row = row
        self.col = col
        self.cell = cell


class NonUniformSampling(DataError):
    pass


class OutOfRange(DataError):
    pass


class UnknownChannel(DataError):
    pass


class MissingChannels(DataError):
    pass


class ChannelMismatch(DataError):
    pass


# -- decomposition -----------------------------------------------------------

class TooFewSnapshots(DataError):
    pass


class OddSampleCount(DataError):
    pass


class FrequencyOutOfRange(DataError):
    pass


class ZeroEigenvalue(DataError):
    pass


class NotAPair(DataError):
    pass


class DegenerateEigenvalues(NumericalError):
    pass


class SolveFailure(NumericalError):
    pass


class RankCollapse(NumericalError):
    pass


# -- swing simulation --------------------------------------------------------

class NoConvergence(NumericalError):
    pass


class BlowUp(NumericalError):
    pass


# -- model-order reduction ---------------------------------------------------

class PairSplit(DataError):
    pass


class IllConditionedGram(NumericalError):
    pass


class StepUnderflow(NumericalError):
    pass


class NotStableWarning(UserWarning):
    """Equilibrium search converged, but the point is not locally stable."""
