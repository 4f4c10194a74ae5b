"""
Error hierarchy for the lab.
"""


class LabError(Exception):
    """Root of every domain error raised by the lab."""


class InputError(LabError, ValueError):
    """An argument violates an operation's precondition."""


class DimensionError(LabError, ValueError):
    """Tensor shapes do not line up."""


class StateError(LabError, RuntimeError):
    """An operation was called out of order (e.g. backward without forward)."""


class CapacityError(LabError, ValueError):
    """A request exceeds an exhaustive-enumeration bound."""


class DataFormatError(LabError, ValueError):
    """A data file does not carry the expected format marker."""


class DataLengthError(LabError, ValueError):
    """A data file is shorter than its header promises."""


class ConsistencyError(LabError, ValueError):
    """Two related inputs disagree (e.g. image and label counts)."""


class UndefinedWeightError(LabError, ZeroDivisionError):
    """A difficulty weight was requested for an atom with zero target mass."""


class UndefinedBoostError(LabError, ZeroDivisionError):
    """A boost was requested against a zero dropout gain."""


class AlignmentError(LabError, ValueError):
    """Metrics files do not share an evaluation step grid."""

    def __init__(self, message, files=()):
        self.files = list(files)
        if self.files:
            message = f"{message}: {', '.join(str(f) for f in self.files)}"
        super().__init__(message)


class TrainingDivergedError(LabError, RuntimeError):
    """A training run produced a non-finite loss and was aborted."""


class PlotWriteError(LabError, OSError):
    """A plot could not be written to its destination."""
