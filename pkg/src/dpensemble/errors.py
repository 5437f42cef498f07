"""Exception types raised across the package."""


class DPEnsembleError(Exception):
    """Base class for package errors."""


class ConfigInvalid(DPEnsembleError, ValueError):
    pass


class NonConvergence(DPEnsembleError, RuntimeError):
    """Rejection sampling gave up (the truncation window is likely infeasible)."""


class DataLoadFailure(DPEnsembleError):
    pass


class MalformedRow(DataLoadFailure, ValueError):
    def __init__(self, series_id, column, cell):
        self.series_id = series_id
        self.column = column
        self.cell = cell
        super().__init__(f"series {series_id!r}: non-numeric cell {cell!r} in column {column}")


class IoFailure(DataLoadFailure, OSError):
    pass


class MissingTestSeries(UserWarning):
    """Issued when a train id has no matching test row."""


class SeriesTooShort(DPEnsembleError, ValueError):
    pass


class ShapeMismatch(DPEnsembleError, ValueError):
    pass


class LengthMismatch(DPEnsembleError, ValueError):
    pass


class InconsistentShapes(DPEnsembleError, ValueError):
    pass


class InsufficientMembers(DPEnsembleError, ValueError):
    pass


class EmptyDataset(DPEnsembleError, ValueError):
    pass


class IncompleteGrid(DPEnsembleError, KeyError):
    def __init__(self, missing):
        self.missing = list(missing)
        super().__init__("missing grid cells: " + ", ".join(f"({s}, {p})" for s, p in self.missing))

    def __str__(self):
        return self.args[0]


class DivergenceDetected(DPEnsembleError, FloatingPointError):
    def __init__(self, segment, iteration):
        self.segment = segment
        self.iteration = iteration
        super().__init__(f"non-finite loss in segment {segment} at iteration {iteration}")


class CheckpointError(DPEnsembleError):
    pass


class CorruptFile(CheckpointError):
    pass


class VersionMismatch(CheckpointError):
    pass
