"""Exception hierarchy. The CLI maps these onto distinct exit codes."""


class VdvError(Exception):
    """Base class for all toolkit errors."""


class DataError(VdvError):
    """Invalid input data: bad shapes, bad labels, impossible requests."""


class FeatureFileError(DataError):
    """Malformed feature file. Messages name the offending byte offset or field."""


class MissingLabelsError(FeatureFileError):
    """The feature file has no label block and none were supplied."""


class ModelFileError(DataError):
    """Malformed model container."""


class UndefinedMetricError(VdvError):
    """A metric's denominator is zero; the value does not exist for this input."""


class ConvergenceError(VdvError):
    """The SVM solver halted without satisfying its KKT tolerance.

    Carries the training diagnostics collected up to the failure.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics
