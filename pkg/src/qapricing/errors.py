"""Exception hierarchy.

Every error raised by the package derives from :class:`QapError`.  The three
intermediate classes map onto CLI exit codes (config 2, data 3, numerical 4).
"""


class QapError(Exception):
    """Base class for package errors."""

    exit_code = 1


class ConfigError(QapError):
    exit_code = 2


class DataError(QapError):
    exit_code = 3


class NumericalError(QapError):
    exit_code = 4


class InvalidParameterError(ConfigError, ValueError):
    """Parameter is non-finite or violates a type invariant."""


class DomainError(ConfigError, ValueError):
    """Argument outside the domain where the operation is defined."""


class InvalidDistributionError(ConfigError, ValueError):
    """Probability vector does not sum to one or has negative entries."""


class DimensionError(ConfigError, ValueError):
    pass


class ParseError(DataError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class DegenerateDataError(DataError, ValueError):
    """Input data carries no variation (zero range, zero variance, ...)."""


class ConvergenceError(NumericalError):
    pass


class SingularityError(NumericalError):
    """Singular matrix, vanishing pivot or a ratio with a zero denominator."""


class DegenerateSystemError(NumericalError):
    """Pricing system whose scaling matrix B is not invertible."""


class NoSolutionError(NumericalError):
    """Discounted operator has spectral radius >= 1; prices diverge."""


class DegenerateStateError(NumericalError, ValueError):
    """Zero vector where a quantum state was requested."""


class UnitarityError(NumericalError, ValueError):
    pass


class IllConditionedError(NumericalError):
    pass


class PhaseAliasingError(NumericalError):
    """Eigenphases fall outside the window the clock register can decode."""


class PostSelectionError(NumericalError):
    pass


class NumericalIntegrityError(NumericalError):
    """Imaginary residue on a quantity that must be real."""


class PerfectFitError(NumericalError, ValueError):
    """Model state coincides with the data state; no pricing error exists."""


class EstimationError(NumericalError):
    pass


class InfeasibleRegionError(NumericalError):
    pass


class ZeroDivergenceError(NumericalError):
    pass


class CancellationError(NumericalError):
    pass
