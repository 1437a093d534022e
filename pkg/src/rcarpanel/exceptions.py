"""Exception hierarchy for rcarpanel.

Every failure mode the library reports deliberately maps onto one of these
classes so the CLI can translate them into distinct exit codes.
"""


class RcarError(Exception):
    """Base class for all rcarpanel errors."""


class NonstationaryError(RcarError):
    """A coefficient draw or distribution violates the stationarity condition
    required by the requested operation (companion spectral radius, or the
    spectral radius of the mean Kronecker square, is not below one)."""


class TruncationError(RcarError):
    """A series computation hit its term cap before reaching tolerance.

    Carries the last tail estimate so callers can decide whether the partial
    result is usable.
    """

    def __init__(self, message, tail_estimate=None, terms=None):
        super().__init__(message)
        self.tail_estimate = tail_estimate
        self.terms = terms


class RankDeficiencyError(RcarError):
    """A second-moment matrix is singular or numerically near-singular, i.e.
    some linear combination of the state is (almost) deterministic."""


class NumericalError(RcarError):
    """An underlying numerical routine (root finder, eigensolver, linear
    solver) failed to converge or returned non-finite values."""


class SimulationError(RcarError):
    """Panel or path generation failed; message identifies the individual."""


class EstimationError(RcarError):
    """Estimation failed; message identifies the failing individuals/lags."""


class ConfigError(RcarError):
    """Invalid configuration document or CLI options; message carries the
    offending key path."""


class DataFormatError(RcarError):
    """Malformed panel or sidecar file; message carries line numbers."""
