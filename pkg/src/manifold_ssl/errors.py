"""Exception hierarchy shared by every stage of the pipeline."""


class ManifoldSSLError(Exception):
    """Base class for all library errors."""


class FormatError(ManifoldSSLError, ValueError):
    """A data file does not follow the expected layout."""


class ParseError(ManifoldSSLError, ValueError):
    """A cell could not be parsed into the expected type."""


class IntegrityError(ManifoldSSLError, ValueError):
    """Identifiers are duplicated or inconsistent across inputs."""


class ConfigError(ManifoldSSLError, ValueError):
    """Invalid configuration or unsatisfiable precondition on settings."""


class ContractError(ManifoldSSLError, ValueError):
    """A function was called with arguments violating its contract."""


class SolverError(ManifoldSSLError, RuntimeError):
    """The QP solver or an inner linear solve failed."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class TrainingError(ManifoldSSLError, RuntimeError):
    """A model could not be trained from the supplied data."""


class ExperimentError(ManifoldSSLError, RuntimeError):
    """Too many repetitions of an experiment failed."""
