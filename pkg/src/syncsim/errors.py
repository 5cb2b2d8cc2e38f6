"""Exception hierarchy shared by all syncsim modules."""


class SyncsimError(Exception):
    """Base class for every error raised by this package."""


# ---------------------------------------------------------------- graphs

class NotSymmetricError(SyncsimError):
    """Matrix expected to be symmetric is not (beyond tolerance)."""


class NegativeWeightError(SyncsimError):
    """Adjacency matrix contains a negative entry."""


class SelfLoopError(SyncsimError):
    """Adjacency matrix has a nonzero diagonal entry."""


class DisconnectedError(SyncsimError):
    """Graph is not connected (Laplacian has more than one zero eigenvalue)."""


class DimensionMismatchError(SyncsimError):
    """Operands have inconsistent dimensions."""


# ---------------------------------------------------------------- plants

class NonPositiveParameterError(SyncsimError):
    """A parameter that must be strictly positive is not."""


class BadBreakpointsError(SyncsimError):
    """Piecewise-linear nonlinearity breakpoints violate 0 < tau_b < tau_star."""


class NoStorageMatrixError(SyncsimError):
    """Plant has no quadratic storage matrix; incremental check unavailable."""


# ------------------------------------------------------------ controllers

class NotCompleteGraphError(SyncsimError):
    """Controller requires a complete graph."""


class NonUniformWeightError(SyncsimError):
    """Controller requires a single uniform edge weight."""


class DisturbancesNotAllowedError(SyncsimError):
    """Controller is only valid for disturbance-free scenarios."""


# -------------------------------------------------------------- simulator

class NonFiniteDerivativeError(SyncsimError):
    """Derivative evaluation produced NaN or Inf."""


# ---------------------------------------------------------------- analysis

class UnknownFamilyError(SyncsimError):
    """Controller family has no associated Lyapunov trace."""


class MissingExoStatesError(SyncsimError):
    """Trajectory lacks the exosystem states needed for a residual trace."""


# -------------------------------------------------------------- scenarios

class ParseError(SyncsimError):
    """Scenario file could not be parsed."""


class ValidationError(SyncsimError):
    """Scenario content is invalid; message carries the offending field path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")
