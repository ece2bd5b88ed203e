"""Exception hierarchy.

Configuration problems (bad input) and numerical failures are kept apart so
the CLI can map them onto distinct exit codes.
"""


class WQEDError(Exception):
    """Base class for all package errors."""


class ConfigError(WQEDError, ValueError):
    """Invalid user configuration. ``field`` names the offending key."""

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if field is not None:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class NumericalError(WQEDError, ArithmeticError):
    """A numerical method failed to deliver a result."""


class SingularityError(NumericalError):
    """A response function was evaluated on (or too close to) a pole."""


class EigensolverError(NumericalError):
    """Dense eigendecomposition did not converge."""


class DegenerateSpectrumError(NumericalError):
    """Clustered poles: the closed-form residue sum does not apply.

    Use :func:`wqed_precursors.transients.contour_residue_fallback` (or the
    routing helper :func:`wqed_precursors.transients.edge_transient`).
    """

    def __init__(self, message, clusters=()):
        self.clusters = clusters
        super().__init__(message)


class ConvergenceError(NumericalError):
    """Series did not converge; carries the partial sum and the last term."""

    def __init__(self, message, partial=None, bound=None):
        self.partial = partial
        self.bound = bound
        super().__init__(message)


class ContourGeometryError(NumericalError):
    """An integration contour would enclose poles outside the target cluster."""


class ResolutionError(NumericalError):
    """Spectral grid too narrow or too coarse for the requested response."""


class StepSizeError(NumericalError):
    """ODE step exceeds the stability/accuracy bound."""


class RoutingError(WQEDError):
    """Requested engine cannot treat the given disorder kind."""


class FitError(NumericalError):
    """Parameter estimation failed or the data carry no information."""

    def __init__(self, message, report=None):
        self.report = report
        super().__init__(message)
