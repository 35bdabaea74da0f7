"""Exception hierarchy shared by every stage of the pipeline."""


class MinskyError(Exception):
    """Base class for all package errors."""


class DataError(MinskyError, ValueError):
    """Input data or configuration violates a documented invariant."""


class EstimationError(MinskyError):
    """Likelihood evaluation or EM estimation could not proceed.

    ``causes`` carries per-attempt messages when several attempts failed
    (restarts, Monte Carlo replications).
    """

    def __init__(self, message, causes=None):
        super().__init__(message)
        self.causes = list(causes or [])

    def __str__(self):
        base = super().__str__()
        if not self.causes:
            return base
        return base + ": " + "; ".join(str(c) for c in self.causes)


class DegenerateCovarianceError(EstimationError):
    pass


class UnderflowError(EstimationError):
    pass


class RegimeStarvationError(EstimationError):
    pass


class SmootherError(EstimationError):
    pass


class MonteCarloError(EstimationError):
    pass
