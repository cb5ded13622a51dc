"""Exception hierarchy. InputError maps to CLI exit code 2, NumericalError to 3."""


class SampletError(Exception):
    """Base class for all package errors."""


class InputError(SampletError):
    """Invalid or inconsistent user input (bad file, bad shape, bad config)."""


class NumericalError(SampletError):
    """A numerical computation failed or left its accuracy contract."""


class EigenSolverError(NumericalError):
    """Eigenpair residual above tolerance or solver non-convergence.

    Carries the cluster id when the failure happened inside a tree build.
    """

    def __init__(self, message, cluster=None):
        super().__init__(message)
        self.cluster = cluster


class ConditionNumberError(NumericalError):
    """Condition estimate above the allowed cap. Carries the estimate."""

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate
