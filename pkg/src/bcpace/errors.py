"""Exception and warning types raised across the package."""


class BcpaceError(Exception):
    """Base class for all package errors."""


class InvalidBelief(BcpaceError, ValueError):
    pass


class ImpossibleTransition(BcpaceError):
    """No latent with positive belief explains the observed transition."""


class InvalidDiscount(BcpaceError, ValueError):
    pass


class NonConvergence(BcpaceError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class UnknownEnvironment(BcpaceError, KeyError):
    pass


class InvalidParams(BcpaceError, ValueError):
    pass


class OracleInfeasible(BcpaceError):
    pass


class ConfigError(BcpaceError, ValueError):
    pass


class ArtifactVersionMismatch(BcpaceError):
    pass


class BudgetExhausted(BcpaceError):
    """Training hit ``max_episodes`` before the termination condition held.

    The partially trained estimate and log are attached so callers can still
    inspect or save them.
    """

    def __init__(self, message, estimate=None, log=None):
        super().__init__(message)
        self.estimate = estimate
        self.log = log


class EmptyKWindow(UserWarning):
    """The admissible neighbour-count window of the PAC bound is empty."""
