"""Exception hierarchy shared by the solvers and the command line."""


class ParachuteError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(ParachuteError, ValueError):
    """Invalid parameters or configuration."""


class DomainError(ConfigError):
    """Argument outside the domain of a model primitive."""


class RegimeError(ConfigError):
    """Operation not available in the parameter regime at hand."""


class NumericalError(ParachuteError, RuntimeError):
    """A numerical procedure failed."""


class BracketError(NumericalError):
    pass


class IntegrandError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    pass


class InvariantError(NumericalError):
    pass
