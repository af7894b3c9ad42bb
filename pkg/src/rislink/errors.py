"""Exception hierarchy shared by all simulator modules."""


class RisSimError(Exception):
    """Base class for simulator errors."""


class DimensionError(RisSimError, ValueError):
    pass


class DomainError(RisSimError, ValueError):
    pass


class ConfigError(RisSimError, ValueError):
    pass


class DegenerateChannelError(RisSimError, ValueError):
    pass


class NumericError(RisSimError, ArithmeticError):
    pass


class ScenarioError(RisSimError, ValueError):
    pass


class DemodulationError(RisSimError, ValueError):
    pass
