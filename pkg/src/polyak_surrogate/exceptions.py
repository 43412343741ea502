"""Exception types raised across the package."""


class ContractError(ValueError):
    """A call violated an operation's precondition (e.g. wrong dimension)."""


class ConfigurationError(ValueError):
    """A problem, surrogate, stepper or audit was configured inconsistently."""


class DomainError(ArithmeticError):
    """A quantity is undefined at the requested point."""
