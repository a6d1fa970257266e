"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class BudgetExceededError(RuntimeError):
    """A numerical budget (terms, nodes, points) would be exceeded."""


class ConfigError(ValueError):
    """An invalid run configuration."""
