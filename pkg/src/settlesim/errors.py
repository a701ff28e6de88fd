"""Exception types shared across the package."""


class SettlesimError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(SettlesimError, ValueError):
    """A scenario, grid, or run configuration is invalid or inconsistent."""


class DomainError(SettlesimError, ValueError):
    """A physical quantity was evaluated outside its admissible range."""


class InvariantViolationError(SettlesimError, RuntimeError):
    """A state left the admissible region under conditions that guarantee it.

    Raised only when the time step satisfies the stability budget, so a
    violation indicates a bug rather than a user error.
    """
