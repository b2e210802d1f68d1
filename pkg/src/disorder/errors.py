"""Exception types shared across the package."""


class DisorderError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(DisorderError):
    """A model configuration document is malformed or carries unknown keys."""


class SupportError(DisorderError):
    """An observation has zero probability under the common kernel support."""


class BudgetError(DisorderError):
    """An enumeration or recursion exceeded its configured resource budget."""
