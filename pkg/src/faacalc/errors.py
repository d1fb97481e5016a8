"""Exception types shared by all modules."""


class InputError(ValueError):
    """Malformed or inconsistent input (CLI exit code 2)."""


class DomainError(ArithmeticError):
    """Input is well-formed but outside the mathematical domain (exit code 1)."""
