"""Higher-order chain rules, Bell polynomials and pullback norm bounds."""

from faacalc.errors import DomainError, InputError

__version__ = "0.1.0"

__all__ = ["DomainError", "InputError", "__version__"]
