"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class UnsupportedError(NotImplementedError):
    """The requested variant or configuration is not implemented."""
