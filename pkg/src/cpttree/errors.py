"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Raised when an input violates a documented precondition."""


class CertificateError(ValidationError):
    """Raised when a no-arbitrage certificate cannot be produced or validated."""

    def __init__(self, message: str, node: int | None = None):
        super().__init__(message)
        self.node = node
