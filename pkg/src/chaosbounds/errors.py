"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input violates a documented precondition (shape, range, finiteness)."""


class CapacityError(RuntimeError):
    """A configured size or enumeration budget would be exceeded."""


class PostconditionError(RuntimeError):
    """A constructive routine produced output that fails its own checker.

    ``clause`` names the violated condition and ``details`` carries the
    offending indices and margins.
    """

    def __init__(self, clause: str, details: dict | None = None):
        self.clause = clause
        self.details = details or {}
        super().__init__(f"postcondition violated: {clause} {self.details}")
