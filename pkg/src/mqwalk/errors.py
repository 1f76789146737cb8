"""Exception types shared across the package; the CLI maps them to exit codes."""


class ConfigError(ValueError):
    """Malformed model configuration; carries the offending field path."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class BudgetExceededError(RuntimeError):
    """An exact enumeration would exceed the configured work budget."""


class GridTooSmallError(ValueError):
    """Quadrature grid below the exactness threshold; .minimum holds the admissible size."""

    def __init__(self, requested, minimum):
        self.requested = requested
        self.minimum = minimum
        super().__init__(
            f"grid size {requested} below exactness threshold; need at least {minimum}"
        )


class SpectralError(RuntimeError):
    """Spectral hypothesis violated or eigensolver failure."""


class BranchCollisionError(SpectralError):
    """Eigenvalue branch tracking became ambiguous along the continuation path."""

    def __init__(self, location, overlap):
        self.location = location
        self.overlap = overlap
        super().__init__(
            f"branch tracking ambiguous at {location} (projector overlap {overlap:.3f} < 0.5)"
        )


class HypothesisUnmetError(RuntimeError):
    """A theorem hypothesis required by the requested computation fails numerically."""
