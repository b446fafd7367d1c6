"""Exception types shared across the package."""


class ValidationError(ValueError):
    """A spec, config, or argument violates a documented invariant."""


class SequenceError(ValidationError):
    """Sequence text failed to parse or validate.

    Carries the 1-based line and column of the offending token when the
    error comes from the parser; both are None for structural errors.
    """

    def __init__(self, message, line=None, column=None):
        if line is not None:
            message = f"line {line}, col {column}: {message}"
        super().__init__(message)
        self.line = line
        self.column = column


class ConstraintError(ValidationError):
    """Timeline ordering or separation constraint violated."""


class UnsupportedOperationError(TypeError):
    """Operation is undefined for this distribution kind (e.g. pdf of a delta)."""


class NoRootFoundError(RuntimeError):
    """No sign change found when scanning for a cancellation root.

    Attributes:
        min_value: smallest transform value seen over the scanned grid.
        x_at_min: field-time product where the minimum occurred.
    """

    def __init__(self, min_value, x_at_min):
        super().__init__(
            f"no cancellation root in range; minimum transform value "
            f"{min_value:.6g} at x={x_at_min:.6g}"
        )
        self.min_value = min_value
        self.x_at_min = x_at_min
