"""Exception types shared across the package."""


class GraphFormatError(ValueError):
    """An edge-list line could not be parsed."""

    def __init__(self, line_number, line, reason):
        self.line_number = line_number
        self.line = line
        super().__init__(f"line {line_number}: {reason}: {line!r}")


class ValidationError(ValueError):
    """Input is well formed but violates a model invariant."""


class EnumerationLimitError(RuntimeError):
    """Brute-force enumeration refused because an instance is too large."""
