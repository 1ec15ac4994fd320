"""Shared exception types."""


class ResourceLimitError(RuntimeError):
    """Raised when a requested enumeration would exceed its configured cap."""


class SpecParseError(ValueError):
    """Raised when a manifold spec string cannot be parsed.

    Carries the character offset of the first bad token in .offset.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset
