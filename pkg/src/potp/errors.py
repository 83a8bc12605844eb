"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    pass


class NotPSDError(ValueError):
    pass


class AlreadyConsumedError(RuntimeError):
    """A one-time object was used a second time."""


class ResourceLimitError(RuntimeError):
    pass


class UnsupportedTopologyError(ValueError):
    pass


class ParseError(ValueError):
    """Malformed wire frame; ``offset`` is the byte position of the fault."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class ProtocolAbort(RuntimeError):
    pass
