"""Exception types shared across the package."""


class TactileError(ValueError):
    """Base class for validation failures (bad input, violated invariant)."""


class FormatError(TactileError):
    """A file did not match its declared record format."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class DegenerateMotion(TactileError):
    pass


class TooFewMarkers(TactileError):
    pass


class NoUsableMarkers(TactileError):
    pass


class NoContact(TactileError):
    pass


class AxisUndefined(TactileError):
    pass


class TrackingLost(TactileError):
    pass


class DegenerateCloud(TactileError):
    pass


class ControllerError(TactileError):
    pass
