"""Exception types shared across the package."""


class AttriprofError(Exception):
    """Base class for all package errors."""


class FormatError(AttriprofError):
    """A file does not parse under its declared format.

    Carries the byte offset at which parsing failed when known.
    """

    def __init__(self, message, path=None, offset=None):
        self.path = path
        self.offset = offset
        parts = [message]
        if path is not None:
            parts.append(f"path={path}")
        if offset is not None:
            parts.append(f"byte_offset={offset}")
        super().__init__(": ".join(str(p) for p in parts))


class RangeError(AttriprofError):
    """Values cannot be represented in the requested output format."""


class ValidationError(AttriprofError):
    """Inputs or configuration violate a documented contract."""


class ExtentError(ValidationError):
    """Two rasters that must share width/height do not."""
