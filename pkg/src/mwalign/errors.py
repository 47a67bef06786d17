"""Exception hierarchy shared by all modules."""


class MWAlignError(Exception):
    """Base class for every error raised by this package."""


class DegenerateVector(MWAlignError, ValueError):
    pass


class AntipodalInput(MWAlignError, ValueError):
    pass


class ParseError(MWAlignError, ValueError):
    """Malformed geometry file.

    ``line`` is the 1-based text line (ASCII formats) and ``offset`` the
    element row or byte offset (binary formats), whichever is known.
    """

    def __init__(self, message, path=None, line=None, offset=None):
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"offset {offset}")
        super().__init__(f"{': '.join(where + [message]) if where else message}")
        self.path = path
        self.line = line
        self.offset = offset


class UnsupportedFormat(MWAlignError, ValueError):
    pass


class IoError(MWAlignError, OSError):
    pass


class EmptyGeometry(MWAlignError, ValueError):
    pass


class MissingNormals(MWAlignError, ValueError):
    pass


class TooFewPoints(MWAlignError, ValueError):
    pass


class BadResolution(MWAlignError, ValueError):
    pass


class AlignmentError(MWAlignError):
    """A stage of the alignment failed.

    ``partial`` carries whatever results were computed before the failure
    (e.g. the vertical rotation when only the horizontal stage failed).
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial or {}


class NoHorizontalNormals(AlignmentError):
    pass


class NoVerticalNormals(AlignmentError):
    pass
