"""Exception types shared across the package."""


class ClonalityError(Exception):
    """Base class for all errors raised by this package."""


class EmptyReplicate(ClonalityError):
    """A replicate has zero total reads."""


class TooFewReplicates(ClonalityError):
    """Fewer replicates than the operation requires."""


class DegenerateWeights(ClonalityError):
    """All pairwise weights are zero; the weighted average is undefined."""


class SingularCovariance(ClonalityError):
    """A covariance matrix could not be solved against the ones vector."""


class DegenerateDraw(ClonalityError):
    """A simulated replicate came back empty after the retry budget."""


class ParseError(ClonalityError):
    """Base class for input-file errors; carries file and line context."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        where = ""
        if path is not None:
            where = f" [{path}" + (f":{line}" if line is not None else "") + "]"
        super().__init__(message + where)
        self.path = path
        self.line = line


class MalformedLine(ParseError):
    """A line does not match the expected tab-separated layout."""


class NegativeCount(ParseError):
    """A count field is negative."""


class DuplicateCloneId(ParseError):
    """The same clone id appears twice within one replicate."""
