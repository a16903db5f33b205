"""Exception types shared across the package.

All domain errors derive from :class:`NsixError` so the CLI can map them
onto exit codes in one place.
"""


class NsixError(Exception):
    """Base class for all nsix domain errors."""


class ZeroVectorError(NsixError):
    """A vector with no positive weight where one is required."""


class DuplicateFileError(NsixError):
    """A file name was indexed twice."""


class FormatError(NsixError):
    """Malformed input: bad index file, bad JSONL line, bad qrels entry."""


class UnknownDocumentError(NsixError):
    """A doc_id that does not exist in the index."""


class EmptyIndexError(NsixError):
    """A search was issued against an index with no documents."""


class InvalidParamsError(NsixError):
    """Parameter combination outside the supported domain."""
