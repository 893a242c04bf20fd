"""Exception hierarchy shared by client and server code."""

from __future__ import annotations


class GridsealError(Exception):
    """Base class for every error this package raises on purpose."""


class ContractError(GridsealError):
    """An argument violated a primitive's contract (wrong length, bad range)."""


class ConfigError(GridsealError):
    """Unsupported parameter or bad operator-supplied configuration."""


class SchemaError(GridsealError):
    """Record, keyword, or query does not match the collection schema."""


class ConflictError(GridsealError):
    """Duplicate record identifier or collection name."""


class QuerySyntaxError(GridsealError):
    """Query text failed to parse.

    ``position`` is the character offset of the offending token,
    ``token_ordinal`` its 1-based index in the token stream.
    """

    def __init__(self, message: str, position: int, token_ordinal: int):
        super().__init__(message)
        self.position = position
        self.token_ordinal = token_ordinal


class FormatError(GridsealError):
    """Container or journal bytes are malformed.

    ``offset`` is the byte offset where parsing failed; ``record_ordinal``
    is the 0-based index of the record being parsed, when inside one.
    """

    def __init__(self, message: str, offset: int, record_ordinal: int | None = None):
        super().__init__(message)
        self.offset = offset
        self.record_ordinal = record_ordinal


class TamperError(GridsealError):
    """Authenticated decryption failed: corrupt ciphertext or wrong key."""


class ProtocolError(GridsealError):
    """Malformed wire message or illegal request."""


class NotFoundError(GridsealError):
    """Unknown collection or record identifier."""


class NetworkError(GridsealError):
    """Transport-level failure talking to the server."""
