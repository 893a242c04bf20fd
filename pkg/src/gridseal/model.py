"""Shared data model for records, indexes, schemas, and manifests.

Everything here is safe for the server to import: trapdoors, identifiers,
codeword arrays, and schema metadata. Plaintext record types and the master
key live in client-only modules.

A note on schemas and leakage: the accepted leakage set for the server is
collection name, desired-keyword count n, record count, record identifiers,
nonces, ciphertexts, codewords, and trapdoor trees. Field *names* are not in
that set, so a manifest has two forms: the full client-side form carries the
schema, and the redacted form (the only one that crosses the wire or lands on
the server's disk) carries just n and a 16-byte schema digest used for
append-compatibility checks.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import ContractError, SchemaError
from .primitives import BLOCK_SIZE, hash128

FORMAT_VERSION = 1
CIPHER_AES128GCM = "aes128gcm16"

# A trapdoor is the 16-byte PRF image of a keyword's hash; a codeword is the
# 16-byte PRF image of a record digest under a trapdoor. Both are plain bytes.
Trapdoor = bytes
Codeword = bytes
RecordIndex = tuple[bytes, ...]


@dataclass(frozen=True)
class RecordId:
    """Client-assigned identifier plus its 16-byte digest.

    The digest, not the string, is what PRFs consume; the string is part of
    the accepted leakage (the server returns it as the search result).
    """

    id_string: str
    id_digest: bytes

    @classmethod
    def from_string(cls, id_string: str) -> "RecordId":
        if not id_string:
            raise ContractError("record id must be a non-empty string")
        return cls(id_string=id_string, id_digest=hash128(id_string.encode("utf-8")))


@dataclass(frozen=True)
class CollectionSchema:
    """Ordered field layout of a collection: N total fields, n searchable."""

    all_fields: tuple[str, ...]
    desired_fields: tuple[str, ...]

    def __post_init__(self):
        if not self.desired_fields:
            raise SchemaError("at least one desired field is required")
        if len(set(self.all_fields)) != len(self.all_fields):
            raise SchemaError("duplicate field names in schema")
        missing = [f for f in self.desired_fields if f not in self.all_fields]
        if missing:
            raise SchemaError(f"desired fields not in schema: {missing}")
        if len(set(self.desired_fields)) != len(self.desired_fields):
            raise SchemaError("duplicate desired fields")

    @property
    def total_count(self) -> int:
        return len(self.all_fields)

    @property
    def desired_count(self) -> int:
        return len(self.desired_fields)

    def desired_positions(self) -> tuple[int, ...]:
        return tuple(self.all_fields.index(f) for f in self.desired_fields)

    def is_desired(self, field_name: str) -> bool:
        wanted = field_name.lower()
        return any(f.lower() == wanted for f in self.desired_fields)

    def encode(self) -> bytes:
        """Canonical byte encoding, the input to the schema digest."""
        out = bytearray()
        out += len(self.all_fields).to_bytes(2, "big")
        for name in self.all_fields:
            raw = name.encode("utf-8")
            out += len(raw).to_bytes(2, "big") + raw
        out += len(self.desired_fields).to_bytes(2, "big")
        for pos in self.desired_positions():
            out += pos.to_bytes(2, "big")
        return bytes(out)

    def digest(self) -> bytes:
        return hash128(self.encode())


@dataclass(frozen=True)
class CollectionManifest:
    """Container/collection metadata.

    ``schema`` is None in the redacted form; ``desired_count`` and
    ``schema_digest`` are always present so the server can validate appends
    without learning field names.
    """

    record_count: int
    desired_count: int
    schema_digest: bytes
    schema: CollectionSchema | None = None
    format_version: int = FORMAT_VERSION
    cipher_id: str = CIPHER_AES128GCM

    def __post_init__(self):
        if self.record_count < 0:
            raise ContractError("record_count must be non-negative")
        if self.desired_count < 1:
            raise SchemaError("desired_count must be at least 1")
        if len(self.schema_digest) != BLOCK_SIZE:
            raise ContractError("schema_digest must be 16 bytes")
        if self.schema is not None:
            if self.schema.desired_count != self.desired_count:
                raise SchemaError("manifest desired_count disagrees with schema")
            if self.schema.digest() != self.schema_digest:
                raise SchemaError("manifest schema_digest disagrees with schema")

    @classmethod
    def for_schema(cls, schema: CollectionSchema, record_count: int = 0) -> "CollectionManifest":
        return cls(
            record_count=record_count,
            desired_count=schema.desired_count,
            schema_digest=schema.digest(),
            schema=schema,
        )

    def redacted(self) -> "CollectionManifest":
        """Server-bound form: field names stripped."""
        return replace(self, schema=None)

    def with_count(self, record_count: int) -> "CollectionManifest":
        return replace(self, record_count=record_count)

    def compatible_for_append(self, other: "CollectionManifest") -> bool:
        return (
            self.desired_count == other.desired_count
            and self.schema_digest == other.schema_digest
            and self.cipher_id == other.cipher_id
        )


@dataclass(frozen=True)
class SealedRecord:
    """The unit stored on the server: id in clear, encrypted payload, index."""

    record_id: RecordId
    nonce: bytes
    ciphertext: bytes
    index: RecordIndex

    def __post_init__(self):
        if len(self.nonce) != BLOCK_SIZE:
            raise ContractError("nonce must be 16 bytes")
        if not self.index:
            raise SchemaError("index must have at least one slot")
        for slot in self.index:
            if len(slot) != BLOCK_SIZE:
                raise ContractError("index slots must be 16 bytes")
