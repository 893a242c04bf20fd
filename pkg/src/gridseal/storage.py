"""Plaintext records: CSV ingestion, payload encryption, collection sealing.

The payload cipher is AES-128-GCM with a fresh 16-byte random nonce per
record; the payload key is derived from the master key with a fixed
domain-separation label, so the client holds exactly one secret. The record
id is bound into the authentication tag as associated data: moving a
ciphertext to another id fails decryption.

Ingestion keeps every CSV cell as the raw string it came in as, including
empty cells; an empty value is indexed like any other so every index has
exactly n slots and n stays the only structural fact the server learns.
"""

from __future__ import annotations

import csv
import secrets
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .errors import ConflictError, GridsealError, SchemaError, TamperError
from .keys import MasterKey
from .model import (
    CIPHER_AES128GCM,
    CollectionManifest,
    CollectionSchema,
    RecordId,
    SealedRecord,
)
from .primitives import BLOCK_SIZE, hash128, prf
from .sse import IndexBuilder, Keyword

# Domain-separation labels: the only key derivations in the scheme.
PAYLOAD_KEY_LABEL = b"gridseal/payload/v1"
NONCE_KEY_LABEL = b"gridseal/nonce/v1"

ROW_ORDINAL = "row-ordinal"


@dataclass(frozen=True)
class PlainRecord:
    """One decrypted record: id plus ordered (field, value) pairs."""

    record_id: RecordId
    fields: tuple[tuple[str, str], ...]

    def value_of(self, field_name: str) -> str:
        wanted = field_name.lower()
        for name, value in self.fields:
            if name.lower() == wanted:
                return value
        raise SchemaError(f"record has no field {field_name!r}")


def payload_key(mk: MasterKey) -> bytes:
    return prf(mk.raw, hash128(PAYLOAD_KEY_LABEL))


def nonce_key(mk: MasterKey) -> bytes:
    return prf(mk.raw, hash128(NONCE_KEY_LABEL))


def desired_keywords(record: PlainRecord, schema: CollectionSchema) -> list[Keyword]:
    """The record's keywords in desired-field order, empty values included."""
    by_name = {name: value for name, value in record.fields}
    return [Keyword(field=f, value=by_name[f]) for f in schema.desired_fields]


# --- CSV ingestion -------------------------------------------------------------


def ingest_csv(
    path: str | Path,
    desired_fields: Sequence[str],
    id_source: str = ROW_ORDINAL,
    row_ordinal_offset: int = 0,
) -> tuple[list[PlainRecord], CollectionSchema]:
    """Read a header-ed CSV into records plus the collection schema.

    ``id_source`` is either a column name whose values must be unique, or
    ``"row-ordinal"`` to synthesize ids "row-0", "row-1", ...; the offset
    shifts synthesized ordinals so appended batches stay unique.
    """
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8-sig")
    except OSError as exc:
        raise GridsealError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected a header row") from None
        header = [h.strip() for h in header]
        missing = [f for f in desired_fields if f not in header]
        if missing:
            raise SchemaError(f"{path}: selected fields not in header: {missing}")
        if id_source != ROW_ORDINAL and id_source not in header:
            raise SchemaError(f"{path}: id column {id_source!r} not in header")
        schema = CollectionSchema(
            all_fields=tuple(header), desired_fields=tuple(desired_fields)
        )
        id_pos = header.index(id_source) if id_source != ROW_ORDINAL else None

        records: list[PlainRecord] = []
        seen_ids: dict[str, int] = {}
        duplicates: dict[str, list[int]] = {}
        for ordinal, row in enumerate(reader):
            # Ragged rows happen in real exports; pad/trim to the header.
            cells = list(row[: len(header)]) + [""] * (len(header) - len(row))
            id_string = (
                f"row-{row_ordinal_offset + ordinal}" if id_pos is None else cells[id_pos]
            )
            if not id_string:
                raise ConflictError(f"{path}: row {ordinal} has an empty id value")
            if id_string in seen_ids:
                duplicates.setdefault(id_string, [seen_ids[id_string]]).append(ordinal)
            else:
                seen_ids[id_string] = ordinal
            records.append(
                PlainRecord(
                    record_id=RecordId.from_string(id_string),
                    fields=tuple(zip(header, cells)),
                )
            )
        if duplicates:
            listing = ", ".join(
                f"{ident!r} at rows {rows}" for ident, rows in sorted(duplicates.items())
            )
            raise ConflictError(f"{path}: duplicate id values: {listing}")
    return records, schema


# --- sealing -------------------------------------------------------------------


def _encode_fields(fields: tuple[tuple[str, str], ...]) -> bytes:
    out = bytearray()
    out += len(fields).to_bytes(2, "big")
    for name, value in fields:
        raw_name = name.encode("utf-8")
        raw_value = value.encode("utf-8")
        out += len(raw_name).to_bytes(2, "big") + raw_name
        out += len(raw_value).to_bytes(4, "big") + raw_value
    return bytes(out)


def _decode_fields(data: bytes) -> tuple[tuple[str, str], ...]:
    count = int.from_bytes(data[0:2], "big")
    pos = 2
    fields = []
    for _ in range(count):
        nlen = int.from_bytes(data[pos : pos + 2], "big")
        pos += 2
        name = data[pos : pos + nlen].decode("utf-8")
        pos += nlen
        vlen = int.from_bytes(data[pos : pos + 4], "big")
        pos += 4
        value = data[pos : pos + vlen].decode("utf-8")
        pos += vlen
        fields.append((name, value))
    if pos != len(data):
        raise TamperError("payload padding mismatch after decryption")
    return tuple(fields)


def seal_record(
    record: PlainRecord,
    mk: MasterKey,
    schema: CollectionSchema,
    seed: bytes,
    nonce: bytes | None = None,
    builder: IndexBuilder | None = None,
) -> SealedRecord:
    """Encrypt the record and attach its codeword index.

    ``nonce`` is random unless supplied (tests and the deterministic-nonce
    build mode pass one in). ``builder`` lets batch callers share the
    trapdoor cache.
    """
    names = tuple(name for name, _ in record.fields)
    if names != schema.all_fields:
        raise SchemaError(
            f"record fields {names} do not match schema {schema.all_fields}"
        )
    if builder is None:
        builder = IndexBuilder(mk)
    index = builder.build(desired_keywords(record, schema), record.record_id, seed)
    if nonce is None:
        nonce = secrets.token_bytes(BLOCK_SIZE)
    ciphertext = AESGCM(payload_key(mk)).encrypt(
        nonce, _encode_fields(record.fields), record.record_id.id_string.encode("utf-8")
    )
    return SealedRecord(
        record_id=record.record_id, nonce=nonce, ciphertext=ciphertext, index=index
    )


def unseal_record(sealed: SealedRecord, mk: MasterKey) -> PlainRecord:
    """Authenticated decryption back to the original field list.

    A corrupt ciphertext and a wrong key fail identically.
    """
    try:
        plaintext = AESGCM(payload_key(mk)).decrypt(
            sealed.nonce, sealed.ciphertext, sealed.record_id.id_string.encode("utf-8")
        )
    except InvalidTag:
        raise TamperError(
            f"record {sealed.record_id.id_string!r}: authentication failed"
        ) from None
    return PlainRecord(record_id=sealed.record_id, fields=_decode_fields(plaintext))


def deterministic_nonce(mk: MasterKey, record_id: RecordId) -> bytes:
    """Test-profile nonce: stable per (key, id) so rebuilds are byte-identical.

    Safe only because each id is sealed once per container; production
    sealing always uses fresh random nonces.
    """
    return prf(nonce_key(mk), record_id.id_digest)


def deterministic_seed_source(seed: bytes) -> Callable[[], bytes]:
    """Per-record permutation seeds expanded from one test seed (counter mode)."""
    counter = 0

    def next_seed() -> bytes:
        nonlocal counter
        value = prf(seed, counter.to_bytes(BLOCK_SIZE, "big"))
        counter += 1
        return value

    return next_seed


def seal_collection(
    records: Sequence[PlainRecord],
    mk: MasterKey,
    schema: CollectionSchema,
    seed_source: Callable[[], bytes] | None = None,
    use_deterministic_nonce: bool = False,
) -> tuple[CollectionManifest, list[SealedRecord]]:
    """Seal a whole ingestion batch under one schema.

    ``seed_source`` supplies per-record permutation seeds (defaults to the
    OS CSPRNG); inject a fixed stream for reproducible containers.
    """
    if seed_source is None:
        seed_source = lambda: secrets.token_bytes(BLOCK_SIZE)
    builder = IndexBuilder(mk)
    sealed = []
    seen: set[str] = set()
    for record in records:
        if record.record_id.id_string in seen:
            raise ConflictError(f"duplicate record id {record.record_id.id_string!r}")
        seen.add(record.record_id.id_string)
        nonce = deterministic_nonce(mk, record.record_id) if use_deterministic_nonce else None
        sealed.append(
            seal_record(record, mk, schema, seed_source(), nonce=nonce, builder=builder)
        )
    manifest = CollectionManifest.for_schema(schema, record_count=len(sealed))
    return manifest, sealed
