"""Bit-exact serialization of sealed collections (the GSL1 container).

Layout, all integers big-endian:

    magic           4 bytes  b"GSL1"
    manifest_len    u32
    manifest:
        format_version  u16
        cipher_id       u8 length + ascii
        record_count    u64
        desired_count   u16          (n: slots per index)
        schema_digest   16 bytes
        schema_mode     u8           0 = redacted, 1 = field names present
        [schema]        CollectionSchema.encode() when mode 1
    record, repeated record_count times:
        id_string       u16 length + utf-8
        nonce           16 bytes
        ciphertext      u32 length + bytes
        index           n x 16 bytes

The index payload of a container is therefore exactly record_count * n * 16
bytes. A journal file (magic b"GSJ1", then u16 n, then records back-to-back)
holds appends between compactions.

The hex-CSV writer mirrors the same data as printable text for demos; it is
documented as space-inefficient and is never read back.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import BinaryIO, Sequence

from .errors import FormatError
from .model import (
    FORMAT_VERSION,
    CollectionManifest,
    CollectionSchema,
    RecordId,
    SealedRecord,
)
from .primitives import BLOCK_SIZE, hash128

MAGIC = b"GSL1"
JOURNAL_MAGIC = b"GSJ1"


def _need(data: bytes, pos: int, count: int, what: str, ordinal: int | None = None) -> None:
    if pos + count > len(data):
        raise FormatError(
            f"truncated {what}: need {count} bytes at offset {pos}, have {len(data) - pos}",
            offset=pos,
            record_ordinal=ordinal,
        )


def encode_manifest(manifest: CollectionManifest) -> bytes:
    out = bytearray()
    out += manifest.format_version.to_bytes(2, "big")
    cipher = manifest.cipher_id.encode("ascii")
    out += len(cipher).to_bytes(1, "big") + cipher
    out += manifest.record_count.to_bytes(8, "big")
    out += manifest.desired_count.to_bytes(2, "big")
    out += manifest.schema_digest
    if manifest.schema is None:
        out += b"\x00"
    else:
        out += b"\x01" + manifest.schema.encode()
    return bytes(out)


def decode_manifest(data: bytes, base_offset: int = 0) -> CollectionManifest:
    pos = 0

    def need(count: int, what: str) -> None:
        _need(data, pos, count, what)

    need(2, "manifest version")
    version = int.from_bytes(data[pos : pos + 2], "big")
    pos += 2
    if version != FORMAT_VERSION:
        raise FormatError(
            f"unsupported format version {version} (expected {FORMAT_VERSION})",
            offset=base_offset + pos - 2,
        )
    need(1, "cipher id length")
    clen = data[pos]
    pos += 1
    need(clen, "cipher id")
    cipher_id = data[pos : pos + clen].decode("ascii")
    pos += clen
    need(8, "record count")
    record_count = int.from_bytes(data[pos : pos + 8], "big")
    pos += 8
    need(2, "desired count")
    desired_count = int.from_bytes(data[pos : pos + 2], "big")
    pos += 2
    need(BLOCK_SIZE, "schema digest")
    schema_digest = bytes(data[pos : pos + BLOCK_SIZE])
    pos += BLOCK_SIZE
    need(1, "schema mode")
    mode = data[pos]
    pos += 1
    schema = None
    if mode == 1:
        schema, pos = _decode_schema(data, pos, base_offset)
        if schema.digest() != schema_digest:
            raise FormatError("schema digest mismatch", offset=base_offset + pos)
    elif mode != 0:
        raise FormatError(f"unknown schema mode {mode}", offset=base_offset + pos - 1)
    if pos != len(data):
        raise FormatError(
            f"trailing bytes in manifest at offset {pos}", offset=base_offset + pos
        )
    return CollectionManifest(
        record_count=record_count,
        desired_count=desired_count,
        schema_digest=schema_digest,
        schema=schema,
        format_version=version,
        cipher_id=cipher_id,
    )


def _decode_schema(data: bytes, pos: int, base: int) -> tuple[CollectionSchema, int]:
    _need(data, pos, 2, "field count")
    total = int.from_bytes(data[pos : pos + 2], "big")
    pos += 2
    names = []
    for _ in range(total):
        _need(data, pos, 2, "field name length")
        nlen = int.from_bytes(data[pos : pos + 2], "big")
        pos += 2
        _need(data, pos, nlen, "field name")
        names.append(data[pos : pos + nlen].decode("utf-8"))
        pos += nlen
    _need(data, pos, 2, "desired count")
    desired = int.from_bytes(data[pos : pos + 2], "big")
    pos += 2
    positions = []
    for _ in range(desired):
        _need(data, pos, 2, "desired position")
        idx = int.from_bytes(data[pos : pos + 2], "big")
        if idx >= total:
            raise FormatError(f"desired position {idx} out of range", offset=base + pos)
        positions.append(idx)
        pos += 2
    return (
        CollectionSchema(
            all_fields=tuple(names),
            desired_fields=tuple(names[i] for i in positions),
        ),
        pos,
    )


def encode_record(record: SealedRecord) -> bytes:
    out = bytearray()
    raw_id = record.record_id.id_string.encode("utf-8")
    out += len(raw_id).to_bytes(2, "big") + raw_id
    out += record.nonce
    out += len(record.ciphertext).to_bytes(4, "big") + record.ciphertext
    for slot in record.index:
        out += slot
    return bytes(out)


def decode_record(
    data: bytes, pos: int, n: int, ordinal: int
) -> tuple[SealedRecord, int]:
    _need(data, pos, 2, f"record {ordinal} id length", ordinal)
    idlen = int.from_bytes(data[pos : pos + 2], "big")
    pos += 2
    _need(data, pos, idlen, f"record {ordinal} id", ordinal)
    id_string = data[pos : pos + idlen].decode("utf-8")
    pos += idlen
    _need(data, pos, BLOCK_SIZE, f"record {ordinal} nonce", ordinal)
    nonce = bytes(data[pos : pos + BLOCK_SIZE])
    pos += BLOCK_SIZE
    _need(data, pos, 4, f"record {ordinal} ciphertext length", ordinal)
    ctlen = int.from_bytes(data[pos : pos + 4], "big")
    pos += 4
    _need(data, pos, ctlen, f"record {ordinal} ciphertext", ordinal)
    ciphertext = bytes(data[pos : pos + ctlen])
    pos += ctlen
    _need(data, pos, n * BLOCK_SIZE, f"record {ordinal} index slots", ordinal)
    index = tuple(
        bytes(data[pos + i * BLOCK_SIZE : pos + (i + 1) * BLOCK_SIZE]) for i in range(n)
    )
    pos += n * BLOCK_SIZE
    record = SealedRecord(
        record_id=RecordId(id_string=id_string, id_digest=hash128(id_string.encode("utf-8"))),
        nonce=nonce,
        ciphertext=ciphertext,
        index=index,
    )
    return record, pos


def encode_container(
    manifest: CollectionManifest, records: Sequence[SealedRecord]
) -> bytes:
    if manifest.record_count != len(records):
        raise FormatError(
            f"manifest says {manifest.record_count} records, got {len(records)}",
            offset=0,
        )
    mbytes = encode_manifest(manifest)
    out = bytearray(MAGIC)
    out += len(mbytes).to_bytes(4, "big")
    out += mbytes
    for record in records:
        if len(record.index) != manifest.desired_count:
            raise FormatError(
                f"record {record.record_id.id_string} has {len(record.index)} slots, "
                f"manifest says {manifest.desired_count}",
                offset=len(out),
            )
        out += encode_record(record)
    return bytes(out)


def decode_container(data: bytes) -> tuple[CollectionManifest, list[SealedRecord]]:
    if data[:4] != MAGIC:
        raise FormatError(f"bad magic {data[:4]!r} (expected {MAGIC!r})", offset=0)
    pos = 4
    _need(data, pos, 4, "manifest length")
    mlen = int.from_bytes(data[pos : pos + 4], "big")
    pos += 4
    _need(data, pos, mlen, "manifest")
    manifest = decode_manifest(data[pos : pos + mlen], base_offset=pos)
    pos += mlen
    records = []
    for ordinal in range(manifest.record_count):
        record, pos = decode_record(data, pos, manifest.desired_count, ordinal)
        records.append(record)
    if pos != len(data):
        raise FormatError(f"trailing bytes after last record at offset {pos}", offset=pos)
    return manifest, records


def write_container(
    manifest: CollectionManifest, records: Sequence[SealedRecord], path: str | Path
) -> None:
    Path(path).write_bytes(encode_container(manifest, records))


def read_container(path: str | Path) -> tuple[CollectionManifest, list[SealedRecord]]:
    return decode_container(Path(path).read_bytes())


# --- append journal -----------------------------------------------------------


def journal_header(n: int) -> bytes:
    return JOURNAL_MAGIC + n.to_bytes(2, "big")


def append_journal_record(fh: BinaryIO, record: SealedRecord) -> None:
    fh.write(encode_record(record))


def read_journal(data: bytes) -> tuple[int, list[SealedRecord]]:
    """Parse a journal blob; returns (n, records)."""
    if data[:4] != JOURNAL_MAGIC:
        raise FormatError(f"bad journal magic {data[:4]!r}", offset=0)
    _need(data, 4, 2, "journal slot count")
    n = int.from_bytes(data[4:6], "big")
    pos = 6
    records = []
    ordinal = 0
    while pos < len(data):
        record, pos = decode_record(data, pos, n, ordinal)
        records.append(record)
        ordinal += 1
    return n, records


# --- hex CSV demo writer -------------------------------------------------------


def write_hex_csv(records: Sequence[SealedRecord], path: str | Path) -> None:
    """Demo output: one row per record, everything hex-encoded.

    Roughly doubles the stored size versus the binary container; demo only.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "nonce_hex", "ciphertext_hex", "index_hex"])
        for record in records:
            writer.writerow(
                [
                    record.record_id.id_string,
                    record.nonce.hex(),
                    record.ciphertext.hex(),
                    b"".join(record.index).hex(),
                ]
            )


def render_hex_csv(records: Sequence[SealedRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["id", "nonce_hex", "ciphertext_hex", "index_hex"])
    for record in records:
        writer.writerow(
            [
                record.record_id.id_string,
                record.nonce.hex(),
                record.ciphertext.hex(),
                b"".join(record.index).hex(),
            ]
        )
    return buf.getvalue()
