"""Length-prefixed binary protocol between client and server.

Frame layout, both directions:

    length   u32 big-endian   (covers everything after itself)
    first    u8               opcode on requests, status on responses
    payload  length-1 bytes

Requests carry collection names and container-serialized data; responses
carry a status byte and an op-specific payload. One connection can carry any
number of request/response pairs in order.
"""

from __future__ import annotations

import socket
from typing import Sequence

from . import container
from .errors import (
    ConflictError,
    GridsealError,
    NetworkError,
    NotFoundError,
    ProtocolError,
    SchemaError,
)
from .matching import TrapdoorExpr, decode_expr, encode_expr
from .model import CollectionManifest, SealedRecord

PROTOCOL_VERSION = 1

OP_UPLOAD = 0x01
OP_APPEND = 0x02
OP_SEARCH = 0x03
OP_FETCH = 0x04
OP_PING = 0x05

STATUS_OK = 0x00
STATUS_PROTOCOL = 0x01
STATUS_SCHEMA = 0x02
STATUS_CONFLICT = 0x03
STATUS_NOT_FOUND = 0x04
STATUS_SERVER_ERROR = 0x05

# Generous but bounded: a refused 256 MiB frame beats an OOM-killed server.
MAX_FRAME = 1 << 28

_STATUS_FOR_ERROR = [
    (NotFoundError, STATUS_NOT_FOUND),
    (ConflictError, STATUS_CONFLICT),
    (SchemaError, STATUS_SCHEMA),
    (ProtocolError, STATUS_PROTOCOL),
]

_ERROR_FOR_STATUS = {
    STATUS_PROTOCOL: ProtocolError,
    STATUS_SCHEMA: SchemaError,
    STATUS_CONFLICT: ConflictError,
    STATUS_NOT_FOUND: NotFoundError,
    STATUS_SERVER_ERROR: GridsealError,
}


def status_for_exception(exc: Exception) -> int:
    for cls, status in _STATUS_FOR_ERROR:
        if isinstance(exc, cls):
            return status
    return STATUS_SERVER_ERROR


def exception_for_status(status: int, message: str) -> Exception:
    return _ERROR_FOR_STATUS.get(status, GridsealError)(message)


# --- framing ------------------------------------------------------------------


def send_frame(sock: socket.socket, first: int, payload: bytes) -> None:
    frame = (1 + len(payload)).to_bytes(4, "big") + bytes([first]) + payload
    sock.sendall(frame)


def _recv_exact(sock: socket.socket, count: int) -> bytes | None:
    chunks = []
    remaining = count
    while remaining:
        chunk = sock.recv(remaining)
        if not chunk:
            return None
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def recv_frame(sock: socket.socket) -> tuple[int, bytes] | None:
    """Read one frame; None on clean EOF before any byte."""
    header = _recv_exact(sock, 4)
    if header is None:
        return None
    length = int.from_bytes(header, "big")
    if length < 1:
        raise ProtocolError("frame length must be at least 1")
    if length > MAX_FRAME:
        raise ProtocolError(f"frame of {length} bytes exceeds limit {MAX_FRAME}")
    body = _recv_exact(sock, length)
    if body is None:
        raise NetworkError("connection closed mid-frame")
    return body[0], body[1:]


# --- payload codecs ------------------------------------------------------------


def _pack_str(text: str) -> bytes:
    raw = text.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ProtocolError("string field too long")
    return len(raw).to_bytes(2, "big") + raw


def _unpack_str(data: bytes, pos: int) -> tuple[str, int]:
    if pos + 2 > len(data):
        raise ProtocolError(f"truncated string length at offset {pos}")
    slen = int.from_bytes(data[pos : pos + 2], "big")
    pos += 2
    if pos + slen > len(data):
        raise ProtocolError(f"truncated string at offset {pos}")
    return data[pos : pos + slen].decode("utf-8"), pos + slen


def _pack_records(records: Sequence[SealedRecord]) -> bytes:
    out = bytearray(len(records).to_bytes(4, "big"))
    for record in records:
        out += container.encode_record(record)
    return bytes(out)


def _unpack_records(data: bytes, pos: int, n: int) -> tuple[list[SealedRecord], int]:
    if pos + 4 > len(data):
        raise ProtocolError(f"truncated record count at offset {pos}")
    count = int.from_bytes(data[pos : pos + 4], "big")
    pos += 4
    records = []
    try:
        for ordinal in range(count):
            record, pos = container.decode_record(data, pos, n, ordinal)
            records.append(record)
    except GridsealError as exc:
        raise ProtocolError(f"bad record stream: {exc}") from exc
    return records, pos


def _expect_end(data: bytes, pos: int) -> None:
    if pos != len(data):
        raise ProtocolError(f"trailing bytes in payload at offset {pos}")


def encode_upload(
    name: str, manifest: CollectionManifest, records: Sequence[SealedRecord]
) -> bytes:
    mbytes = container.encode_manifest(manifest.redacted())
    return (
        _pack_str(name)
        + len(mbytes).to_bytes(4, "big")
        + mbytes
        + _pack_records(records)
    )


def decode_upload(data: bytes) -> tuple[str, CollectionManifest, list[SealedRecord]]:
    name, pos = _unpack_str(data, 0)
    if pos + 4 > len(data):
        raise ProtocolError(f"truncated manifest length at offset {pos}")
    mlen = int.from_bytes(data[pos : pos + 4], "big")
    pos += 4
    if pos + mlen > len(data):
        raise ProtocolError(f"truncated manifest at offset {pos}")
    try:
        manifest = container.decode_manifest(data[pos : pos + mlen], base_offset=pos)
    except GridsealError as exc:
        raise ProtocolError(f"bad manifest: {exc}") from exc
    pos += mlen
    records, pos = _unpack_records(data, pos, manifest.desired_count)
    _expect_end(data, pos)
    return name, manifest, records


# APPEND reuses the upload payload; record_count there is the append batch size.
encode_append = encode_upload
decode_append = decode_upload


def encode_search(name: str, expr: TrapdoorExpr) -> bytes:
    return _pack_str(name) + encode_expr(expr)


def decode_search(data: bytes) -> tuple[str, TrapdoorExpr]:
    name, pos = _unpack_str(data, 0)
    return name, decode_expr(data[pos:])


def encode_fetch(name: str, ids: Sequence[str]) -> bytes:
    out = bytearray(_pack_str(name))
    out += len(ids).to_bytes(4, "big")
    for ident in ids:
        out += _pack_str(ident)
    return bytes(out)


def decode_fetch(data: bytes) -> tuple[str, list[str]]:
    name, pos = _unpack_str(data, 0)
    if pos + 4 > len(data):
        raise ProtocolError(f"truncated id count at offset {pos}")
    count = int.from_bytes(data[pos : pos + 4], "big")
    pos += 4
    ids = []
    for _ in range(count):
        ident, pos = _unpack_str(data, pos)
        ids.append(ident)
    _expect_end(data, pos)
    return name, ids


def encode_ack(count: int) -> bytes:
    return count.to_bytes(8, "big")


def decode_ack(data: bytes) -> int:
    if len(data) != 8:
        raise ProtocolError("ack payload must be 8 bytes")
    return int.from_bytes(data, "big")


def encode_id_list(ids: Sequence[str]) -> bytes:
    out = bytearray(len(ids).to_bytes(4, "big"))
    for ident in ids:
        out += _pack_str(ident)
    return bytes(out)


def decode_id_list(data: bytes) -> list[str]:
    if len(data) < 4:
        raise ProtocolError("truncated id list")
    count = int.from_bytes(data[0:4], "big")
    pos = 4
    ids = []
    for _ in range(count):
        ident, pos = _unpack_str(data, pos)
        ids.append(ident)
    _expect_end(data, pos)
    return ids


def encode_sealed_records(n: int, records: Sequence[SealedRecord]) -> bytes:
    return n.to_bytes(2, "big") + _pack_records(records)


def decode_sealed_records(data: bytes) -> list[SealedRecord]:
    if len(data) < 2:
        raise ProtocolError("truncated sealed-record payload")
    n = int.from_bytes(data[0:2], "big")
    records, pos = _unpack_records(data, 2, n)
    _expect_end(data, pos)
    return records


def encode_error(message: str) -> bytes:
    return message.encode("utf-8")


def decode_error(data: bytes) -> str:
    return data.decode("utf-8", errors="replace")
