"""Network client for the storage server.

Thin request/response wrapper over the wire protocol. A transcript recorder
can be attached to capture every byte that crosses the socket; the leakage
tests scan those transcripts for planted plaintext.
"""

from __future__ import annotations

import socket
from typing import Sequence

from . import protocol
from .errors import NetworkError
from .matching import TrapdoorExpr
from .model import CollectionManifest, SealedRecord


class Transcript:
    """Raw bytes sent and received over one connection."""

    def __init__(self):
        self.sent = bytearray()
        self.received = bytearray()

    def all_bytes(self) -> bytes:
        return bytes(self.sent) + bytes(self.received)


class _RecordingSocket:
    """Socket proxy that copies traffic into a transcript."""

    def __init__(self, sock: socket.socket, transcript: Transcript):
        self._sock = sock
        self._transcript = transcript

    def sendall(self, data: bytes) -> None:
        self._transcript.sent += data
        self._sock.sendall(data)

    def recv(self, size: int) -> bytes:
        data = self._sock.recv(size)
        self._transcript.received += data
        return data

    def close(self) -> None:
        self._sock.close()


class ServerConnection:
    """One client connection; usable for many sequential requests."""

    def __init__(
        self,
        address: tuple[str, int],
        timeout: float = 30.0,
        transcript: Transcript | None = None,
    ):
        try:
            raw = socket.create_connection(address, timeout=timeout)
        except OSError as exc:
            raise NetworkError(f"cannot connect to {address[0]}:{address[1]}: {exc}") from exc
        self._sock = _RecordingSocket(raw, transcript) if transcript else raw

    def close(self) -> None:
        self._sock.close()

    def __enter__(self) -> "ServerConnection":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def _roundtrip(self, opcode: int, payload: bytes) -> bytes:
        try:
            protocol.send_frame(self._sock, opcode, payload)
            frame = protocol.recv_frame(self._sock)
        except OSError as exc:
            raise NetworkError(f"connection failed: {exc}") from exc
        if frame is None:
            raise NetworkError("server closed the connection")
        status, body = frame
        if status != protocol.STATUS_OK:
            raise protocol.exception_for_status(status, protocol.decode_error(body))
        return body

    def ping(self) -> int:
        body = self._roundtrip(protocol.OP_PING, b"")
        if len(body) != 1:
            raise NetworkError("malformed ping response")
        return body[0]

    def upload(
        self,
        name: str,
        manifest: CollectionManifest,
        records: Sequence[SealedRecord],
    ) -> int:
        body = self._roundtrip(
            protocol.OP_UPLOAD, protocol.encode_upload(name, manifest, records)
        )
        return protocol.decode_ack(body)

    def append(
        self,
        name: str,
        manifest: CollectionManifest,
        records: Sequence[SealedRecord],
    ) -> int:
        body = self._roundtrip(
            protocol.OP_APPEND, protocol.encode_append(name, manifest, records)
        )
        return protocol.decode_ack(body)

    def search(self, name: str, expr: TrapdoorExpr) -> list[str]:
        body = self._roundtrip(protocol.OP_SEARCH, protocol.encode_search(name, expr))
        return protocol.decode_id_list(body)

    def fetch(self, name: str, ids: Sequence[str]) -> list[SealedRecord]:
        body = self._roundtrip(protocol.OP_FETCH, protocol.encode_fetch(name, ids))
        return protocol.decode_sealed_records(body)
