"""The honest-but-curious storage server.

Holds sealed collections, answers trapdoor searches, and serves ciphertexts
back. Nothing in this module or anything it imports can represent a master
key, a plaintext record, or a keyword; the test suite walks the import graph
to keep it that way.

Persistence per collection: ``<root>/<name>/data.gsl1`` plus an append
journal ``journal.gsl1`` that is folded into the container on startup.
Appends are serialized per collection and made durable before the ack;
searches and fetches run against consistent snapshots, so a concurrent
reader sees an append entirely or not at all.
"""

from __future__ import annotations

import os
import re
import socketserver
import threading
from pathlib import Path
from typing import Sequence

from . import container, protocol
from .errors import (
    ConflictError,
    GridsealError,
    NotFoundError,
    ProtocolError,
)
from .matching import TrapdoorExpr, eval_query_collection
from .model import CollectionManifest, SealedRecord

MAX_SEARCH_RESULTS = 1_000_000

_NAME_RE = re.compile(r"[A-Za-z0-9][A-Za-z0-9_.-]{0,127}$")


def _check_name(name: str) -> str:
    # Collection names become directory names; keep them path-safe.
    if not _NAME_RE.match(name):
        raise ProtocolError(f"illegal collection name {name!r}")
    return name


def _fsync_write(path: Path, data: bytes) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


class _Collection:
    """One collection's in-memory state plus its on-disk files."""

    def __init__(self, directory: Path, manifest: CollectionManifest, records: list[SealedRecord]):
        self.directory = directory
        self.manifest = manifest
        self.records = records
        self.ids = {r.record_id.id_string for r in records}
        self.lock = threading.Lock()

    @property
    def data_path(self) -> Path:
        return self.directory / "data.gsl1"

    @property
    def journal_path(self) -> Path:
        return self.directory / "journal.gsl1"

    def snapshot(self) -> list[SealedRecord]:
        with self.lock:
            return list(self.records)

    def append(self, new_records: Sequence[SealedRecord]) -> int:
        with self.lock:
            batch_ids = set()
            for record in new_records:
                ident = record.record_id.id_string
                if ident in self.ids or ident in batch_ids:
                    raise ConflictError(f"duplicate record id {ident!r}")
                batch_ids.add(ident)
            # Durable before ack: journal the batch, fsync, then publish.
            fresh = not self.journal_path.exists()
            with open(self.journal_path, "ab") as fh:
                if fresh:
                    fh.write(container.journal_header(self.manifest.desired_count))
                for record in new_records:
                    container.append_journal_record(fh, record)
                fh.flush()
                os.fsync(fh.fileno())
            self.records.extend(new_records)
            self.ids |= batch_ids
            self.manifest = self.manifest.with_count(len(self.records))
            return len(new_records)


class ServerState:
    """All collections under one persistence root."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._collections: dict[str, _Collection] = {}
        self._lock = threading.Lock()
        self._load()

    def _load(self) -> None:
        for entry in sorted(self.root.iterdir()):
            data_path = entry / "data.gsl1"
            if not entry.is_dir() or not data_path.exists():
                continue
            manifest, records = container.read_container(data_path)
            journal_path = entry / "journal.gsl1"
            if journal_path.exists():
                n, extra = container.read_journal(journal_path.read_bytes())
                if n != manifest.desired_count:
                    raise ProtocolError(
                        f"{journal_path}: journal n={n} disagrees with container"
                    )
                records.extend(extra)
                manifest = manifest.with_count(len(records))
                _fsync_write(data_path, container.encode_container(manifest, records))
                journal_path.unlink()
            self._collections[entry.name] = _Collection(entry, manifest, records)

    def collection_names(self) -> list[str]:
        with self._lock:
            return sorted(self._collections)

    def _get(self, name: str) -> _Collection:
        with self._lock:
            col = self._collections.get(name)
        if col is None:
            raise NotFoundError(f"unknown collection {name!r}")
        return col

    # --- request handlers ---

    def handle_upload(
        self, name: str, manifest: CollectionManifest, records: Sequence[SealedRecord]
    ) -> int:
        _check_name(name)
        if manifest.record_count != len(records):
            raise ProtocolError(
                f"manifest record_count {manifest.record_count} != {len(records)} records sent"
            )
        seen: set[str] = set()
        for record in records:
            ident = record.record_id.id_string
            if ident in seen:
                raise ConflictError(f"duplicate record id {ident!r} in upload")
            seen.add(ident)
        manifest = manifest.redacted()
        with self._lock:
            if name in self._collections:
                raise ConflictError(f"collection {name!r} already exists")
            directory = self.root / name
            directory.mkdir(parents=True, exist_ok=True)
            _fsync_write(
                directory / "data.gsl1",
                container.encode_container(manifest, records),
            )
            self._collections[name] = _Collection(directory, manifest, list(records))
        return len(records)

    def handle_append(
        self, name: str, manifest: CollectionManifest, records: Sequence[SealedRecord]
    ) -> int:
        col = self._get(_check_name(name))
        if not col.manifest.compatible_for_append(manifest):
            raise ProtocolError(
                "append manifest does not match collection "
                f"(n={manifest.desired_count} vs {col.manifest.desired_count}, "
                "or schema digest / cipher mismatch)"
            )
        if manifest.record_count != len(records):
            raise ProtocolError(
                f"manifest record_count {manifest.record_count} != {len(records)} records sent"
            )
        return col.append(records)

    def handle_search(self, name: str, expr: TrapdoorExpr) -> list[str]:
        col = self._get(name)
        matches = eval_query_collection(expr, col.snapshot())
        return [rid.id_string for rid in matches[:MAX_SEARCH_RESULTS]]

    def handle_fetch(self, name: str, ids: Sequence[str]) -> list[SealedRecord]:
        col = self._get(name)
        snapshot = col.snapshot()
        by_id = {r.record_id.id_string: r for r in snapshot}
        missing = [ident for ident in ids if ident not in by_id]
        if missing:
            raise NotFoundError(f"unknown record ids: {missing}")
        return [by_id[ident] for ident in ids]

    def collection_n(self, name: str) -> int:
        return self._get(name).manifest.desired_count


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        state: ServerState = self.server.state  # type: ignore[attr-defined]
        sock = self.request
        while True:
            try:
                frame = protocol.recv_frame(sock)
            except (ProtocolError, GridsealError):
                # Unframeable stream: nothing sane to reply to.
                return
            except OSError:
                return
            if frame is None:
                return
            opcode, payload = frame
            try:
                status, body = self._dispatch(state, opcode, payload)
            except GridsealError as exc:
                status = protocol.status_for_exception(exc)
                body = protocol.encode_error(str(exc))
            except Exception as exc:  # pragma: no cover - defensive
                status = protocol.STATUS_SERVER_ERROR
                body = protocol.encode_error(f"internal error: {exc}")
            try:
                protocol.send_frame(sock, status, body)
            except OSError:
                return

    @staticmethod
    def _dispatch(state: ServerState, opcode: int, payload: bytes) -> tuple[int, bytes]:
        if opcode == protocol.OP_PING:
            return protocol.STATUS_OK, bytes([protocol.PROTOCOL_VERSION])
        if opcode == protocol.OP_UPLOAD:
            name, manifest, records = protocol.decode_upload(payload)
            count = state.handle_upload(name, manifest, records)
            return protocol.STATUS_OK, protocol.encode_ack(count)
        if opcode == protocol.OP_APPEND:
            name, manifest, records = protocol.decode_append(payload)
            count = state.handle_append(name, manifest, records)
            return protocol.STATUS_OK, protocol.encode_ack(count)
        if opcode == protocol.OP_SEARCH:
            name, expr = protocol.decode_search(payload)
            ids = state.handle_search(name, expr)
            return protocol.STATUS_OK, protocol.encode_id_list(ids)
        if opcode == protocol.OP_FETCH:
            name, ids = protocol.decode_fetch(payload)
            records = state.handle_fetch(name, ids)
            n = state.collection_n(name)
            return protocol.STATUS_OK, protocol.encode_sealed_records(n, records)
        raise ProtocolError(f"unknown opcode {opcode}")


class GridsealServer:
    """TCP front end over a :class:`ServerState`."""

    def __init__(self, root: str | Path, host: str = "127.0.0.1", port: int = 0):
        self.state = ServerState(root)

        class _TCP(socketserver.ThreadingTCPServer):
            allow_reuse_address = True
            daemon_threads = True

        self._tcp = _TCP((host, port), _Handler)
        self._tcp.state = self.state  # type: ignore[attr-defined]
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self._tcp.server_address[:2]

    def start(self) -> "GridsealServer":
        self._thread = threading.Thread(target=self._tcp.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self._tcp.serve_forever()

    def shutdown(self) -> None:
        self._tcp.shutdown()
        self._tcp.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
