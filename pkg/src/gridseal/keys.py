"""Master key generation and key-file handling. Client-side only.

This module must never be imported by server code; the test suite walks the
server's import graph to enforce that.
"""

from __future__ import annotations

import os
import secrets
import stat
from pathlib import Path

from .errors import ConfigError, ContractError
from .primitives import BLOCK_SIZE

SUPPORTED_SECURITY_PARAMETER = 128


class MasterKey:
    """The client-held 128-bit secret. Never serialized toward the server."""

    __slots__ = ("raw",)

    def __init__(self, raw: bytes):
        if not isinstance(raw, (bytes, bytearray)) or len(raw) != BLOCK_SIZE:
            raise ContractError("master key must be exactly 16 bytes")
        object.__setattr__(self, "raw", bytes(raw))

    def __setattr__(self, name, value):
        raise AttributeError("MasterKey is immutable")

    def __eq__(self, other):
        return isinstance(other, MasterKey) and secrets.compare_digest(self.raw, other.raw)

    def __hash__(self):
        return hash(self.raw)

    # Key bytes stay out of logs and tracebacks.
    def __repr__(self):
        return "MasterKey(128-bit)"


def keygen(security_parameter: int = SUPPORTED_SECURITY_PARAMETER) -> MasterKey:
    """Sample a fresh master key from the OS CSPRNG.

    Only a 128-bit key is supported; any other parameter is a configuration
    error rather than a silently different scheme.
    """
    if security_parameter != SUPPORTED_SECURITY_PARAMETER:
        raise ConfigError(
            f"unsupported security parameter {security_parameter}; "
            f"only {SUPPORTED_SECURITY_PARAMETER} is defined"
        )
    return MasterKey(secrets.token_bytes(BLOCK_SIZE))


def save_key_file(mk: MasterKey, path: str | Path, hex_mode: bool = False) -> None:
    """Write the key as 16 raw bytes, or 32 hex characters in hex mode.

    The file is created owner-read/write only where the platform supports
    permission bits.
    """
    path = Path(path)
    data = mk.raw.hex().encode("ascii") if hex_mode else mk.raw
    fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
    try:
        os.write(fd, data)
    finally:
        os.close(fd)
    try:
        os.chmod(path, stat.S_IRUSR | stat.S_IWUSR)
    except OSError:
        pass


def load_key_file(path: str | Path) -> MasterKey:
    """Load a key file written by :func:`save_key_file` (either mode)."""
    data = Path(path).read_bytes()
    if len(data) == BLOCK_SIZE:
        return MasterKey(data)
    text = data.decode("ascii", errors="replace").strip()
    if len(text) == 2 * BLOCK_SIZE:
        try:
            return MasterKey(bytes.fromhex(text))
        except ValueError:
            pass
    raise ConfigError(f"{path}: not a 16-byte raw key or 32-char hex key file")
