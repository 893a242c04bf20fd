"""Bit-exact cryptographic primitives.

Three constructions, all fixed to 128-bit widths:

- ``hash128``: SHA-256 truncated to its first 16 bytes.
- ``prf``: one raw AES-128 block encryption (no mode, no padding).
  A single construction covers both PRF roles in the scheme, since both
  map a 16-byte block to a 16-byte block under a 16-byte key.
- ``seeded_permutation``: Fisher-Yates driven by an AES keystream expanded
  from a 16-byte seed in counter fashion, with rejection sampling so every
  permutation is equally likely.

All outputs are deterministic functions of their inputs and are pinned by
golden-vector tests; changing any byte here is a format break.
"""

from __future__ import annotations

import hashlib

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from .errors import ContractError

BLOCK_SIZE = 16
MAX_PERMUTATION_SIZE = 1 << 16


def hash128(message: bytes) -> bytes:
    """Map a byte string of any length to 16 bytes (truncated SHA-256)."""
    return hashlib.sha256(message).digest()[:BLOCK_SIZE]


def _check_block(name: str, value: bytes) -> None:
    if not isinstance(value, (bytes, bytearray)) or len(value) != BLOCK_SIZE:
        raise ContractError(f"{name} must be exactly {BLOCK_SIZE} bytes")


def prf(key: bytes, block: bytes) -> bytes:
    """Encrypt one 16-byte block with AES-128 under ``key``.

    Deterministic and, per key, a permutation of the block space.
    """
    _check_block("key", key)
    _check_block("input", block)
    return Cipher(algorithms.AES(bytes(key)), modes.ECB()).encryptor().update(bytes(block))


class BlockPrf:
    """Reusable keyed instance of ``prf`` for bulk evaluation.

    AES in raw block mode has no chaining state, so one cipher object can
    encrypt any number of independent blocks; this is ~300x faster than
    per-call setup and is what keeps collection scans linear with a small
    constant.
    """

    def __init__(self, key: bytes):
        _check_block("key", key)
        self._enc = Cipher(algorithms.AES(bytes(key)), modes.ECB()).encryptor()

    def eval(self, block: bytes) -> bytes:
        _check_block("input", block)
        return self._enc.update(bytes(block))

    def eval_many(self, blocks: bytes) -> bytes:
        """Encrypt a concatenation of 16-byte blocks in one pass."""
        if len(blocks) % BLOCK_SIZE != 0:
            raise ContractError("blocks must be a multiple of 16 bytes")
        return self._enc.update(bytes(blocks))


class _Keystream:
    """Deterministic byte stream: AES_seed(counter) for counter = 0, 1, ...

    Counters are encoded as 16-byte big-endian integers. Blocks are produced
    in batches so the expansion stays one cipher call per batch.
    """

    _BATCH_BLOCKS = 64

    def __init__(self, seed: bytes):
        self._prf = BlockPrf(seed)
        self._counter = 0
        self._buf = b""
        self._pos = 0

    def _refill(self) -> None:
        counters = b"".join(
            (self._counter + i).to_bytes(BLOCK_SIZE, "big") for i in range(self._BATCH_BLOCKS)
        )
        self._counter += self._BATCH_BLOCKS
        self._buf = self._prf.eval_many(counters)
        self._pos = 0

    def next_u64(self) -> int:
        if self._pos >= len(self._buf):
            self._refill()
        value = int.from_bytes(self._buf[self._pos : self._pos + 8], "big")
        self._pos += 8
        return value


def seeded_permutation(seed: bytes, n: int) -> list[int]:
    """Return a permutation of ``{0, ..., n-1}``, deterministic given ``seed``.

    Fisher-Yates with each draw taken from the seed keystream as an unsigned
    64-bit integer; draws >= the largest multiple of the bound are rejected,
    so the result is uniform over all n! permutations for a uniform seed.
    """
    _check_block("seed", seed)
    if not 1 <= n <= MAX_PERMUTATION_SIZE:
        raise ContractError(f"n must be in [1, {MAX_PERMUTATION_SIZE}], got {n}")
    stream = _Keystream(seed)
    perm = list(range(n))
    for i in range(n - 1, 0, -1):
        bound = i + 1
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            r = stream.next_u64()
            if r < limit:
                j = r % bound
                break
        perm[i], perm[j] = perm[j], perm[i]
    return perm
