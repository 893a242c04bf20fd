"""Client-side scheme operations: keywords, trapdoors, index construction.

A keyword is a (field, value) pair; binding the field name into the canonical
form prevents a value like "1998" in one column from matching the same text
in another. The canonical byte form is

    lowercase(field_name) || 0x1F || trimmed(value)

so field matching is case-insensitive while values are compared exactly;
trimming is the only normalization applied to values.

The trapdoor of a keyword w is AES_MK(h(w)); the codeword a record carries
for w is AES_{T_w}(h(id)). Each record's n codewords are shuffled into their
index slots by a fresh seeded permutation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import ContractError, SchemaError
from .keys import MasterKey
from .model import RecordId, RecordIndex, Trapdoor
from .primitives import BLOCK_SIZE, BlockPrf, hash128, prf, seeded_permutation

KEYWORD_SEPARATOR = b"\x1f"


@dataclass(frozen=True)
class Keyword:
    """One searchable (field, value) pair of a record."""

    field: str
    value: str

    def __post_init__(self):
        if not self.field:
            raise SchemaError("keyword field name must be non-empty")
        if "\x1f" in self.field:
            raise SchemaError("keyword field name must not contain the 0x1F separator")

    def canonical(self) -> bytes:
        return (
            self.field.lower().encode("utf-8")
            + KEYWORD_SEPARATOR
            + self.value.strip().encode("utf-8")
        )


def trapdoor(mk: MasterKey, keyword: Keyword) -> Trapdoor:
    """T_w: the only keyword-derived value the server ever sees."""
    return prf(mk.raw, hash128(keyword.canonical()))


def build_index(
    keywords: Sequence[Keyword],
    record_id: RecordId,
    mk: MasterKey,
    seed: bytes,
) -> RecordIndex:
    """Compute the record's codewords and place them in permuted slots.

    ``keywords`` must be the record's desired keywords in schema order; the
    seed decides only slot placement, never codeword values.
    """
    return IndexBuilder(mk).build(keywords, record_id, seed)


class IndexBuilder:
    """Index construction with per-keyword trapdoor caching.

    Real collections repeat values constantly (states, months, status
    flags); caching the trapdoor and its keyed cipher makes batch builds
    linear in records rather than in AES key schedules.
    """

    def __init__(self, mk: MasterKey):
        self._mk = mk
        self._cache: dict[bytes, tuple[Trapdoor, BlockPrf]] = {}

    def trapdoor_for(self, keyword: Keyword) -> Trapdoor:
        return self._entry(keyword)[0]

    def codeword_for(self, keyword: Keyword, record_id: RecordId) -> bytes:
        return self._entry(keyword)[1].eval(record_id.id_digest)

    def _entry(self, keyword: Keyword) -> tuple[Trapdoor, BlockPrf]:
        canon = keyword.canonical()
        entry = self._cache.get(canon)
        if entry is None:
            t = trapdoor(self._mk, keyword)
            entry = (t, BlockPrf(t))
            self._cache[canon] = entry
        return entry

    def build(
        self, keywords: Sequence[Keyword], record_id: RecordId, seed: bytes
    ) -> RecordIndex:
        if not keywords:
            raise SchemaError("a record must have at least one desired keyword")
        if len(seed) != BLOCK_SIZE:
            raise ContractError("seed must be 16 bytes")
        seen = set()
        for kw in keywords:
            canon = kw.canonical()
            if canon in seen:
                raise SchemaError(f"duplicate keyword for field {kw.field!r}")
            seen.add(canon)
        codewords = [
            self._entry(kw)[1].eval(record_id.id_digest) for kw in keywords
        ]
        perm = seeded_permutation(seed, len(keywords))
        slots: list[bytes] = [b""] * len(keywords)
        for j, codeword in enumerate(codewords):
            slots[perm[j]] = codeword
        return tuple(slots)


def record_id_for(id_string: str) -> RecordId:
    return RecordId.from_string(id_string)


def id_digest(id_string: str) -> bytes:
    return hash128(id_string.encode("utf-8"))
