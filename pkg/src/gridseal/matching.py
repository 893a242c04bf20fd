"""Server-side codeword matching: single-keyword search and boolean trees.

The server recomputes, for a trapdoor T and record R, the candidate codeword
AES_T(h(id(R))) and tests membership in R's index. Membership always scans
every slot; an early exit would leak the matched slot position through
timing for no meaningful speedup.

Boolean queries arrive as trapdoor trees (leaves are trapdoors, internal
nodes AND/OR/NOT); evaluation combines per-record match bits.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence, Union

import numpy as np

from .errors import ContractError, ProtocolError
from .model import RecordId, RecordIndex, SealedRecord, Trapdoor
from .primitives import BLOCK_SIZE, BlockPrf, prf

MAX_EXPR_DEPTH = 32


def codeword_for(trapdoor: Trapdoor, record_id: RecordId) -> bytes:
    """The codeword a record's index would hold if it contained the keyword."""
    return prf(trapdoor, record_id.id_digest)


def _scan_index(index: RecordIndex, target: bytes) -> bool:
    # Constant-trace membership: touch every slot, no early exit.
    hit = 0
    for slot in index:
        hit |= slot == target
    return bool(hit)


def search_record(trapdoor: Trapdoor, record_id: RecordId, index: RecordIndex) -> bool:
    """True iff the record's index contains the trapdoor's codeword."""
    if not index:
        raise ContractError("index must have at least one slot")
    return _scan_index(index, codeword_for(trapdoor, record_id))


def _batch_codewords(trapdoor: Trapdoor, records: Sequence[SealedRecord]) -> list[bytes]:
    """All candidate codewords for one trapdoor in a single AES pass."""
    if len(trapdoor) != BLOCK_SIZE:
        raise ContractError("trapdoor must be 16 bytes")
    digests = b"".join(r.record_id.id_digest for r in records)
    stream = BlockPrf(trapdoor).eval_many(digests)
    return [stream[i : i + BLOCK_SIZE] for i in range(0, len(stream), BLOCK_SIZE)]


def search_collection(trapdoor: Trapdoor, records: Sequence[SealedRecord]) -> list[RecordId]:
    """Ids of all matching records, in storage order."""
    targets = _batch_codewords(trapdoor, records)
    return [
        r.record_id
        for r, target in zip(records, targets)
        if _scan_index(r.index, target)
    ]


# --- boolean trapdoor expressions -------------------------------------------


@dataclass(frozen=True)
class TrapdoorLeaf:
    trapdoor: bytes


@dataclass(frozen=True)
class TrapdoorNot:
    child: "TrapdoorExpr"


@dataclass(frozen=True)
class TrapdoorAnd:
    left: "TrapdoorExpr"
    right: "TrapdoorExpr"


@dataclass(frozen=True)
class TrapdoorOr:
    left: "TrapdoorExpr"
    right: "TrapdoorExpr"


TrapdoorExpr = Union[TrapdoorLeaf, TrapdoorNot, TrapdoorAnd, TrapdoorOr]


def expr_leaves(expr: TrapdoorExpr) -> Iterator[TrapdoorLeaf]:
    if isinstance(expr, TrapdoorLeaf):
        yield expr
    elif isinstance(expr, TrapdoorNot):
        yield from expr_leaves(expr.child)
    else:
        yield from expr_leaves(expr.left)
        yield from expr_leaves(expr.right)


def expr_depth(expr: TrapdoorExpr) -> int:
    if isinstance(expr, TrapdoorLeaf):
        return 1
    if isinstance(expr, TrapdoorNot):
        return 1 + expr_depth(expr.child)
    return 1 + max(expr_depth(expr.left), expr_depth(expr.right))


def eval_query(expr: TrapdoorExpr, record_id: RecordId, index: RecordIndex) -> bool:
    """Evaluate a trapdoor tree against one record's index."""
    if isinstance(expr, TrapdoorLeaf):
        return search_record(expr.trapdoor, record_id, index)
    if isinstance(expr, TrapdoorNot):
        return not eval_query(expr.child, record_id, index)
    if isinstance(expr, TrapdoorAnd):
        return eval_query(expr.left, record_id, index) & eval_query(
            expr.right, record_id, index
        )
    return eval_query(expr.left, record_id, index) | eval_query(
        expr.right, record_id, index
    )


def eval_query_collection(
    expr: TrapdoorExpr, records: Sequence[SealedRecord]
) -> list[RecordId]:
    """Evaluate a trapdoor tree over a whole collection, in storage order.

    Codewords are batched per distinct leaf trapdoor (one AES pass each),
    then every record's index is scanned once per leaf and the boolean tree
    is combined on the per-record bits.
    """
    if not records:
        return []
    distinct = {leaf.trapdoor for leaf in expr_leaves(expr)}
    targets = {t: _batch_codewords(t, records) for t in distinct}

    def eval_at(node: TrapdoorExpr, i: int, record: SealedRecord) -> bool:
        if isinstance(node, TrapdoorLeaf):
            return _scan_index(record.index, targets[node.trapdoor][i])
        if isinstance(node, TrapdoorNot):
            return not eval_at(node.child, i, record)
        if isinstance(node, TrapdoorAnd):
            return eval_at(node.left, i, record) & eval_at(node.right, i, record)
        return eval_at(node.left, i, record) | eval_at(node.right, i, record)

    return [
        r.record_id for i, r in enumerate(records) if eval_at(expr, i, r)
    ]


# --- wire codec --------------------------------------------------------------

_TAG_LEAF = 0
_TAG_NOT = 1
_TAG_AND = 2
_TAG_OR = 3


def encode_expr(expr: TrapdoorExpr) -> bytes:
    """Prefix encoding of a trapdoor tree: tag byte, then children."""
    if isinstance(expr, TrapdoorLeaf):
        if len(expr.trapdoor) != BLOCK_SIZE:
            raise ContractError("trapdoor must be 16 bytes")
        return bytes([_TAG_LEAF]) + expr.trapdoor
    if isinstance(expr, TrapdoorNot):
        return bytes([_TAG_NOT]) + encode_expr(expr.child)
    if isinstance(expr, TrapdoorAnd):
        return bytes([_TAG_AND]) + encode_expr(expr.left) + encode_expr(expr.right)
    if isinstance(expr, TrapdoorOr):
        return bytes([_TAG_OR]) + encode_expr(expr.left) + encode_expr(expr.right)
    raise ContractError(f"not a trapdoor expression: {type(expr).__name__}")


def decode_expr(data: bytes) -> TrapdoorExpr:
    """Inverse of :func:`encode_expr`; rejects trailing bytes and deep trees."""
    expr, pos = _decode_node(data, 0, depth=1)
    if pos != len(data):
        raise ProtocolError(f"trailing bytes after trapdoor expression at offset {pos}")
    return expr


def _decode_node(data: bytes, pos: int, depth: int) -> tuple[TrapdoorExpr, int]:
    if depth > MAX_EXPR_DEPTH:
        raise ProtocolError(f"trapdoor expression deeper than {MAX_EXPR_DEPTH}")
    if pos >= len(data):
        raise ProtocolError(f"truncated trapdoor expression at offset {pos}")
    tag = data[pos]
    pos += 1
    if tag == _TAG_LEAF:
        if pos + BLOCK_SIZE > len(data):
            raise ProtocolError(f"truncated trapdoor leaf at offset {pos}")
        return TrapdoorLeaf(bytes(data[pos : pos + BLOCK_SIZE])), pos + BLOCK_SIZE
    if tag == _TAG_NOT:
        child, pos = _decode_node(data, pos, depth + 1)
        return TrapdoorNot(child), pos
    if tag in (_TAG_AND, _TAG_OR):
        left, pos = _decode_node(data, pos, depth + 1)
        right, pos = _decode_node(data, pos, depth + 1)
        cls = TrapdoorAnd if tag == _TAG_AND else TrapdoorOr
        return cls(left, right), pos
    raise ProtocolError(f"unknown expression tag {tag} at offset {pos - 1}")
