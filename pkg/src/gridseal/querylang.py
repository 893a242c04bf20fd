"""Boolean keyword query language.

Grammar (operators case-insensitive, left-associative, NOT > AND > OR):

    expr  := term | "(" expr ")" | "not" expr | expr "and" expr | expr "or" expr
    term  := field ":" value

Fields and values may be double-quoted, with backslash escapes, which is
required whenever they contain spaces, colons, quotes, or parentheses.
Every term must be a full field:value pair; shorthand like
``year:1998 or 1999`` is rejected rather than guessing the intended scope.

Parsing and compilation run client-side only. A compiled query is a
trapdoor tree with the same shape and no plaintext in it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .errors import QuerySyntaxError, SchemaError
from .keys import MasterKey
from .matching import (
    TrapdoorAnd,
    TrapdoorExpr,
    TrapdoorLeaf,
    TrapdoorNot,
    TrapdoorOr,
)
from .model import CollectionSchema
from .sse import Keyword, trapdoor

MAX_QUERY_DEPTH = 32

OPERATORS = {"and", "or", "not"}


@dataclass(frozen=True)
class Term:
    field: str
    value: str


@dataclass(frozen=True)
class Not:
    child: "QueryExpr"


@dataclass(frozen=True)
class And:
    left: "QueryExpr"
    right: "QueryExpr"


@dataclass(frozen=True)
class Or:
    left: "QueryExpr"
    right: "QueryExpr"


QueryExpr = Union[Term, Not, And, Or]


# --- lexer --------------------------------------------------------------------

_LPAREN = "lparen"
_RPAREN = "rparen"
_AND = "and"
_OR = "or"
_NOT = "not"
_TERM = "term"
_BARE = "bare"


@dataclass(frozen=True)
class _Token:
    kind: str
    position: int
    ordinal: int
    field: str = ""
    value: str = ""
    text: str = ""


def _error(message: str, position: int, ordinal: int) -> QuerySyntaxError:
    return QuerySyntaxError(
        f"syntax error at token {ordinal}: {message}", position, ordinal
    )


def _read_quoted(text: str, pos: int) -> tuple[str, int]:
    # pos points at the opening quote
    out = []
    i = pos + 1
    while i < len(text):
        ch = text[i]
        if ch == "\\":
            if i + 1 >= len(text):
                raise QuerySyntaxError(
                    f"syntax error: dangling escape at position {i}", i, 0
                )
            out.append(text[i + 1])
            i += 2
        elif ch == '"':
            return "".join(out), i + 1
        else:
            out.append(ch)
            i += 1
    raise QuerySyntaxError(
        f"syntax error: unterminated quote starting at position {pos}", pos, 0
    )


def _read_word(text: str, pos: int) -> tuple[str, int]:
    i = pos
    while i < len(text) and text[i] not in ' \t\r\n:()"':
        i += 1
    return text[pos:i], i


def _tokenize(text: str) -> list[_Token]:
    """Lex into logical tokens; a full field:value pair is one token."""
    raw: list[tuple[str, int, str]] = []  # (kind, position, text) pre-assembly
    i = 0
    while i < len(text):
        ch = text[i]
        if ch in " \t\r\n":
            i += 1
        elif ch == "(":
            raw.append(("lparen", i, "("))
            i += 1
        elif ch == ")":
            raw.append(("rparen", i, ")"))
            i += 1
        elif ch == ":":
            raw.append(("colon", i, ":"))
            i += 1
        elif ch == '"':
            value, j = _read_quoted(text, i)
            raw.append(("quoted", i, value))
            i = j
        else:
            word, j = _read_word(text, i)
            raw.append(("word", i, word))
            i = j

    tokens: list[_Token] = []
    ordinal = 0
    k = 0
    while k < len(raw):
        kind, position, content = raw[k]
        ordinal += 1
        if kind == "lparen":
            tokens.append(_Token(_LPAREN, position, ordinal, text="("))
            k += 1
        elif kind == "rparen":
            tokens.append(_Token(_RPAREN, position, ordinal, text=")"))
            k += 1
        elif kind == "colon":
            raise _error("value without a field name before ':'", position, ordinal)
        elif k + 1 < len(raw) and raw[k + 1][0] == "colon":
            # field ":" value, quoted or not on either side
            if k + 2 >= len(raw) or raw[k + 2][0] not in ("word", "quoted"):
                where = raw[k + 1][1]
                raise _error("term is missing its value after ':'", where, ordinal)
            value = raw[k + 2][2]
            tokens.append(
                _Token(_TERM, position, ordinal, field=content, value=value)
            )
            k += 3
        elif kind == "word" and content.lower() in OPERATORS:
            tokens.append(
                _Token(content.lower(), position, ordinal, text=content)
            )
            k += 1
        else:
            tokens.append(_Token(_BARE, position, ordinal, text=content))
            k += 1
    return tokens


# --- parser -------------------------------------------------------------------


class _Parser:
    def __init__(self, tokens: list[_Token], length: int):
        self.tokens = tokens
        self.pos = 0
        self.length = length

    def peek(self) -> _Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self) -> _Token:
        token = self.peek()
        if token is None:
            raise _error("unexpected end of query", self.length, len(self.tokens) + 1)
        self.pos += 1
        return token

    def parse(self) -> QueryExpr:
        if not self.tokens:
            raise QuerySyntaxError("syntax error at token 1: empty query", 0, 1)
        expr = self.parse_or(1)
        leftover = self.peek()
        if leftover is not None:
            raise _error(
                f"unexpected {leftover.text or leftover.kind!s}",
                leftover.position,
                leftover.ordinal,
            )
        return expr

    def parse_or(self, depth: int) -> QueryExpr:
        left = self.parse_and(depth)
        while (token := self.peek()) is not None and token.kind == _OR:
            self.next()
            right = self.parse_and(depth)
            left = Or(left, right)
        return left

    def parse_and(self, depth: int) -> QueryExpr:
        left = self.parse_not(depth)
        while (token := self.peek()) is not None and token.kind == _AND:
            self.next()
            right = self.parse_not(depth)
            left = And(left, right)
        return left

    def parse_not(self, depth: int) -> QueryExpr:
        token = self.peek()
        if token is not None and token.kind == _NOT:
            self.next()
            return Not(self.parse_not(depth + 1))
        return self.parse_atom(depth)

    def parse_atom(self, depth: int) -> QueryExpr:
        if depth > MAX_QUERY_DEPTH:
            token = self.peek()
            pos = token.position if token else self.length
            ordn = token.ordinal if token else len(self.tokens)
            raise _error(f"query nested deeper than {MAX_QUERY_DEPTH}", pos, ordn)
        token = self.next()
        if token.kind == _TERM:
            return Term(field=token.field, value=token.value)
        if token.kind == _LPAREN:
            inner = self.parse_or(depth + 1)
            closing = self.peek()
            if closing is None or closing.kind != _RPAREN:
                raise _error(
                    "missing closing parenthesis",
                    closing.position if closing else self.length,
                    closing.ordinal if closing else len(self.tokens) + 1,
                )
            self.next()
            return inner
        if token.kind == _BARE:
            raise _error(
                f"bare value {token.text!r}; every term must be field:value",
                token.position,
                token.ordinal,
            )
        raise _error(
            f"expected a term, 'not', or '(', got {token.text or token.kind!r}",
            token.position,
            token.ordinal,
        )


def parse_query(text: str, schema: CollectionSchema | None = None) -> QueryExpr:
    """Parse query text; with a schema, reject terms on non-desired fields."""
    expr = _Parser(_tokenize(text), len(text)).parse()
    if query_depth(expr) > MAX_QUERY_DEPTH:
        raise QuerySyntaxError(
            f"syntax error at token 1: query tree deeper than {MAX_QUERY_DEPTH}", 0, 1
        )
    if schema is not None:
        for term in query_terms(expr):
            if not schema.is_desired(term.field):
                raise SchemaError(
                    f"field {term.field!r} is not a desired (searchable) field"
                )
    return expr


def query_terms(expr: QueryExpr):
    # Iterative: long and/or chains exceed 32 in depth only after parsing,
    # and the depth check must be reachable without blowing the stack.
    stack = [expr]
    while stack:
        node = stack.pop()
        if isinstance(node, Term):
            yield node
        elif isinstance(node, Not):
            stack.append(node.child)
        else:
            stack.append(node.right)
            stack.append(node.left)


def query_depth(expr: QueryExpr) -> int:
    depth = 0
    stack: list[tuple[QueryExpr, int]] = [(expr, 1)]
    while stack:
        node, d = stack.pop()
        depth = max(depth, d)
        if isinstance(node, Not):
            stack.append((node.child, d + 1))
        elif isinstance(node, (And, Or)):
            stack.append((node.left, d + 1))
            stack.append((node.right, d + 1))
    return depth


# --- rendering ----------------------------------------------------------------

_NEEDS_QUOTES = set(' \t\r\n:()"\\')


def _render_atom(text: str) -> str:
    if text and not (set(text) & _NEEDS_QUOTES):
        return text
    escaped = text.replace("\\", "\\\\").replace('"', '\\"')
    return f'"{escaped}"'


def render_query(expr: QueryExpr) -> str:
    """Render to text that reparses to an identical tree.

    Binary nodes are fully parenthesized; parentheses are grouping only, so
    the round trip is exact.
    """
    if isinstance(expr, Term):
        return f"{_render_atom(expr.field)}:{_render_atom(expr.value)}"
    if isinstance(expr, Not):
        return f"not {render_query(expr.child)}"
    op = "and" if isinstance(expr, And) else "or"
    return f"({render_query(expr.left)} {op} {render_query(expr.right)})"


# --- compilation --------------------------------------------------------------


def compile_query(expr: QueryExpr, mk: MasterKey) -> TrapdoorExpr:
    """Replace each leaf with its trapdoor; structure is preserved.

    Repeated terms compile to identical trapdoors, which the server can
    observe; that is the scheme's standard search-pattern leakage.
    """
    if isinstance(expr, Term):
        return TrapdoorLeaf(trapdoor(mk, Keyword(field=expr.field, value=expr.value)))
    if isinstance(expr, Not):
        return TrapdoorNot(compile_query(expr.child, mk))
    if isinstance(expr, And):
        return TrapdoorAnd(compile_query(expr.left, mk), compile_query(expr.right, mk))
    return TrapdoorOr(compile_query(expr.left, mk), compile_query(expr.right, mk))
