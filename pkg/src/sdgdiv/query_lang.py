"""Boolean field-query language: parser, evaluator, SQL transpiler.

Queries classify publications by matching phrases against metadata fields,
in the style of the search-query lists bibliometric providers publish. The
grammar:

    query       := and-expr ("OR" and-expr)*
    and-expr    := not-expr ("AND" not-expr)*
    not-expr    := atom ("AND" "NOT" atom)*
    atom        := FIELD "(" phrase-list ")" | "(" query ")"
    phrase-list := phrase (("," | "OR") phrase)*
    phrase      := quoted string | bare word

Operator precedence is AND NOT > AND > OR, left-associative. Fields are
TITLE, ABS, AUTHKEY, TITLE-ABS-KEY, SRCTITLE (hyphens and underscores are
interchangeable, keywords are case-insensitive). A multi-phrase field term
expands to an OR of single-phrase matches. Each word of a phrase may carry
a trailing ``*`` wildcard which prefix-matches one token. Proximity
operators (W/n, PRE/n) are recognized and rejected as unsupported.

Matching is token-based: a phrase matches when its tokens occur as a
contiguous token sequence in the field text, after ASCII case folding
(Unicode letters are preserved, not folded). Tokens are maximal runs of
letters and digits; everything else is a boundary.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Union

from .corpus_store import PublicationRecord
from .errors import SdgdivError

FIELDS = ("TITLE", "ABS", "AUTHKEY", "TITLE_ABS_KEY", "SRCTITLE")

# Canonical spelling used by the pretty-printer (SciVal-style hyphens).
_FIELD_DISPLAY = {f: f.replace("_", "-") for f in FIELDS}


class QuerySyntaxError(SdgdivError):
    """Syntax error with 1-based line/column position."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


class TranspileError(SdgdivError):
    """The AST cannot be rendered as SQL under the given table schema."""


@dataclass(frozen=True)
class FieldMatch:
    field: str
    pattern: str

    def __post_init__(self):
        if self.field not in FIELDS:
            raise ValueError(f"unknown field {self.field!r}")
        if not self.pattern.strip():
            raise ValueError("empty pattern")


@dataclass(frozen=True)
class And:
    children: tuple["Node", ...]

    def __post_init__(self):
        if len(self.children) < 2:
            raise ValueError("And requires at least 2 children")


@dataclass(frozen=True)
class Or:
    children: tuple["Node", ...]

    def __post_init__(self):
        if len(self.children) < 2:
            raise ValueError("Or requires at least 2 children")


@dataclass(frozen=True)
class AndNot:
    children: tuple["Node", "Node"]

    def __post_init__(self):
        if len(self.children) != 2:
            raise ValueError("AndNot requires exactly 2 children")


Node = Union[FieldMatch, And, Or, AndNot]


# ---------------------------------------------------------------------------
# Lexer

_WORD_RE = re.compile(r"[A-Za-z0-9_*/-]+")
_PROXIMITY_RE = re.compile(r"^(w|pre)/\d+$", re.IGNORECASE)


@dataclass(frozen=True)
class _Token:
    kind: str  # WORD, PHRASE, LPAREN, RPAREN, COMMA, EOF
    text: str
    line: int
    col: int


def _lex(source: str) -> Iterator[_Token]:
    line, col = 1, 1
    i = 0
    n = len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch.isspace():
            i += 1
            col += 1
            continue
        if ch == "(":
            yield _Token("LPAREN", ch, line, col)
            i += 1
            col += 1
            continue
        if ch == ")":
            yield _Token("RPAREN", ch, line, col)
            i += 1
            col += 1
            continue
        if ch == ",":
            yield _Token("COMMA", ch, line, col)
            i += 1
            col += 1
            continue
        if ch == '"':
            j = source.find('"', i + 1)
            if j < 0:
                raise QuerySyntaxError("unterminated quoted phrase", line, col)
            text = source[i + 1 : j]
            yield _Token("PHRASE", text, line, col)
            col += j - i + 1
            i = j + 1
            continue
        m = _WORD_RE.match(source, i)
        if m:
            yield _Token("WORD", m.group(0), line, col)
            col += len(m.group(0))
            i = m.end()
            continue
        raise QuerySyntaxError(f"unexpected character {ch!r}", line, col)
    yield _Token("EOF", "", line, col)


# ---------------------------------------------------------------------------
# Parser

_KEYWORDS = ("AND", "OR", "NOT")


class _Parser:
    def __init__(self, source: str):
        self.tokens = list(_lex(source))
        self.pos = 0

    def peek(self, ahead: int = 0) -> _Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def keyword(self, tok: _Token) -> str | None:
        if tok.kind == "WORD" and tok.text.upper() in _KEYWORDS:
            return tok.text.upper()
        return None

    def at_keyword(self, name: str, ahead: int = 0) -> bool:
        return self.keyword(self.peek(ahead)) == name

    def parse(self) -> Node:
        node = self.parse_or()
        tok = self.peek()
        if tok.kind != "EOF":
            raise QuerySyntaxError(f"unexpected {tok.text!r} after query", tok.line, tok.col)
        return node

    def parse_or(self) -> Node:
        items = [self.parse_and()]
        while self.at_keyword("OR"):
            self.next()
            items.append(self.parse_and())
        return items[0] if len(items) == 1 else Or(tuple(items))

    def parse_and(self) -> Node:
        items = [self.parse_and_not()]
        while self.at_keyword("AND") and not self.at_keyword("NOT", ahead=1):
            self.next()
            items.append(self.parse_and_not())
        return items[0] if len(items) == 1 else And(tuple(items))

    def parse_and_not(self) -> Node:
        node = self.parse_atom()
        while self.at_keyword("AND") and self.at_keyword("NOT", ahead=1):
            self.next()
            self.next()
            node = AndNot((node, self.parse_atom()))
        return node

    def parse_atom(self) -> Node:
        tok = self.peek()
        if tok.kind == "LPAREN":
            self.next()
            node = self.parse_or()
            closing = self.peek()
            if closing.kind != "RPAREN":
                raise QuerySyntaxError(
                    f"unclosed '(' opened at line {tok.line}, column {tok.col}",
                    closing.line,
                    closing.col,
                )
            self.next()
            return node
        if tok.kind == "WORD":
            self._reject_proximity(tok)
            if self.keyword(tok):
                raise QuerySyntaxError(f"dangling operator {tok.text!r}", tok.line, tok.col)
            name = tok.text.upper().replace("-", "_")
            if self.peek(1).kind == "LPAREN":
                if name not in FIELDS:
                    raise QuerySyntaxError(f"unknown field name {tok.text!r}", tok.line, tok.col)
                self.next()
                return self.parse_field_term(name)
            raise QuerySyntaxError(
                f"expected FIELD(...) or '(', got bare word {tok.text!r}", tok.line, tok.col
            )
        if tok.kind == "EOF":
            raise QuerySyntaxError("unexpected end of query", tok.line, tok.col)
        raise QuerySyntaxError(f"unexpected {tok.text!r}", tok.line, tok.col)

    def parse_field_term(self, field_name: str) -> Node:
        opening = self.next()  # LPAREN
        phrases = [self.parse_phrase(opening)]
        while True:
            tok = self.peek()
            if tok.kind == "COMMA" or self.keyword(tok) == "OR":
                self.next()
                phrases.append(self.parse_phrase(opening))
                continue
            if tok.kind == "RPAREN":
                self.next()
                break
            if tok.kind == "EOF":
                raise QuerySyntaxError(
                    f"unclosed '(' opened at line {opening.line}, column {opening.col}",
                    tok.line,
                    tok.col,
                )
            if tok.kind == "WORD":
                self._reject_proximity(tok)
            raise QuerySyntaxError(
                f"expected ',', 'OR', or ')' in field term opened at line {opening.line}, "
                f"column {opening.col}, got {tok.text!r}",
                tok.line,
                tok.col,
            )
        matches = [FieldMatch(field_name, p) for p in phrases]
        return matches[0] if len(matches) == 1 else Or(tuple(matches))

    def parse_phrase(self, opening: _Token) -> str:
        tok = self.peek()
        if tok.kind == "PHRASE":
            self.next()
            return _validate_pattern(tok.text, tok)
        if tok.kind == "WORD":
            self._reject_proximity(tok)
            if self.keyword(tok):
                raise QuerySyntaxError(f"expected phrase, got operator {tok.text!r}", tok.line, tok.col)
            self.next()
            return _validate_pattern(tok.text, tok)
        if tok.kind == "EOF":
            raise QuerySyntaxError(
                f"unclosed '(' opened at line {opening.line}, column {opening.col}",
                tok.line,
                tok.col,
            )
        raise QuerySyntaxError(f"expected phrase, got {tok.text!r}", tok.line, tok.col)

    def _reject_proximity(self, tok: _Token) -> None:
        if _PROXIMITY_RE.match(tok.text):
            raise QuerySyntaxError(
                f"unsupported proximity operator {tok.text!r}", tok.line, tok.col
            )


def _validate_pattern(text: str, tok: _Token) -> str:
    words = text.split()
    if not words:
        raise QuerySyntaxError("empty phrase", tok.line, tok.col)
    for word in words:
        stars = word.count("*")
        if stars == 0:
            if not _TOKEN_RE.search(word):
                raise QuerySyntaxError(
                    f"phrase word has no letters or digits: {word!r}", tok.line, tok.col
                )
            continue
        if stars > 1 or not word.endswith("*") or len(word) == 1:
            raise QuerySyntaxError(
                f"wildcard '*' is only allowed word-finally: {word!r}", tok.line, tok.col
            )
        stem = word[:-1]
        if not re.fullmatch(r"[^\W_]+", stem):
            raise QuerySyntaxError(
                f"wildcard stem must be alphanumeric: {word!r}", tok.line, tok.col
            )
    return " ".join(words)


def parse_query(source: str) -> Node:
    """Parse query text into an AST; raises QuerySyntaxError with position."""
    if not source.strip():
        raise QuerySyntaxError("empty query", 1, 1)
    return _Parser(source).parse()


# ---------------------------------------------------------------------------
# Evaluation

_ASCII_FOLD = str.maketrans(
    "ABCDEFGHIJKLMNOPQRSTUVWXYZ", "abcdefghijklmnopqrstuvwxyz"
)
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def ascii_fold(text: str) -> str:
    """Fold ASCII uppercase only; non-ASCII letters pass through unchanged."""
    return text.translate(_ASCII_FOLD)


def match_tokens(text: str) -> list[str]:
    """Case-folded match tokens: maximal runs of letters/digits."""
    return _TOKEN_RE.findall(ascii_fold(text))


def _compile_pattern(pattern: str) -> list[tuple[bool, str]]:
    """Pattern words -> (is_prefix, token) matchers, in order."""
    out: list[tuple[bool, str]] = []
    for word in pattern.split():
        if word.endswith("*") and len(word) > 1:
            out.append((True, ascii_fold(word[:-1])))
        else:
            out.extend((False, tok) for tok in match_tokens(word))
    if not out:
        raise ValueError(f"pattern has no matchable tokens: {pattern!r}")
    return out


def _matches_in(compiled: list[tuple[bool, str]], text: str) -> bool:
    toks = match_tokens(text)
    m = len(compiled)
    for i in range(len(toks) - m + 1):
        ok = True
        for j, (is_prefix, needle) in enumerate(compiled):
            tok = toks[i + j]
            if is_prefix:
                if not tok.startswith(needle):
                    ok = False
                    break
            elif tok != needle:
                ok = False
                break
        if ok:
            return True
    return False


def _field_units(record: PublicationRecord, field_name: str) -> list[str]:
    if field_name == "TITLE":
        return [record.title]
    if field_name == "ABS":
        return [record.abstract]
    if field_name == "AUTHKEY":
        return list(record.keywords)
    if field_name == "SRCTITLE":
        return [record.venue_title]
    if field_name == "TITLE_ABS_KEY":
        return [record.title, record.abstract, *record.keywords]
    raise ValueError(f"unknown field {field_name!r}")


def eval_query(ast: Node, record: PublicationRecord) -> bool:
    """Evaluate an AST against one record (pure, total over valid inputs).

    AUTHKEY and the keyword part of TITLE-ABS-KEY match within a single
    keyword: a phrase never spans two keywords.
    """
    if isinstance(ast, FieldMatch):
        compiled = _compile_pattern(ast.pattern)
        return any(_matches_in(compiled, unit) for unit in _field_units(record, ast.field))
    if isinstance(ast, And):
        return all(eval_query(c, record) for c in ast.children)
    if isinstance(ast, Or):
        return any(eval_query(c, record) for c in ast.children)
    if isinstance(ast, AndNot):
        return eval_query(ast.children[0], record) and not eval_query(ast.children[1], record)
    raise TypeError(f"not a query node: {ast!r}")


# ---------------------------------------------------------------------------
# Pretty-printer

_PRECEDENCE = {Or: 0, And: 1, AndNot: 2, FieldMatch: 3}


def _print_child(child: Node, parent_prec: int, is_right_of_andnot: bool = False) -> str:
    text = pretty_print(child)
    prec = _PRECEDENCE[type(child)]
    if prec < parent_prec or (prec == parent_prec and prec < 3):
        # Same-precedence children are parenthesized to keep the tree shape,
        # except the left child of AND NOT, which reparses left-associatively.
        if parent_prec == 2 and prec == 2 and not is_right_of_andnot:
            return text
        return f"({text})"
    return text


def pretty_print(ast: Node) -> str:
    """Render an AST as query text that parses back to an identical AST."""
    if isinstance(ast, FieldMatch):
        return f'{_FIELD_DISPLAY[ast.field]}("{ast.pattern}")'
    if isinstance(ast, Or):
        return " OR ".join(_print_child(c, 0) for c in ast.children)
    if isinstance(ast, And):
        return " AND ".join(_print_child(c, 1) for c in ast.children)
    if isinstance(ast, AndNot):
        left = _print_child(ast.children[0], 2)
        right = _print_child(ast.children[1], 2, is_right_of_andnot=True)
        return f"{left} AND NOT {right}"
    raise TypeError(f"not a query node: {ast!r}")


# ---------------------------------------------------------------------------
# SQL emission

#: Base fields a table schema must map; TITLE_ABS_KEY derives from the first three.
_SQL_BASE_FIELDS = ("TITLE", "ABS", "AUTHKEY", "SRCTITLE")

#: Separator between keywords in a materialized keyword column. It breaks
#: token adjacency so a phrase can never match across two keywords.
KEYWORD_SEPARATOR = " ; "


@dataclass(frozen=True)
class TableSchema:
    """Maps query fields to columns of a match-normalized publications table."""

    columns: Mapping[str, str]
    table: str = "pubs"
    doi_column: str = "doi"

    def column(self, field_name: str) -> str:
        try:
            return self.columns[field_name]
        except KeyError:
            raise TranspileError(
                f"table schema has no column for field {field_name}"
            ) from None


def normalize_for_match(text: str) -> str:
    """Single-space-joined match tokens; how text columns must be stored.

    The emitted SQL performs word-boundary matching with plain LIKE, which
    only works if the queried columns hold this normalized form. Loaders
    populating the table are expected to apply this function (and
    keywords_column_value for keyword lists).
    """
    return " ".join(match_tokens(text))


def keywords_column_value(keywords: Iterable[str]) -> str:
    return KEYWORD_SEPARATOR.join(normalize_for_match(k) for k in keywords)


def _sql_quote(value: str) -> str:
    return "'" + value.replace("'", "''") + "'"


def _pattern_like(pattern: str, column: str) -> str:
    words = pattern.split()
    parts: list[str] = []
    for idx, word in enumerate(words):
        if word.endswith("*") and len(word) > 1:
            if idx != len(words) - 1:
                raise TranspileError(
                    f"SQL emission supports a wildcard only on the final word: {pattern!r}"
                )
            parts.append(ascii_fold(word[:-1]))
            like = "% " + " ".join(parts) + "%"
            return f"lower(' ' || {column} || ' ') LIKE {_sql_quote(like)}"
        parts.extend(match_tokens(word))
    like = "% " + " ".join(parts) + " %"
    return f"lower(' ' || {column} || ' ') LIKE {_sql_quote(like)}"


def _field_predicate(node: FieldMatch, schema: TableSchema) -> str:
    if node.field == "TITLE_ABS_KEY":
        preds = [
            _pattern_like(node.pattern, schema.column(f))
            for f in ("TITLE", "ABS", "AUTHKEY")
        ]
        return "(" + " OR ".join(preds) + ")"
    return _pattern_like(node.pattern, schema.column(node.field))


def _predicate(ast: Node, schema: TableSchema) -> str:
    if isinstance(ast, FieldMatch):
        return _field_predicate(ast, schema)
    if isinstance(ast, And):
        return " AND ".join(f"({_predicate(c, schema)})" for c in ast.children)
    if isinstance(ast, Or):
        return " OR ".join(f"({_predicate(c, schema)})" for c in ast.children)
    if isinstance(ast, AndNot):
        left, right = ast.children
        return f"({_predicate(left, schema)}) AND NOT ({_predicate(right, schema)})"
    raise TypeError(f"not a query node: {ast!r}")


def emit_sql(ast: Node, schema: TableSchema) -> str:
    """Transpile an AST to a single deterministic SELECT statement.

    Emission rules: every FieldMatch becomes a padded-boundary LIKE over a
    match-normalized column (see normalize_for_match); boolean nodes map to
    parenthesized AND/OR/AND NOT mirroring the AST shape. Wildcards are
    supported on the final pattern word only (LIKE '%' cannot express a
    non-space run mid-pattern); the in-memory evaluator has no such limit.
    """
    return (
        f"SELECT {schema.doi_column} FROM {schema.table} WHERE {_predicate(ast, schema)}"
    )
