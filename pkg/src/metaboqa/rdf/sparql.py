"""SPARQL SELECT parsing.

Two levels of scrutiny:

- :func:`parse_select` builds a full AST for the subset the local engine
  can evaluate (BGPs, FILTER expressions, aggregates, GROUP/ORDER/LIMIT,
  ``*``/``+`` property paths over a single predicate). Constructs beyond
  the subset raise :class:`UnsupportedSparql`.
- :func:`check_select_syntax` is the tolerant structural check applied to
  sanitized queries headed for live SPARQL 1.1 endpoints: token
  well-formedness, SELECT form, balanced WHERE block, legal trailing
  modifiers. It accepts OPTIONAL/UNION/etc. that the local engine cannot
  run.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Union

from ..errors import SparqlParseError, UnsupportedSparql
from .model import (
    Iri,
    Literal,
    RDF_TYPE,
    Term,
    XSD_BOOLEAN,
    XSD_DECIMAL,
    XSD_DOUBLE,
    XSD_INTEGER,
)

_IRIREF = re.compile(r'<([^<>"{}|^`\\\x00-\x20]*)>')
_PNAME = re.compile(r"([A-Za-z][\w-]*)?:([A-Za-z0-9_][\w.-]*)?")
_VAR = re.compile(r"[?$]([A-Za-z_][\w]*)")
_NUMBER = re.compile(r"(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?")
_WORD = re.compile(r"[A-Za-z_][\w]*")
_MULTI_PUNCT = ("&&", "||", "!=", "<=", ">=", "^^")
_SINGLE_PUNCT = "{}().,;*/+-=<>!|^"

UNSUPPORTED_KEYWORDS = {
    "OPTIONAL",
    "UNION",
    "MINUS",
    "GRAPH",
    "SERVICE",
    "BIND",
    "VALUES",
    "EXISTS",
    "CONSTRUCT",
    "ASK",
    "DESCRIBE",
}

AGGREGATE_FUNCS = {"COUNT", "SUM", "AVG", "MIN", "MAX"}
SCALAR_FUNCS = {
    "STR",
    "LANG",
    "DATATYPE",
    "BOUND",
    "REGEX",
    "CONTAINS",
    "STRSTARTS",
    "STRENDS",
    "LCASE",
    "UCASE",
    "STRLEN",
    "ABS",
    "CEIL",
    "FLOOR",
    "ROUND",
}


@dataclass(frozen=True)
class Token:
    kind: str  # iri | pname | var | literal | number | word | punct
    value: object
    line: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    line = 1
    n = len(text)
    while pos < n:
        ch = text[pos]
        if ch == "\n":
            line += 1
            pos += 1
            continue
        if ch in " \t\r":
            pos += 1
            continue
        if ch == "#":
            nl = text.find("\n", pos)
            pos = n if nl < 0 else nl
            continue
        if ch == "<":
            m = _IRIREF.match(text, pos)
            if m:
                tokens.append(Token("iri", m.group(1), line))
                pos = m.end()
                continue
        if ch in "?$":
            m = _VAR.match(text, pos)
            if not m:
                raise SparqlParseError(f"line {line}: stray {ch!r}")
            tokens.append(Token("var", m.group(1), line))
            pos = m.end()
            continue
        if ch in "\"'":
            value, pos, line = _scan_string(text, pos, line)
            lang = None
            datatype = None
            if text.startswith("^^", pos):
                pos += 2
                m = _IRIREF.match(text, pos)
                if m:
                    datatype = ("iri", m.group(1))
                    pos = m.end()
                else:
                    m = _PNAME.match(text, pos)
                    if not m:
                        raise SparqlParseError(f"line {line}: malformed datatype")
                    datatype = ("pname", m.group(1) or "", m.group(2) or "")
                    pos = m.end()
            elif text.startswith("@", pos):
                m = re.compile(r"@([A-Za-z]+(?:-[A-Za-z0-9]+)*)").match(text, pos)
                if not m:
                    raise SparqlParseError(f"line {line}: malformed language tag")
                lang = m.group(1)
                pos = m.end()
            tokens.append(Token("literal", (value, lang, datatype), line))
            continue
        if ch.isdigit() or (ch == "." and pos + 1 < n and text[pos + 1].isdigit()):
            m = _NUMBER.match(text, pos)
            tokens.append(Token("number", m.group(0), line))
            pos = m.end()
            continue
        two = text[pos : pos + 2]
        if two in _MULTI_PUNCT:
            tokens.append(Token("punct", two, line))
            pos += 2
            continue
        m = _PNAME.match(text, pos)
        if m and ":" in text[pos : m.end()]:
            tokens.append(Token("pname", (m.group(1) or "", m.group(2) or ""), line))
            pos = m.end()
            continue
        m = _WORD.match(text, pos)
        if m:
            tokens.append(Token("word", m.group(0), line))
            pos = m.end()
            continue
        if ch in _SINGLE_PUNCT:
            tokens.append(Token("punct", ch, line))
            pos += 1
            continue
        raise SparqlParseError(f"line {line}: cannot tokenize at {text[pos:pos + 15]!r}")
    return tokens


def _scan_string(text: str, pos: int, line: int) -> tuple[str, int, int]:
    for quote in ('"""', "'''", '"', "'"):
        if text.startswith(quote, pos):
            break
    else:  # pragma: no cover - caller guarantees a quote char
        raise SparqlParseError(f"line {line}: expected string")
    pos += len(quote)
    out: list[str] = []
    while True:
        if pos >= len(text):
            raise SparqlParseError(f"line {line}: unterminated string")
        if text.startswith(quote, pos):
            return "".join(out), pos + len(quote), line
        ch = text[pos]
        if ch == "\\":
            esc = text[pos + 1 : pos + 2]
            mapping = {'"': '"', "'": "'", "\\": "\\", "n": "\n", "t": "\t", "r": "\r"}
            if esc in mapping:
                out.append(mapping[esc])
                pos += 2
            elif esc == "u":
                out.append(chr(int(text[pos + 2 : pos + 6], 16)))
                pos += 6
            else:
                raise SparqlParseError(f"line {line}: bad escape \\{esc}")
        else:
            if ch == "\n":
                if len(quote) == 1:
                    raise SparqlParseError(f"line {line}: newline in string")
                line += 1
            out.append(ch)
            pos += 1


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return f"?{self.name}"


@dataclass(frozen=True)
class PathMod:
    """Property path over one predicate: mod is '*' or '+'."""

    iri: Iri
    mod: str


@dataclass(frozen=True)
class TriplePattern:
    s: Union[Var, Term]
    p: Union[Var, Term, PathMod]
    o: Union[Var, Term]


@dataclass(frozen=True)
class Compare:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class BoolOp:
    op: str  # '&&' | '||'
    args: tuple


@dataclass(frozen=True)
class Not:
    arg: "Expr"


@dataclass(frozen=True)
class Arith:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class FuncCall:
    name: str
    args: tuple


@dataclass(frozen=True)
class Aggregate:
    func: str
    distinct: bool
    arg: Optional["Expr"]  # None means COUNT(*)


Expr = Union[Var, Term, Compare, BoolOp, Not, Arith, FuncCall, Aggregate]


@dataclass(frozen=True)
class Filter:
    expr: Expr


@dataclass
class SelectQuery:
    prefixes: dict[str, str]
    distinct: bool
    projection: Optional[list]  # None = '*'; items are Var or (Expr, Var)
    patterns: list  # TriplePattern | Filter
    group_by: list[Var] = field(default_factory=list)
    order_by: list[tuple] = field(default_factory=list)  # (Expr, ascending)
    limit: Optional[int] = None
    offset: Optional[int] = None

    def projected_vars(self) -> list[str]:
        if self.projection is None:
            seen: list[str] = []
            for pat in self.patterns:
                if isinstance(pat, TriplePattern):
                    for t in (pat.s, pat.p, pat.o):
                        if isinstance(t, Var) and t.name not in seen:
                            seen.append(t.name)
            return seen
        out = []
        for item in self.projection:
            out.append(item.name if isinstance(item, Var) else item[1].name)
        return out


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0
        self.prefixes: dict[str, str] = {}

    def peek(self) -> Optional[Token]:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def next(self) -> Token:
        tok = self.peek()
        if tok is None:
            raise SparqlParseError("unexpected end of query")
        self.i += 1
        return tok

    def error(self, message: str) -> SparqlParseError:
        tok = self.peek()
        where = f"line {tok.line}" if tok else "end of query"
        return SparqlParseError(f"{where}: {message}")

    def take_word(self, *words: str) -> Optional[str]:
        tok = self.peek()
        if tok and tok.kind == "word" and tok.value.upper() in words:
            self.i += 1
            return tok.value.upper()
        return None

    def take_punct(self, *values: str) -> Optional[str]:
        tok = self.peek()
        if tok and tok.kind == "punct" and tok.value in values:
            self.i += 1
            return tok.value
        return None

    def expect_punct(self, value: str) -> None:
        if not self.take_punct(value):
            raise self.error(f"expected {value!r}")

    # -- grammar ------------------------------------------------------

    def parse(self) -> SelectQuery:
        self._prologue()
        if not self.take_word("SELECT"):
            tok = self.peek()
            if tok and tok.kind == "word" and tok.value.upper() in UNSUPPORTED_KEYWORDS:
                raise UnsupportedSparql(f"only SELECT queries are supported, got {tok.value}")
            raise self.error("expected SELECT")
        distinct = bool(self.take_word("DISTINCT"))
        self.take_word("REDUCED")
        projection = self._projection()
        self.take_word("WHERE")
        self.expect_punct("{")
        patterns = self._group()
        query = SelectQuery(
            prefixes=dict(self.prefixes),
            distinct=distinct,
            projection=projection,
            patterns=patterns,
        )
        self._modifiers(query)
        if self.peek() is not None:
            raise self.error("trailing content after query")
        return query

    def _prologue(self) -> None:
        while True:
            if self.take_word("PREFIX"):
                tok = self.next()
                if tok.kind != "pname" or tok.value[1]:
                    raise self.error("expected 'prefix:' in PREFIX declaration")
                iri = self.next()
                if iri.kind != "iri":
                    raise self.error("expected IRI in PREFIX declaration")
                self.prefixes[tok.value[0]] = iri.value
            elif self.take_word("BASE"):
                raise UnsupportedSparql("BASE is not supported; use absolute IRIs")
            else:
                return

    def _projection(self) -> Optional[list]:
        if self.take_punct("*"):
            return None
        items: list = []
        while True:
            tok = self.peek()
            if tok is None:
                raise self.error("unterminated projection")
            if tok.kind == "var":
                items.append(Var(self.next().value))
            elif tok.kind == "punct" and tok.value == "(":
                self.next()
                expr = self._expr()
                if not self.take_word("AS"):
                    raise self.error("expected AS in projection expression")
                var_tok = self.next()
                if var_tok.kind != "var":
                    raise self.error("expected variable after AS")
                self.expect_punct(")")
                items.append((expr, Var(var_tok.value)))
            else:
                break
        if not items:
            raise self.error("empty projection")
        return items

    def _group(self) -> list:
        patterns: list = []
        while True:
            tok = self.peek()
            if tok is None:
                raise self.error("unterminated group: missing '}'")
            if tok.kind == "punct" and tok.value == "}":
                self.next()
                return patterns
            if tok.kind == "punct" and tok.value == ".":
                self.next()
                continue
            if tok.kind == "word" and tok.value.upper() == "FILTER":
                self.next()
                self.expect_punct("(")
                expr = self._expr()
                self.expect_punct(")")
                patterns.append(Filter(expr))
                continue
            if tok.kind == "word" and tok.value.upper() in UNSUPPORTED_KEYWORDS:
                raise UnsupportedSparql(f"{tok.value.upper()} is outside the local engine subset")
            if tok.kind == "punct" and tok.value == "{":
                raise UnsupportedSparql("nested group patterns are outside the local engine subset")
            patterns.extend(self._triples_block())

    def _triples_block(self) -> list:
        patterns = []
        subject = self._term(allow_literal=False)
        while True:
            predicate = self._predicate()
            while True:
                obj = self._term(allow_literal=True)
                patterns.append(TriplePattern(subject, predicate, obj))
                if not self.take_punct(","):
                    break
            if not self.take_punct(";"):
                break
            nxt = self.peek()
            if nxt and nxt.kind == "punct" and nxt.value in ".}":
                break
        return patterns

    def _predicate(self):
        tok = self.peek()
        if tok and tok.kind == "word" and tok.value == "a":
            self.next()
            return Iri(RDF_TYPE)
        if tok and tok.kind == "punct" and tok.value == "^":
            raise UnsupportedSparql("inverse property paths are outside the subset")
        term = self._term(allow_literal=False)
        if isinstance(term, Iri):
            mod = self.take_punct("*", "+")
            if mod:
                return PathMod(term, mod)
            if self.take_punct("/", "|"):
                raise UnsupportedSparql("property path sequences are outside the subset")
        if isinstance(term, Var):
            return term
        return term

    def _term(self, allow_literal: bool):
        tok = self.next()
        if tok.kind == "var":
            return Var(tok.value)
        if tok.kind == "iri":
            return Iri(tok.value)
        if tok.kind == "pname":
            return self._expand(tok)
        if tok.kind == "number":
            if not allow_literal:
                raise self.error("numeric literal not allowed here")
            return _number_literal(tok.value)
        if tok.kind == "literal":
            if not allow_literal:
                raise self.error("literal not allowed here")
            return self._literal(tok)
        if tok.kind == "word" and tok.value in ("true", "false"):
            return Literal(tok.value, datatype=XSD_BOOLEAN)
        if tok.kind == "punct" and tok.value == "-":
            num = self.next()
            if num.kind != "number":
                raise self.error("expected number after '-'")
            return _number_literal("-" + num.value)
        if tok.kind == "punct" and tok.value == "[":
            raise UnsupportedSparql("blank node patterns are outside the subset")
        raise SparqlParseError(f"line {tok.line}: unexpected {tok.value!r}")

    def _literal(self, tok: Token) -> Literal:
        value, lang, datatype = tok.value
        if datatype is None:
            return Literal(value, lang=lang)
        if datatype[0] == "iri":
            return Literal(value, datatype=datatype[1])
        prefix, local = datatype[1], datatype[2]
        if prefix not in self.prefixes:
            raise SparqlParseError(f"undeclared prefix {prefix!r} in datatype")
        return Literal(value, datatype=self.prefixes[prefix] + local)

    def _expand(self, tok: Token) -> Iri:
        prefix, local = tok.value
        if prefix not in self.prefixes:
            raise SparqlParseError(f"line {tok.line}: undeclared prefix {prefix!r}")
        return Iri(self.prefixes[prefix] + local)

    # -- expressions ---------------------------------------------------

    def _expr(self) -> Expr:
        return self._or()

    def _or(self) -> Expr:
        left = self._and()
        args = [left]
        while self.take_punct("||"):
            args.append(self._and())
        return args[0] if len(args) == 1 else BoolOp("||", tuple(args))

    def _and(self) -> Expr:
        left = self._relational()
        args = [left]
        while self.take_punct("&&"):
            args.append(self._relational())
        return args[0] if len(args) == 1 else BoolOp("&&", tuple(args))

    def _relational(self) -> Expr:
        left = self._additive()
        op = self.take_punct("=", "!=", "<", "<=", ">", ">=")
        if op:
            right = self._additive()
            return Compare(op, left, right)
        return left

    def _additive(self) -> Expr:
        left = self._multiplicative()
        while True:
            op = self.take_punct("+", "-")
            if not op:
                return left
            left = Arith(op, left, self._multiplicative())

    def _multiplicative(self) -> Expr:
        left = self._unary()
        while True:
            op = self.take_punct("*", "/")
            if not op:
                return left
            left = Arith(op, left, self._unary())

    def _unary(self) -> Expr:
        if self.take_punct("!"):
            return Not(self._unary())
        if self.take_punct("-"):
            return Arith("-", Literal("0", datatype=XSD_INTEGER), self._unary())
        self.take_punct("+")
        return self._primary()

    def _primary(self) -> Expr:
        tok = self.peek()
        if tok is None:
            raise self.error("unexpected end of expression")
        if tok.kind == "punct" and tok.value == "(":
            self.next()
            expr = self._expr()
            self.expect_punct(")")
            return expr
        if tok.kind == "var":
            self.next()
            return Var(tok.value)
        if tok.kind == "number":
            self.next()
            return _number_literal(tok.value)
        if tok.kind == "literal":
            self.next()
            return self._literal(tok)
        if tok.kind == "iri":
            self.next()
            return Iri(tok.value)
        if tok.kind == "pname":
            self.next()
            return self._expand(tok)
        if tok.kind == "word":
            upper = tok.value.upper()
            if tok.value in ("true", "false"):
                self.next()
                return Literal(tok.value, datatype=XSD_BOOLEAN)
            if upper in AGGREGATE_FUNCS:
                return self._aggregate(upper)
            if upper in SCALAR_FUNCS:
                self.next()
                self.expect_punct("(")
                args = []
                if not self.take_punct(")"):
                    args.append(self._expr())
                    while self.take_punct(","):
                        args.append(self._expr())
                    self.expect_punct(")")
                return FuncCall(upper, tuple(args))
            raise UnsupportedSparql(f"function {tok.value} is outside the subset")
        raise self.error(f"unexpected {tok.value!r} in expression")

    def _aggregate(self, func: str) -> Aggregate:
        self.next()
        self.expect_punct("(")
        distinct = bool(self.take_word("DISTINCT"))
        if self.take_punct("*"):
            if func != "COUNT":
                raise self.error("'*' only valid in COUNT")
            arg = None
        else:
            arg = self._expr()
        self.expect_punct(")")
        return Aggregate(func, distinct, arg)

    # -- solution modifiers ---------------------------------------------

    def _modifiers(self, query: SelectQuery) -> None:
        while True:
            if self.take_word("GROUP"):
                if not self.take_word("BY"):
                    raise self.error("expected BY after GROUP")
                while True:
                    tok = self.peek()
                    if tok and tok.kind == "var":
                        query.group_by.append(Var(self.next().value))
                    else:
                        break
                if not query.group_by:
                    raise UnsupportedSparql("GROUP BY expressions are outside the subset")
            elif self.take_word("HAVING"):
                raise UnsupportedSparql("HAVING is outside the subset")
            elif self.take_word("ORDER"):
                if not self.take_word("BY"):
                    raise self.error("expected BY after ORDER")
                saw = False
                while True:
                    direction = self.take_word("ASC", "DESC")
                    if direction:
                        self.expect_punct("(")
                        expr = self._expr()
                        self.expect_punct(")")
                        query.order_by.append((expr, direction == "ASC"))
                        saw = True
                        continue
                    tok = self.peek()
                    if tok and tok.kind == "var":
                        query.order_by.append((Var(self.next().value), True))
                        saw = True
                        continue
                    break
                if not saw:
                    raise self.error("empty ORDER BY")
            elif self.take_word("LIMIT"):
                query.limit = self._int()
            elif self.take_word("OFFSET"):
                query.offset = self._int()
            else:
                return

    def _int(self) -> int:
        tok = self.next()
        if tok.kind != "number" or not re.fullmatch(r"\d+", str(tok.value)):
            raise self.error("expected non-negative integer")
        return int(tok.value)


def _number_literal(text: str) -> Literal:
    if "e" in text or "E" in text:
        return Literal(text, datatype=XSD_DOUBLE)
    if "." in text:
        return Literal(text, datatype=XSD_DECIMAL)
    return Literal(text, datatype=XSD_INTEGER)


def parse_select(text: str) -> SelectQuery:
    """Parse a SELECT query into the engine AST (strict subset)."""
    return _Parser(tokenize(text)).parse()


_TRAILING_MODIFIER_WORDS = {
    "GROUP",
    "BY",
    "HAVING",
    "ORDER",
    "ASC",
    "DESC",
    "LIMIT",
    "OFFSET",
}


def check_select_syntax(text: str) -> None:
    """Tolerant structural validation for live-endpoint queries.

    Raises :class:`SparqlParseError` on malformed tokens, non-SELECT
    forms, unbalanced braces, or trailing garbage. Accepts SPARQL 1.1
    constructs the local engine cannot evaluate.
    """
    tokens = tokenize(text)
    i = 0

    def word_at(j: int) -> str:
        return tokens[j].value.upper() if j < len(tokens) and tokens[j].kind == "word" else ""

    while word_at(i) == "PREFIX":
        if i + 2 >= len(tokens) or tokens[i + 1].kind != "pname" or tokens[i + 2].kind != "iri":
            raise SparqlParseError("malformed PREFIX declaration")
        i += 3
    if word_at(i) != "SELECT":
        raise SparqlParseError("not a SELECT query")
    i += 1
    # projection: anything up to the opening brace
    while i < len(tokens) and not (tokens[i].kind == "punct" and tokens[i].value == "{"):
        if tokens[i].kind == "punct" and tokens[i].value == "}":
            raise SparqlParseError("unexpected '}' before WHERE block")
        i += 1
    if i >= len(tokens):
        raise SparqlParseError("missing WHERE block")
    depth = 0
    while i < len(tokens):
        if tokens[i].kind == "punct" and tokens[i].value == "{":
            depth += 1
        elif tokens[i].kind == "punct" and tokens[i].value == "}":
            depth -= 1
            if depth == 0:
                i += 1
                break
            if depth < 0:
                raise SparqlParseError("unbalanced braces")
        i += 1
    if depth != 0:
        raise SparqlParseError("unbalanced braces")
    # trailing solution modifiers only
    while i < len(tokens):
        tok = tokens[i]
        if tok.kind == "word" and tok.value.upper() in _TRAILING_MODIFIER_WORDS:
            i += 1
            continue
        if tok.kind in ("var", "number", "pname", "iri"):
            i += 1
            continue
        if tok.kind == "punct" and tok.value == "(":
            pdepth = 0
            while i < len(tokens):
                if tokens[i].kind == "punct" and tokens[i].value == "(":
                    pdepth += 1
                elif tokens[i].kind == "punct" and tokens[i].value == ")":
                    pdepth -= 1
                    if pdepth == 0:
                        break
                i += 1
            if pdepth != 0:
                raise SparqlParseError("unbalanced parentheses in modifiers")
            i += 1
            continue
        raise SparqlParseError(f"unexpected content after query: {tok.value!r}")


def declared_and_used_prefixes(text: str) -> tuple[dict[str, str], set[str]]:
    """Prefixes declared by PREFIX lines and prefixes used by pnames."""
    tokens = tokenize(text)
    declared: dict[str, str] = {}
    used: set[str] = set()
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if (
            tok.kind == "word"
            and tok.value.upper() == "PREFIX"
            and i + 2 < len(tokens)
            and tokens[i + 1].kind == "pname"
            and tokens[i + 2].kind == "iri"
        ):
            declared[tokens[i + 1].value[0]] = tokens[i + 2].value
            i += 3
            continue
        if tok.kind == "pname":
            used.add(tok.value[0])
        if tok.kind == "literal" and tok.value[2] and tok.value[2][0] == "pname":
            used.add(tok.value[2][1])
        i += 1
    return declared, used
