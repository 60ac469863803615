"""Turtle subset parser.

Covers what the bundled schema and fixture graphs use: prefix directives,
prefixed names, IRIs, blank node labels, string literals with language
tags and datatypes, numeric and boolean shorthand, and predicate/object
lists with ``;`` and ``,``. Collections and anonymous blank nodes are out
of scope and raise :class:`TurtleParseError` with the offending line.
"""

from __future__ import annotations

import re
from typing import Optional

from ..errors import TurtleParseError
from .model import (
    BNode,
    Graph,
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
_BLANK = re.compile(r"_:([A-Za-z0-9][\w-]*)")
_NUMBER = re.compile(r"[+-]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?")
_STRING_ESCAPES = {
    '"': '"',
    "'": "'",
    "\\": "\\",
    "n": "\n",
    "t": "\t",
    "r": "\r",
    "b": "\b",
    "f": "\f",
}


class _Scanner:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.line = 1

    def error(self, message: str) -> TurtleParseError:
        return TurtleParseError(message, self.line)

    def eof(self) -> bool:
        self.skip_ws()
        return self.pos >= len(self.text)

    def skip_ws(self) -> None:
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch == "\n":
                self.line += 1
                self.pos += 1
            elif ch in " \t\r":
                self.pos += 1
            elif ch == "#":
                nl = self.text.find("\n", self.pos)
                self.pos = len(self.text) if nl < 0 else nl
            else:
                break

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take(self, literal: str) -> bool:
        self.skip_ws()
        if self.text.startswith(literal, self.pos):
            self.pos += len(literal)
            return True
        return False

    def expect(self, literal: str) -> None:
        if not self.take(literal):
            found = self.text[self.pos : self.pos + 20]
            raise self.error(f"expected {literal!r}, found {found!r}")

    def match(self, pattern: re.Pattern) -> Optional[re.Match]:
        self.skip_ws()
        m = pattern.match(self.text, self.pos)
        if m:
            self.pos = m.end()
        return m

    def word(self) -> str:
        self.skip_ws()
        m = re.compile(r"[A-Za-z@][\w@-]*").match(self.text, self.pos)
        if not m:
            return ""
        self.pos = m.end()
        return m.group(0)

    def read_string(self) -> str:
        self.skip_ws()
        for quote in ('"""', "'''", '"', "'"):
            if self.text.startswith(quote, self.pos):
                return self._read_quoted(quote)
        raise self.error("expected string literal")

    def _read_quoted(self, quote: str) -> str:
        self.pos += len(quote)
        out: list[str] = []
        while True:
            if self.pos >= len(self.text):
                raise self.error("unterminated string literal")
            if self.text.startswith(quote, self.pos):
                self.pos += len(quote)
                return "".join(out)
            ch = self.text[self.pos]
            if ch == "\\":
                esc = self.text[self.pos + 1 : self.pos + 2]
                if esc in _STRING_ESCAPES:
                    out.append(_STRING_ESCAPES[esc])
                    self.pos += 2
                elif esc == "u":
                    out.append(chr(int(self.text[self.pos + 2 : self.pos + 6], 16)))
                    self.pos += 6
                elif esc == "U":
                    out.append(chr(int(self.text[self.pos + 2 : self.pos + 10], 16)))
                    self.pos += 10
                else:
                    raise self.error(f"bad escape \\{esc}")
            else:
                if ch == "\n":
                    if len(quote) == 1:
                        raise self.error("newline in single-quoted string")
                    self.line += 1
                out.append(ch)
                self.pos += 1


class TurtleParser:
    def __init__(self, text: str):
        self.scanner = _Scanner(text)
        self.prefixes: dict[str, str] = {}
        self.graph = Graph()

    def parse(self) -> Graph:
        sc = self.scanner
        while not sc.eof():
            if self._directive():
                continue
            self._triples_statement()
        return self.graph

    def _directive(self) -> bool:
        sc = self.scanner
        sc.skip_ws()
        lowered = sc.text[sc.pos : sc.pos + 8].lower()
        if lowered.startswith("@prefix"):
            sc.pos += len("@prefix")
            self._prefix_body(dot_required=True)
            return True
        if lowered.startswith("prefix") and not lowered.startswith("prefixe"):
            # SPARQL-style directive, no trailing dot
            sc.pos += len("prefix")
            self._prefix_body(dot_required=False)
            return True
        if lowered.startswith("@base") or lowered.startswith("base "):
            raise sc.error("@base is not supported; use absolute IRIs")
        return False

    def _prefix_body(self, dot_required: bool) -> None:
        sc = self.scanner
        m = sc.match(_PNAME)
        if not m or m.group(2):
            raise sc.error("expected prefix name ending in ':'")
        prefix = m.group(1) or ""
        iri = sc.match(_IRIREF)
        if not iri:
            raise sc.error("expected IRI in prefix directive")
        self.prefixes[prefix] = iri.group(1)
        if dot_required:
            sc.expect(".")
        else:
            sc.take(".")

    def _triples_statement(self) -> None:
        sc = self.scanner
        subject = self._term(position="subject")
        while True:
            predicate = self._predicate()
            while True:
                obj = self._term(position="object")
                self.graph.add(subject, predicate, obj)
                if not sc.take(","):
                    break
            if not sc.take(";"):
                break
            # allow trailing ';' before '.'
            if sc.peek() == ".":
                break
        sc.expect(".")

    def _predicate(self) -> Term:
        sc = self.scanner
        sc.skip_ws()
        if re.match(r"a[\s<]", sc.text[sc.pos : sc.pos + 2] or ""):
            sc.pos += 1
            return Iri(RDF_TYPE)
        term = self._term(position="predicate")
        if isinstance(term, Literal):
            raise sc.error("literal cannot be a predicate")
        return term

    def _term(self, position: str) -> Term:
        sc = self.scanner
        ch = sc.peek()
        if ch == "":
            raise sc.error(f"unexpected end of input reading {position}")
        if ch == "<":
            m = sc.match(_IRIREF)
            if not m:
                raise sc.error("malformed IRI")
            return Iri(m.group(1))
        if ch == "_":
            m = sc.match(_BLANK)
            if not m:
                raise sc.error("malformed blank node label")
            return BNode(m.group(1))
        if ch in "\"'":
            return self._literal()
        if ch.isdigit() or ch in "+-" or (ch == "." and position == "object"):
            m = sc.match(_NUMBER)
            if not m:
                raise sc.error("malformed numeric literal")
            return _number_to_literal(m.group(0))
        if ch == "[" or ch == "(":
            raise sc.error(f"{'anonymous blank nodes' if ch == '[' else 'collections'} are not supported")
        # boolean shorthand or prefixed name
        rest = sc.text[sc.pos :]
        if re.match(r"true\b", rest):
            sc.pos += 4
            return Literal("true", datatype=XSD_BOOLEAN)
        if re.match(r"false\b", rest):
            sc.pos += 5
            return Literal("false", datatype=XSD_BOOLEAN)
        m = sc.match(_PNAME)
        if m:
            return self._expand(m.group(1) or "", m.group(2) or "")
        raise sc.error(f"cannot parse {position} at {rest[:20]!r}")

    def _literal(self) -> Literal:
        sc = self.scanner
        value = sc.read_string()
        if sc.text.startswith("^^", sc.pos):
            sc.pos += 2
            dt = self._term(position="datatype")
            if not isinstance(dt, Iri):
                raise sc.error("datatype must be an IRI")
            return Literal(value, datatype=dt.value)
        if sc.text.startswith("@", sc.pos):
            sc.pos += 1
            m = re.compile(r"[A-Za-z]+(?:-[A-Za-z0-9]+)*").match(sc.text, sc.pos)
            if not m:
                raise sc.error("malformed language tag")
            sc.pos = m.end()
            return Literal(value, lang=m.group(0))
        return Literal(value)

    def _expand(self, prefix: str, local: str) -> Iri:
        if prefix not in self.prefixes:
            raise self.scanner.error(f"undeclared prefix {prefix!r}")
        return Iri(self.prefixes[prefix] + local)


def _number_to_literal(text: str) -> Literal:
    if "e" in text or "E" in text:
        return Literal(text, datatype=XSD_DOUBLE)
    if "." in text:
        return Literal(text, datatype=XSD_DECIMAL)
    return Literal(text, datatype=XSD_INTEGER)


def parse_turtle(text: str) -> tuple[Graph, dict[str, str]]:
    """Parse a Turtle document, returning the graph and its prefix map."""
    parser = TurtleParser(text)
    graph = parser.parse()
    return graph, dict(parser.prefixes)
