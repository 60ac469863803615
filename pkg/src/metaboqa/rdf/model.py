"""RDF terms and an indexed in-memory triple store."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Union

XSD = "http://www.w3.org/2001/XMLSchema#"
RDF_NS = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
RDFS_NS = "http://www.w3.org/2000/01/rdf-schema#"
OWL_NS = "http://www.w3.org/2002/07/owl#"

XSD_INTEGER = XSD + "integer"
XSD_DECIMAL = XSD + "decimal"
XSD_DOUBLE = XSD + "double"
XSD_BOOLEAN = XSD + "boolean"
XSD_STRING = XSD + "string"
RDF_TYPE = RDF_NS + "type"

NUMERIC_DATATYPES = {XSD_INTEGER, XSD_DECIMAL, XSD_DOUBLE, XSD + "float", XSD + "long", XSD + "int"}


@dataclass(frozen=True)
class Iri:
    value: str

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class BNode:
    label: str

    def __str__(self) -> str:
        return f"_:{self.label}"


@dataclass(frozen=True)
class Literal:
    lexical: str
    datatype: Optional[str] = None
    lang: Optional[str] = None

    def __str__(self) -> str:
        return self.lexical

    def numeric_value(self) -> Optional[Union[int, float]]:
        """Python number for numeric-typed literals, else None."""
        if self.datatype not in NUMERIC_DATATYPES:
            return None
        try:
            if self.datatype == XSD_INTEGER or (
                self.datatype in (XSD + "long", XSD + "int")
            ):
                return int(self.lexical)
            return float(self.lexical)
        except ValueError:
            return None


Term = Union[Iri, BNode, Literal]
Triple = tuple[Term, Term, Term]


def number_literal(value: Union[int, float]) -> Literal:
    if isinstance(value, int):
        return Literal(str(value), datatype=XSD_INTEGER)
    # render floats the way SPARQL engines commonly do for decimals
    text = repr(value)
    return Literal(text, datatype=XSD_DECIMAL)


class Graph:
    """Triple store with subject/predicate/object indexes.

    Sized for fixture graphs (thousands of triples), not production data.
    """

    def __init__(self):
        self._triples: list[Triple] = []
        self._by_s: dict[Term, list[Triple]] = {}
        self._by_p: dict[Term, list[Triple]] = {}
        self._by_o: dict[Term, list[Triple]] = {}

    def add(self, s: Term, p: Term, o: Term) -> None:
        t = (s, p, o)
        self._triples.append(t)
        self._by_s.setdefault(s, []).append(t)
        self._by_p.setdefault(p, []).append(t)
        self._by_o.setdefault(o, []).append(t)

    def __len__(self) -> int:
        return len(self._triples)

    def triples(
        self,
        s: Optional[Term] = None,
        p: Optional[Term] = None,
        o: Optional[Term] = None,
    ) -> Iterator[Triple]:
        """Iterate triples matching the pattern; None is a wildcard."""
        if s is not None:
            candidates = self._by_s.get(s, [])
        elif p is not None:
            candidates = self._by_p.get(p, [])
        elif o is not None:
            candidates = self._by_o.get(o, [])
        else:
            candidates = self._triples
        for t in candidates:
            if s is not None and t[0] != s:
                continue
            if p is not None and t[1] != p:
                continue
            if o is not None and t[2] != o:
                continue
            yield t

    def nodes(self) -> set[Term]:
        out: set[Term] = set()
        for s, _, o in self._triples:
            out.add(s)
            out.add(o)
        return out
