"""Knowledge-graph schema ingestion.

Parses the Turtle schema once at startup and exposes the class/property
inventory that agent prompts embed (compact form, not the full Turtle)
and that query compliance checks consult.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

from .rdf.model import Iri, OWL_NS, RDF_NS, RDFS_NS, XSD
from .rdf.turtle import parse_turtle

logger = logging.getLogger(__name__)

_CLASS_TYPES = {OWL_NS + "Class", RDFS_NS + "Class"}
_PROPERTY_TYPES = {
    RDF_NS + "Property",
    OWL_NS + "ObjectProperty",
    OWL_NS + "DatatypeProperty",
    OWL_NS + "AnnotationProperty",
}
_RDFS_DOMAIN = Iri(RDFS_NS + "domain")
_RDFS_RANGE = Iri(RDFS_NS + "range")
_RDF_TYPE = Iri(RDF_NS + "type")

STANDARD_NAMESPACES = (RDF_NS, RDFS_NS, OWL_NS, XSD)


def is_standard_term(iri: str) -> bool:
    return iri.startswith(STANDARD_NAMESPACES)


@dataclass
class SchemaDocument:
    turtle_text: str
    classes: set[str] = field(default_factory=set)
    properties: set[str] = field(default_factory=set)
    prefixes: dict[str, str] = field(default_factory=dict)
    domains: dict[str, set[str]] = field(default_factory=dict)
    ranges: dict[str, set[str]] = field(default_factory=dict)

    @property
    def is_empty(self) -> bool:
        return not self.classes and not self.properties

    def contains(self, iri: str) -> bool:
        return iri in self.classes or iri in self.properties

    def prefixed(self, iri: str) -> str:
        """Best prefixed form of an IRI, falling back to <iri>."""
        best = ("", "")
        for prefix, ns in self.prefixes.items():
            if iri.startswith(ns) and len(ns) > len(best[1]):
                best = (prefix, ns)
        if best[1]:
            local = iri[len(best[1]) :]
            if local and "/" not in local and "#" not in local:
                return f"{best[0]}:{local}"
        return f"<{iri}>"

    def prefix_declarations(self, prefixes: set[str]) -> str:
        lines = [
            f"PREFIX {p}: <{self.prefixes[p]}>"
            for p in sorted(prefixes)
            if p in self.prefixes
        ]
        return "\n".join(lines)

    def compact_inventory(self) -> str:
        """Deterministic class/property listing for prompt embedding."""
        lines = []
        prefix_lines = [f"@prefix {p}: <{ns}>" for p, ns in sorted(self.prefixes.items())]
        lines.extend(prefix_lines)
        lines.append("Classes: " + ", ".join(self.prefixed(c) for c in sorted(self.classes)))
        lines.append("Properties:")
        for prop in sorted(self.properties):
            hint = ""
            doms = ", ".join(self.prefixed(d) for d in sorted(self.domains.get(prop, ())))
            rngs = ", ".join(self.prefixed(r) for r in sorted(self.ranges.get(prop, ())))
            if doms or rngs:
                hint = f"  [{doms or '?'} -> {rngs or '?'}]"
            lines.append(f"  {self.prefixed(prop)}{hint}")
        return "\n".join(lines)


def load_schema(turtle_text: str) -> SchemaDocument:
    """Parse a Turtle schema into its inventory.

    Raises TurtleParseError (with line number) on malformed input; an
    empty document yields an empty inventory with a logged warning.
    """
    graph, prefixes = parse_turtle(turtle_text)
    doc = SchemaDocument(turtle_text=turtle_text, prefixes=prefixes)

    for s, p, o in graph.triples(None, _RDF_TYPE, None):
        if not isinstance(s, Iri) or not isinstance(o, Iri):
            continue
        if o.value in _CLASS_TYPES:
            doc.classes.add(s.value)
        elif o.value in _PROPERTY_TYPES:
            doc.properties.add(s.value)
        elif not is_standard_term(o.value):
            # instance data inside a schema file still reveals a class
            doc.classes.add(o.value)

    for predicate, target in ((_RDFS_DOMAIN, doc.domains), (_RDFS_RANGE, doc.ranges)):
        for s, _, o in graph.triples(None, predicate, None):
            if not isinstance(s, Iri) or not isinstance(o, Iri):
                continue
            doc.properties.add(s.value)
            target.setdefault(s.value, set()).add(o.value)
            if not is_standard_term(o.value) and not o.value.startswith(XSD):
                doc.classes.add(o.value)

    if doc.is_empty:
        logger.warning("schema document declares no classes or properties")
    return doc


def load_schema_file(path: str | Path) -> SchemaDocument:
    return load_schema(Path(path).read_text(encoding="utf-8"))
