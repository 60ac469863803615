"""SPARQL results: the in-package row type and the standard JSON format."""

from __future__ import annotations

from dataclasses import dataclass, field

from .model import BNode, Iri, Literal, Term


@dataclass
class ResultSet:
    """Projected variable names plus rows of plain string values."""

    variables: list[str]
    rows: list[dict[str, str]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> list[str]:
        return [row.get(name, "") for row in self.rows]


def term_to_binding(term: Term) -> dict:
    if isinstance(term, Iri):
        return {"type": "uri", "value": term.value}
    if isinstance(term, BNode):
        return {"type": "bnode", "value": term.label}
    binding = {"type": "literal", "value": term.lexical}
    if term.datatype:
        binding["datatype"] = term.datatype
    if term.lang:
        binding["xml:lang"] = term.lang
    return binding


def rows_to_json(variables: list[str], rows: list[dict[str, Term]]) -> dict:
    """Serialize engine output as application/sparql-results+json."""
    bindings = []
    for row in rows:
        bindings.append({v: term_to_binding(t) for v, t in row.items()})
    return {"head": {"vars": list(variables)}, "results": {"bindings": bindings}}


def json_to_result_set(doc: dict) -> ResultSet:
    """Flatten a SPARQL JSON results document to string-valued rows."""
    variables = list(doc.get("head", {}).get("vars", []))
    rows = []
    for binding in doc.get("results", {}).get("bindings", []):
        rows.append({var: cell.get("value", "") for var, cell in binding.items()})
    return ResultSet(variables=variables, rows=rows)
