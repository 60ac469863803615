"""SPARQL endpoints: HTTP (SPARQL 1.1 Protocol) and local fixture graphs.

Both expose ``select(query) -> ResultSet``. The HTTP endpoint asks for
JSON results and accepts full SPARQL 1.1; the local endpoint evaluates
the engine subset over a Turtle file, which is what the bundled fixture
graph and offline tests use.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

import requests

from .errors import EndpointError, SparqlParseError
from .rdf.engine import evaluate
from .rdf.model import Graph
from .rdf.results import ResultSet, json_to_result_set, rows_to_json
from .rdf.sparql import parse_select
from .rdf.turtle import parse_turtle

SPARQL_JSON = "application/sparql-results+json"


class SparqlEndpoint:
    def select(self, query: str) -> ResultSet:
        raise NotImplementedError


class HttpSparqlEndpoint(SparqlEndpoint):
    """SPARQL 1.1 Protocol client: GET for short queries, form POST for
    long ones, JSON results requested."""

    POST_THRESHOLD = 2000

    def __init__(
        self,
        url: str,
        timeout: float = 10.0,
        session: Optional[requests.Session] = None,
    ):
        self.url = url
        self.timeout = timeout
        self.session = session or requests.Session()

    def select(self, query: str) -> ResultSet:
        headers = {"Accept": SPARQL_JSON}
        try:
            if len(query) > self.POST_THRESHOLD:
                resp = self.session.post(
                    self.url,
                    data={"query": query},
                    headers=headers,
                    timeout=self.timeout,
                )
            else:
                resp = self.session.get(
                    self.url,
                    params={"query": query},
                    headers=headers,
                    timeout=self.timeout,
                )
        except requests.RequestException as exc:
            raise EndpointError(f"endpoint unreachable: {exc}")
        if resp.status_code != 200:
            raise EndpointError(
                f"endpoint HTTP {resp.status_code}: {resp.text[:300]}"
            )
        try:
            return json_to_result_set(resp.json())
        except ValueError as exc:
            raise EndpointError(f"endpoint returned non-JSON results: {exc}")


class LocalGraphEndpoint(SparqlEndpoint):
    """Evaluate queries against an in-memory graph (fixture mode)."""

    def __init__(self, graph: Graph):
        self.graph = graph

    @classmethod
    def from_turtle_file(cls, path: str | Path) -> "LocalGraphEndpoint":
        text = Path(path).read_text(encoding="utf-8")
        graph, _ = parse_turtle(text)
        return cls(graph)

    def select(self, query: str) -> ResultSet:
        try:
            ast = parse_select(query)
        except SparqlParseError as exc:
            raise EndpointError(f"query rejected: {exc}")
        variables, rows = evaluate(self.graph, ast)
        return json_to_result_set(rows_to_json(variables, rows))


def endpoint_from_location(location: str, timeout: float = 10.0) -> SparqlEndpoint:
    """http(s) URL -> HTTP endpoint, anything else -> local Turtle file."""
    if location.startswith("http://") or location.startswith("https://"):
        return HttpSparqlEndpoint(location, timeout=timeout)
    path = Path(location)
    if not path.exists():
        raise EndpointError(f"no such graph file: {location}")
    return LocalGraphEndpoint.from_turtle_file(path)
