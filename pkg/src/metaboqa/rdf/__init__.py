"""Minimal RDF stack: term model, Turtle subset parser, SPARQL SELECT
subset engine. Backs the bundled fixture graph; live endpoints speak full
SPARQL 1.1 over HTTP and never touch this engine."""

from .model import Graph, Iri, Literal, BNode, Triple  # noqa: F401
