"""metaboqa: conversational question answering over metabolomics knowledge graphs.

A six-agent pipeline (entry, validator, supervisor, kg, sparql_runner,
interpreter) that validates natural-language questions, resolves entity
mentions against authoritative sources, generates and refines SPARQL,
executes it against a SPARQL 1.1 endpoint, and interprets the results.
"""

__version__ = "0.1.0"
