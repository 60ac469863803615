"""Query chain: prompt assembly, generation, sanitization, compliance
checking, execution with CSV spilling, single-pass refinement, and
empty-result diagnosis.

A chain instance lives for one turn; refinement can run at most once per
instance ("performed only once").
"""

from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .endpoints import SparqlEndpoint
from .errors import EndpointError, MetaboqaError, SparqlParseError, UnsupportedSparql
from .gateway import BudgetLedger, ChatMessage, LlmGateway, TokenUsage
from .rdf.model import RDF_TYPE
from .rdf.results import ResultSet
from .rdf.sparql import (
    Filter,
    PathMod,
    TriplePattern,
    Var,
    check_select_syntax,
    declared_and_used_prefixes,
    parse_select,
)
from .refinement import RefinementStore
from .resolvers import ResolvedEntity
from .schema import SchemaDocument, is_standard_term

logger = logging.getLogger(__name__)

DATA_ABSENT_MESSAGE = (
    "The requested data does not appear to exist in the knowledge graph, "
    "although errors may persist in the query formulation."
)


@dataclass
class SparqlAttempt:
    """One generated query and its outcome."""

    raw_llm_output: str
    attempt_index: int  # 1 or 2
    sanitized_query: Optional[str] = None
    status: str = "syntax_error"  # ok_rows | ok_empty | syntax_error | endpoint_error
    row_count: int = 0
    spill_path: Optional[str] = None
    error: Optional[str] = None
    violations: list[str] = field(default_factory=list)
    usage: Optional[TokenUsage] = None

    def to_dict(self) -> dict:
        return {
            "attempt_index": self.attempt_index,
            "status": self.status,
            "row_count": self.row_count,
            "spill_path": self.spill_path,
            "sanitized_query": self.sanitized_query,
            "violations": list(self.violations),
            "error": self.error,
        }


# -- sanitization -----------------------------------------------------------

_FENCE = re.compile(r"```[\w-]*\n(.*?)```", re.DOTALL)
_SELECT_KW = re.compile(r"\bSELECT\b", re.IGNORECASE)
_PREFIX_BLOCK_TAIL = re.compile(
    r"(?:PREFIX\s+[A-Za-z][\w-]*:\s*<[^<>\s]*>\s*)+$", re.IGNORECASE
)


def sanitize_query(raw_llm_output: str, schema: Optional[SchemaDocument] = None) -> str:
    """Extract the first complete SELECT query from LLM output.

    Strips code fences and prose, injects schema prefixes that are used
    but undeclared, and verifies the result is structurally valid SPARQL.
    Raises SparqlParseError when no SELECT query can be extracted.
    Idempotent: sanitizing sanitized output is a no-op.
    """
    candidates = [m.group(1) for m in _FENCE.finditer(raw_llm_output)]
    candidates.append(raw_llm_output)
    for candidate in candidates:
        carved = _carve_select(candidate)
        if carved is None:
            continue
        query = _inject_missing_prefixes(carved, schema)
        try:
            check_select_syntax(query)
        except SparqlParseError:
            continue
        return query
    raise SparqlParseError("no extractable SELECT query in output")


def _carve_select(text: str) -> Optional[str]:
    m = _SELECT_KW.search(text)
    if m is None:
        return None
    prefix_block = _PREFIX_BLOCK_TAIL.search(text[: m.start()])
    start = prefix_block.start() if prefix_block else m.start()

    open_brace = text.find("{", m.end())
    if open_brace < 0:
        return None
    depth = 0
    end = None
    for i in range(open_brace, len(text)):
        if text[i] == "{":
            depth += 1
        elif text[i] == "}":
            depth -= 1
            if depth == 0:
                end = i + 1
                break
    if end is None:
        return None
    end = _consume_modifiers(text, end)
    return text[start:end].strip()


_MODIFIER_CLAUSES = [
    re.compile(r"\s*GROUP\s+BY(?:\s+[?$]\w+)+", re.IGNORECASE),
    re.compile(r"\s*HAVING\s*\([^()]*\)", re.IGNORECASE),
    re.compile(
        r"\s*ORDER\s+BY(?:\s+(?:ASC|DESC)\s*\([^()]*\)|\s+[?$]\w+)+", re.IGNORECASE
    ),
    re.compile(r"\s*LIMIT\s+\d+", re.IGNORECASE),
    re.compile(r"\s*OFFSET\s+\d+", re.IGNORECASE),
]


def _consume_modifiers(text: str, pos: int) -> int:
    while True:
        for clause in _MODIFIER_CLAUSES:
            m = clause.match(text, pos)
            if m:
                pos = m.end()
                break
        else:
            return pos


def _inject_missing_prefixes(query: str, schema: Optional[SchemaDocument]) -> str:
    if schema is None:
        return query
    try:
        declared, used = declared_and_used_prefixes(query)
    except SparqlParseError:
        return query
    missing = used - set(declared)
    if not missing:
        return query
    lines = schema.prefix_declarations(missing)
    if not lines:
        return query
    return lines + "\n" + query


# -- compliance --------------------------------------------------------------


def validate_schema_compliance(sanitized_query: str, schema: SchemaDocument) -> list[str]:
    """IRIs used as predicates or classes that the schema does not declare.

    Violations are advisory: they are logged and surfaced in the trace
    but never block execution. Queries outside the local parser subset
    are skipped with a warning (the live endpoint will still run them).
    """
    try:
        ast = parse_select(sanitized_query)
    except UnsupportedSparql as exc:
        logger.warning("compliance check skipped: %s", exc)
        return []
    violations: list[str] = []
    seen: set[str] = set()

    def report(iri: str, role: str) -> None:
        if iri in seen or is_standard_term(iri) or schema.contains(iri):
            return
        seen.add(iri)
        violations.append(f"{role} {iri} is not declared in the schema")

    for pattern in ast.patterns:
        if isinstance(pattern, Filter):
            continue
        assert isinstance(pattern, TriplePattern)
        predicate = pattern.p
        if isinstance(predicate, PathMod):
            report(predicate.iri.value, "property")
        elif not isinstance(predicate, Var):
            if predicate.value == RDF_TYPE:
                obj = pattern.o
                if not isinstance(obj, Var) and hasattr(obj, "value"):
                    report(obj.value, "class")
            elif hasattr(predicate, "value"):
                report(predicate.value, "property")
    return violations


# -- execution ----------------------------------------------------------------


def execute_query(
    query: str, endpoint: SparqlEndpoint, spill_path: str | Path
) -> tuple[str, Optional[ResultSet], Optional[str]]:
    """Run a SELECT and spill rows to CSV.

    Returns (status, result_set, error). The CSV (RFC 4180, UTF-8,
    header = projected variable names) is written only when rows exist.
    """
    try:
        result = endpoint.select(query)
    except EndpointError as exc:
        return "endpoint_error", None, str(exc)
    if not result.rows:
        return "ok_empty", result, None
    spill_path = Path(spill_path)
    spill_path.parent.mkdir(parents=True, exist_ok=True)
    with open(spill_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(result.variables)
        for row in result.rows:
            writer.writerow([row.get(var, "") for var in result.variables])
    return "ok_rows", result, None


# -- refinement helpers --------------------------------------------------------

_NAME_TOKEN = re.compile(r"[A-Za-z]{3,}")


def _local_name(iri: str) -> str:
    return re.split(r"[#/]", iri.rstrip("/#"))[-1]


def _name_tokens(text: str) -> set[str]:
    # split snake_case and camelCase into case-folded word tokens;
    # a trailing 's' is folded so plurals in questions still match
    spaced = re.sub(r"(?<=[a-z0-9])(?=[A-Z])|(?<=[A-Z])(?=[A-Z][a-z])", " ", text.replace("_", " "))
    tokens = set()
    for raw in _NAME_TOKEN.findall(spaced):
        token = raw.casefold()
        if len(token) > 3 and token.endswith("s"):
            token = token[:-1]
        tokens.add(token)
    return tokens


def related_schema_nodes(question: str, failed_query: str, schema: SchemaDocument) -> list[str]:
    """Inventory terms whose local names share a token with the question
    or the failed query."""
    wanted = _name_tokens(question) | _name_tokens(failed_query)
    related = []
    for iri in sorted(schema.classes | schema.properties):
        if _name_tokens(_local_name(iri)) & wanted:
            related.append(iri)
    return related


def diagnose_empty(attempt1: SparqlAttempt, attempt2: SparqlAttempt) -> str:
    """'resolved' when the refined attempt found rows (the first failure
    was a construction error), else 'data_absent'."""
    if attempt1.status == "ok_rows":
        raise ValueError("diagnose_empty requires a first attempt without rows")
    return "resolved" if attempt2.status == "ok_rows" else "data_absent"


# -- the chain -----------------------------------------------------------------


@dataclass
class ChainResult:
    attempts: list[SparqlAttempt]
    final: SparqlAttempt
    diagnosis: Optional[str] = None  # resolved | data_absent | None
    warnings: list[str] = field(default_factory=list)

    @property
    def result_rows(self) -> int:
        return self.final.row_count


class SparqlChain:
    """Drives one question through generation, execution and refinement."""

    def __init__(
        self,
        schema: SchemaDocument,
        endpoint: SparqlEndpoint,
        gateway: LlmGateway,
        model_ref: str,
        prompts,
        store: Optional[RefinementStore] = None,
    ):
        self.schema = schema
        self.endpoint = endpoint
        self.gateway = gateway
        self.model_ref = model_ref
        self.prompts = prompts
        self.store = store or RefinementStore([])
        self._refined = False
        self.completions = 0

    def generate_query(
        self,
        question: str,
        entities: list[ResolvedEntity],
        ledger: Optional[BudgetLedger] = None,
    ) -> tuple[str, TokenUsage]:
        entities_block = ""
        if entities:
            lines = [
                f'- "{e.surface}" ({e.kind}): {e.identifier}' for e in entities
            ]
            entities_block = "Resolved entities (use these identifiers verbatim):\n" + "\n".join(lines)
        prompt = self.prompts.render(
            "generation",
            question=question,
            schema=self.schema.compact_inventory(),
            entities_block=entities_block,
        )
        exchange = self.gateway.complete(
            self.model_ref, [ChatMessage("user", prompt)], ledger=ledger
        )
        self.completions += 1
        return exchange.response, exchange.usage

    def refine_query(
        self,
        question: str,
        failed: SparqlAttempt,
        ledger: Optional[BudgetLedger] = None,
        warnings: Optional[list[str]] = None,
    ) -> tuple[str, TokenUsage]:
        if self._refined:
            raise MetaboqaError("query refinement is performed only once per turn")
        self._refined = True
        failed_query = failed.sanitized_query or failed.raw_llm_output
        related = related_schema_nodes(question, failed_query, self.schema)
        related_block = "\n".join(f"- {self.schema.prefixed(iri)}" for iri in related) or "(none found)"
        exemplar = self.store.retrieve(question)
        if exemplar is None:
            if warnings is not None:
                warnings.append("refinement store is empty; refining without exemplar")
            logger.warning("refinement store empty; no exemplar attached")
            exemplar_block = "(no exemplar available)"
        else:
            exemplar_block = f"Question: {exemplar[0]}\n```sparql\n{exemplar[1]}\n```"
        prompt = self.prompts.render(
            "refinement",
            question=question,
            failed_query=failed_query,
            related=related_block,
            exemplar=exemplar_block,
        )
        exchange = self.gateway.complete(
            self.model_ref, [ChatMessage("user", prompt)], ledger=ledger
        )
        self.completions += 1
        return exchange.response, exchange.usage

    def _build_attempt(
        self, raw: str, index: int, spill_path: Path, usage: TokenUsage
    ) -> SparqlAttempt:
        attempt = SparqlAttempt(raw_llm_output=raw, attempt_index=index, usage=usage)
        try:
            attempt.sanitized_query = sanitize_query(raw, self.schema)
        except SparqlParseError as exc:
            attempt.status = "syntax_error"
            attempt.error = str(exc)
            return attempt
        attempt.violations = validate_schema_compliance(attempt.sanitized_query, self.schema)
        for violation in attempt.violations:
            logger.warning("schema compliance: %s", violation)
        status, result, error = execute_query(attempt.sanitized_query, self.endpoint, spill_path)
        attempt.status = status
        attempt.error = error
        if result is not None and result.rows:
            attempt.row_count = len(result.rows)
            attempt.spill_path = str(spill_path)
        return attempt

    def run(
        self,
        question: str,
        entities: list[ResolvedEntity],
        spill_path: str | Path,
        ledger: Optional[BudgetLedger] = None,
    ) -> ChainResult:
        spill_path = Path(spill_path)
        warnings: list[str] = []
        raw1, usage1 = self.generate_query(question, entities, ledger=ledger)
        attempt1 = self._build_attempt(raw1, 1, spill_path, usage1)
        if attempt1.status == "ok_rows":
            return ChainResult(attempts=[attempt1], final=attempt1, warnings=warnings)

        raw2, usage2 = self.refine_query(question, attempt1, ledger=ledger, warnings=warnings)
        attempt2 = self._build_attempt(raw2, 2, spill_path, usage2)
        return ChainResult(
            attempts=[attempt1, attempt2],
            final=attempt2,
            diagnosis=diagnose_empty(attempt1, attempt2),
            warnings=warnings,
        )
