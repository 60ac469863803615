"""Two-stage answer judging.

Stage 1 is deterministic: execute reference and generated queries and
compare binding multisets (order-insensitive; column-name-insensitive
for single-column projections). Equality means correct. When execution
is impossible or the sets differ, an LLM judge (mockable through the
gateway) decides, and its verdict is flagged for manual review.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Optional

from ..agents.parsing import parse_judge
from ..endpoints import SparqlEndpoint
from ..errors import EndpointError, MetaboqaError
from ..gateway import ChatMessage, LlmGateway
from ..rdf.results import ResultSet


@dataclass
class JudgeOutcome:
    verdict: str  # correct | incorrect | not_generated
    rationale: str
    method: str  # result_set | llm_judge | none
    needs_review: bool = False


def result_multiset(result: ResultSet) -> Counter:
    """Rows as a multiset; single-column projections drop the column name."""
    if len(result.variables) == 1:
        var = result.variables[0]
        return Counter(row.get(var, "") for row in result.rows)
    return Counter(
        tuple(sorted((var, row.get(var, "")) for var in result.variables))
        for row in result.rows
    )


def judge_answer(
    question: str,
    reference_query: str,
    generated_query: Optional[str],
    endpoint: SparqlEndpoint,
    gateway: Optional[LlmGateway] = None,
    model_ref: str = "gpt-4o",
    prompts=None,
) -> JudgeOutcome:
    if not generated_query or not generated_query.strip():
        return JudgeOutcome(
            verdict="not_generated",
            rationale="the pipeline produced no query",
            method="none",
        )
    try:
        reference_result = endpoint.select(reference_query)
        generated_result = endpoint.select(generated_query)
    except EndpointError as exc:
        return _llm_judge(
            question,
            reference_query,
            generated_query,
            gateway,
            model_ref,
            prompts,
            fallback_reason=f"execution impossible: {exc}",
        )
    if result_multiset(reference_result) == result_multiset(generated_result):
        return JudgeOutcome(
            verdict="correct",
            rationale="result sets are equal",
            method="result_set",
        )
    return _llm_judge(
        question,
        reference_query,
        generated_query,
        gateway,
        model_ref,
        prompts,
        fallback_reason="result sets differ",
    )


def _llm_judge(
    question, reference_query, generated_query, gateway, model_ref, prompts, fallback_reason
) -> JudgeOutcome:
    if gateway is None or prompts is None:
        return JudgeOutcome(
            verdict="incorrect",
            rationale=f"{fallback_reason}; no judge configured",
            method="result_set" if "differ" in fallback_reason else "none",
            needs_review=True,
        )
    prompt = prompts.render(
        "judge",
        question=question,
        reference=reference_query,
        generated=generated_query,
    )
    try:
        exchange = gateway.complete(model_ref, [ChatMessage("user", prompt)])
        correct, rationale = parse_judge(exchange.response)
    except MetaboqaError as exc:
        return JudgeOutcome(
            verdict="incorrect",
            rationale=f"{fallback_reason}; judge failed: {exc}",
            method="llm_judge",
            needs_review=True,
        )
    return JudgeOutcome(
        verdict="correct" if correct else "incorrect",
        rationale=f"{fallback_reason}; judge: {rationale}",
        method="llm_judge",
        needs_review=True,
    )
