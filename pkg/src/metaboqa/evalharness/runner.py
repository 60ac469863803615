"""Drive the benchmark protocol: one fresh session per question, judge,
classify, record.

Leakage control: while a question runs, its own reference query is
withheld from the refinement store so the repair loop cannot copy the
answer it is being graded against.
"""

from __future__ import annotations

import logging
import time
from typing import Callable, Optional

from ..agents.runtime import Engine
from ..chain import SparqlChain
from ..errors import SparqlParseError
from ..gateway import LlmGateway
from .classify import classify_error
from .dataset import EvalQuestion
from .judge import judge_answer
from .report import EvalRecord, EvalReport, aggregate_metrics

logger = logging.getLogger(__name__)


def _last_generated_query(session) -> Optional[str]:
    generated = None
    for event in session.trace:
        if event.kind == "query_generated":
            generated = event.payload.get("sanitized_query") or generated
    return generated


def run_evaluation(
    questions: list[EvalQuestion],
    engine: Engine,
    configuration: str = "multi-agent",
    single_shot: bool = False,
    judge_gateway: Optional[LlmGateway] = None,
    judge_model: str = "gpt-4o",
    exclusions: Optional[dict[str, str]] = None,
    record_sink: Optional[Callable[[EvalRecord], None]] = None,
) -> tuple[list[EvalRecord], EvalReport]:
    exclusions = exclusions or {}
    full_store = engine.refinement_store
    records: list[EvalRecord] = []
    try:
        for question in questions:
            engine.refinement_store = full_store.without_question(question.question)
            if single_shot:
                record = _run_single_shot(question, engine)
            else:
                record = _run_pipeline(question, engine)
            outcome = judge_answer(
                question.question,
                question.reference_query,
                record["generated_query"],
                engine.kg_endpoint,
                gateway=judge_gateway,
                model_ref=judge_model,
                prompts=engine.prompts if judge_gateway is not None else None,
            )
            error_type = (
                "none"
                if outcome.verdict == "correct"
                else classify_error(record["trace"], outcome.verdict)
            )
            if outcome.verdict == "not_generated" and error_type not in ("T1", "T3"):
                # generation never ran and nothing was rejected: the routing
                # stalled before the runner, which is a supervisor failure
                error_type = "T3"
            eval_record = EvalRecord(
                question_id=question.id,
                configuration=configuration,
                complexity=question.complexity,
                verdict=outcome.verdict,
                error_type=error_type,
                latency_seconds=record["latency"],
                prompt_tokens=record["prompt_tokens"],
                completion_tokens=record["completion_tokens"],
                estimated_cost=record["estimated_cost"],
                generated_query=record["generated_query"],
                judge_rationale=outcome.rationale,
                needs_review=outcome.needs_review,
                excluded=question.id in exclusions,
                exclusion_reason=exclusions.get(question.id, ""),
            )
            records.append(eval_record)
            if record_sink is not None:
                record_sink(eval_record)
            logger.info(
                "evaluated %s: %s (%s)", question.id, outcome.verdict, error_type
            )
    finally:
        engine.refinement_store = full_store
    return records, aggregate_metrics(records)


def _run_pipeline(question: EvalQuestion, engine: Engine) -> dict:
    session = engine.create_session()
    start = time.perf_counter()
    engine.run_turn(session.session_id, question.question)
    latency = time.perf_counter() - start
    return {
        "generated_query": _last_generated_query(session),
        "latency": latency,
        "prompt_tokens": session.ledger.prompt_tokens,
        "completion_tokens": session.ledger.completion_tokens,
        "estimated_cost": session.ledger.estimated_cost,
        "trace": list(session.trace),
    }


def _run_single_shot(question: EvalQuestion, engine: Engine) -> dict:
    """Baseline: one generation prompt (question + schema), no orchestration.

    Latency covers prompt submission to query text only.
    """
    from ..chain import sanitize_query
    from ..gateway import BudgetLedger

    ledger = BudgetLedger()
    chain = SparqlChain(
        schema=engine.schema,
        endpoint=engine.kg_endpoint,
        gateway=engine.gateway,
        model_ref=engine.model_ref,
        prompts=engine.prompts,
        store=engine.refinement_store,
    )
    start = time.perf_counter()
    raw, _ = chain.generate_query(question.question, [], ledger=ledger)
    latency = time.perf_counter() - start
    try:
        generated = sanitize_query(raw, engine.schema)
    except SparqlParseError:
        generated = raw  # judged (and failed) as an incorrect query
    return {
        "generated_query": generated,
        "latency": latency,
        "prompt_tokens": ledger.prompt_tokens,
        "completion_tokens": ledger.completion_tokens,
        "estimated_cost": ledger.estimated_cost,
        "trace": [],
    }
