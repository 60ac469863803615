"""Turn execution over the agent graph.

``Engine.run_turn`` drives one user message through entry, validator,
supervisor, kg, sparql_runner and interpreter until a terminal message
is produced. Every agent dispatch, LLM call and tool call lands in the
session trace; tool failures become error messages, never crashes; a
step cap bounds routing loops.
"""

from __future__ import annotations

import logging
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..bridge import WikidataProperties, genus_compounds, merge_outputs
from ..chain import DATA_ABSENT_MESSAGE, SparqlChain
from ..endpoints import SparqlEndpoint
from ..errors import (
    AmbiguousEntity,
    ArtifactSecurityError,
    ChartSpecError,
    ConfigError,
    MetaboqaError,
    ProviderError,
    ResolutionNotFound,
    ResolverError,
)
from ..gateway import ChatMessage, LlmGateway
from ..interp import analyze_file, build_results_context, make_chart_spec, spectrum_url
from ..prompts import PromptLibrary
from ..refinement import RefinementStore
from ..resolvers import (
    ChemblTargetResolver,
    ChemicalIndex,
    GnpsStructureResolver,
    PlantDb,
    ResolvedEntity,
    WikidataTaxonResolver,
)
from ..schema import SchemaDocument
from .messages import AgentMessage, SessionState
from .parsing import (
    AgentOutputError,
    parse_classification,
    parse_kg_calls,
    parse_runner_prep,
    parse_supervisor,
    parse_validator,
)
from .topology import build_topology

logger = logging.getLogger(__name__)

REGISTERED_TOOLS = {
    "file_analyzer",
    "plant_db_checker",
    "taxon_resolver",
    "chemical_resolver",
    "target_resolver",
    "smiles_resolver",
    "sparql_chain",
    "wikidata_structure_search",
    "output_merger",
    "result_summarizer",
    "chart_spec",
    "spectrum_plotter",
}

APOLOGY = (
    "I'm sorry, I could not determine how to proceed with this request. "
    "Please try rephrasing your question."
)

_CHART_WORDS = ("plot", "chart", "histogram", "distribution", "scatter", "diagram")


@dataclass
class TurnContext:
    question: str
    turn: int
    classification: str = ""
    help_mode: bool = False
    entities: list[ResolvedEntity] = field(default_factory=list)
    pending_mentions: list[tuple[str, str]] = field(default_factory=list)
    result_ref: Optional[AgentMessage] = None
    interpret_request: str = ""
    chain_query: Optional[str] = None
    attachments: list[str] = field(default_factory=list)


class Engine:
    """The assembled pipeline: topology, tools, gateway, sessions."""

    def __init__(
        self,
        *,
        schema: SchemaDocument,
        plant_db: PlantDb,
        chemical_index: ChemicalIndex,
        kg_endpoint: SparqlEndpoint,
        wikidata_endpoint: SparqlEndpoint,
        gateway: LlmGateway,
        prompts: Optional[PromptLibrary] = None,
        refinement_store: Optional[RefinementStore] = None,
        target_resolver: Optional[ChemblTargetResolver] = None,
        structure_resolver: Optional[GnpsStructureResolver] = None,
        artifacts_root: str | Path = "artifacts",
        model_ref: str = "gpt-4o",
        step_cap: int = 12,
        wikidata_properties: Optional[WikidataProperties] = None,
    ):
        self.schema = schema
        self.plant_db = plant_db
        self.chemical_index = chemical_index
        self.kg_endpoint = kg_endpoint
        self.wikidata_endpoint = wikidata_endpoint
        self.gateway = gateway
        self.prompts = prompts or PromptLibrary()
        self.refinement_store = refinement_store or RefinementStore([])
        self.taxon_resolver = WikidataTaxonResolver(wikidata_endpoint)
        self.target_resolver = target_resolver or ChemblTargetResolver()
        self.structure_resolver = structure_resolver or GnpsStructureResolver()
        self.artifacts_root = Path(artifacts_root)
        self.model_ref = model_ref
        self.step_cap = step_cap
        self.wikidata_properties = wikidata_properties or WikidataProperties()
        self.topology = build_topology(model_ref)
        self.topology.validate(REGISTERED_TOOLS)
        self.sessions: dict[str, SessionState] = {}

    # -- session management --------------------------------------------

    def create_session(self, session_id: Optional[str] = None) -> SessionState:
        sid = session_id or uuid.uuid4().hex[:16]
        if sid in self.sessions:
            raise ConfigError(f"session {sid} already exists")
        state = SessionState(sid)
        self.sessions[sid] = state
        self.session_dir(sid).mkdir(parents=True, exist_ok=True)
        return state

    def get_session(self, session_id: str) -> SessionState:
        if session_id not in self.sessions:
            raise KeyError(f"unknown session {session_id}")
        return self.sessions[session_id]

    def session_dir(self, session_id: str) -> Path:
        return self.artifacts_root / session_id

    def store_upload(self, session_id: str, filename: str, data: bytes):
        session = self.get_session(session_id)
        if "/" in filename or "\\" in filename or ".." in filename or not filename:
            raise ArtifactSecurityError(f"illegal upload filename {filename!r}")
        directory = self.session_dir(session_id)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / filename).write_bytes(data)
        summary = analyze_file(directory / filename, directory)
        session.register_upload(filename, summary.to_dict())
        session.add_event(
            session.turn_counter,
            "entry",
            "tool_called",
            tool="file_analyzer",
            payload=summary.to_dict(),
        )
        return summary

    # -- LLM helper -------------------------------------------------------

    def _complete(self, session: SessionState, turn: int, agent_id: str, prompt_ref: str, prompt: str) -> str:
        node = self.topology.nodes[agent_id]
        t0 = time.time()
        exchange = self.gateway.complete(
            node.model_ref, [ChatMessage("user", prompt)], ledger=session.ledger
        )
        session.add_event(
            turn,
            agent_id,
            "llm_call",
            payload={"prompt_ref": prompt_ref},
            usage=exchange.usage,
            t_start=t0,
        )
        return exchange.response

    # -- the turn loop -----------------------------------------------------

    def run_turn(self, session_id: str, text: str) -> AgentMessage:
        session = self.get_session(session_id)
        session.turn_counter += 1
        turn = session.turn_counter
        ctx = TurnContext(question=(text or "").strip(), turn=turn)
        session.append(AgentMessage(sender="user", kind="user_question", body=text or ""))

        current = "entry"
        final: Optional[AgentMessage] = None
        steps = 0
        while final is None:
            steps += 1
            if steps > self.step_cap:
                session.add_event(
                    turn,
                    "supervisor",
                    "error",
                    payload={"reason": "step_cap_exceeded", "step_cap": self.step_cap},
                )
                final = session.append(
                    AgentMessage(
                        sender="supervisor",
                        kind="error",
                        body=(
                            f"Turn aborted: the agents exceeded the routing cap of "
                            f"{self.step_cap} steps without converging on an answer."
                        ),
                    )
                )
                break
            session.add_event(turn, current, "agent_started")
            handler = getattr(self, f"_step_{current}")
            try:
                current, final = handler(session, ctx)
            except Exception as exc:
                logger.exception("agent %s failed", current)
                retriable = isinstance(exc, (ProviderError, ResolverError)) and exc.retriable
                suffix = " (retriable)" if retriable else ""
                session.add_event(
                    turn, current, "error", payload={"error": str(exc), "retriable": retriable}
                )
                final = session.append(
                    AgentMessage(
                        sender=current,
                        kind="error",
                        body=f"The {current} agent failed: {exc}{suffix}",
                    )
                )
        session.add_event(
            turn,
            final.sender,
            "answer",
            payload={"text": final.body, "attachments": list(final.attachments)},
        )
        return final

    # -- agent steps ----------------------------------------------------------

    def _step_entry(self, session: SessionState, ctx: TurnContext):
        turn = ctx.turn
        if not ctx.question:
            session.add_event(turn, "entry", "error", payload={"reason": "empty_question"})
            final = session.append(
                AgentMessage(
                    sender="entry",
                    kind="error",
                    body="Your message is empty. Please ask a question.",
                )
            )
            return None, final
        prompt = self.prompts.render(
            "entry", history=self._render_history(session), question=ctx.question
        )
        reply = self._complete(session, turn, "entry", "entry", prompt)
        classification = parse_classification(reply)
        prior_result = session.last_message("query_result_ref")
        if classification == "HelpMeUnderstand" and prior_result is None:
            # nothing stored to re-use: fail open instead of dead-ending
            session.add_event(
                turn,
                "entry",
                "warning",
                payload={"reason": "follow-up without stored results; degraded to NewKnowledge"},
            )
            classification = "NewKnowledge"
        ctx.classification = classification
        session.append(
            AgentMessage(
                sender="entry",
                kind="classification",
                body=classification,
                meta={"classification": classification},
            )
        )
        if classification == "HelpMeUnderstand":
            ctx.help_mode = True
            ctx.result_ref = prior_result
            return "supervisor", None
        return "validator", None

    def _step_validator(self, session: SessionState, ctx: TurnContext):
        turn = ctx.turn
        prompt = self.prompts.render(
            "validator", schema=self.schema.compact_inventory(), question=ctx.question
        )
        reply = self._complete(session, turn, "validator", "validator", prompt)
        parsed = parse_validator(reply)
        for plant in parsed.plants:
            t0 = time.time()
            present = self.plant_db.contains(plant)
            session.add_event(
                turn,
                "validator",
                "tool_called",
                tool="plant_db_checker",
                payload={"plant": plant, "present": present},
                t_start=t0,
            )
            if not present:
                session.add_event(
                    turn,
                    "validator",
                    "rejection",
                    payload={"reason": "plant_absent", "plant": plant},
                )
                final = session.append(
                    AgentMessage(
                        sender="validator",
                        kind="validation_verdict",
                        body=(
                            f'The plant "{plant}" is not present in the plant database, '
                            "so the knowledge graph holds no data for it."
                        ),
                        meta={"verdict": "invalid", "reason": "plant_absent", "plant": plant},
                    )
                )
                return None, final
        if parsed.verdict == "invalid":
            feedback = parsed.feedback or "The question is out of scope for this knowledge graph."
            session.add_event(
                turn,
                "validator",
                "rejection",
                payload={"reason": "out_of_scope", "feedback": feedback},
            )
            final = session.append(
                AgentMessage(
                    sender="validator",
                    kind="validation_verdict",
                    body=feedback,
                    meta={"verdict": "invalid", "reason": "out_of_scope"},
                )
            )
            return None, final
        session.append(
            AgentMessage(
                sender="validator",
                kind="validation_verdict",
                body="The question is valid for this knowledge graph.",
                meta={"verdict": "valid"},
            )
        )
        return "supervisor", None

    def _step_supervisor(self, session: SessionState, ctx: TurnContext):
        turn = ctx.turn
        prompt = self.prompts.render("supervisor", state=self._render_state(session, ctx))
        reply = self._complete(session, turn, "supervisor", "supervisor", prompt)
        try:
            directive = parse_supervisor(reply)
        except AgentOutputError as exc:
            session.add_event(
                turn, "supervisor", "warning", payload={"reason": "unroutable", "error": str(exc)}
            )
            final = session.append(
                AgentMessage(sender="supervisor", kind="final_answer", body=APOLOGY)
            )
            return None, final
        for warning in directive.warnings:
            session.add_event(turn, "supervisor", "warning", payload={"reason": warning})
        session.add_event(
            turn,
            "supervisor",
            "routing",
            payload={
                "route": directive.route,
                "mentions": [list(m) for m in directive.mentions],
            },
        )
        session.append(
            AgentMessage(
                sender="supervisor",
                kind="routing_directive",
                body=f"route to {directive.route}",
                meta={
                    "route": directive.route,
                    "mentions": [list(m) for m in directive.mentions],
                    "request": directive.request,
                },
            )
        )
        if directive.route == "finish":
            return None, self._finish(session, ctx, directive.answer)
        assert self.topology.has_edge("supervisor", directive.route)
        if directive.route == "kg":
            ctx.pending_mentions = directive.mentions
            return "kg", None
        if directive.route == "interpreter":
            if ctx.result_ref is None or not ctx.result_ref.meta.get("spill"):
                session.add_event(
                    turn,
                    "supervisor",
                    "warning",
                    payload={"reason": "interpreter requested without stored results"},
                )
                final = session.append(
                    AgentMessage(sender="supervisor", kind="final_answer", body=APOLOGY)
                )
                return None, final
            ctx.interpret_request = directive.request or ctx.question
            return "interpreter", None
        return "sparql_runner", None

    def _finish(self, session: SessionState, ctx: TurnContext, answer: str) -> AgentMessage:
        body = answer
        if ctx.chain_query:
            body += (
                "\n\nHere is the generated SPARQL query used:\n"
                f"```sparql\n{ctx.chain_query}\n```"
            )
        return session.append(
            AgentMessage(
                sender="supervisor",
                kind="final_answer",
                body=body,
                attachments=list(dict.fromkeys(ctx.attachments)),
            )
        )

    def _step_kg(self, session: SessionState, ctx: TurnContext):
        turn = ctx.turn
        mentions = ctx.pending_mentions
        ctx.pending_mentions = []
        calls = []
        if mentions:
            mention_block = "\n".join(f'- "{name}" :: {kind}' for name, kind in mentions)
            prompt = self.prompts.render("kg", mentions=mention_block)
            reply = self._complete(session, turn, "kg", "kg", prompt)
            calls = parse_kg_calls(reply)
        kind_by_mention = {name: kind for name, kind in mentions}
        resolved_now: list[ResolvedEntity] = []
        for call in calls:
            t0 = time.time()
            payload = {
                "mention": call.mention,
                "mention_kind": kind_by_mention.get(call.mention),
            }
            try:
                entity = self._run_resolver(call.tool, call.mention)
                if entity is None:
                    payload["outcome"] = "no_match"
                else:
                    payload["outcome"] = "resolved"
                    payload["identifier"] = entity.identifier
                    resolved_now.append(entity)
                    ctx.entities.append(entity)
            except (ResolverError, ResolutionNotFound, AmbiguousEntity) as exc:
                payload["outcome"] = "error"
                payload["error"] = str(exc)
            session.add_event(
                turn, "kg", "tool_called", tool=call.tool, payload=payload, t_start=t0
            )
        session.append(
            AgentMessage(
                sender="kg",
                kind="resolved_entities",
                body=f"Resolved {len(resolved_now)} of {len(mentions)} mentions.",
                meta={"entities": [e.to_dict() for e in resolved_now]},
            )
        )
        return "supervisor", None

    def _run_resolver(self, tool: str, mention: str) -> Optional[ResolvedEntity]:
        if tool == "taxon_resolver":
            return self.taxon_resolver.resolve(mention)
        if tool == "chemical_resolver":
            return self.chemical_index.resolve(mention)
        if tool == "target_resolver":
            return self.target_resolver.resolve(mention)
        if tool == "smiles_resolver":
            return self.structure_resolver.resolve(mention)
        raise MetaboqaError(f"unknown resolver tool {tool!r}")

    def _step_sparql_runner(self, session: SessionState, ctx: TurnContext):
        turn = ctx.turn
        entities_block = (
            "\n".join(f'- "{e.surface}" ({e.kind}): {e.identifier}' for e in ctx.entities)
            or "(none)"
        )
        prompt = self.prompts.render(
            "sparql_runner", entities=entities_block, question=ctx.question
        )
        reply = self._complete(session, turn, "sparql_runner", "sparql_runner", prompt)
        prep = parse_runner_prep(reply, ctx.question)

        chain = SparqlChain(
            schema=self.schema,
            endpoint=self.kg_endpoint,
            gateway=self.gateway,
            model_ref=self.model_ref,
            prompts=self.prompts,
            store=self.refinement_store,
        )
        directory = self.session_dir(session.session_id)
        spill = directory / f"{turn}-results.csv"
        result = chain.run(prep.question, ctx.entities, spill, ledger=session.ledger)
        for attempt in result.attempts:
            session.add_event(
                turn,
                "sparql_runner",
                "llm_call",
                payload={"prompt_ref": "generation" if attempt.attempt_index == 1 else "refinement"},
                usage=attempt.usage,
            )
            session.add_event(
                turn,
                "sparql_runner",
                "query_generated",
                tool="sparql_chain",
                payload=attempt.to_dict(),
            )
        for warning in result.warnings:
            session.add_event(turn, "sparql_runner", "warning", payload={"reason": warning})

        final_attempt = result.final
        ctx.chain_query = final_attempt.sanitized_query or (
            result.attempts[0].sanitized_query if result.attempts else None
        )
        spill_name = Path(final_attempt.spill_path).name if final_attempt.spill_path else None
        row_count = final_attempt.row_count

        if prep.wikidata_compare and final_attempt.status == "ok_rows":
            spill_name, row_count = self._wikidata_compare(
                session, ctx, final_attempt, spill_name, row_count
            )

        if final_attempt.status == "ok_rows":
            session.add_event(
                turn,
                "sparql_runner",
                "rows_spilled",
                tool="sparql_chain",
                payload={"spill": spill_name, "row_count": row_count},
            )
            ctx.attachments.append(spill_name)
            body = f"The query returned {row_count} rows. Results saved to {spill_name}."
        elif result.diagnosis == "data_absent":
            body = DATA_ABSENT_MESSAGE
        elif final_attempt.status == "endpoint_error":
            body = f"Query execution failed: {final_attempt.error}"
        else:
            body = "No valid SPARQL query could be generated for this question."

        ctx.result_ref = session.append(
            AgentMessage(
                sender="sparql_runner",
                kind="query_result_ref",
                body=body,
                attachments=[spill_name] if spill_name else [],
                meta={
                    "status": final_attempt.status,
                    "row_count": row_count,
                    "spill": spill_name,
                    "query": ctx.chain_query,
                    "diagnosis": result.diagnosis,
                },
            )
        )
        return "supervisor", None

    def _wikidata_compare(self, session, ctx, final_attempt, spill_name, row_count):
        turn = ctx.turn
        taxon = next((e for e in ctx.entities if e.kind == "taxon"), None)
        if taxon is None:
            session.add_event(
                turn,
                "sparql_runner",
                "warning",
                payload={"reason": "wikidata comparison requested but no taxon resolved"},
            )
            return spill_name, row_count
        directory = self.session_dir(session.session_id)
        t0 = time.time()
        genus = genus_compounds(
            taxon.identifier,
            self.wikidata_endpoint,
            directory / f"{turn}-wikidata.csv",
            properties=self.wikidata_properties,
        )
        session.add_event(
            turn,
            "sparql_runner",
            "tool_called",
            tool="wikidata_structure_search",
            payload={"taxon": taxon.identifier, "compounds": len(genus.ids) if genus else 0},
            t_start=t0,
        )
        if genus is None:
            return spill_name, row_count
        common = directory / f"{turn}-common.csv"
        try:
            merge_outputs(final_attempt.spill_path, genus.spill_path, common)
        except MetaboqaError as exc:
            # the graph-side result carried no Wikidata ids; keep it as-is
            session.add_event(
                turn, "sparql_runner", "warning", payload={"reason": f"merge skipped: {exc}"}
            )
            return spill_name, row_count
        merged_rows = max(len(common.read_text(encoding="utf-8").splitlines()) - 1, 0)
        session.add_event(
            turn,
            "sparql_runner",
            "tool_called",
            tool="output_merger",
            payload={"artifact": common.name, "row_count": merged_rows},
        )
        ctx.attachments.append(common.name)
        return common.name, merged_rows

    def _step_interpreter(self, session: SessionState, ctx: TurnContext):
        turn = ctx.turn
        request = ctx.interpret_request or ctx.question
        ref = ctx.result_ref
        spill_name = ref.meta.get("spill") if ref else None
        if not spill_name:
            session.append(
                AgentMessage(
                    sender="interpreter",
                    kind="interpretation",
                    body="There is no stored result to interpret.",
                )
            )
            return "supervisor", None
        directory = self.session_dir(session.session_id)
        spill_abs = directory / spill_name
        lowered = request.lower()

        # "plot the spectrum" is a spectrum-viewer request, not a chart
        if "spectrum" in lowered:
            t0 = time.time()
            url = spectrum_url(spill_abs)
            session.add_event(
                turn,
                "interpreter",
                "tool_called",
                tool="spectrum_plotter",
                payload={"url": url},
                t_start=t0,
            )
            session.append(
                AgentMessage(
                    sender="interpreter",
                    kind="interpretation",
                    body=f"View the spectrum plot here: {url}",
                )
            )
            return "supervisor", None

        if any(word in lowered for word in _CHART_WORDS):
            out = directory / f"{turn}-chart.json"
            t0 = time.time()
            try:
                spec = make_chart_spec(spill_abs, request, out)
            except ChartSpecError as exc:
                session.add_event(
                    turn, "interpreter", "warning", payload={"reason": str(exc)}
                )
                session.append(
                    AgentMessage(
                        sender="interpreter",
                        kind="interpretation",
                        body=f"I could not build that chart: {exc}",
                    )
                )
                return "supervisor", None
            session.add_event(
                turn,
                "interpreter",
                "tool_called",
                tool="chart_spec",
                payload={"chart_type": spec.chart_type, "artifact": out.name},
                t_start=t0,
            )
            ctx.attachments.append(out.name)
            session.append(
                AgentMessage(
                    sender="interpreter",
                    kind="interpretation",
                    body=f"Here is the {spec.chart_type} chart for: {spec.title}",
                    attachments=[out.name, spill_name],
                )
            )
            return "supervisor", None

        context = build_results_context(
            ref.meta.get("query") or "", ctx.question, spill_abs, estimate=self.gateway.estimate
        )
        prompt = self.prompts.render(
            "interpreter_summary",
            question=ctx.question,
            query=ref.meta.get("query") or "(no query)",
            results_block=context.block,
        )
        summary = self._complete(session, turn, "interpreter", "interpreter_summary", prompt)
        body = summary
        if not context.inlined:
            body += (
                "\n\nThe result set is large; retrieve the complete output from the "
                f"generated CSV file: {context.spill_name}"
            )
        session.append(
            AgentMessage(
                sender="interpreter",
                kind="interpretation",
                body=body,
                attachments=[spill_name],
            )
        )
        return "supervisor", None

    # -- prompt context rendering ------------------------------------------------

    @staticmethod
    def _render_history(session: SessionState, limit: int = 10) -> str:
        messages = [
            m
            for m in session.history[:-1]  # exclude the message being processed
            if m.kind in ("user_question", "final_answer", "interpretation", "query_result_ref")
        ]
        if not messages:
            return "(empty)"
        lines = []
        for message in messages[-limit:]:
            summary = " ".join(message.body.split())[:160]
            lines.append(f"- {message.sender}/{message.kind}: {summary}")
        return "\n".join(lines)

    def _render_state(self, session: SessionState, ctx: TurnContext) -> str:
        lines = [
            f"Question: {ctx.question}",
            f"Classification: {ctx.classification or 'NewKnowledge'}",
        ]
        if session.uploaded_files:
            lines.append("Uploaded files: " + ", ".join(sorted(session.uploaded_files)))
        if ctx.entities:
            lines.append("Resolved entities:")
            for entity in ctx.entities:
                lines.append(f'- "{entity.surface}" ({entity.kind}): {entity.identifier}')
        else:
            lines.append("Resolved entities: (none yet)")
        ref = ctx.result_ref
        if ref is not None:
            lines.append(
                "Stored result: "
                f"status={ref.meta.get('status')} rows={ref.meta.get('row_count')} "
                f"file={ref.meta.get('spill')}"
            )
            lines.append(f"Result note: {ref.body}")
            preview = self._result_preview(session, ref)
            if preview:
                lines.append("Result preview:")
                lines.append(preview)
        else:
            lines.append("Stored result: (none)")
        interpretation = session.last_message("interpretation")
        if interpretation is not None:
            lines.append(f"Interpretation: {' '.join(interpretation.body.split())[:300]}")
        return "\n".join(lines)

    def _result_preview(self, session: SessionState, ref: AgentMessage, limit: int = 6) -> str:
        spill = ref.meta.get("spill")
        if not spill:
            return ""
        path = self.session_dir(session.session_id) / spill
        try:
            rows = path.read_text(encoding="utf-8").splitlines()
        except OSError:
            return ""
        return "\n".join(rows[:limit])
