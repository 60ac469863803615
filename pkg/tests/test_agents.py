"""Turn execution across the six-agent graph, driven by scripted LLMs."""

import json

import pytest

from conftest import FIXTURES, scripted_gateway
from metaboqa.agents import Engine
from metaboqa.agents.topology import EDGES, build_topology
from metaboqa.endpoints import LocalGraphEndpoint
from metaboqa.errors import ArtifactSecurityError, ConfigError
from metaboqa.gateway import Cassette, ChatProvider, LlmGateway, ScriptedChatProvider
from metaboqa.refinement import RefinementStore
from metaboqa.resolvers import ChemicalIndex, PlantDb

GOLDEN_QUESTION = (
    "How many metabolites were annotated with SIRIUS in Tabernaemontana coffeoides "
    "with molecular formula score (ZODIAC) above 0.9 and confidence score (COSMIC) above 0.3?"
)

GOLDEN_QUERY = """PREFIX ns1: <https://enpkg.commonslab.org/kg/>
SELECT (COUNT(DISTINCT ?feature) AS ?metaboliteCount)
WHERE { ?rawMaterial ns1:has_wd_id <http://www.wikidata.org/entity/Q15376858> .
?rawMaterial ns1:has_lab_process ?labExtract .
?labExtract ns1:has_LCMS ?analysis .
?analysis ns1:has_lcms_feature_list ?featureList .
?featureList ns1:has_lcms_feature ?feature .
?feature ns1:has_sirius_annotation ?annotation .
?annotation ns1:has_zodiac_score ?zodiacScore .
?annotation ns1:has_cosmic_score ?cosmicScore .
FILTER(?zodiacScore > 0.9 && ?cosmicScore > 0.3) }"""


def golden_rules():
    return [
        ("entry router", "NEW_KNOWLEDGE"),
        ("question validator", "PLANTS: Tabernaemontana coffeoides\nVERDICT: VALID"),
        ("supervisor coordinating", "ROUTE: KG\nMENTIONS: Tabernaemontana coffeoides :: taxon"),
        ("entity resolution agent", "CALL: taxon_resolver :: Tabernaemontana coffeoides"),
        ("supervisor coordinating", "ROUTE: SPARQL"),
        ("SPARQL runner agent", f"WIKIDATA_COMPARE: no\nQUESTION: {GOLDEN_QUESTION}"),
        ("SPARQL query generator", f"```sparql\n{GOLDEN_QUERY}\n```"),
        (
            "supervisor coordinating",
            "ROUTE: FINISH\nANSWER: The corresponding number of metabolites is 3.",
        ),
    ]


def make_engine(tmp_path, schema, rules=None, gateway=None, store=None):
    return Engine(
        schema=schema,
        plant_db=PlantDb.from_csv(FIXTURES / "plants.csv"),
        chemical_index=ChemicalIndex.from_csv(FIXTURES / "npc_classes.csv"),
        kg_endpoint=LocalGraphEndpoint.from_turtle_file(FIXTURES / "graph.ttl"),
        wikidata_endpoint=LocalGraphEndpoint.from_turtle_file(FIXTURES / "wikidata.ttl"),
        gateway=gateway or scripted_gateway(rules or []),
        refinement_store=store,
        artifacts_root=tmp_path / "artifacts",
        model_ref="test-model",
    )


def events(session, kind=None, agent=None):
    out = []
    for event in session.trace:
        if kind and event.kind != kind:
            continue
        if agent and event.agent != agent:
            continue
        out.append(event)
    return out


# -- topology ---------------------------------------------------------------


def test_topology_is_fixed_and_closed():
    topology = build_topology("m")
    topology.validate({t for node in topology.nodes.values() for t in node.tool_refs})
    assert topology.successors("supervisor") == {"kg", "sparql_runner", "interpreter", "terminal"}
    assert ("validator", "terminal") in EDGES
    assert topology.nodes["kg"].tool_refs == (
        "taxon_resolver",
        "chemical_resolver",
        "target_resolver",
        "smiles_resolver",
    )


def test_topology_rejects_unknown_tools():
    topology = build_topology("m")
    with pytest.raises(ConfigError, match="unknown tools"):
        topology.validate({"plant_db_checker"})


# -- golden flow ---------------------------------------------------------------


def test_golden_flow_counts_three(tmp_path, schema):
    engine = make_engine(tmp_path, schema, rules=golden_rules())
    session = engine.create_session("golden")
    final = engine.run_turn("golden", GOLDEN_QUESTION)
    assert final.kind == "final_answer"
    assert "3" in final.body
    assert "COUNT(DISTINCT ?feature)" in final.body
    assert "0.9" in final.body and "0.3" in final.body
    assert final.attachments == ["1-results.csv"]
    spill = engine.session_dir("golden") / "1-results.csv"
    assert spill.read_text().splitlines()[1] == "3"
    # every invoked agent left at least one trace event
    started = {e.agent for e in events(session, kind="agent_started")}
    assert started == {"entry", "validator", "supervisor", "kg", "sparql_runner"}
    # taxon resolved through the wikidata endpoint, against the fixture IRI
    tool_events = events(session, kind="tool_called", agent="kg")
    assert tool_events[0].tool == "taxon_resolver"
    assert tool_events[0].payload["identifier"] == "http://www.wikidata.org/entity/Q15376858"


def test_ledger_matches_llm_call_events(tmp_path, schema):
    engine = make_engine(tmp_path, schema, rules=golden_rules())
    session = engine.create_session("ledger")
    engine.run_turn("ledger", GOLDEN_QUESTION)
    llm_calls = events(session, kind="llm_call")
    assert session.ledger.calls == len(llm_calls) == 8
    total = sum(e.usage["prompt_tokens"] + e.usage["completion_tokens"] for e in llm_calls)
    assert session.ledger.total_tokens == total


def test_all_agent_calls_use_temperature_zero(tmp_path, schema):
    engine = make_engine(tmp_path, schema, rules=golden_rules())
    engine.create_session("temp")
    engine.run_turn("temp", GOLDEN_QUESTION)
    seen = engine.gateway.provider.requests_seen
    assert seen and all(x.temperature == 0.0 for x in seen)


def test_spectrum_request_links_the_viewer_in_flow(tmp_path, schema):
    # a query projecting ?usi spills a usi-columned CSV, which the
    # interpreter's spectrum path consumes (first row's value)
    rules = [
        ("entry router", "NEW_KNOWLEDGE"),
        ("question validator", "PLANTS: none\nVERDICT: VALID"),
        ("supervisor coordinating", "ROUTE: SPARQL"),
        ("SPARQL runner agent", "WIKIDATA_COMPARE: no\nQUESTION: List class labels"),
        (
            "SPARQL query generator",
            "```sparql\nPREFIX ns1: <https://enpkg.commonslab.org/kg/>\n"
            "PREFIX rdfs: <http://www.w3.org/2000/01/rdf-schema#>\n"
            "SELECT ?usi WHERE { ?c a ns1:NPCClass . ?c rdfs:label ?usi } ORDER BY ?usi\n```",
        ),
        ("supervisor coordinating", "ROUTE: INTERPRETER\nREQUEST: show the spectrum plot"),
        ("supervisor coordinating", "ROUTE: FINISH\nANSWER: Spectrum link provided."),
    ]
    engine = make_engine(tmp_path, schema, rules=rules)
    session = engine.create_session("usi")
    final = engine.run_turn("usi", "Show me the spectrum")
    assert final.kind == "final_answer"
    interp = session.last_message("interpretation")
    assert "https://metabolomics-usi.gnps2.org/dashinterface/?usi1=" in interp.body
    # first row after ORDER BY is "Aspidosperma-type alkaloids"
    assert "Aspidosperma-type%20alkaloids" in interp.body
    tools = [e.tool for e in session.trace if e.kind == "tool_called" and e.agent == "interpreter"]
    assert tools == ["spectrum_plotter"]


def test_interpreter_spectrum_tool_called(tmp_path, schema):
    from metaboqa.agents.messages import AgentMessage
    from metaboqa.agents.runtime import TurnContext

    engine = make_engine(tmp_path, schema, rules=[])
    session = engine.create_session("spec")
    spill = engine.session_dir("spec") / "1-results.csv"
    spill.parent.mkdir(parents=True, exist_ok=True)
    spill.write_text("usi,label\nmzspec:GNPS:TASK-x:scan:1,f1\n")
    ref = AgentMessage(
        sender="sparql_runner",
        kind="query_result_ref",
        body="rows stored",
        meta={"status": "ok_rows", "row_count": 1, "spill": spill.name, "query": "SELECT"},
    )
    session.append(ref)
    session.turn_counter = 1
    ctx = TurnContext(
        question="Show the spectrum", turn=1, result_ref=ref, interpret_request="show the spectrum"
    )
    engine._step_interpreter(session, ctx)
    message = session.last_message("interpretation")
    assert "https://metabolomics-usi.gnps2.org/dashinterface/?usi1=" in message.body
    assert "mzspec%3AGNPS%3ATASK-x%3Ascan%3A1" in message.body
    tools = [e.tool for e in session.trace if e.kind == "tool_called"]
    assert tools == ["spectrum_plotter"]


def test_retriable_llm_failure_is_surfaced(tmp_path, schema):
    from metaboqa.errors import ProviderError
    from metaboqa.gateway import ChatProvider

    class AlwaysDown(ChatProvider):
        def complete(self, *a):
            raise ProviderError("backend 503", retriable=True)

    engine = make_engine(
        tmp_path,
        schema,
        gateway=LlmGateway(mode="live", provider=AlwaysDown(), retry_base_delay=0),
    )
    session = engine.create_session("down")
    final = engine.run_turn("down", "Anything at all?")
    assert final.kind == "error"
    assert "retriable" in final.body
    error_events = [e for e in session.trace if e.kind == "error"]
    assert error_events and error_events[0].payload["retriable"] is True


def test_trace_timestamps_monotone(tmp_path, schema):
    engine = make_engine(tmp_path, schema, rules=golden_rules())
    session = engine.create_session("mono")
    engine.run_turn("mono", GOLDEN_QUESTION)
    ends = [e.t_end for e in session.trace]
    assert ends == sorted(ends)
    assert [e.seq for e in session.trace] == list(range(1, len(ends) + 1))


# -- rejection -----------------------------------------------------------------


def test_out_of_scope_rejection_short_circuits(tmp_path, schema):
    rules = [
        ("entry router", "NEW_KNOWLEDGE"),
        ("question validator", "PLANTS: none\nVERDICT: INVALID: geography is out of scope"),
    ]
    engine = make_engine(tmp_path, schema, rules=rules)
    session = engine.create_session("reject")
    final = engine.run_turn("reject", "What is the capital of France?")
    assert final.kind == "validation_verdict"
    assert final.meta["verdict"] == "invalid"
    assert "out of scope" in final.body
    assert len(events(session, kind="agent_started", agent="validator")) == 1
    assert events(session, kind="query_generated") == []
    assert events(session, kind="tool_called", agent="kg") == []
    assert events(session, kind="rejection", agent="validator")


def test_absent_plant_is_rejected_with_name(tmp_path, schema):
    rules = [
        ("entry router", "NEW_KNOWLEDGE"),
        ("question validator", "PLANTS: Plantus imaginarius\nVERDICT: VALID"),
    ]
    engine = make_engine(tmp_path, schema, rules=rules)
    engine.create_session("plant")
    final = engine.run_turn("plant", "List metabolites of Plantus imaginarius.")
    assert final.meta["verdict"] == "invalid"
    assert final.meta["reason"] == "plant_absent"
    assert "Plantus imaginarius" in final.body


def test_empty_question_is_error_without_llm(tmp_path, schema):
    engine = make_engine(tmp_path, schema, rules=[])
    session = engine.create_session("empty")
    final = engine.run_turn("empty", "   ")
    assert final.kind == "error"
    assert "empty" in final.body.lower()
    assert session.ledger.calls == 0


# -- follow-ups -------------------------------------------------------------------

RANKING_QUESTION = (
    "Which plant extracts have the highest count of metabolites annotated "
    "as aspidosperma-type alkaloids?"
)

RANKING_QUERY = """PREFIX ns1: <https://enpkg.commonslab.org/kg/>
PREFIX rdfs: <http://www.w3.org/2000/01/rdf-schema#>
SELECT ?extract (COUNT(DISTINCT ?feature) AS ?featureCount)
WHERE { ?labExtract rdfs:label ?extract .
?labExtract ns1:has_LCMS ?analysis .
?analysis ns1:has_lcms_feature_list ?fl .
?fl ns1:has_lcms_feature ?feature .
?feature ns1:has_sirius_annotation ?ann .
?ann ns1:has_npc_class ns1:npc_Aspidosperma_type_alkaloids . }
GROUP BY ?extract ORDER BY DESC(?featureCount)"""


def ranking_rules():
    return [
        ("entry router", "NEW_KNOWLEDGE"),
        ("question validator", "PLANTS: none\nVERDICT: VALID"),
        (
            "supervisor coordinating",
            "ROUTE: KG\nMENTIONS: aspidosperma-type alkaloids :: chemical_class",
        ),
        ("entity resolution agent", "CALL: chemical_resolver :: aspidosperma-type alkaloids"),
        ("supervisor coordinating", "ROUTE: SPARQL"),
        ("SPARQL runner agent", f"WIKIDATA_COMPARE: no\nQUESTION: {RANKING_QUESTION}"),
        ("SPARQL query generator", f"```sparql\n{RANKING_QUERY}\n```"),
        (
            "supervisor coordinating",
            "ROUTE: FINISH\nANSWER: Here is the list of plant extracts from the dataset, "
            "ordered by count: VGF_tc_pos (2), VGF_mh_pos (1).",
        ),
    ]


def followup_engine(tmp_path, schema):
    rules = ranking_rules() + [
        ("entry router", "HELP_ME_UNDERSTAND"),
        (
            "supervisor coordinating",
            "ROUTE: INTERPRETER\nREQUEST: distribution plot for the count of features",
        ),
        (
            "supervisor coordinating",
            "ROUTE: FINISH\nANSWER: Here is the distribution plot for the count of features.",
        ),
    ]
    return make_engine(tmp_path, schema, rules=rules)


def test_followup_reuses_stored_results(tmp_path, schema):
    engine = followup_engine(tmp_path, schema)
    session = engine.create_session("follow")
    engine.run_turn("follow", RANKING_QUESTION)
    calls_before = session.ledger.calls
    generations_before = len(events(session, kind="query_generated"))
    resolver_calls_before = len(events(session, kind="tool_called", agent="kg"))

    final = engine.run_turn(
        "follow", "Can you generate a distribution plot for the count of features?"
    )
    assert final.kind == "final_answer"
    assert "distribution plot" in final.body
    # zero new SPARQL generations, zero new entity resolutions
    assert len(events(session, kind="query_generated")) == generations_before
    assert len(events(session, kind="tool_called", agent="kg")) == resolver_calls_before
    # follow-up turn consumed LLM calls only for entry + supervisor x2
    assert session.ledger.calls == calls_before + 3
    chart = engine.session_dir("follow") / "2-chart.json"
    assert chart.exists()
    spec = json.loads(chart.read_text())
    assert spec["chart_type"] == "bar"
    assert spec["spec_version"] == 1


def test_followup_without_history_degrades(tmp_path, schema):
    rules = [
        ("entry router", "HELP_ME_UNDERSTAND"),
        ("question validator", "PLANTS: none\nVERDICT: INVALID: nothing to explain"),
    ]
    engine = make_engine(tmp_path, schema, rules=rules)
    session = engine.create_session("degrade")
    final = engine.run_turn("degrade", "Can you plot that?")
    # degraded to NewKnowledge: the validator ran (and rejected)
    assert final.kind == "validation_verdict"
    warnings = events(session, kind="warning", agent="entry")
    assert warnings and "degraded" in warnings[0].payload["reason"]


# -- loop protection -----------------------------------------------------------------


def test_oscillating_supervisor_hits_step_cap(tmp_path, schema):
    rules = [
        ("entry router", "NEW_KNOWLEDGE"),
        ("question validator", "PLANTS: none\nVERDICT: VALID"),
    ] + [
        ("supervisor coordinating", "ROUTE: KG\nMENTIONS: mystery thing :: unknown_kind")
    ] * 6
    engine = make_engine(tmp_path, schema, rules=rules)
    session = engine.create_session("loop")
    final = engine.run_turn("loop", "Oscillate forever please")
    assert final.kind == "error"
    assert "12" in final.body
    cap_events = [
        e for e in events(session, kind="error") if e.payload.get("reason") == "step_cap_exceeded"
    ]
    assert len(cap_events) == 1
    # unknown mention kinds were dropped with warnings
    warnings = events(session, kind="warning", agent="supervisor")
    assert any("unknown kind" in w.payload["reason"] for w in warnings)


def test_unroutable_supervisor_finishes_with_apology(tmp_path, schema):
    rules = [
        ("entry router", "NEW_KNOWLEDGE"),
        ("question validator", "PLANTS: none\nVERDICT: VALID"),
        ("supervisor coordinating", "I am not sure what to do here."),
    ]
    engine = make_engine(tmp_path, schema, rules=rules)
    session = engine.create_session("lost")
    final = engine.run_turn("lost", "List all lab extracts in the graph")
    assert final.kind == "final_answer"
    assert "sorry" in final.body.lower()
    assert any(
        e.payload.get("reason") == "unroutable" for e in events(session, kind="warning")
    )


# -- wikidata comparison through the runner ------------------------------------------

COMPARE_QUESTION = (
    "Which compounds annotated in Tabernaemontana coffeoides extracts are also "
    "reported for its genus in Wikidata?"
)

COMPARE_QUERY = """PREFIX ns1: <https://enpkg.commonslab.org/kg/>
SELECT DISTINCT ?compound WHERE {
  ?rm ns1:has_wd_id <http://www.wikidata.org/entity/Q15376858> .
  ?rm ns1:has_lab_process ?e . ?e ns1:has_LCMS ?a .
  ?a ns1:has_lcms_feature_list ?fl . ?fl ns1:has_lcms_feature ?f .
  ?f ns1:has_sirius_annotation ?ann . ?ann ns1:has_compound_wd_id ?compound }"""


def compare_rules():
    return [
        ("entry router", "NEW_KNOWLEDGE"),
        ("question validator", "PLANTS: Tabernaemontana coffeoides\nVERDICT: VALID"),
        ("supervisor coordinating", "ROUTE: KG\nMENTIONS: Tabernaemontana coffeoides :: taxon"),
        ("entity resolution agent", "CALL: taxon_resolver :: Tabernaemontana coffeoides"),
        ("supervisor coordinating", "ROUTE: SPARQL"),
        (
            "SPARQL runner agent",
            "WIKIDATA_COMPARE: yes\nQUESTION: Which compounds are annotated in "
            "Tabernaemontana coffeoides extracts?",
        ),
        ("SPARQL query generator", f"```sparql\n{COMPARE_QUERY}\n```"),
        (
            "supervisor coordinating",
            "ROUTE: FINISH\nANSWER: Two compounds overlap with the genus-level "
            "Wikidata annotations.",
        ),
    ]


def test_wikidata_comparison_merges_genus_compounds(tmp_path, schema):
    engine = make_engine(tmp_path, schema, rules=compare_rules())
    session = engine.create_session("compare")
    final = engine.run_turn("compare", COMPARE_QUESTION)
    assert final.kind == "final_answer"

    tools = [e.tool for e in events(session, kind="tool_called", agent="sparql_runner")]
    assert tools == ["wikidata_structure_search", "output_merger"]

    result_ref = session.last_message("query_result_ref")
    assert result_ref.meta["spill"] == "1-common.csv"
    assert result_ref.meta["row_count"] == 2

    merged = (engine.session_dir("compare") / "1-common.csv").read_text().splitlines()
    assert merged[0] == "id"
    assert merged[1:] == [
        "http://www.wikidata.org/entity/Q410932",
        "http://www.wikidata.org/entity/Q904428",
    ]
    # the genus-side spill is an artifact too
    assert (engine.session_dir("compare") / "1-wikidata.csv").exists()
    assert "1-common.csv" in final.attachments


def test_smiles_and_target_mentions_resolve_in_flow(tmp_path, schema):
    from conftest import StubResponse, StubSession
    from metaboqa.resolvers import ChemblTargetResolver, GnpsStructureResolver
    from test_resolvers import CHEMBL_LDONOVANI_XML, INDOLE_INCHIKEY, INDOLE_SMILES

    rules = [
        ("entry router", "NEW_KNOWLEDGE"),
        ("question validator", "PLANTS: none\nVERDICT: VALID"),
        (
            "supervisor coordinating",
            f"ROUTE: KG\nMENTIONS: {INDOLE_SMILES} :: smiles; Leishmania donovani :: target",
        ),
        (
            "entity resolution agent",
            f"CALL: smiles_resolver :: {INDOLE_SMILES}\n"
            "CALL: target_resolver :: Leishmania donovani",
        ),
        ("supervisor coordinating", "ROUTE: FINISH\nANSWER: Both identifiers resolved."),
    ]
    engine = make_engine(tmp_path, schema, rules=rules)
    engine.structure_resolver = GnpsStructureResolver(
        base_url="https://stub.test",
        session=StubSession().add("/inchikey", StubResponse(text=INDOLE_INCHIKEY)),
    )
    engine.target_resolver = ChemblTargetResolver(
        base_url="https://stub.test",
        session=StubSession().add("/target/search", StubResponse(text=CHEMBL_LDONOVANI_XML)),
    )
    session = engine.create_session("kg2")
    engine.run_turn("kg2", f"Is {INDOLE_SMILES} active against Leishmania donovani?")
    resolved = session.last_message("resolved_entities").meta["entities"]
    identifiers = {e["identifier"] for e in resolved}
    assert INDOLE_INCHIKEY in identifiers
    assert "https://www.ebi.ac.uk/chembl/target_report_card/CHEMBL367" in identifiers
    kinds = {e["kind"] for e in resolved}
    assert kinds == {"structure", "target"}


# -- uploads --------------------------------------------------------------------------


def test_upload_records_summary(tmp_path, schema):
    engine = make_engine(tmp_path, schema, rules=[])
    session = engine.create_session("up")
    mgf = "".join(f"BEGIN IONS\nPEPMASS=10{i}\nEND IONS\n" for i in range(7))
    summary = engine.store_upload("up", "spectra.mgf", mgf.encode())
    assert summary.kind == "mgf"
    assert summary.details["spectrum_count"] == 7
    assert "spectra.mgf" in session.uploaded_files
    assert events(session, kind="tool_called", agent="entry")[0].tool == "file_analyzer"


def test_upload_rejects_traversal(tmp_path, schema):
    engine = make_engine(tmp_path, schema, rules=[])
    engine.create_session("sec")
    with pytest.raises(ArtifactSecurityError):
        engine.store_upload("sec", "../evil.txt", b"x")


# -- replay determinism ------------------------------------------------------------------


class ExplodingProvider(ChatProvider):
    def complete(self, *a, **kw):
        raise AssertionError("replay mode must never call a live provider")


def test_record_then_replay_is_byte_identical(tmp_path, schema):
    cassette_path = tmp_path / "golden.jsonl"
    record_gateway = LlmGateway(
        mode="record",
        provider=ScriptedChatProvider(golden_rules()),
        cassette_path=cassette_path,
        retry_base_delay=0,
    )
    engine = make_engine(tmp_path / "rec", schema, gateway=record_gateway)
    engine.create_session("s")
    recorded = engine.run_turn("s", GOLDEN_QUESTION)

    bodies = []
    ledgers = []
    for i in range(2):
        replay_gateway = LlmGateway(
            mode="replay", cassette=Cassette.load(cassette_path)
        )
        replay_gateway.provider = ExplodingProvider()  # guard: must stay unused
        replay_engine = make_engine(tmp_path / f"rep{i}", schema, gateway=replay_gateway)
        replay_engine.create_session("s")
        final = replay_engine.run_turn("s", GOLDEN_QUESTION)
        bodies.append(final.body.encode())
        ledgers.append(replay_engine.get_session("s").ledger.to_dict())

    assert bodies[0] == bodies[1] == recorded.body.encode()
    assert ledgers[0] == ledgers[1]
