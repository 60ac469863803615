#!/usr/bin/env python3
"""Regenerate the bundled replay cassettes under fixtures/cassettes/.

Runs the pipeline against the fixture graph with a scripted
demonstration provider and records every LLM exchange. Re-run this
whenever prompt templates or fixtures change, then commit the updated
cassettes:

    python3 scripts/record_cassettes.py
"""

from __future__ import annotations

import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from metaboqa.agents.runtime import Engine  # noqa: E402
from metaboqa.endpoints import LocalGraphEndpoint  # noqa: E402
from metaboqa.evalharness import load_dataset, run_evaluation  # noqa: E402
from metaboqa.gateway import LlmGateway, ScriptedChatProvider  # noqa: E402
from metaboqa.refinement import RefinementStore  # noqa: E402
from metaboqa.resolvers import ChemicalIndex, PlantDb  # noqa: E402
from metaboqa.schema import load_schema_file  # noqa: E402

FIXTURES = ROOT / "fixtures"
CASSETTES = FIXTURES / "cassettes"
NS = "PREFIX ns1: <https://enpkg.commonslab.org/kg/>"

GOLDEN_QUESTION = (
    "How many metabolites were annotated with SIRIUS in Tabernaemontana coffeoides "
    "with molecular formula score (ZODIAC) above 0.9 and confidence score (COSMIC) above 0.3?"
)
RANKING_QUESTION = (
    "Which plant extracts have the highest count of metabolites annotated "
    "as aspidosperma-type alkaloids?"
)
FOLLOWUP_QUESTION = "Can you generate a distribution plot for the count of features for those extracts?"
REJECTION_QUESTION = "What is the capital of France?"

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


def fenced(query: str) -> str:
    return f"```sparql\n{query}\n```"


def standard_flow(question: str, query: str, answer: str, plants: str = "none"):
    """Entry -> validator -> supervisor -> runner -> generation -> finish."""
    return [
        ("entry router", "NEW_KNOWLEDGE"),
        ("question validator", f"PLANTS: {plants}\nVERDICT: VALID"),
        ("supervisor coordinating", "ROUTE: SPARQL"),
        ("SPARQL runner agent", f"WIKIDATA_COMPARE: no\nQUESTION: {question}"),
        ("SPARQL query generator", fenced(query)),
        ("supervisor coordinating", f"ROUTE: FINISH\nANSWER: {answer}"),
    ]


def golden_flow_rules():
    return [
        ("entry router", "NEW_KNOWLEDGE"),
        ("question validator", "PLANTS: Tabernaemontana coffeoides\nVERDICT: VALID"),
        ("supervisor coordinating", "ROUTE: KG\nMENTIONS: Tabernaemontana coffeoides :: taxon"),
        ("entity resolution agent", "CALL: taxon_resolver :: Tabernaemontana coffeoides"),
        ("supervisor coordinating", "ROUTE: SPARQL"),
        ("SPARQL runner agent", f"WIKIDATA_COMPARE: no\nQUESTION: {GOLDEN_QUESTION}"),
        ("SPARQL query generator", fenced(GOLDEN_QUERY)),
        (
            "supervisor coordinating",
            "ROUTE: FINISH\nANSWER: Retrieved the plant entity "
            "http://www.wikidata.org/entity/Q15376858. The corresponding number of "
            "metabolites is 3.",
        ),
    ]


def ranking_flow():
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
        ("SPARQL query generator", fenced(RANKING_QUERY)),
        (
            "supervisor coordinating",
            "ROUTE: FINISH\nANSWER: Here is the list of plant extracts from the dataset, "
            "ordered by decreasing count of aspidosperma-type alkaloid features: "
            "VGF_tc_pos (2), VGF_mh_pos (1).",
        ),
    ]


def followup_flow():
    return [
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


def rejection_flow():
    return [
        ("entry router", "NEW_KNOWLEDGE"),
        (
            "question validator",
            "PLANTS: none\nVERDICT: INVALID: the question asks about geography; "
            "this knowledge graph covers plant extracts, LCMS features, annotations "
            "and bioassay results.",
        ),
    ]


def eval_flows(questions) -> list:
    by_id = {q.id: q for q in questions}
    wrong_class_query = by_id["E09"].reference_query.replace(
        "npc_Aspidosperma_type_alkaloids", "npc_Flavonoids"
    )
    refined_wrong_query = by_id["E09"].reference_query.replace(
        "npc_Aspidosperma_type_alkaloids", "npc_Carotenoids"
    )
    mixed_up_e05 = by_id["E05"].reference_query.replace(
        "npc_Aspidosperma_type_alkaloids", "npc_Tetraketide_meroterpenoids"
    )
    renamed_e01 = f"{NS}\nSELECT ?e WHERE {{ ?e a ns1:LabExtract }}"

    rules = []
    rules += standard_flow(by_id["E01"].question, renamed_e01, "There are 2 lab extracts in the graph.")
    rules += standard_flow(by_id["E02"].question, by_id["E02"].reference_query, "The graph records 7 LCMS features.")
    rules += standard_flow(by_id["E03"].question, by_id["E03"].reference_query, "Three chemical classes are present.")
    rules += golden_flow_rules()
    rules += standard_flow(by_id["E05"].question, mixed_up_e05, "Here are the per-extract counts.")
    rules += standard_flow(by_id["E06"].question, by_id["E06"].reference_query, "Five features pass the ZODIAC threshold.")
    # E07: validator misclassifies a valid benchmark question (Type 1 failure)
    rules += [
        ("entry router", "NEW_KNOWLEDGE"),
        (
            "question validator",
            "PLANTS: none\nVERDICT: INVALID: raw materials are not covered by this graph.",
        ),
    ]
    rules += standard_flow(by_id["E08"].question, by_id["E08"].reference_query, "One extract passes the 50% inhibition threshold.")
    # E09: KG agent picks the wrong tool for a chemical class (Type 4),
    # then generation uses a wrong class, refines once, and still misses
    rules += [
        ("entry router", "NEW_KNOWLEDGE"),
        ("question validator", "PLANTS: none\nVERDICT: VALID"),
        (
            "supervisor coordinating",
            "ROUTE: KG\nMENTIONS: aspidosperma-type alkaloids :: chemical_class",
        ),
        ("entity resolution agent", "CALL: taxon_resolver :: aspidosperma-type alkaloids"),
        ("supervisor coordinating", "ROUTE: SPARQL"),
        ("SPARQL runner agent", f"WIKIDATA_COMPARE: no\nQUESTION: {by_id['E09'].question}"),
        ("SPARQL query generator", fenced(wrong_class_query)),
        ("refining a SPARQL query", fenced(refined_wrong_query)),
        (
            "supervisor coordinating",
            "ROUTE: FINISH\nANSWER: The requested data does not appear to exist in the knowledge graph.",
        ),
    ]
    rules += standard_flow(by_id["E10"].question, by_id["E10"].reference_query, "One extract contains tetraketide meroterpenoid features.")
    return rules


def build_engine(rules, cassette_path: Path, artifacts: Path) -> Engine:
    cassette_path.parent.mkdir(parents=True, exist_ok=True)
    if cassette_path.exists():
        cassette_path.unlink()
    gateway = LlmGateway(
        mode="record",
        provider=ScriptedChatProvider(rules),
        cassette_path=cassette_path,
        retry_base_delay=0,
    )
    return Engine(
        schema=load_schema_file(FIXTURES / "schema.ttl"),
        plant_db=PlantDb.from_csv(FIXTURES / "plants.csv"),
        chemical_index=ChemicalIndex.from_csv(FIXTURES / "npc_classes.csv"),
        kg_endpoint=LocalGraphEndpoint.from_turtle_file(FIXTURES / "graph.ttl"),
        wikidata_endpoint=LocalGraphEndpoint.from_turtle_file(FIXTURES / "wikidata.ttl"),
        gateway=gateway,
        refinement_store=RefinementStore.from_csv(
            FIXTURES / "eval_dataset.csv", question_column="question", query_column="reference_query"
        ),
        artifacts_root=artifacts,
        model_ref="demo-model",
    )


def record_demo(tmp_root: Path) -> None:
    """Annotation-count turn, extract-ranking + follow-up turns, rejection turn."""
    rules = golden_flow_rules() + ranking_flow() + followup_flow() + rejection_flow()
    engine = build_engine(rules, CASSETTES / "demo.jsonl", tmp_root / "demo")
    engine.create_session("record-a")
    final = engine.run_turn("record-a", GOLDEN_QUESTION)
    assert "3" in final.body, final.body
    engine.create_session("record-b")
    engine.run_turn("record-b", RANKING_QUESTION)
    followup = engine.run_turn("record-b", FOLLOWUP_QUESTION)
    assert "distribution plot" in followup.body, followup.body
    engine.create_session("record-c")
    rejection = engine.run_turn("record-c", REJECTION_QUESTION)
    assert rejection.meta.get("verdict") == "invalid", rejection.body
    print(f"demo.jsonl: {len(engine.gateway.provider.requests_seen)} exchanges")


def record_eval(tmp_root: Path) -> None:
    questions = load_dataset(FIXTURES / "eval_dataset.csv")
    rules = eval_flows(questions)
    engine = build_engine(rules, CASSETTES / "eval.jsonl", tmp_root / "eval")
    records, report = run_evaluation(questions, engine, configuration="replay-demo")
    verdicts = {r.question_id: (r.verdict, r.error_type) for r in records}
    expected = {
        "E01": ("correct", "none"),
        "E02": ("correct", "none"),
        "E03": ("correct", "none"),
        "E04": ("correct", "none"),
        "E05": ("incorrect", "T2"),
        "E06": ("correct", "none"),
        "E07": ("not_generated", "T1"),
        "E08": ("correct", "none"),
        "E09": ("incorrect", "T4"),
        "E10": ("correct", "none"),
    }
    assert verdicts == expected, verdicts
    print(f"eval.jsonl: overall accuracy {report.overall.accuracy:.2f}%")


def main() -> None:
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        tmp_root = Path(tmp)
        record_demo(tmp_root)
        record_eval(tmp_root)
    print("cassettes written to", CASSETTES)


if __name__ == "__main__":
    main()
