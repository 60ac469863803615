"""Parsers for the structured replies each agent prompt requests."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

MENTION_KINDS = ("taxon", "chemical_class", "target", "smiles")

KG_TOOLS = ("taxon_resolver", "chemical_resolver", "target_resolver", "smiles_resolver")

# which tool is appropriate for which mention kind (the error-taxonomy
# classifier relies on the same mapping)
TOOL_FOR_KIND = {
    "taxon": "taxon_resolver",
    "chemical_class": "chemical_resolver",
    "target": "target_resolver",
    "smiles": "smiles_resolver",
}


class AgentOutputError(ValueError):
    """The LLM reply did not match the requested format."""


def parse_classification(text: str) -> str:
    upper = text.upper()
    if "HELP_ME_UNDERSTAND" in upper:
        return "HelpMeUnderstand"
    if "NEW_KNOWLEDGE" in upper:
        return "NewKnowledge"
    raise AgentOutputError(f"unrecognized classification reply: {text[:120]!r}")


@dataclass
class ValidatorReply:
    plants: list[str]
    verdict: str  # valid | invalid
    feedback: str = ""


def parse_validator(text: str) -> ValidatorReply:
    plants: list[str] = []
    plants_match = re.search(r"PLANTS:\s*(.+)", text, re.IGNORECASE)
    if plants_match:
        raw = plants_match.group(1).strip()
        if raw.lower() not in ("none", "n/a", "-", ""):
            plants = [p.strip() for p in raw.split(",") if p.strip()]
    verdict_match = re.search(r"VERDICT:\s*(VALID|INVALID)\s*:?\s*(.*)", text, re.IGNORECASE)
    if not verdict_match:
        raise AgentOutputError(f"validator reply lacks a VERDICT line: {text[:120]!r}")
    verdict = verdict_match.group(1).lower()
    feedback = verdict_match.group(2).strip()
    return ValidatorReply(plants=plants, verdict=verdict, feedback=feedback)


@dataclass
class SupervisorDirective:
    route: str  # kg | sparql_runner | interpreter | finish
    mentions: list[tuple[str, str]] = field(default_factory=list)  # (name, kind)
    request: str = ""
    answer: str = ""
    warnings: list[str] = field(default_factory=list)


_ROUTE_NAMES = {
    "KG": "kg",
    "SPARQL": "sparql_runner",
    "INTERPRETER": "interpreter",
    "FINISH": "finish",
}


def parse_supervisor(text: str) -> SupervisorDirective:
    route_match = re.search(r"ROUTE:\s*(KG|SPARQL|INTERPRETER|FINISH)", text, re.IGNORECASE)
    if not route_match:
        raise AgentOutputError(f"supervisor reply lacks a ROUTE line: {text[:120]!r}")
    directive = SupervisorDirective(route=_ROUTE_NAMES[route_match.group(1).upper()])
    if directive.route == "kg":
        mentions_match = re.search(r"MENTIONS:\s*(.+)", text, re.IGNORECASE | re.DOTALL)
        if mentions_match:
            for chunk in mentions_match.group(1).splitlines()[0].split(";"):
                chunk = chunk.strip()
                if not chunk:
                    continue
                if "::" not in chunk:
                    directive.warnings.append(f"malformed mention {chunk!r} dropped")
                    continue
                name, _, kind = (part.strip() for part in chunk.partition("::"))
                kind = kind.lower()
                if kind not in MENTION_KINDS:
                    directive.warnings.append(
                        f"mention {name!r} has unknown kind {kind!r}; dropped"
                    )
                    continue
                directive.mentions.append((name, kind))
    elif directive.route == "interpreter":
        request_match = re.search(r"REQUEST:\s*(.+)", text, re.IGNORECASE)
        directive.request = request_match.group(1).strip() if request_match else ""
    elif directive.route == "finish":
        answer_match = re.search(r"ANSWER:\s*(.+)", text, re.IGNORECASE | re.DOTALL)
        if not answer_match:
            raise AgentOutputError("FINISH directive lacks an ANSWER line")
        directive.answer = answer_match.group(1).strip()
    return directive


@dataclass
class KgCall:
    tool: str
    mention: str


def parse_kg_calls(text: str) -> list[KgCall]:
    calls = []
    for match in re.finditer(r"CALL:\s*([\w-]+)\s*::\s*(.+)", text):
        tool = match.group(1).strip().lower()
        mention = match.group(2).strip()
        if tool in KG_TOOLS and mention:
            calls.append(KgCall(tool=tool, mention=mention))
    return calls


@dataclass
class RunnerPrep:
    wikidata_compare: bool
    question: str


def parse_runner_prep(text: str, fallback_question: str) -> RunnerPrep:
    compare = False
    match = re.search(r"WIKIDATA_COMPARE:\s*(yes|no)", text, re.IGNORECASE)
    if match:
        compare = match.group(1).lower() == "yes"
    question_match = re.search(r"QUESTION:\s*(.+)", text, re.IGNORECASE | re.DOTALL)
    question = question_match.group(1).strip() if question_match else fallback_question
    return RunnerPrep(wikidata_compare=compare, question=question or fallback_question)


def parse_judge(text: str) -> tuple[bool, str]:
    verdict_match = re.search(r"VERDICT:\s*(CORRECT|INCORRECT)", text, re.IGNORECASE)
    if not verdict_match:
        raise AgentOutputError(f"judge reply lacks a VERDICT line: {text[:120]!r}")
    rationale_match = re.search(r"RATIONALE:\s*(.+)", text, re.IGNORECASE)
    rationale = rationale_match.group(1).strip() if rationale_match else ""
    return verdict_match.group(1).upper() == "CORRECT", rationale
