"""Benchmark dataset loading: (question, reference_query, complexity) CSV."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from ..errors import ConfigError, SparqlParseError
from ..rdf.sparql import check_select_syntax

COMPLEXITIES = ("low", "medium", "high")


@dataclass(frozen=True)
class EvalQuestion:
    id: str
    question: str
    reference_query: str
    complexity: str


def load_dataset(path: str | Path) -> list[EvalQuestion]:
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            fields = reader.fieldnames or []
            required = {"question", "reference_query", "complexity"}
            if not required.issubset(fields):
                raise ConfigError(
                    f"dataset {path} needs columns {sorted(required)}, has {fields}"
                )
            rows = list(reader)
    except OSError as exc:
        raise ConfigError(f"cannot read dataset {path}: {exc}")
    if not rows:
        raise ConfigError(f"dataset {path} has no rows")
    questions = []
    for index, row in enumerate(rows, start=2):  # header is line 1
        complexity = (row["complexity"] or "").strip().lower()
        if complexity not in COMPLEXITIES:
            raise ConfigError(
                f"dataset {path} row {index}: complexity must be one of "
                f"{COMPLEXITIES}, got {row['complexity']!r}"
            )
        reference = (row["reference_query"] or "").strip()
        try:
            check_select_syntax(reference)
        except SparqlParseError as exc:
            raise ConfigError(f"dataset {path} row {index}: bad reference query: {exc}")
        questions.append(
            EvalQuestion(
                id=(row.get("id") or f"Q{index - 1:03d}").strip(),
                question=(row["question"] or "").strip(),
                reference_query=reference,
                complexity=complexity,
            )
        )
    return questions
