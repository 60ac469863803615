"""Per-question records and aggregate accuracy/latency/cost reporting."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional

from .dataset import COMPLEXITIES

VERDICTS = ("correct", "incorrect", "not_generated")
ERROR_TYPES = ("none", "T1", "T2", "T3", "T4")


@dataclass
class EvalRecord:
    question_id: str
    configuration: str
    complexity: str
    verdict: str
    error_type: str
    latency_seconds: float
    prompt_tokens: int = 0
    completion_tokens: int = 0
    estimated_cost: float = 0.0
    generated_query: Optional[str] = None
    judge_rationale: str = ""
    needs_review: bool = False
    excluded: bool = False
    exclusion_reason: str = ""

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"bad verdict {self.verdict!r}")
        if self.error_type not in ERROR_TYPES:
            raise ValueError(f"bad error type {self.error_type!r}")
        if self.verdict == "correct" and self.error_type != "none":
            raise ValueError("a correct record cannot carry an error type")
        if self.verdict == "not_generated" and self.error_type not in ("T1", "T3"):
            raise ValueError("not_generated implies the pipeline stopped early (T1 or T3)")

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EvalRecord":
        d = dict(d)
        d.pop("total_tokens", None)
        return cls(**d)


@dataclass
class StratumStats:
    total: int = 0
    correct: int = 0
    excluded: int = 0

    @property
    def included(self) -> int:
        return self.total - self.excluded

    @property
    def accuracy(self) -> Optional[float]:
        """Accuracy over included records, as a percentage."""
        if self.included == 0:
            return None
        return 100.0 * self.correct / self.included

    @property
    def accuracy_counting_excluded(self) -> Optional[float]:
        if self.total == 0:
            return None
        return 100.0 * self.correct / self.total

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "correct": self.correct,
            "excluded": self.excluded,
            "accuracy_pct": self.accuracy,
            "accuracy_counting_excluded_pct": self.accuracy_counting_excluded,
        }


@dataclass
class EvalReport:
    configuration: str
    overall: StratumStats
    per_stratum: dict[str, StratumStats]
    mean_latency_seconds: float
    mean_total_tokens: float
    mean_cost: float
    excluded_questions: list[dict] = field(default_factory=list)
    needs_review: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "configuration": self.configuration,
            "overall": self.overall.to_dict(),
            "per_stratum": {k: v.to_dict() for k, v in self.per_stratum.items()},
            "mean_latency_seconds": self.mean_latency_seconds,
            "mean_total_tokens": self.mean_total_tokens,
            "mean_cost": self.mean_cost,
            "excluded_questions": self.excluded_questions,
            "needs_review": self.needs_review,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def table(self) -> str:
        """Human-readable summary table."""
        lines = [
            f"configuration: {self.configuration}",
            f"{'stratum':<10}{'total':>7}{'correct':>9}{'excluded':>10}{'accuracy':>10}",
        ]

        def fmt(value: Optional[float]) -> str:
            return f"{value:.2f}%" if value is not None else "n/a"

        for name in list(COMPLEXITIES) + ["overall"]:
            stats = self.overall if name == "overall" else self.per_stratum.get(name)
            if stats is None:
                continue
            lines.append(
                f"{name:<10}{stats.total:>7}{stats.correct:>9}{stats.excluded:>10}"
                f"{fmt(stats.accuracy):>10}"
            )
        lines.append(
            f"mean latency {self.mean_latency_seconds:.2f} s | "
            f"mean tokens {self.mean_total_tokens:.0f} | "
            f"mean cost ${self.mean_cost:.4f}"
        )
        return "\n".join(lines)


def aggregate_metrics(records: list[EvalRecord]) -> EvalReport:
    """Recompute aggregates exactly from records (no hidden state).

    Accuracy denominators exclude excluded questions (the with-exclusion
    variant is also reported); means run over included records only.
    """
    if not records:
        raise ValueError("no records to aggregate")
    overall = StratumStats()
    per_stratum: dict[str, StratumStats] = {c: StratumStats() for c in COMPLEXITIES}
    excluded_questions = []
    needs_review = []
    latencies, tokens, costs = [], [], []
    configuration = records[0].configuration

    for record in records:
        stats = per_stratum.setdefault(record.complexity, StratumStats())
        overall.total += 1
        stats.total += 1
        if record.excluded:
            overall.excluded += 1
            stats.excluded += 1
            excluded_questions.append(
                {"question_id": record.question_id, "reason": record.exclusion_reason}
            )
            continue
        if record.verdict == "correct":
            overall.correct += 1
            stats.correct += 1
        if record.needs_review:
            needs_review.append(record.question_id)
        latencies.append(record.latency_seconds)
        tokens.append(record.total_tokens)
        costs.append(record.estimated_cost)

    included = max(len(latencies), 1)
    return EvalReport(
        configuration=configuration,
        overall=overall,
        per_stratum=per_stratum,
        mean_latency_seconds=sum(latencies) / included,
        mean_total_tokens=sum(tokens) / included,
        mean_cost=sum(costs) / included,
        excluded_questions=excluded_questions,
        needs_review=needs_review,
    )
