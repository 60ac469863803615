"""File analysis, result summarization, chart specs, spectrum URLs.

The interpretation stage is deliberately deterministic where the data
allows it: file summaries and chart specs are computed, not generated;
only free-text result summaries go through the gateway. Charts are
declarative JSON (spec_version 1) rendered client-side.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union
from urllib.parse import quote

from .errors import ArtifactSecurityError, ChartSpecError, MetaboqaError
from .gateway import BudgetLedger, ChatMessage, LlmGateway
from .tokens import TokenEstimator, count_tokens, within_result_budget

SPECTRUM_URL_TEMPLATE = "https://metabolomics-usi.gnps2.org/dashinterface/?usi1={usi}"
CHART_SPEC_VERSION = 1
SAMPLE_ROWS = 5
INLINE_SERIES_CAP = 1000


@dataclass
class FileSummary:
    name: str
    size_bytes: int
    kind: str  # spreadsheet | mgf | text | unknown
    details: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "size_bytes": self.size_bytes,
            "kind": self.kind,
            "details": self.details,
            "warnings": list(self.warnings),
        }


_SPREADSHEET_EXT = {".csv", ".tsv"}
_TEXT_EXT = {".txt", ".log", ".md"}


def _resolve_inside(path: Path, base_dir: Path) -> Path:
    resolved = path.resolve()
    base = base_dir.resolve()
    if not resolved.is_relative_to(base):
        raise ArtifactSecurityError(f"path {path} escapes the session directory")
    return resolved


def analyze_file(path: str | Path, session_dir: str | Path) -> FileSummary:
    """Summarize an uploaded file; kind by extension, then content sniff."""
    path = Path(path)
    if not path.is_absolute():
        path = Path(session_dir) / path
    path = _resolve_inside(path, Path(session_dir))
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise MetaboqaError(f"cannot read uploaded file {path.name}: {exc}")
    summary = FileSummary(name=path.name, size_bytes=len(raw), kind="unknown")
    ext = path.suffix.lower()
    text = raw.decode("utf-8", errors="replace")

    if ext in _SPREADSHEET_EXT:
        summary.kind = "spreadsheet"
    elif ext == ".mgf":
        summary.kind = "mgf"
    elif ext in _TEXT_EXT:
        summary.kind = "text"
    elif "BEGIN IONS" in text:
        summary.kind = "mgf"
    elif raw and b"\x00" not in raw:
        summary.kind = "text"

    if summary.kind == "spreadsheet":
        delimiter = "\t" if ext == ".tsv" else ","
        rows = list(csv.reader(text.splitlines(), delimiter=delimiter))
        headers = rows[0] if rows else []
        data = rows[1:]
        summary.details = {
            "rows": len(data),
            "columns": len(headers),
            "headers": headers,
            "sample_rows": data[:SAMPLE_ROWS],
        }
    elif summary.kind == "mgf":
        begins = text.count("BEGIN IONS")
        ends = text.count("END IONS")
        summary.details = {"spectrum_count": begins}
        if begins != ends:
            summary.warnings.append(
                f"malformed MGF: {begins} BEGIN IONS vs {ends} END IONS"
            )
    elif summary.kind == "text":
        summary.details = {"line_count": len(text.splitlines())}
    return summary


# -- result summarization -----------------------------------------------------


@dataclass
class ResultsContext:
    """What the interpretation prompt may contain for a spilled result."""

    block: str
    inlined: bool
    row_count: int
    spill_name: str
    header: str


def build_results_context(
    query: str,
    question: str,
    spill_path: str | Path,
    estimate: TokenEstimator = count_tokens,
) -> ResultsContext:
    """Inline the full CSV when (query, question, rows) fit the token
    budget; otherwise expose only the header, row count, and file name."""
    spill_path = Path(spill_path)
    try:
        csv_text = spill_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise MetaboqaError(f"cannot read results file {spill_path}: {exc}")
    lines = csv_text.splitlines()
    header = lines[0] if lines else ""
    row_count = max(len(lines) - 1, 0)
    if within_result_budget(query, question, csv_text, estimate=estimate):
        return ResultsContext(
            block="Query results (CSV):\n" + csv_text,
            inlined=True,
            row_count=row_count,
            spill_name=spill_path.name,
            header=header,
        )
    block = (
        "The results are too large to include here. Retrieve the complete "
        f"output from the generated CSV file: {spill_path.name}\n"
        f"Row count: {row_count}\n"
        f"Columns: {header}"
    )
    return ResultsContext(
        block=block,
        inlined=False,
        row_count=row_count,
        spill_name=spill_path.name,
        header=header,
    )


def summarize_results(
    spill_path: str | Path,
    question: str,
    query: str,
    gateway: LlmGateway,
    model_ref: str,
    prompts,
    ledger: Optional[BudgetLedger] = None,
) -> tuple[str, ResultsContext]:
    """One gateway completion over the budget-checked results context."""
    context = build_results_context(query, question, spill_path, estimate=gateway.estimate)
    prompt = prompts.render(
        "interpreter_summary",
        question=question,
        query=query,
        results_block=context.block,
    )
    exchange = gateway.complete(model_ref, [ChatMessage("user", prompt)], ledger=ledger)
    return exchange.response, context


# -- chart specs ----------------------------------------------------------------


@dataclass
class ChartSpec:
    chart_type: str  # bar | histogram | scatter | line
    x: str
    title: str
    data_csv: str
    y: Optional[str] = None
    series: Optional[list] = None
    spec_version: int = CHART_SPEC_VERSION

    def to_dict(self) -> dict:
        d = {
            "spec_version": self.spec_version,
            "chart_type": self.chart_type,
            "x": self.x,
            "y": self.y,
            "title": self.title,
            "data": {"csv": self.data_csv},
        }
        if self.series is not None:
            d["series"] = self.series
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ChartSpec":
        return cls(
            chart_type=d["chart_type"],
            x=d["x"],
            y=d.get("y"),
            title=d["title"],
            data_csv=d.get("data", {}).get("csv", ""),
            series=d.get("series"),
            spec_version=d.get("spec_version", CHART_SPEC_VERSION),
        )


_CHART_KEYWORDS = [
    ("histogram", "histogram"),
    ("scatter", "scatter"),
    ("line", "line"),
    ("bar", "bar"),
    ("distribution", "bar"),
]


def _chart_type_for(request: str) -> str:
    lowered = request.lower()
    for keyword, chart_type in _CHART_KEYWORDS:
        if keyword in lowered:
            return chart_type
    return "bar"


def _is_numeric_column(values: list[str]) -> bool:
    non_empty = [v for v in values if v.strip()]
    if not non_empty:
        return False
    for v in non_empty:
        try:
            float(v)
        except ValueError:
            return False
    return True


def make_chart_spec(
    spill_path: str | Path,
    request: str,
    out_path: str | Path,
    title: Optional[str] = None,
) -> ChartSpec:
    """Build a declarative chart spec from a spilled CSV.

    Column choice prefers headers named in the request; raises
    ChartSpecError with a user-facing explanation when no suitable
    columns exist (no file is written in that case).
    """
    spill_path = Path(spill_path)
    try:
        with open(spill_path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise MetaboqaError(f"cannot read results file {spill_path}: {exc}")
    if not rows or not rows[0]:
        raise ChartSpecError("the results file has no columns to chart")
    headers, data = rows[0], rows[1:]
    columns = {h: [row[i] if i < len(row) else "" for row in data] for i, h in enumerate(headers)}
    numeric = [h for h in headers if _is_numeric_column(columns[h])]
    categorical = [h for h in headers if h not in numeric]
    mentioned = [h for h in headers if h.lower() in request.lower()]

    def prefer(pool: list[str]) -> Optional[str]:
        for h in mentioned:
            if h in pool:
                return h
        return pool[0] if pool else None

    chart_type = _chart_type_for(request)
    x: Optional[str]
    y: Optional[str] = None
    if chart_type == "histogram":
        x = prefer(numeric)
        if x is None:
            raise ChartSpecError("a histogram needs a numeric column; none found")
    elif chart_type == "scatter":
        if len(numeric) < 2:
            raise ChartSpecError("a scatter plot needs two numeric columns")
        x = prefer(numeric)
        y = next(h for h in numeric if h != x)
    elif chart_type == "line":
        x = headers[0]
        y = prefer([h for h in numeric if h != x])
        if y is None:
            raise ChartSpecError("a line chart needs a numeric column; none found")
    else:  # bar: categories with counts/values
        x = prefer(categorical)
        y = prefer(numeric)
        if x is None or y is None:
            raise ChartSpecError(
                "a bar chart needs one categorical and one numeric column; "
                f"found categorical={categorical} numeric={numeric}"
            )

    series = None
    if len(data) <= INLINE_SERIES_CAP:
        if chart_type == "histogram":
            series = [{"x": row} for row in columns[x]]
        else:
            series = [
                {"x": xv, "y": yv}
                for xv, yv in zip(columns[x], columns[y])
            ]
    spec = ChartSpec(
        chart_type=chart_type,
        x=x,
        y=y,
        title=title or request.strip(),
        data_csv=spill_path.name,
        series=series,
    )
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(json.dumps(spec.to_dict(), indent=2), encoding="utf-8")
    return spec


# -- spectrum viewer --------------------------------------------------------------


def spectrum_url(usi_or_csv: Union[str, Path]) -> str:
    """Viewer URL for a USI, or for the first row's ``usi`` column when
    given a CSV path."""
    usi: str
    as_path = Path(usi_or_csv)
    if isinstance(usi_or_csv, Path) or (
        str(usi_or_csv).lower().endswith(".csv") and as_path.is_file()
    ):
        with open(as_path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            fields = reader.fieldnames or []
            usi_col = next((f for f in fields if f.strip().lower() == "usi"), None)
            if usi_col is None:
                raise MetaboqaError(
                    f"CSV {as_path.name} has no 'usi' column (columns: {fields})"
                )
            first = next(iter(reader), None)
            usi = (first or {}).get(usi_col, "") or ""
    else:
        usi = str(usi_or_csv)
    usi = usi.strip()
    if not usi:
        raise MetaboqaError("empty USI")
    return SPECTRUM_URL_TEMPLATE.format(usi=quote(usi, safe=""))
