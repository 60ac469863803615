import json
from urllib.parse import quote

import pytest

from conftest import scripted_gateway
from metaboqa.errors import ArtifactSecurityError, ChartSpecError, MetaboqaError
from metaboqa.interp import (
    ChartSpec,
    analyze_file,
    build_results_context,
    make_chart_spec,
    spectrum_url,
    summarize_results,
)

MGF_SEVEN = "".join(
    f"BEGIN IONS\nTITLE=spec{i}\nPEPMASS=100.{i}\n150.1 3.2\nEND IONS\n" for i in range(7)
)


# -- analyze_file -------------------------------------------------------------


def test_csv_summary(tmp_path):
    f = tmp_path / "table.csv"
    rows = "\n".join(f"r{i},{i},{i * 2},x" for i in range(10))
    f.write_text("name,a,b,c\n" + rows + "\n")
    summary = analyze_file(f, tmp_path)
    assert summary.kind == "spreadsheet"
    assert summary.details["rows"] == 10
    assert summary.details["columns"] == 4
    assert summary.details["headers"] == ["name", "a", "b", "c"]
    assert len(summary.details["sample_rows"]) == 5


def test_mgf_spectrum_count(tmp_path):
    f = tmp_path / "spectra.mgf"
    f.write_text(MGF_SEVEN)
    summary = analyze_file(f, tmp_path)
    assert summary.kind == "mgf"
    assert summary.details["spectrum_count"] == 7
    assert summary.warnings == []


def test_mgf_mismatch_warns_with_both_counts(tmp_path):
    f = tmp_path / "broken.mgf"
    f.write_text(MGF_SEVEN + "BEGIN IONS\n100 1\n")  # 8 begins, 7 ends
    summary = analyze_file(f, tmp_path)
    assert summary.details["spectrum_count"] == 8
    assert summary.warnings and "8" in summary.warnings[0] and "7" in summary.warnings[0]


def test_empty_text_file(tmp_path):
    f = tmp_path / "empty.txt"
    f.write_text("")
    summary = analyze_file(f, tmp_path)
    assert summary.kind == "text"
    assert summary.details["line_count"] == 0


def test_content_sniff_detects_mgf_without_extension(tmp_path):
    f = tmp_path / "upload.dat"
    f.write_text(MGF_SEVEN)
    assert analyze_file(f, tmp_path).kind == "mgf"


def test_path_escape_is_security_error(tmp_path):
    outside = tmp_path.parent / "secret.txt"
    outside.write_text("x")
    session_dir = tmp_path / "session"
    session_dir.mkdir()
    with pytest.raises(ArtifactSecurityError):
        analyze_file("../secret.txt", session_dir)


def test_unreadable_is_io_error(tmp_path):
    with pytest.raises(MetaboqaError, match="cannot read"):
        analyze_file(tmp_path / "absent.csv", tmp_path)


# -- results context / summaries --------------------------------------------------


def test_small_results_are_inlined(tmp_path):
    spill = tmp_path / "r.csv"
    spill.write_text("extract,count\nA,3\nB,1\n")
    ctx = build_results_context("SELECT", "which extracts?", spill)
    assert ctx.inlined
    assert "A,3" in ctx.block
    assert ctx.row_count == 2


def test_oversize_results_expose_only_metadata(tmp_path):
    spill = tmp_path / "r.csv"
    spill.write_text("value\n" + "\n".join("x" * 60 for _ in range(400)))
    ctx = build_results_context("q" * 17900, "question", spill)
    assert not ctx.inlined
    assert "x" * 60 not in ctx.block
    assert "r.csv" in ctx.block
    assert str(ctx.row_count) in ctx.block


def test_missing_spill_is_io_error(tmp_path):
    with pytest.raises(MetaboqaError):
        build_results_context("q", "q", tmp_path / "gone.csv")


def test_summarize_prompt_carries_rows_when_within_budget(tmp_path, prompts):
    spill = tmp_path / "r.csv"
    spill.write_text("extract,count\nVGF_tc_pos,2\nVGF_mh_pos,1\n")
    gateway = scripted_gateway([("results interpreter", "Two extracts match.")])
    text, ctx = summarize_results(
        spill, "Which extracts?", "SELECT ...", gateway, "m", prompts
    )
    assert text == "Two extracts match."
    prompt = gateway.provider.requests_seen[0].messages[0].text
    assert "VGF_tc_pos,2" in prompt
    assert "Which extracts?" in prompt


# -- chart specs ---------------------------------------------------------------------


def test_distribution_request_maps_to_bar(tmp_path):
    spill = tmp_path / "r.csv"
    spill.write_text("extract,count\nA,3\nB,1\nC,2\n")
    spec = make_chart_spec(
        spill, "distribution plot for the count of features", tmp_path / "chart.json"
    )
    assert spec.chart_type == "bar"
    assert spec.x == "extract"
    assert spec.y == "count"
    assert len(spec.series) == 3


def test_single_numeric_column_histogram(tmp_path):
    spill = tmp_path / "r.csv"
    spill.write_text("score\n0.1\n0.5\n0.9\n")
    spec = make_chart_spec(spill, "histogram", tmp_path / "chart.json")
    assert spec.chart_type == "histogram"
    assert spec.x == "score"


def test_text_only_scatter_is_explained(tmp_path):
    spill = tmp_path / "r.csv"
    spill.write_text("name,label\na,x\nb,y\n")
    out = tmp_path / "chart.json"
    with pytest.raises(ChartSpecError, match="numeric"):
        make_chart_spec(spill, "scatter plot", out)
    assert not out.exists()


def test_chart_spec_round_trips(tmp_path):
    spill = tmp_path / "r.csv"
    spill.write_text("extract,count\nA,3\n")
    out = tmp_path / "chart.json"
    spec = make_chart_spec(spill, "bar chart of count per extract", out)
    loaded = ChartSpec.from_dict(json.loads(out.read_text()))
    assert loaded == spec
    assert loaded.spec_version == 1


def test_chart_columns_validated_against_header(tmp_path):
    spill = tmp_path / "r.csv"
    spill.write_text("extract,count\nA,3\n")
    spec = make_chart_spec(spill, "bar count by extract", tmp_path / "c.json")
    assert spec.x in ("extract",)
    assert spec.y in ("count",)


from hypothesis import given, strategies as st


@given(
    chart_type=st.sampled_from(["bar", "histogram", "scatter", "line"]),
    x=st.text(alphabet="abcxyz_", min_size=1, max_size=12),
    y=st.one_of(st.none(), st.text(alphabet="abcxyz_", min_size=1, max_size=12)),
    title=st.text(max_size=40),
    n=st.integers(min_value=0, max_value=8),
)
def test_chart_spec_round_trip_property(chart_type, x, y, title, n):
    spec = ChartSpec(
        chart_type=chart_type,
        x=x,
        y=y,
        title=title,
        data_csv="r.csv",
        series=[{"x": str(i), "y": str(i * 2)} for i in range(n)] or None,
    )
    assert ChartSpec.from_dict(json.loads(json.dumps(spec.to_dict()))) == spec


# -- spectrum URLs ---------------------------------------------------------------------


def test_spectrum_url_percent_encodes():
    url = spectrum_url("mzspec:GNPS:TASK-abc:scan:1")
    assert url == (
        "https://metabolomics-usi.gnps2.org/dashinterface/"
        "?usi1=mzspec%3AGNPS%3ATASK-abc%3Ascan%3A1"
    )


def test_spectrum_url_from_csv_first_row(tmp_path):
    f = tmp_path / "usis.csv"
    f.write_text("usi,label\nmzspec:GNPS:T1:scan:7,first\nmzspec:GNPS:T2:scan:9,second\n")
    url = spectrum_url(f)
    assert url.endswith(quote("mzspec:GNPS:T1:scan:7", safe=""))


def test_spectrum_url_csv_without_usi_column(tmp_path):
    f = tmp_path / "bad.csv"
    f.write_text("id,label\n1,a\n")
    with pytest.raises(MetaboqaError, match="columns"):
        spectrum_url(f)


def test_spectrum_url_empty_is_error():
    with pytest.raises(MetaboqaError, match="empty"):
        spectrum_url("   ")


def test_spectrum_url_no_raw_colons_in_value():
    url = spectrum_url("mzspec:a:b:c")
    query_value = url.split("usi1=", 1)[1]
    assert ":" not in query_value
