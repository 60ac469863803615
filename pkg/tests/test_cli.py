import json

from conftest import FIXTURES
from metaboqa.cli import main


def test_eval_run_writes_report_and_records(tmp_path):
    out = tmp_path / "report.json"
    records = tmp_path / "records.jsonl"
    code = main(
        [
            "eval",
            "run",
            "--dataset",
            str(FIXTURES / "eval_dataset.csv"),
            "--config",
            str(FIXTURES / "config.replay.json"),
            "--mode",
            "replay",
            "--out",
            str(out),
            "--records",
            str(records),
            "--artifacts",
            str(tmp_path / "artifacts"),
        ]
    )
    assert code == 0
    report = json.loads(out.read_text())
    assert report["overall"]["total"] == 10
    assert report["overall"]["accuracy_pct"] == 70.0
    lines = [json.loads(line) for line in records.read_text().splitlines()]
    assert len(lines) == 10
    assert {l["verdict"] for l in lines} == {"correct", "incorrect", "not_generated"}


def test_eval_run_exclusion_flag(tmp_path):
    out = tmp_path / "report.json"
    code = main(
        [
            "eval",
            "run",
            "--dataset",
            str(FIXTURES / "eval_dataset.csv"),
            "--config",
            str(FIXTURES / "config.replay.json"),
            "--out",
            str(out),
            "--label",
            "exclusion-demo",
            "--exclude",
            "E05=refinement-store leakage",
            "--artifacts",
            str(tmp_path / "artifacts"),
        ]
    )
    assert code == 0
    report = json.loads(out.read_text())
    assert report["configuration"] == "exclusion-demo"
    assert report["overall"]["excluded"] == 1
    assert report["excluded_questions"] == [
        {"question_id": "E05", "reason": "refinement-store leakage"}
    ]
    # 7 correct of 9 included once the incorrect E05 is excluded
    assert abs(report["overall"]["accuracy_pct"] - 100 * 7 / 9) < 1e-9


def test_bad_dataset_is_a_clean_error(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("question,reference_query,complexity\n")
    code = main(
        [
            "eval",
            "run",
            "--dataset",
            str(bad),
            "--config",
            str(FIXTURES / "config.replay.json"),
            "--out",
            str(tmp_path / "r.json"),
        ]
    )
    assert code == 2
    assert "no rows" in capsys.readouterr().err
