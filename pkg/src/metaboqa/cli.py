"""Command-line entry points: the evaluation harness and the service."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ServiceConfig, build_engine
from .errors import MetaboqaError
from .evalharness import load_dataset, run_evaluation


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="metaboqa")
    commands = parser.add_subparsers(dest="command", required=True)

    eval_parser = commands.add_parser("eval", help="evaluation harness")
    eval_commands = eval_parser.add_subparsers(dest="eval_command", required=True)
    run_parser = eval_commands.add_parser("run", help="run the benchmark")
    run_parser.add_argument("--dataset", required=True, help="questions CSV")
    run_parser.add_argument("--config", required=True, help="service config JSON")
    run_parser.add_argument("--mode", choices=["live", "replay"], help="override config mode")
    run_parser.add_argument("--out", required=True, help="report JSON path")
    run_parser.add_argument("--records", help="per-question JSON-lines path")
    run_parser.add_argument("--artifacts", help="override the artifact root for this run")
    run_parser.add_argument("--label", default="multi-agent", help="configuration label")
    run_parser.add_argument(
        "--single-shot",
        action="store_true",
        help="baseline: one generation prompt, no orchestration",
    )
    run_parser.add_argument(
        "--llm-judge",
        action="store_true",
        help="let the gateway LLM judge when result sets differ",
    )
    run_parser.add_argument(
        "--exclude",
        action="append",
        default=[],
        metavar="QID=REASON",
        help="exclude a question from accuracy denominators",
    )

    serve_parser = commands.add_parser("serve", help="run the HTTP service")
    serve_parser.add_argument("--config", required=True)
    serve_parser.add_argument("--host", default="127.0.0.1")
    serve_parser.add_argument("--port", type=int, default=8000)
    return parser


def _eval_run(args) -> int:
    config = ServiceConfig.from_file(args.config)
    if args.mode:
        config.mode = args.mode
    if args.artifacts:
        config.artifacts_root = args.artifacts
    engine = build_engine(config)
    questions = load_dataset(args.dataset)
    exclusions = {}
    for item in args.exclude:
        qid, _, reason = item.partition("=")
        exclusions[qid.strip()] = reason.strip() or "excluded by flag"

    sink = None
    records_fh = None
    if args.records:
        records_fh = open(args.records, "w", encoding="utf-8")

        def sink(record):
            records_fh.write(json.dumps(record.to_dict()) + "\n")
            records_fh.flush()

    try:
        records, report = run_evaluation(
            questions,
            engine,
            configuration=args.label,
            single_shot=args.single_shot,
            judge_gateway=engine.gateway if args.llm_judge else None,
            judge_model=config.model_ref,
            exclusions=exclusions,
            record_sink=sink,
        )
    finally:
        if records_fh is not None:
            records_fh.close()
    Path(args.out).write_text(report.to_json(), encoding="utf-8")
    print(report.table())
    print(f"report written to {args.out}")
    return 0


def _serve(args) -> int:
    import uvicorn

    from .service import create_app

    config = ServiceConfig.from_file(args.config)
    engine = build_engine(config)
    app = create_app(engine, config)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "eval":
            return _eval_run(args)
        return _serve(args)
    except MetaboqaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
