"""Command-line interface.

Subcommands mirror the pipeline stages:
  build    compose file(s)/dir -> all diagram representations + report
  analyze  exported graph file(s) -> pattern report
  eval     pattern reports + label file -> recognition metrics
  render   model document -> dot
  serve    run the HTTP service
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .evaluation import default_mappings, evaluate_corpus, format_table, load_labels
from .patterns import builtin_catalog, run_catalog
from .pipeline import (
    ALL_FORMATS,
    PipelineConfig,
    PipelineError,
    report_from_json,
    report_to_json,
    run_pipeline,
    select_patterns,
)
from .reasoner import materialize
from .serialize import export_dot, parse_graph, parse_model

logger = logging.getLogger(__name__)


def _add_common_build_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("-t", "--taxonomy", type=Path, default=None,
                        help="domain dictionary file (default: bundled starter)")
    parser.add_argument("-o", "--output-dir", type=Path, required=True)
    parser.add_argument("--patterns", default="all",
                        help="comma-separated pattern ids, or 'all'")


def _pattern_ids(arg: str) -> list[str] | None:
    if arg.strip().lower() == "all":
        return None
    return [pid.strip() for pid in arg.split(",") if pid.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dfdsem",
        description="Semantic data-flow diagrams and security patterns "
                    "from container orchestration configs.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_build = sub.add_parser("build", help="compose files -> diagrams, graphs, reports")
    _add_common_build_flags(p_build)
    p_build.add_argument("--seed", type=int, default=None,
                         help="fix UUID generation for reproducible output")
    p_build.add_argument("--labels", type=Path, default=None,
                         help="label file; also emits the evaluation table")
    p_build.add_argument("--formats", default=",".join(ALL_FORMATS),
                         help=f"comma-separated subset of {','.join(ALL_FORMATS)}")
    p_build.add_argument("--templates", default=None,
                         help="threat-template catalog file, or 'builtin'")
    p_build.add_argument("inputs", nargs="+", type=Path,
                         help="compose files or directories of them")

    p_analyze = sub.add_parser("analyze", help="exported graphs -> pattern reports")
    _add_common_build_flags(p_analyze)
    p_analyze.add_argument("inputs", nargs="+", type=Path,
                           help="graph files (.explicit or .reasoned)")

    p_eval = sub.add_parser("eval", help="pattern reports + labels -> metrics")
    p_eval.add_argument("--labels", type=Path, required=True)
    p_eval.add_argument("-o", "--output-dir", type=Path, default=None)
    p_eval.add_argument("inputs", nargs="+", type=Path,
                        help="report files or directories of .report files")

    p_render = sub.add_parser("render", help="model documents -> dot")
    p_render.add_argument("-o", "--output-dir", type=Path, required=True)
    p_render.add_argument("inputs", nargs="+", type=Path)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)

    return parser


def _cmd_build(args: argparse.Namespace) -> int:
    templates_path = None
    use_builtin = False
    if args.templates is not None:
        if args.templates == "builtin":
            use_builtin = True
        else:
            templates_path = Path(args.templates)
    cfg = PipelineConfig(
        inputs=list(args.inputs),
        output_dir=args.output_dir,
        taxonomy_path=args.taxonomy,
        seed=args.seed,
        pattern_ids=_pattern_ids(args.patterns),
        labels_path=args.labels,
        formats=tuple(f.strip() for f in args.formats.split(",") if f.strip()),
        templates_path=templates_path,
        use_builtin_templates=use_builtin,
    )
    result = run_pipeline(cfg)
    for outcome in result.outcomes:
        if outcome.ok:
            matched = ", ".join(outcome.report.matched_ids()) or "none"
            print(f"{outcome.input_path}: ok (patterns: {matched})")
        else:
            print(f"{outcome.input_path}: ERROR {outcome.error}", file=sys.stderr)
    if result.eval_rows is not None:
        print()
        print(format_table(result.eval_rows), end="")
    return result.exit_code


def _collect(inputs: list[Path], suffixes: tuple[str, ...]) -> list[Path]:
    files: list[Path] = []
    for path in inputs:
        if path.is_dir():
            files.extend(sorted(p for p in path.iterdir() if p.suffix in suffixes))
        else:
            files.append(path)
    return files


def _cmd_analyze(args: argparse.Namespace) -> int:
    catalog = select_patterns(_pattern_ids(args.patterns))
    args.output_dir.mkdir(parents=True, exist_ok=True)
    failed = False
    for path in _collect(args.inputs, (".explicit", ".reasoned")):
        try:
            graph = parse_graph(path.read_text("utf-8"))
            # Idempotent on already-reasoned input; completes explicit input.
            reasoned = materialize(graph)
            report = run_catalog(reasoned, path.stem, catalog)
        except Exception as exc:
            print(f"{path}: ERROR {exc}", file=sys.stderr)
            failed = True
            continue
        out_path = args.output_dir / f"{path.stem}.report"
        out_path.write_text(
            json.dumps(report_to_json(report, catalog), indent=2) + "\n", "utf-8"
        )
        matched = ", ".join(report.matched_ids()) or "none"
        print(f"{path}: ok (patterns: {matched})")
    return 1 if failed else 0


def _cmd_eval(args: argparse.Namespace) -> int:
    labels = load_labels(args.labels.read_text("utf-8"))
    reports = []
    for path in _collect(args.inputs, (".report",)):
        reports.append(report_from_json(json.loads(path.read_text("utf-8"))))
    rows = evaluate_corpus(reports, labels, default_mappings())
    table = format_table(rows)
    print(table, end="")
    if args.output_dir is not None:
        args.output_dir.mkdir(parents=True, exist_ok=True)
        (args.output_dir / "evaluation.txt").write_text(table, "utf-8")
        (args.output_dir / "evaluation.json").write_text(
            json.dumps([row.as_dict() for row in rows], indent=2) + "\n", "utf-8"
        )
    return 0


def _cmd_render(args: argparse.Namespace) -> int:
    args.output_dir.mkdir(parents=True, exist_ok=True)
    failed = False
    for path in _collect(args.inputs, (".model", ".yml", ".yaml")):
        try:
            model = parse_model(path.read_text("utf-8"))
        except Exception as exc:
            print(f"{path}: ERROR {exc}", file=sys.stderr)
            failed = True
            continue
        out_path = args.output_dir / f"{path.stem}.dot"
        out_path.write_text(export_dot(model), "utf-8")
        print(f"{path}: ok -> {out_path}")
    return 1 if failed else 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .api import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


class _DedupFilter(logging.Filter):
    """Console-side dedup: corpus runs repeat the same per-pattern
    warnings for every diagram; show each distinct message once."""

    def __init__(self) -> None:
        super().__init__()
        self._seen: set[tuple[str, int, str]] = set()

    def filter(self, record: logging.LogRecord) -> bool:
        key = (record.name, record.levelno, record.getMessage())
        if key in self._seen:
            return False
        self._seen.add(key)
        return True


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )
    if not args.verbose:
        for handler in logging.getLogger().handlers:
            handler.addFilter(_DedupFilter())
    handlers = {
        "build": _cmd_build,
        "analyze": _cmd_analyze,
        "eval": _cmd_eval,
        "render": _cmd_render,
        "serve": _cmd_serve,
    }
    try:
        return handlers[args.command](args)
    except (PipelineError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
