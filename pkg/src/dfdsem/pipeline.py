"""End-to-end driver: parse -> build -> lower -> materialize -> patterns,
with per-file artifact output and optional corpus evaluation.

Artifacts per input (stem of the compose file name):
  <stem>.model     depersonalized diagram (YAML)
  <stem>.explicit  explicit fact graph (Turtle subset)
  <stem>.reasoned  materialized graph
  <stem>.dot       renderable graph
  <stem>.report    pattern matches (JSON)
Plus, when labels are supplied: evaluation.txt / evaluation.json.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .compose import parse_compose
from .dfd import DfdModel, IdGenerator, build_model
from .evaluation import EvalRow, LabelSet, default_mappings, evaluate_corpus, format_table, load_labels
from .graph import KnowledgeGraph, lower
from .patterns import MatchRow, PatternQuery, PatternReport, Variable, builtin_catalog, run_catalog
from .reasoner import (
    Rule,
    builtin_threat_templates,
    default_rules,
    materialize,
    parse_templates,
    template_rules,
)
from .serialize import _term_from_qname, export_dot, export_graph, export_model
from .taxonomy import Taxonomy, load_default_taxonomy, load_taxonomy

logger = logging.getLogger(__name__)

ALL_FORMATS = ("model", "explicit", "reasoned", "dot", "report")


class PipelineError(ValueError):
    """Fatal configuration problem (taxonomy, patterns, output dir)."""


@dataclass
class PipelineConfig:
    inputs: list[Path]
    output_dir: Path
    taxonomy_path: Path | None = None
    seed: int | None = None
    pattern_ids: list[str] | None = None  # None = whole catalog
    labels_path: Path | None = None
    formats: tuple[str, ...] = ALL_FORMATS
    templates_path: Path | None = None  # extra threat templates for reasoning
    use_builtin_templates: bool = False


@dataclass
class FileOutcome:
    input_path: Path
    diagram_id: str
    error: str | None = None
    report: PatternReport | None = None
    artifacts: list[Path] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class PipelineResult:
    outcomes: list[FileOutcome] = field(default_factory=list)
    eval_rows: list[EvalRow] | None = None

    @property
    def exit_code(self) -> int:
        return 0 if all(outcome.ok for outcome in self.outcomes) else 1


def load_config_taxonomy(taxonomy_path: Path | None) -> Taxonomy:
    if taxonomy_path is None:
        return load_default_taxonomy()
    try:
        return load_taxonomy(taxonomy_path.read_text("utf-8"))
    except OSError as exc:
        raise PipelineError(f"cannot read taxonomy {taxonomy_path}: {exc}") from exc
    except ValueError as exc:
        raise PipelineError(f"invalid taxonomy {taxonomy_path}: {exc}") from exc


def select_patterns(pattern_ids: list[str] | None) -> list[PatternQuery]:
    catalog = builtin_catalog()
    if pattern_ids is None:
        return catalog
    by_id = {q.id: q for q in catalog}
    unknown = [pid for pid in pattern_ids if pid not in by_id]
    if unknown:
        raise PipelineError(f"unknown pattern ids: {', '.join(unknown)}")
    return [by_id[pid] for pid in pattern_ids]


def collect_inputs(inputs: list[Path]) -> list[Path]:
    """Expand directories into their compose files, sorted by name."""
    files: list[Path] = []
    for path in inputs:
        if path.is_dir():
            files.extend(sorted(p for p in path.iterdir()
                                if p.suffix in (".yml", ".yaml") and p.is_file()))
        elif path.exists():
            files.append(path)
        else:
            raise PipelineError(f"input not found: {path}")
    if not files:
        raise PipelineError("no input files")
    return files


def _reasoning_rules(cfg: PipelineConfig) -> list[Rule]:
    rules = default_rules()
    templates = []
    if cfg.use_builtin_templates:
        templates.extend(builtin_threat_templates())
    if cfg.templates_path is not None:
        try:
            templates.extend(parse_templates(cfg.templates_path.read_text("utf-8")))
        except OSError as exc:
            raise PipelineError(f"cannot read templates {cfg.templates_path}: {exc}") from exc
        except ValueError as exc:
            raise PipelineError(f"invalid templates {cfg.templates_path}: {exc}") from exc
    rules.extend(template_rules(templates))
    return rules


def process_document(
    text: str,
    diagram_id: str,
    tax: Taxonomy,
    rules: list[Rule],
    catalog: list[PatternQuery],
    seed: int | None = None,
) -> tuple[DfdModel, KnowledgeGraph, KnowledgeGraph, PatternReport]:
    """Run the per-diagram stages; returns (model, explicit, reasoned, report)."""
    compose = parse_compose(text)
    model = build_model(compose, tax, IdGenerator(seed))
    explicit = lower(model, tax)
    reasoned = materialize(explicit, rules)
    report = run_catalog(reasoned, diagram_id, catalog)
    return model, explicit, reasoned, report


def report_to_json(report: PatternReport, catalog: list[PatternQuery]) -> dict:
    titles = {q.id: q.title for q in catalog}
    return {
        "diagram_id": report.diagram_id,
        "matched": report.matched_ids(),
        "patterns": [
            {
                "pattern_id": pid,
                "title": titles.get(pid, ""),
                "row_count": len(rows),
                "rows": [row.as_dict() for row in rows],
            }
            for pid, rows in report.matches.items()
        ],
    }


def report_from_json(doc: dict) -> PatternReport:
    """Rebuild the detection facts needed for evaluation (row contents are
    kept as binding maps; evaluation only needs row presence)."""
    report = PatternReport(diagram_id=doc["diagram_id"])
    for entry in doc.get("patterns", []):
        rows = []
        for row in entry.get("rows", []):
            bindings = tuple(
                (Variable(name.lstrip("?")), _term_from_qname(value))
                for name, value in row.items()
            )
            rows.append(MatchRow(bindings))
        report.matches[entry["pattern_id"]] = rows
    return report


def run_pipeline(cfg: PipelineConfig) -> PipelineResult:
    tax = load_config_taxonomy(cfg.taxonomy_path)
    catalog = select_patterns(cfg.pattern_ids)
    rules = _reasoning_rules(cfg)
    files = collect_inputs(cfg.inputs)
    bad_formats = set(cfg.formats) - set(ALL_FORMATS)
    if bad_formats:
        raise PipelineError(f"unknown export formats: {', '.join(sorted(bad_formats))}")
    try:
        cfg.output_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise PipelineError(f"cannot create output dir {cfg.output_dir}: {exc}") from exc

    result = PipelineResult()
    for path in files:
        diagram_id = path.stem
        outcome = FileOutcome(input_path=path, diagram_id=diagram_id)
        result.outcomes.append(outcome)
        try:
            text = path.read_text("utf-8")
            model, explicit, reasoned, report = process_document(
                text, diagram_id, tax, rules, catalog, cfg.seed
            )
        except Exception as exc:  # per-file: record and continue
            outcome.error = str(exc)
            logger.error("%s: %s", path, exc)
            continue
        outcome.report = report
        local_iri = f"urn:dfd:{diagram_id}#"
        artifacts = {
            "model": lambda: export_model(model),
            "explicit": lambda: export_graph(explicit, reasoned=False, local_iri=local_iri),
            "reasoned": lambda: export_graph(reasoned, reasoned=True, local_iri=local_iri),
            "dot": lambda: export_dot(model),
            "report": lambda: json.dumps(report_to_json(report, catalog), indent=2) + "\n",
        }
        for fmt in cfg.formats:
            out_path = cfg.output_dir / f"{diagram_id}.{fmt}"
            out_path.write_text(artifacts[fmt](), encoding="utf-8")
            outcome.artifacts.append(out_path)

    if cfg.labels_path is not None:
        labels = _load_labels_file(cfg.labels_path)
        reports = [o.report for o in result.outcomes if o.report is not None]
        result.eval_rows = evaluate_corpus(reports, labels, default_mappings())
        table = format_table(result.eval_rows)
        (cfg.output_dir / "evaluation.txt").write_text(table, encoding="utf-8")
        (cfg.output_dir / "evaluation.json").write_text(
            json.dumps([row.as_dict() for row in result.eval_rows], indent=2) + "\n",
            encoding="utf-8",
        )
    return result


def _load_labels_file(path: Path) -> LabelSet:
    try:
        return load_labels(path.read_text("utf-8"))
    except OSError as exc:
        raise PipelineError(f"cannot read labels {path}: {exc}") from exc
    except ValueError as exc:
        raise PipelineError(f"invalid labels {path}: {exc}") from exc
