"""Recognition quality against the manual diagram labels.

Diagrams carry up to five taxonomy criteria (1 web app, 2 composite web
app, 3 data collecting, 4 data visualizing, 5 complex data processing).
Each criterion group is mapped to a group of patterns; a diagram counts
as detected when any pattern of the group matched. Precision and recall
are computed per mapping, diagram-wise.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction

from .patterns import PatternReport

logger = logging.getLogger(__name__)

VALID_CRITERIA = frozenset({1, 2, 3, 4, 5})

# (criterion, excluded criteria): labeling rules enforced on load.
_EXCLUSIONS = ((2, frozenset({1})), (5, frozenset({3, 4})))


class LabelError(ValueError):
    """Malformed or inconsistent label file."""


@dataclass
class LabelSet:
    labels: dict[str, set[int]]

    def criteria_for(self, diagram_id: str) -> set[int]:
        return self.labels.get(diagram_id, set())


def load_labels(text: str) -> LabelSet:
    """Parse a label file: one ``diagram_id,criteria...`` record per line.

    Criteria are space-separated integers after the comma; an empty tail
    marks an explicitly unclassified diagram. Blank lines and ``#``
    comments are skipped.
    """
    labels: dict[str, set[int]] = {}
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "," not in line:
            raise LabelError(f"line {line_no}: expected 'diagram_id,criteria'")
        diagram_id, _, tail = line.partition(",")
        diagram_id = diagram_id.strip()
        if not diagram_id:
            raise LabelError(f"line {line_no}: empty diagram id")
        if diagram_id in labels:
            raise LabelError(f"line {line_no}: duplicate record for {diagram_id!r}")
        criteria: set[int] = set()
        for token in tail.split():
            try:
                criterion = int(token)
            except ValueError:
                raise LabelError(
                    f"line {line_no}: criterion {token!r} is not a number"
                ) from None
            if criterion not in VALID_CRITERIA:
                raise LabelError(f"line {line_no}: unknown criterion {criterion}")
            criteria.add(criterion)
        for criterion, excluded in _EXCLUSIONS:
            if criterion in criteria and criteria & excluded:
                raise LabelError(
                    f"{diagram_id}: criterion {criterion} excludes "
                    f"{sorted(criteria & excluded)}"
                )
        labels[diagram_id] = criteria
    return LabelSet(labels)


@dataclass(frozen=True)
class CriterionMapping:
    criteria_group: frozenset[int]
    pattern_group: frozenset[str]
    description: str = ""

    def label(self) -> str:
        if self.description:
            return self.description
        criteria = "+".join(str(c) for c in sorted(self.criteria_group))
        patterns = "+".join(sorted(self.pattern_group))
        return f"criteria {criteria} via {patterns}"


def default_mappings() -> list[CriterionMapping]:
    return [
        CriterionMapping(frozenset({1, 2}), frozenset({"3-2", "3-3"}),
                         "Web Application + Composite Web Application"),
        CriterionMapping(frozenset({2}), frozenset({"3-4"}),
                         "Composite Web Application"),
        CriterionMapping(frozenset({3, 5}), frozenset({"4-1"}),
                         "Data collecting + Complex data processing"),
        CriterionMapping(frozenset({4, 5}), frozenset({"4-2"}),
                         "Data visualizing + Complex data processing"),
        CriterionMapping(frozenset({5}), frozenset({"4-3"}),
                         "Complex data processing"),
    ]


@dataclass
class EvalRow:
    mapping: CriterionMapping
    total_criteria: int
    detected: int
    positive: int
    false_positive: int
    false_negative: int
    precision: Fraction | None  # None = N/A
    recall: Fraction | None

    @property
    def precision_str(self) -> str:
        return _format_ratio(self.precision)

    @property
    def recall_str(self) -> str:
        return _format_ratio(self.recall)

    def as_dict(self) -> dict:
        return {
            "criteria": sorted(self.mapping.criteria_group),
            "patterns": sorted(self.mapping.pattern_group),
            "description": self.mapping.description,
            "total_criteria": self.total_criteria,
            "detected": self.detected,
            "positive": self.positive,
            "false_positive": self.false_positive,
            "false_negative": self.false_negative,
            "precision": self.precision_str,
            "recall": self.recall_str,
        }


def _format_ratio(value: Fraction | None) -> str:
    if value is None:
        return "N/A"
    decimal = Decimal(value.numerator) / Decimal(value.denominator)
    return str(decimal.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def metric_row(mapping: CriterionMapping, total: int, detected: int, positive: int) -> EvalRow:
    """Assemble one row from its three base counts."""
    return EvalRow(
        mapping=mapping,
        total_criteria=total,
        detected=detected,
        positive=positive,
        false_positive=detected - positive,
        false_negative=total - positive,
        precision=Fraction(positive, detected) if detected > 0 else None,
        recall=Fraction(positive, total) if total > 0 else None,
    )


def evaluate_corpus(
    reports: list[PatternReport],
    labels: LabelSet,
    mappings: list[CriterionMapping] | None = None,
) -> list[EvalRow]:
    """Count, per mapping and over the analyzed diagrams: labeled
    (total), detected, and their intersection (positive)."""
    if mappings is None:
        mappings = default_mappings()
    for report in reports:
        if report.diagram_id not in labels.labels:
            logger.warning(
                "diagram %s has no label record; treated as unclassified",
                report.diagram_id,
            )

    rows = []
    for mapping in mappings:
        total = 0
        detected = 0
        positive = 0
        for report in reports:
            labeled = bool(labels.criteria_for(report.diagram_id) & mapping.criteria_group)
            hit = any(report.matches.get(pid) for pid in mapping.pattern_group)
            total += labeled
            detected += hit
            positive += labeled and hit
        rows.append(metric_row(mapping, total, detected, positive))
    return rows


_COLUMNS = (
    ("Criteria", lambda r: r.mapping.description or
     "+".join(str(c) for c in sorted(r.mapping.criteria_group))),
    ("Patterns", lambda r: " ".join(sorted(r.mapping.pattern_group))),
    ("Total criteria", lambda r: str(r.total_criteria)),
    ("Detected patterns", lambda r: str(r.detected)),
    ("Positive", lambda r: str(r.positive)),
    ("False Positive", lambda r: str(r.false_positive)),
    ("False Negative", lambda r: str(r.false_negative)),
    ("Precision", lambda r: r.precision_str),
    ("Recall", lambda r: r.recall_str),
)


def format_table(rows: list[EvalRow]) -> str:
    """Aligned text table with one line per mapping."""
    cells = [[header for header, _ in _COLUMNS]]
    for row in rows:
        cells.append([extract(row) for _, extract in _COLUMNS])
    widths = [max(len(line[i]) for line in cells) for i in range(len(_COLUMNS))]
    lines = []
    for line_no, line in enumerate(cells):
        lines.append("  ".join(cell.ljust(width) for cell, width in zip(line, widths)).rstrip())
        if line_no == 0:
            lines.append("  ".join("-" * width for width in widths))
    return "\n".join(lines) + "\n"
