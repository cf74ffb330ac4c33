"""HTTP service for single-diagram analysis.

Wraps the per-document pipeline: POST a compose document, get back the
depersonalized model, both fact graphs, a dot rendering, and the pattern
report. Corpus/evaluation workflows stay on the CLI, which talks to the
package directly.
"""
from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from .patterns import builtin_catalog, run_catalog
from .pipeline import process_document, report_to_json
from .reasoner import default_rules, materialize
from .serialize import SerializeError, export_dot, export_graph, export_model, parse_graph
from .taxonomy import load_default_taxonomy, load_taxonomy

app = FastAPI(
    title="dfdsem",
    version=__version__,
    description="Semantic data-flow diagrams and security-pattern "
                "recognition for container orchestration configs.",
)

_DEFAULT_TAXONOMY = load_default_taxonomy()


class BuildRequest(BaseModel):
    compose: str = Field(description="compose document text")
    diagram_id: str = "diagram"
    seed: int | None = Field(default=None, description="fix UUIDs for reproducible output")
    taxonomy: str | None = Field(default=None, description="custom services.yml text")


class PatternRows(BaseModel):
    pattern_id: str
    title: str
    row_count: int
    rows: list[dict[str, str]]


class ReportBody(BaseModel):
    diagram_id: str
    matched: list[str]
    patterns: list[PatternRows]


class BuildResponse(BaseModel):
    diagram_id: str
    model_yaml: str
    explicit_graph: str
    reasoned_graph: str
    dot: str
    report: ReportBody


class AnalyzeRequest(BaseModel):
    graph: str = Field(description="exported graph text (explicit or reasoned)")
    diagram_id: str = "diagram"


class AnalyzeResponse(BaseModel):
    diagram_id: str
    report: ReportBody


class PatternInfo(BaseModel):
    pattern_id: str
    group: str
    title: str
    threat_note: str


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.get("/patterns", response_model=list[PatternInfo])
def patterns() -> list[PatternInfo]:
    return [
        PatternInfo(pattern_id=q.id, group=q.group.value, title=q.title,
                    threat_note=q.threat_note)
        for q in builtin_catalog()
    ]


@app.post("/build", response_model=BuildResponse)
def build(request: BuildRequest) -> BuildResponse:
    tax = _DEFAULT_TAXONOMY
    if request.taxonomy is not None:
        try:
            tax = load_taxonomy(request.taxonomy)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=f"taxonomy: {exc}") from exc
    catalog = builtin_catalog()
    try:
        model, explicit, reasoned, report = process_document(
            request.compose, request.diagram_id, tax,
            default_rules(), catalog, request.seed,
        )
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    local_iri = f"urn:dfd:{request.diagram_id}#"
    return BuildResponse(
        diagram_id=request.diagram_id,
        model_yaml=export_model(model),
        explicit_graph=export_graph(explicit, reasoned=False, local_iri=local_iri),
        reasoned_graph=export_graph(reasoned, reasoned=True, local_iri=local_iri),
        dot=export_dot(model),
        report=ReportBody(**report_to_json(report, catalog)),
    )


@app.post("/analyze", response_model=AnalyzeResponse)
def analyze(request: AnalyzeRequest) -> AnalyzeResponse:
    catalog = builtin_catalog()
    try:
        graph = parse_graph(request.graph)
    except SerializeError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    reasoned = materialize(graph)
    report = run_catalog(reasoned, request.diagram_id, catalog)
    return AnalyzeResponse(
        diagram_id=request.diagram_id,
        report=ReportBody(**report_to_json(report, catalog)),
    )
