"""Serializers for the three diagram representations plus a renderable
graph format.

- model documents: YAML, the depersonalized stencil/flow layout
- fact graphs: a Turtle-subset, one triple per line, sorted
- dot: directed graph for rendering
"""
from __future__ import annotations

import re

import yaml

from .dfd import DfdModel, Flow, Stencil, StencilKind, validate_model
from .graph import (
    BASE_MODEL_IRI,
    KnowledgeGraph,
    Namespace,
    OWL_INVERSE_OF,
    OWL_SYMMETRIC_PROPERTY,
    PropertyAxiomKind,
    RDF_TYPE,
    RDFS_SUBCLASS_OF,
    Term,
    bm,
    builtin,
    inverse_of,
    local,
    symmetric,
)

RDF_IRI = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
RDFS_IRI = "http://www.w3.org/2000/01/rdf-schema#"
OWL_IRI = "http://www.w3.org/2002/07/owl#"
DEFAULT_LOCAL_IRI = "urn:dfd:diagram#"

# owl:Thing / owl:NamedIndividual style typing is a serialization artifact
# and is dropped on import.
_ARTIFACT_TYPES = {"owl:Thing", "owl:NamedIndividual", "owl:Class",
                   "owl:ObjectProperty"}


class SerializeError(ValueError):
    """Unparseable exported document."""


# --- model documents ---------------------------------------------------------

def _stencil_doc(stencil: Stencil) -> dict:
    return {
        "name": stencil.name,
        "realName": None,
        "model": stencil.model,
        "id": stencil.id,
        "labels": list(stencil.labels) or None,
    }


def _flow_doc(flow: Flow, by_id: dict[str, Stencil]) -> dict:
    return {
        "name": flow.name,
        "model": flow.model,
        "realPortMapping": None,
        "id": flow.id,
        "localPort": None,
        "source": {"name": by_id[flow.source_id].name, "id": flow.source_id},
        "target": {"name": by_id[flow.target_id].name, "id": flow.target_id},
        "labels": list(flow.labels) or None,
        "realStorageMappings": None,
    }


def export_model(model: DfdModel) -> str:
    by_id = {s.id: s for s in model.stencils()}
    doc = {
        "processes": [_stencil_doc(s) for s in model.processes],
        "storages": [_stencil_doc(s) for s in model.storages],
        "externals": [_stencil_doc(s) for s in model.externals],
        "flows": [_flow_doc(f, by_id) for f in model.flows],
    }
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=False)


def parse_model(text: str) -> DfdModel:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise SerializeError(f"malformed model document: {exc}") from exc
    if not isinstance(doc, dict):
        raise SerializeError("model document must be a mapping")

    def stencils(section: str, kind: StencilKind) -> list[Stencil]:
        out = []
        for item in doc.get(section) or []:
            try:
                out.append(Stencil(
                    name=item["name"],
                    kind=kind,
                    model=item["model"],
                    labels=list(item.get("labels") or []),
                    id=item["id"],
                ))
            except (TypeError, KeyError) as exc:
                raise SerializeError(f"bad {section} entry: {item!r}") from exc
        return out

    model = DfdModel(
        processes=stencils("processes", StencilKind.PROCESS),
        storages=stencils("storages", StencilKind.DATA_STORE),
        externals=stencils("externals", StencilKind.EXTERNAL_ENTITY),
    )
    for item in doc.get("flows") or []:
        try:
            model.flows.append(Flow(
                name=item["name"],
                model=item["model"],
                labels=list(item.get("labels") or []),
                source_id=item["source"]["id"],
                target_id=item["target"]["id"],
                id=item["id"],
            ))
        except (TypeError, KeyError) as exc:
            raise SerializeError(f"bad flow entry: {item!r}") from exc
    validate_model(model)
    return model


# --- fact graphs -------------------------------------------------------------

def export_graph(g: KnowledgeGraph, reasoned: bool = False,
                 local_iri: str = DEFAULT_LOCAL_IRI) -> str:
    lines = [
        f"# {'reasoned (materialized)' if reasoned else 'explicit'} knowledge",
        f"@prefix rdf: <{RDF_IRI}> .",
        f"@prefix rdfs: <{RDFS_IRI}> .",
        f"@prefix owl: <{OWL_IRI}> .",
        f"@prefix bm: <{BASE_MODEL_IRI}> .",
        f"@prefix : <{local_iri}> .",
        "",
    ]
    statements = []
    for sub, sup in g.subclass_axioms:
        statements.append((sub.qualified, RDFS_SUBCLASS_OF.qualified, sup.qualified))
    for axiom in g.property_axioms:
        if axiom.kind is PropertyAxiomKind.INVERSE_OF:
            statements.append((axiom.p.qualified, OWL_INVERSE_OF.qualified,
                               axiom.q.qualified))
        else:
            statements.append((axiom.p.qualified, RDF_TYPE.qualified,
                               OWL_SYMMETRIC_PROPERTY.qualified))
    for t in g.triples:
        statements.append(t.sort_key())
    statements.sort()
    lines.extend(f"{s} {p} {o} ." for s, p, o in statements)
    return "\n".join(lines) + "\n"


_QNAME = re.compile(r"^(?:[A-Za-z_][\w.-]*)?:[A-Za-z_][\w.-]*$")


def _term_from_qname(qname: str) -> Term:
    if not _QNAME.match(qname):
        raise SerializeError(f"not a qualified name: {qname!r}")
    prefix, name = qname.split(":", 1)
    if prefix in ("bm", "b"):
        return bm(name)
    if prefix == "":
        return local(name)
    if prefix in ("rdf", "rdfs", "owl"):
        return builtin(f"{prefix}:{name}")
    raise SerializeError(f"unknown prefix in {qname!r}")


def parse_graph(text: str) -> KnowledgeGraph:
    """Read a graph document back. Accepts the exporter's line-per-triple
    form plus ';' and ',' continuation."""
    g = KnowledgeGraph()
    tokens: list[str] = []
    for raw_line in text.splitlines():
        line = raw_line.strip()
        if not line or line.startswith("#") or line.startswith("@prefix"):
            continue
        tokens.extend(line.replace(";", " ; ").replace(",", " , ").split())

    subject: Term | None = None
    predicate: Term | None = None
    pos = 0
    while pos < len(tokens):
        if subject is None:
            subject = _term_from_qname(tokens[pos])
            predicate = None
            pos += 1
            continue
        if predicate is None:
            predicate = _term_from_qname(tokens[pos]) if tokens[pos] != "a" else RDF_TYPE
            pos += 1
            continue
        obj = _term_from_qname(tokens[pos])
        _ingest(g, subject, predicate, obj)
        pos += 1
        if pos >= len(tokens):
            raise SerializeError("statement not terminated")
        terminator = tokens[pos]
        pos += 1
        if terminator == ".":
            subject = None
        elif terminator == ";":
            predicate = None
        elif terminator == ",":
            pass
        else:
            raise SerializeError(f"expected . ; or , after object, got {terminator!r}")
    if subject is not None:
        raise SerializeError("trailing unterminated statement")
    return g


def _ingest(g: KnowledgeGraph, s: Term, p: Term, o: Term) -> None:
    if p == RDFS_SUBCLASS_OF:
        g.subclass_axioms.add((s, o))
        return
    if p == OWL_INVERSE_OF:
        g.property_axioms.add(inverse_of(s, o))
        return
    if p == RDF_TYPE and o == OWL_SYMMETRIC_PROPERTY:
        g.property_axioms.add(symmetric(s))
        return
    if p == RDF_TYPE and o.namespace is Namespace.BUILTIN and o.qualified in _ARTIFACT_TYPES:
        return
    g.add(s, p, o)


# --- dot ---------------------------------------------------------------------

def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def _edge_label(flow: Flow) -> str:
    label = f"{flow.name}: {flow.model}"
    if flow.labels:
        label += "/" + "/".join(flow.labels)
    return label


def export_dot(model: DfdModel) -> str:
    """Directed graph: processes as ellipses, storages as open-ended
    boxes, externals as rectangles; edges labeled name + classes."""
    lines = ["digraph dfd {", "  rankdir=LR;"]
    for stencil in model.processes:
        lines.append(
            f'  "{_dot_escape(stencil.name)}" [shape=ellipse, '
            f'label="{_dot_escape(stencil.name)}\\n{_dot_escape(stencil.model)}"];'
        )
    for stencil in model.storages:
        # Open-ended box: an HTML table drawing only its top/bottom sides.
        lines.append(
            f'  "{_dot_escape(stencil.name)}" [shape=none, margin=0, label=<'
            f'<TABLE BORDER="0" CELLBORDER="1" SIDES="TB" CELLPADDING="4">'
            f'<TR><TD>{stencil.name}<BR/>{stencil.model}</TD></TR></TABLE>>];'
        )
    for stencil in model.externals:
        lines.append(
            f'  "{_dot_escape(stencil.name)}" [shape=box, '
            f'label="{_dot_escape(stencil.name)}\\n{_dot_escape(stencil.model)}"];'
        )
    by_id = {s.id: s for s in model.stencils()}
    for flow in model.flows:
        source = by_id[flow.source_id].name
        target = by_id[flow.target_id].name
        lines.append(
            f'  "{_dot_escape(source)}" -> "{_dot_escape(target)}" '
            f'[label="{_dot_escape(_edge_label(flow))}"];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"
