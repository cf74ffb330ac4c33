"""Triple representation of a diagram.

Terms are interned (namespace, name) pairs in two main namespaces: the
base threat-model vocabulary (``bm:``) and the per-diagram local
namespace (``:``). A handful of builtin terms (rdf:type, rdfs/owl
vocabulary) exist for typing and serialization.

The graph stores instance triples; class-hierarchy and
property-characteristic axioms live beside them rather than as triples,
which keeps the reasoner simple. Exporters re-serialize the axioms as
standard vocabulary triples.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .dfd import DfdModel, StencilKind
from .taxonomy import Taxonomy


class LoweringError(ValueError):
    """Diagram cannot be represented over the base vocabulary."""


class Namespace(Enum):
    BASE_MODEL = "bm"
    LOCAL = "local"
    BUILTIN = "builtin"


BASE_MODEL_IRI = "http://www.grsu.by/net/OdTMBaseThreatModel#"


@dataclass(frozen=True)
class Term:
    namespace: Namespace
    local_name: str

    @property
    def qualified(self) -> str:
        if self.namespace is Namespace.BASE_MODEL:
            return f"bm:{self.local_name}"
        if self.namespace is Namespace.LOCAL:
            return f":{self.local_name}"
        return self.local_name

    def __repr__(self) -> str:
        return f"Term({self.qualified})"


_INTERNED: dict[tuple[Namespace, str], Term] = {}


def _term(namespace: Namespace, name: str) -> Term:
    key = (namespace, name)
    interned = _INTERNED.get(key)
    if interned is None:
        interned = Term(namespace, name)
        _INTERNED[key] = interned
    return interned


def bm(name: str) -> Term:
    return _term(Namespace.BASE_MODEL, name)


def local(name: str) -> Term:
    return _term(Namespace.LOCAL, name)


def builtin(qualified_name: str) -> Term:
    return _term(Namespace.BUILTIN, qualified_name)


RDF_TYPE = builtin("rdf:type")
RDFS_SUBCLASS_OF = builtin("rdfs:subClassOf")
OWL_INVERSE_OF = builtin("owl:inverseOf")
OWL_SYMMETRIC_PROPERTY = builtin("owl:SymmetricProperty")
OWL_CLASS = builtin("owl:Class")
OWL_OBJECT_PROPERTY = builtin("owl:ObjectProperty")

# Base vocabulary: stencil classes.
STENCIL = bm("Stencil")
TARGET = bm("Target")
PROCESS = bm("Process")
EXTERNAL_INTERACTOR = bm("ExternalInteractor")
DATA_STORE = bm("DataStore")
DATA_FLOW = bm("DataFlow")
TRUST_BOUNDARY = bm("TrustBoundary")

# Base vocabulary: properties.
HAS_SOURCE = bm("hasSource")
IS_SOURCE_OF = bm("isSourceOf")
HAS_TARGET = bm("hasTarget")
IS_TARGET_OF = bm("isTargetOf")
RELATES = bm("relates")
IS_EDGE_OF = bm("isEdgeOf")
IS_AFFECTED_BY = bm("isAffectedBy")

BASE_PROPERTIES = (
    HAS_SOURCE, IS_SOURCE_OF, HAS_TARGET, IS_TARGET_OF,
    RELATES, IS_EDGE_OF, IS_AFFECTED_BY,
)

# Classes the reasoner derives membership for.
CLASSIFIED = bm("Classified")
CLASSIFIED_IS_EDGE = bm("ClassifiedIsEdge")
AFFECTED_AS_SOURCE = bm("AffectedByGenericProcessThreatAsSource")
AFFECTED_AS_TARGET = bm("AffectedByGenericProcessThreatAsTarget")

GENERIC_THREATS = (
    bm("threat_GenericSpoofing"),
    bm("threat_GenericTampering"),
    bm("threat_GenericRepudiation"),
    bm("threat_GenericInformationDisclosure"),
    bm("threat_GenericDenialOfService"),
    bm("threat_GenericElevationOfPrivilege"),
)

BASE_CLASSES = (
    STENCIL, TARGET, PROCESS, EXTERNAL_INTERACTOR, DATA_STORE,
    DATA_FLOW, TRUST_BOUNDARY,
    CLASSIFIED, CLASSIFIED_IS_EDGE, AFFECTED_AS_SOURCE, AFFECTED_AS_TARGET,
)

#: Local class names that would shadow base-model classes are rejected.
RESERVED_CLASS_NAMES = frozenset(t.local_name for t in BASE_CLASSES)


@dataclass(frozen=True)
class Triple:
    subject: Term
    predicate: Term
    object: Term

    def sort_key(self) -> tuple[str, str, str]:
        return (self.subject.qualified, self.predicate.qualified, self.object.qualified)


class PropertyAxiomKind(Enum):
    INVERSE_OF = "inverseOf"
    SYMMETRIC = "symmetric"


@dataclass(frozen=True)
class PropertyAxiom:
    kind: PropertyAxiomKind
    p: Term
    q: Term


def inverse_of(p: Term, q: Term) -> PropertyAxiom:
    # Stored once per unordered pair.
    if q.qualified < p.qualified:
        p, q = q, p
    return PropertyAxiom(PropertyAxiomKind.INVERSE_OF, p, q)


def symmetric(p: Term) -> PropertyAxiom:
    return PropertyAxiom(PropertyAxiomKind.SYMMETRIC, p, p)


@dataclass
class KnowledgeGraph:
    triples: set[Triple] = field(default_factory=set)
    subclass_axioms: set[tuple[Term, Term]] = field(default_factory=set)
    property_axioms: set[PropertyAxiom] = field(default_factory=set)

    def add(self, subject: Term, predicate: Term, obj: Term) -> None:
        self.triples.add(Triple(subject, predicate, obj))

    def has(self, subject: Term, predicate: Term, obj: Term) -> bool:
        return Triple(subject, predicate, obj) in self.triples

    def copy(self) -> "KnowledgeGraph":
        return KnowledgeGraph(
            triples=set(self.triples),
            subclass_axioms=set(self.subclass_axioms),
            property_axioms=set(self.property_axioms),
        )

    def terms(self) -> set[Term]:
        """Every term occurring in an instance triple."""
        out: set[Term] = set()
        for t in self.triples:
            out.add(t.subject)
            out.add(t.predicate)
            out.add(t.object)
        return out

    def known_terms(self) -> set[Term]:
        """Terms from triples plus the axiom vocabulary."""
        out = self.terms()
        for sub, sup in self.subclass_axioms:
            out.add(sub)
            out.add(sup)
        for axiom in self.property_axioms:
            out.add(axiom.p)
            out.add(axiom.q)
        return out


def subclass_closure(axioms: set[tuple[Term, Term]]) -> dict[Term, set[Term]]:
    """Map each class to all of its strict superclasses (transitive).

    Raises LoweringError if the axiom set is cyclic.
    """
    parents: dict[Term, set[Term]] = {}
    for sub, sup in axioms:
        parents.setdefault(sub, set()).add(sup)

    closure: dict[Term, set[Term]] = {}
    visiting: set[Term] = set()

    def visit(cls: Term) -> set[Term]:
        if cls in closure:
            return closure[cls]
        if cls in visiting:
            raise LoweringError(f"subclass axioms contain a cycle through {cls.qualified}")
        visiting.add(cls)
        supers: set[Term] = set()
        for parent in parents.get(cls, ()):
            supers.add(parent)
            supers.update(visit(parent))
        visiting.discard(cls)
        closure[cls] = supers
        return supers

    for cls in list(parents):
        visit(cls)
    return closure


def is_subclass_of(g: KnowledgeGraph, sub: Term, sup: Term) -> bool:
    """Reflexive-transitive subclass check over the graph's axioms."""
    if sub == sup:
        return True
    return sup in subclass_closure(g.subclass_axioms).get(sub, ())


def base_vocabulary() -> KnowledgeGraph:
    """The base threat-model vocabulary fragment every diagram imports."""
    g = KnowledgeGraph()
    g.subclass_axioms.update({
        (TARGET, STENCIL),
        (DATA_FLOW, STENCIL),
        (TRUST_BOUNDARY, STENCIL),
        (PROCESS, TARGET),
        (EXTERNAL_INTERACTOR, TARGET),
        (DATA_STORE, TARGET),
    })
    g.property_axioms.update({
        inverse_of(HAS_SOURCE, IS_SOURCE_OF),
        inverse_of(HAS_TARGET, IS_TARGET_OF),
        symmetric(RELATES),
    })
    return g


_KIND_CLASS = {
    StencilKind.PROCESS: PROCESS,
    StencilKind.DATA_STORE: DATA_STORE,
    StencilKind.EXTERNAL_ENTITY: EXTERNAL_INTERACTOR,
}


def _checked_local_class(name: str) -> Term:
    if name in RESERVED_CLASS_NAMES:
        raise LoweringError(
            f"class name {name!r} collides with a base-model class"
        )
    return local(name)


def lower(model: DfdModel, tax: Taxonomy) -> KnowledgeGraph:
    """Produce the explicit fact graph for a diagram.

    Only asserted knowledge goes in: type assertions for stencils and
    flows, hasSource/hasTarget per flow, the dictionary's class
    hierarchy. Inverse/derived properties (isSourceOf, relates, ...) are
    reasoner output and never appear here.
    """
    g = base_vocabulary()

    for sub, sup in tax.class_hierarchy:
        g.subclass_axioms.add((_checked_local_class(sub), _checked_local_class(sup)))
    # Membership in bm:Classified is driven by the dictionary: every class
    # the dictionary can assign sits under it.
    for name in sorted(tax.class_names()):
        g.subclass_axioms.add((_checked_local_class(name), CLASSIFIED))

    for stencil in model.stencils():
        subject = local(stencil.name)
        g.add(subject, RDF_TYPE, _KIND_CLASS[stencil.kind])
        g.add(subject, RDF_TYPE, _checked_local_class(stencil.model))
        for label in stencil.labels:
            g.add(subject, RDF_TYPE, _checked_local_class(label))

    by_id = {stencil.id: stencil for stencil in model.stencils()}
    for flow in model.flows:
        subject = local(flow.name)
        g.add(subject, RDF_TYPE, DATA_FLOW)
        g.add(subject, RDF_TYPE, _checked_local_class(flow.model))
        for label in flow.labels:
            g.add(subject, RDF_TYPE, _checked_local_class(label))
        g.add(subject, HAS_SOURCE, local(by_id[flow.source_id].name))
        g.add(subject, HAS_TARGET, local(by_id[flow.target_id].name))

    subclass_closure(g.subclass_axioms)  # cycle check
    return g
