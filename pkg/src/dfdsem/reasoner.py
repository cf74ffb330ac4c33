"""Forward-chaining materialization to fixpoint.

Rule set (all monotone -- application only ever adds triples):

  subclass      x type C, C subClassOf D        =>  x type D
  inverse       p(x,y), inverseOf(p,q)          =>  q(y,x)
  symmetric     relates(x,y)                    =>  relates(y,x)
  relates       hasSource(f,x), hasTarget(f,y), x != y  =>  relates(x,y)
  edge          isSourceOf(x,f) or isTargetOf(x,f)      =>  isEdgeOf(x,f)
  threats       x type Process  =>  isAffectedBy(x, t) for the six generic
                threat individuals
  template      x satisfies a class expression  =>  isAffectedBy(x, threat)
                and/or x type derived-class

No rule uses negation; closed-world querying is the pattern engine's job.
"""
from __future__ import annotations

import logging
import re
from collections import deque
from dataclasses import dataclass
from enum import Enum
from importlib import resources

from .graph import (
    CLASSIFIED,
    CLASSIFIED_IS_EDGE,
    AFFECTED_AS_SOURCE,
    AFFECTED_AS_TARGET,
    DATA_FLOW,
    GENERIC_THREATS,
    HAS_SOURCE,
    HAS_TARGET,
    IS_AFFECTED_BY,
    IS_EDGE_OF,
    IS_SOURCE_OF,
    IS_TARGET_OF,
    KnowledgeGraph,
    PROCESS,
    PropertyAxiomKind,
    RDF_TYPE,
    RELATES,
    Term,
    Triple,
    bm,
    local,
    subclass_closure,
)

logger = logging.getLogger(__name__)


class TripleBudgetError(RuntimeError):
    """Materialization exceeded the configured triple budget."""


class ReasonerError(ValueError):
    """Invalid rule or template definition."""


# --- class expressions -----------------------------------------------------

@dataclass(frozen=True)
class ClassAtom:
    cls: Term


@dataclass(frozen=True)
class ExistsAtom:
    prop: Term
    filler: "ClassExpr"


@dataclass(frozen=True)
class ClassExpr:
    """Conjunction of atoms."""

    atoms: tuple[ClassAtom | ExistsAtom, ...]

    def __post_init__(self) -> None:
        if not self.atoms:
            raise ReasonerError("class expression needs at least one atom")


def class_atom(cls: Term) -> ClassExpr:
    return ClassExpr((ClassAtom(cls),))


def exists(prop: Term, filler: ClassExpr) -> ClassExpr:
    return ClassExpr((ExistsAtom(prop, filler),))


def conj(*exprs: ClassExpr) -> ClassExpr:
    atoms: tuple[ClassAtom | ExistsAtom, ...] = ()
    for expr in exprs:
        atoms += expr.atoms
    return ClassExpr(atoms)


@dataclass(frozen=True)
class ThreatTemplate:
    condition: ClassExpr
    threat: Term | None = None
    derived_class: Term | None = None

    def __post_init__(self) -> None:
        if self.threat is None and self.derived_class is None:
            raise ReasonerError("template needs a threat or a derived class")


# --- rules -----------------------------------------------------------------

class RuleKind(Enum):
    SUBCLASS_PROP = "subclass"
    INVERSE_PROP = "inverse"
    SYMMETRIC_PROP = "symmetric"
    EDGE_DERIVATION = "edge"
    RELATES_DERIVATION = "relates"
    GENERIC_THREATS = "threats"
    THREAT_TEMPLATE = "template"


@dataclass(frozen=True)
class Rule:
    kind: RuleKind
    template: ThreatTemplate | None = None

    def __post_init__(self) -> None:
        if (self.kind is RuleKind.THREAT_TEMPLATE) != (self.template is not None):
            raise ReasonerError("template payload required iff kind is THREAT_TEMPLATE")


def derived_class_templates() -> list[ThreatTemplate]:
    """Built-in derived classes reproduced from the base model's output
    vocabulary. Classified itself is driven by subclass axioms placed at
    lowering time; the rest are genuine conditions."""
    return [
        ThreatTemplate(
            condition=conj(class_atom(PROCESS), exists(IS_SOURCE_OF, class_atom(DATA_FLOW))),
            derived_class=AFFECTED_AS_SOURCE,
        ),
        ThreatTemplate(
            condition=conj(class_atom(PROCESS), exists(IS_TARGET_OF, class_atom(DATA_FLOW))),
            derived_class=AFFECTED_AS_TARGET,
        ),
        ThreatTemplate(
            condition=conj(class_atom(CLASSIFIED), exists(IS_EDGE_OF, class_atom(DATA_FLOW))),
            derived_class=CLASSIFIED_IS_EDGE,
        ),
    ]


def default_rules() -> list[Rule]:
    rules = [
        Rule(RuleKind.SUBCLASS_PROP),
        Rule(RuleKind.INVERSE_PROP),
        Rule(RuleKind.SYMMETRIC_PROP),
        Rule(RuleKind.RELATES_DERIVATION),
        Rule(RuleKind.EDGE_DERIVATION),
        Rule(RuleKind.GENERIC_THREATS),
    ]
    rules.extend(Rule(RuleKind.THREAT_TEMPLATE, t) for t in derived_class_templates())
    return rules


def template_rules(templates: list[ThreatTemplate]) -> list[Rule]:
    return [Rule(RuleKind.THREAT_TEMPLATE, t) for t in templates]


# --- materialization -------------------------------------------------------

class _Index:
    """Incremental triple indexes used by the fixpoint loop."""

    def __init__(self) -> None:
        self.instances_of: dict[Term, set[Term]] = {}  # class -> individuals
        self.pairs_of: dict[Term, set[tuple[Term, Term]]] = {}  # property -> (s, o)
        self.sources_of: dict[Term, set[Term]] = {}  # flow -> asserted sources
        self.targets_of: dict[Term, set[Term]] = {}  # flow -> asserted targets

    def index(self, t: Triple) -> None:
        if t.predicate == RDF_TYPE:
            self.instances_of.setdefault(t.object, set()).add(t.subject)
        else:
            self.pairs_of.setdefault(t.predicate, set()).add((t.subject, t.object))
            if t.predicate == HAS_SOURCE:
                self.sources_of.setdefault(t.subject, set()).add(t.object)
            elif t.predicate == HAS_TARGET:
                self.targets_of.setdefault(t.subject, set()).add(t.object)


def _eval_expr(expr: ClassExpr, index: _Index) -> set[Term]:
    result: set[Term] | None = None
    for atom in expr.atoms:
        if isinstance(atom, ClassAtom):
            members = index.instances_of.get(atom.cls, set())
        else:
            fillers = _eval_expr(atom.filler, index)
            members = {
                s for s, o in index.pairs_of.get(atom.prop, ()) if o in fillers
            }
        result = set(members) if result is None else (result & members)
        if not result:
            return set()
    return result or set()


def materialize(
    g: KnowledgeGraph,
    rules: list[Rule] | None = None,
    max_triples: int = 1_000_000,
) -> KnowledgeGraph:
    """Compute the least fixpoint of the rule set over ``g``.

    Returns a new graph; the input is untouched. Evaluation is
    delta-driven: each triple is examined once by the per-triple rules,
    and template conditions are re-checked only between rounds.
    """
    if rules is None:
        rules = default_rules()
    kinds = {r.kind for r in rules}
    templates = [r.template for r in rules if r.kind is RuleKind.THREAT_TEMPLATE]

    closure = subclass_closure(g.subclass_axioms)
    inverse: dict[Term, Term] = {}
    symmetric_props: set[Term] = set()
    for axiom in g.property_axioms:
        if axiom.kind is PropertyAxiomKind.INVERSE_OF:
            inverse[axiom.p] = axiom.q
            inverse[axiom.q] = axiom.p
        else:
            symmetric_props.add(axiom.p)

    index = _Index()
    triples: set[Triple] = set()
    queue: deque[Triple] = deque()

    def add(t: Triple) -> None:
        if t in triples:
            return
        if len(triples) >= max_triples:
            raise TripleBudgetError(
                f"materialization exceeded {max_triples} triples"
            )
        triples.add(t)
        index.index(t)
        queue.append(t)

    for t in g.triples:
        add(t)

    def consequences(t: Triple):
        s, p, o = t.subject, t.predicate, t.object
        if p == RDF_TYPE:
            if RuleKind.SUBCLASS_PROP in kinds:
                for sup in closure.get(o, ()):
                    yield Triple(s, RDF_TYPE, sup)
            if RuleKind.GENERIC_THREATS in kinds and o == PROCESS:
                for threat in GENERIC_THREATS:
                    yield Triple(s, IS_AFFECTED_BY, threat)
            return
        if RuleKind.INVERSE_PROP in kinds and p in inverse:
            yield Triple(o, inverse[p], s)
        if RuleKind.SYMMETRIC_PROP in kinds and p in symmetric_props:
            yield Triple(o, p, s)
        if RuleKind.EDGE_DERIVATION in kinds and p in (IS_SOURCE_OF, IS_TARGET_OF):
            yield Triple(s, IS_EDGE_OF, o)
        if RuleKind.RELATES_DERIVATION in kinds:
            if p == HAS_SOURCE:
                for y in index.targets_of.get(s, ()):
                    if y != o:
                        yield Triple(o, RELATES, y)
            elif p == HAS_TARGET:
                for x in index.sources_of.get(s, ()):
                    if x != o:
                        yield Triple(x, RELATES, o)

    while True:
        while queue:
            t = queue.popleft()
            for c in consequences(t):
                add(c)
        grew = False
        for template in templates:
            for x in _eval_expr(template.condition, index):
                if template.threat is not None:
                    c = Triple(x, IS_AFFECTED_BY, template.threat)
                    if c not in triples:
                        add(c)
                        grew = True
                if template.derived_class is not None:
                    c = Triple(x, RDF_TYPE, template.derived_class)
                    if c not in triples:
                        add(c)
                        grew = True
        if not grew and not queue:
            break

    return KnowledgeGraph(
        triples=triples,
        subclass_axioms=set(g.subclass_axioms),
        property_axioms=set(g.property_axioms),
    )


def eval_class_expression(g: KnowledgeGraph, expr: ClassExpr) -> set[Term]:
    """Members of a class expression over an already-materialized graph."""
    index = _Index()
    for t in g.triples:
        index.index(t)
    _warn_unknown_classes(expr, index, g)
    return _eval_expr(expr, index)


def _warn_unknown_classes(expr: ClassExpr, index: _Index, g: KnowledgeGraph) -> None:
    known = g.known_terms()
    for atom in expr.atoms:
        if isinstance(atom, ClassAtom):
            if atom.cls not in index.instances_of and atom.cls not in known:
                logger.warning("unknown class term %s in expression", atom.cls.qualified)
        else:
            _warn_unknown_classes(atom.filler, index, g)


# --- template catalog files --------------------------------------------------

_TOKEN = re.compile(r"\(|\)|[A-Za-z_][\w:-]*|:[A-Za-z_][\w-]*|bm:[A-Za-z_][\w-]*")


def parse_class_expression(text: str) -> ClassExpr:
    """Parse the expression grammar: qualified class names, ``and``,
    ``some <property> <expr>``, parentheses."""
    tokens = _tokenize_expr(text)
    expr, pos = _parse_conj(tokens, 0)
    if pos != len(tokens):
        raise ReasonerError(f"trailing tokens in expression: {' '.join(tokens[pos:])}")
    return expr


def _tokenize_expr(text: str) -> list[str]:
    tokens = []
    pos = 0
    while pos < len(text):
        ch = text[pos]
        if ch.isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if not m:
            raise ReasonerError(f"bad character {ch!r} in expression {text!r}")
        tokens.append(m.group(0))
        pos = m.end()
    return tokens


def _parse_conj(tokens: list[str], pos: int) -> tuple[ClassExpr, int]:
    expr, pos = _parse_unit(tokens, pos)
    parts = [expr]
    while pos < len(tokens) and tokens[pos].lower() == "and":
        nxt, pos = _parse_unit(tokens, pos + 1)
        parts.append(nxt)
    return conj(*parts), pos


def _parse_unit(tokens: list[str], pos: int) -> tuple[ClassExpr, int]:
    if pos >= len(tokens):
        raise ReasonerError("unexpected end of expression")
    tok = tokens[pos]
    if tok == "(":
        expr, pos = _parse_conj(tokens, pos + 1)
        if pos >= len(tokens) or tokens[pos] != ")":
            raise ReasonerError("missing closing parenthesis")
        return expr, pos + 1
    if tok == ")":
        raise ReasonerError("unexpected ')'")
    term = _qualified_term(tok)
    pos += 1
    if pos < len(tokens) and tokens[pos].lower() == "some":
        filler, pos = _parse_unit(tokens, pos + 1)
        return exists(term, filler), pos
    return class_atom(term), pos


def _qualified_term(token: str) -> Term:
    if token.startswith("bm:") or token.startswith("b:"):
        return bm(token.split(":", 1)[1])
    if token.startswith(":"):
        return local(token[1:])
    # Bare names default to the local namespace.
    return local(token)


def parse_templates(text: str) -> list[ThreatTemplate]:
    """Parse a template catalog file.

    Record format, one per ``template`` stanza::

        template
        condition bm:Process and (bm:isTargetOf some :HTTPFlow)
        threat bm:insecureProcessThreat
        class bm:SomeDerivedClass     # optional
    """
    templates: list[ThreatTemplate] = []
    stanza: dict[str, str] | None = None

    def flush() -> None:
        nonlocal stanza
        if stanza is None:
            return
        if "condition" not in stanza:
            raise ReasonerError("template stanza missing a condition")
        condition = parse_class_expression(stanza["condition"])
        threat = _qualified_term(stanza["threat"]) if "threat" in stanza else None
        derived = _qualified_term(stanza["class"]) if "class" in stanza else None
        templates.append(ThreatTemplate(condition=condition, threat=threat,
                                        derived_class=derived))
        stanza = None

    for raw_line in text.splitlines():
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.lower() == "template":
            flush()
            stanza = {}
            continue
        key, _, value = line.partition(" ")
        key = key.lower()
        if key not in ("condition", "threat", "class"):
            raise ReasonerError(f"unexpected line in template file: {raw_line!r}")
        if stanza is None:
            raise ReasonerError(f"{key!r} line outside a template stanza")
        stanza[key] = value.strip()
    flush()
    return templates


def builtin_threat_templates() -> list[ThreatTemplate]:
    """The template catalog shipped with the package (a single
    insecure-HTTP process template)."""
    text = resources.files("dfdsem.data").joinpath("threat_templates.txt").read_text("utf-8")
    return parse_templates(text)
