"""Closed-world conjunctive pattern matching over materialized graphs.

A pattern is a conjunctive body of triple atoms plus optional minus
blocks (negation as failure): a body solution is dropped when a minus
block has a solution that shares at least one variable with it and
agrees on all shared variables. Blocks sharing no variable remove
nothing.

The built-in catalog covers sixteen security-relevant architecture
patterns in four groups (docker, network, web architecture, data
processing); see ``data/patterns.txt``.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources

from .graph import KnowledgeGraph, RDF_TYPE, Term, bm, local

logger = logging.getLogger(__name__)


class PatternError(ValueError):
    pass


class PatternSyntaxError(PatternError):
    """Unparseable pattern file."""


class QueryValidationError(PatternError):
    """Structurally invalid query (e.g. projection variable not bound)."""


class PatternGroup(Enum):
    DOCKER = "docker"
    NETWORK = "network"
    WEB_ARCHITECTURE = "web_architecture"
    DATA_PROCESSING = "data_processing"


@dataclass(frozen=True)
class Variable:
    name: str  # without the leading '?'

    def __repr__(self) -> str:
        return f"?{self.name}"


@dataclass(frozen=True)
class TripleAtom:
    subject: Term | Variable
    predicate: Term  # predicates are always ground
    object: Term | Variable

    def variables(self) -> list[Variable]:
        return [t for t in (self.subject, self.object) if isinstance(t, Variable)]


@dataclass(frozen=True)
class PatternQuery:
    id: str
    group: PatternGroup
    title: str
    projection: tuple[Variable, ...]
    body: tuple[TripleAtom, ...]
    minus_blocks: tuple[tuple[TripleAtom, ...], ...] = ()
    order_by: tuple[Variable, ...] = ()
    threat_note: str = ""

    def validate(self) -> None:
        body_vars = {v for atom in self.body for v in atom.variables()}
        for v in self.projection:
            if v not in body_vars:
                raise QueryValidationError(
                    f"pattern {self.id}: projection variable ?{v.name} not bound in body"
                )
        for v in self.order_by:
            if v not in self.projection:
                raise QueryValidationError(
                    f"pattern {self.id}: order-by variable ?{v.name} not projected"
                )


@dataclass(frozen=True)
class MatchRow:
    bindings: tuple[tuple[Variable, Term], ...]

    def __getitem__(self, var: Variable | str) -> Term:
        name = var.name if isinstance(var, Variable) else var.lstrip("?")
        for v, t in self.bindings:
            if v.name == name:
                return t
        raise KeyError(name)

    def as_dict(self) -> dict[str, str]:
        return {f"?{v.name}": t.qualified for v, t in self.bindings}


@dataclass
class PatternReport:
    diagram_id: str
    matches: dict[str, list[MatchRow]] = field(default_factory=dict)

    def matched_ids(self) -> list[str]:
        return [pid for pid, rows in self.matches.items() if rows]


# --- evaluation --------------------------------------------------------------

class _GraphIndex:
    def __init__(self, g: KnowledgeGraph):
        self.by_predicate: dict[Term, list[tuple[Term, Term]]] = {}
        for t in g.triples:
            self.by_predicate.setdefault(t.predicate, []).append((t.subject, t.object))
        self.known = g.known_terms()
        self.known.add(RDF_TYPE)


def _solve(atoms: tuple[TripleAtom, ...], index: _GraphIndex) -> list[dict[Variable, Term]]:
    solutions: list[dict[Variable, Term]] = [{}]
    for atom in atoms:
        pairs = index.by_predicate.get(atom.predicate, [])
        extended: list[dict[Variable, Term]] = []
        for binding in solutions:
            want_s = _resolved(atom.subject, binding)
            want_o = _resolved(atom.object, binding)
            for s, o in pairs:
                if want_s is not None and s != want_s:
                    continue
                if want_o is not None and o != want_o:
                    continue
                new_binding = binding
                if want_s is None:
                    new_binding = dict(new_binding)
                    new_binding[atom.subject] = s  # type: ignore[index]
                if want_o is None:
                    if isinstance(atom.object, Variable) and atom.object in new_binding:
                        if new_binding[atom.object] != o:
                            continue
                    else:
                        if new_binding is binding:
                            new_binding = dict(new_binding)
                        new_binding[atom.object] = o  # type: ignore[index]
                extended.append(new_binding)
        solutions = extended
        if not solutions:
            break
    return solutions


def _resolved(node: Term | Variable, binding: dict[Variable, Term]) -> Term | None:
    if isinstance(node, Variable):
        return binding.get(node)
    return node


def _removed_by(binding: dict[Variable, Term], block_solutions: list[dict[Variable, Term]]) -> bool:
    for block_binding in block_solutions:
        shared = binding.keys() & block_binding.keys()
        if shared and all(binding[v] == block_binding[v] for v in shared):
            return True
    return False


def evaluate(g: KnowledgeGraph, query: PatternQuery) -> list[MatchRow]:
    """Evaluate one pattern against a materialized graph.

    The graph is read as-is: no rules fire here, so types only match if
    materialization already closed them.
    """
    return _evaluate(query, _GraphIndex(g))


def _evaluate(query: PatternQuery, index: _GraphIndex) -> list[MatchRow]:
    query.validate()

    for atom in query.body:
        for node in (atom.subject, atom.predicate, atom.object):
            if isinstance(node, Term) and node not in index.known:
                logger.warning(
                    "pattern %s: ground term %s not present in graph",
                    query.id, node.qualified,
                )
                return []

    solutions = _solve(query.body, index)
    for block in query.minus_blocks:
        if not solutions:
            break
        block_solutions = _solve(block, index)
        if block_solutions:
            solutions = [b for b in solutions if not _removed_by(b, block_solutions)]

    seen: set[tuple[Term, ...]] = set()
    rows: list[MatchRow] = []
    for binding in solutions:
        key = tuple(binding[v] for v in query.projection)
        if key in seen:
            continue
        seen.add(key)
        rows.append(MatchRow(tuple(zip(query.projection, key))))

    def sort_key(row: MatchRow) -> tuple:
        ordered = tuple(row[v].qualified for v in query.order_by)
        full = tuple(row[v].qualified for v in query.projection)
        return (ordered, full)

    rows.sort(key=sort_key)
    return rows


def run_catalog(
    g: KnowledgeGraph,
    diagram_id: str,
    catalog: list[PatternQuery] | None = None,
) -> PatternReport:
    """Evaluate every pattern; ids with zero rows stay in the report."""
    if catalog is None:
        catalog = builtin_catalog()
    index = _GraphIndex(g)
    report = PatternReport(diagram_id=diagram_id)
    for query in catalog:
        report.matches[query.id] = _evaluate(query, index)
    return report


# --- pattern file grammar ----------------------------------------------------

_TOKENS = re.compile(
    r"""
    (?P<string>"[^"]*")
  | (?P<var>\?[A-Za-z_][\w-]*)
  | (?P<qname>(?:[A-Za-z_][\w-]*)?:[A-Za-z_][\w-]*)
  | (?P<word>[A-Za-z_][\w-]*)
  | (?P<num>\d[\w-]*)
  | (?P<punct>[{}.;])
    """,
    re.X,
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens: list[tuple[str, str, int]] = []
    line_no = 1
    pos = 0
    while pos < len(text):
        ch = text[pos]
        if ch == "\n":
            line_no += 1
            pos += 1
            continue
        if ch.isspace():
            pos += 1
            continue
        if ch == "#":
            end = text.find("\n", pos)
            pos = len(text) if end == -1 else end
            continue
        m = _TOKENS.match(text, pos)
        if not m:
            raise PatternSyntaxError(f"line {line_no}: unexpected character {ch!r}")
        kind = m.lastgroup or "word"
        tokens.append((kind, m.group(0), line_no))
        pos = m.end()
    return tokens


class _TokenStream:
    def __init__(self, tokens: list[tuple[str, str, int]]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> tuple[str, str, int] | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self) -> tuple[str, str, int]:
        tok = self.peek()
        if tok is None:
            raise PatternSyntaxError("unexpected end of pattern file")
        self.pos += 1
        return tok

    def expect_word(self, *words: str) -> str:
        kind, value, line = self.next()
        if kind != "word" or value.lower() not in words:
            raise PatternSyntaxError(
                f"line {line}: expected {' or '.join(words)}, got {value!r}"
            )
        return value.lower()

    def expect_punct(self, symbol: str) -> None:
        kind, value, line = self.next()
        if kind != "punct" or value != symbol:
            raise PatternSyntaxError(f"line {line}: expected {symbol!r}, got {value!r}")

    def at_word(self, *words: str) -> bool:
        tok = self.peek()
        return tok is not None and tok[0] == "word" and tok[1].lower() in words


def _term_from_token(kind: str, value: str, line: int) -> Term | Variable:
    if kind == "var":
        return Variable(value[1:])
    if kind == "qname":
        prefix, name = value.split(":", 1)
        if prefix in ("bm", "b"):
            return bm(name)
        if prefix == "":
            return local(name)
        if prefix == "rdf" and name == "type":
            return RDF_TYPE
        raise PatternSyntaxError(f"line {line}: unknown prefix {prefix!r}")
    if kind == "word" and value == "a":
        return RDF_TYPE
    raise PatternSyntaxError(f"line {line}: expected a term, got {value!r}")


def _parse_block(stream: _TokenStream, pattern_id: str, allow_minus: bool):
    """Parse a `{ ... }` group of statements; returns (atoms, minus_blocks)."""
    stream.expect_punct("{")
    atoms: list[TripleAtom] = []
    minus_blocks: list[tuple[TripleAtom, ...]] = []
    while True:
        tok = stream.peek()
        if tok is None:
            raise PatternSyntaxError(f"pattern {pattern_id}: unterminated block")
        if tok[0] == "punct" and tok[1] == "}":
            stream.next()
            break
        if tok[0] == "word" and tok[1].lower() == "minus":
            if not allow_minus:
                raise PatternSyntaxError(
                    f"pattern {pattern_id}: nested minus blocks are not supported"
                )
            stream.next()
            inner, _ = _parse_block(stream, pattern_id, allow_minus=False)
            minus_blocks.append(tuple(inner))
            if stream.peek() and stream.peek()[0] == "punct" and stream.peek()[1] == ".":
                stream.next()
            continue
        atoms.extend(_parse_statement(stream))
    return atoms, minus_blocks


def _parse_statement(stream: _TokenStream) -> list[TripleAtom]:
    kind, value, line = stream.next()
    subject = _term_from_token(kind, value, line)
    atoms: list[TripleAtom] = []
    while True:
        kind, value, line = stream.next()
        predicate = _term_from_token(kind, value, line)
        if isinstance(predicate, Variable):
            raise PatternSyntaxError(f"line {line}: predicates must be ground")
        kind, value, line = stream.next()
        obj = _term_from_token(kind, value, line)
        atoms.append(TripleAtom(subject, predicate, obj))
        tok = stream.peek()
        if tok is not None and tok[0] == "punct" and tok[1] == ";":
            stream.next()
            continue
        if tok is not None and tok[0] == "punct" and tok[1] == ".":
            stream.next()
        break
    return atoms


def parse_patterns(text: str) -> list[PatternQuery]:
    """Parse a pattern catalog file; see ``data/patterns.txt`` for the
    grammar by example."""
    stream = _TokenStream(_tokenize(text))
    queries: list[PatternQuery] = []
    while stream.peek() is not None:
        stream.expect_word("pattern")
        kind, pattern_id, line = stream.next()
        if kind not in ("word", "num"):
            raise PatternSyntaxError(f"line {line}: expected a pattern id")
        kind, group_word, line = stream.next()
        try:
            group = PatternGroup(group_word.lower())
        except ValueError:
            raise PatternSyntaxError(f"line {line}: unknown group {group_word!r}") from None
        title = ""
        tok = stream.peek()
        if tok is not None and tok[0] == "string":
            title = stream.next()[1].strip('"')
        threat_note = ""
        if stream.at_word("note"):
            stream.next()
            kind, value, line = stream.next()
            if kind != "string":
                raise PatternSyntaxError(f"line {line}: note requires a quoted string")
            threat_note = value.strip('"')

        stream.expect_word("select")
        projection: list[Variable] = []
        while stream.peek() is not None and stream.peek()[0] == "var":
            projection.append(Variable(stream.next()[1][1:]))
        if not projection:
            raise PatternSyntaxError(f"pattern {pattern_id}: empty projection")

        stream.expect_word("where")
        atoms, minus_blocks = _parse_block(stream, pattern_id, allow_minus=True)

        order_by: list[Variable] = []
        if stream.at_word("order"):
            stream.next()
            stream.expect_word("by")
            while stream.peek() is not None and stream.peek()[0] == "var":
                order_by.append(Variable(stream.next()[1][1:]))

        query = PatternQuery(
            id=pattern_id,
            group=group,
            title=title,
            projection=tuple(projection),
            body=tuple(atoms),
            minus_blocks=tuple(minus_blocks),
            order_by=tuple(order_by),
            threat_note=threat_note,
        )
        query.validate()
        queries.append(query)
    return queries


_builtin_cache: list[PatternQuery] | None = None


def builtin_catalog() -> list[PatternQuery]:
    """The sixteen-pattern catalog shipped with the package."""
    global _builtin_cache
    if _builtin_cache is None:
        text = resources.files("dfdsem.data").joinpath("patterns.txt").read_text("utf-8")
        _builtin_cache = parse_patterns(text)
    return list(_builtin_cache)
