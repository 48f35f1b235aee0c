"""In-memory triple store and evaluation of grounded query graphs.

Evaluation of a query graph proceeds in a fixed pipeline:

1. solve the conjunctive pattern made of Rel edges (directed triple patterns)
   and Isa edges (``x rdf:type T``); variables touched by no pattern range
   over every node of the KB;
2. Cmp filters keep rows whose operands are numeric and satisfy ``<``/``>``/``=``;
3. Ord edges keep rows whose operand equals the n-th distinct numeric value
   (descending for ``max_at_n``, ascending for ``min_at_n``, 1-indexed);
4. Cnt edges either assert that the number of distinct operand values equals a
   Num constant, or bind a count variable to that number;
5. the distinct values of ``?v0`` are projected.
"""

from __future__ import annotations

import logging
import math
import re
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Union

from .graph import RDF_TYPE, Edge, EdgeClass, QueryGraph, VertexClass

log = logging.getLogger(__name__)

Term = Union[str, float]

_NUMBER = re.compile(r"^[+-]?[0-9.]+$")


class TripleParseError(ValueError):
    def __init__(self, path: str | Path, lineno: int, msg: str):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.lineno = lineno


def parse_object(token: str) -> Term:
    """TSV object cell → numeric literal, quoted string literal, or entity id."""
    if _NUMBER.match(token):
        return float(token)
    return token


def format_term(term: Term) -> str:
    if isinstance(term, float):
        return repr(int(term)) if term.is_integer() and abs(term) < 1e15 else repr(term)
    return term


def is_variable(term: object) -> bool:
    return isinstance(term, str) and term.startswith("?")


@dataclass(frozen=True)
class Triple:
    s: str
    p: str
    o: Term


class KnowledgeBase:
    """Immutable triple set with hash indexes.

    Reads are thread-safe: nothing is mutated after construction.
    """

    def __init__(self, triples: Iterable[Triple | tuple[str, str, Term]] = ()):
        uniq = {t if isinstance(t, Triple) else Triple(*t) for t in triples}
        self._triples = frozenset(uniq)
        sp: dict = defaultdict(set)
        po: dict = defaultdict(set)
        so: dict = defaultdict(set)
        by_p: dict = defaultdict(set)
        by_s: dict = defaultdict(set)
        by_o: dict = defaultdict(set)
        for t in self._triples:
            sp[(t.s, t.p)].add(t.o)
            po[(t.p, t.o)].add(t.s)
            so[(t.s, t.o)].add(t.p)
            by_p[t.p].add((t.s, t.o))
            by_s[t.s].add((t.p, t.o))
            by_o[t.o].add((t.s, t.p))
        self.sp, self.po, self.so = dict(sp), dict(po), dict(so)
        self.by_p, self.by_s, self.by_o = dict(by_p), dict(by_s), dict(by_o)
        nodes = set(by_s) | set(by_o)
        self.nodes: tuple[Term, ...] = tuple(sorted(nodes, key=_term_order))
        self.relations: tuple[str, ...] = tuple(sorted(by_p))

    @property
    def triples(self) -> frozenset[Triple]:
        return self._triples

    def __len__(self) -> int:
        return len(self._triples)

    def __contains__(self, t: object) -> bool:
        return t in self._triples

    def match(self, s: Term | None, p: str | None, o: Term | None) -> list[tuple[str, str, Term]]:
        """All triples matching the pattern; ``None`` is a wildcard."""
        if s is not None and p is not None and o is not None:
            return [(s, p, o)] if Triple(s, p, o) in self._triples else []  # type: ignore[arg-type]
        if s is not None and p is not None:
            return [(s, p, x) for x in self.sp.get((s, p), ())]  # type: ignore[misc]
        if p is not None and o is not None:
            return [(x, p, o) for x in self.po.get((p, o), ())]
        if s is not None and o is not None:
            return [(s, x, o) for x in self.so.get((s, o), ())]  # type: ignore[misc]
        if s is not None:
            return [(s, x, y) for x, y in self.by_s.get(s, ())]  # type: ignore[misc]
        if p is not None:
            return [(x, p, y) for x, y in self.by_p.get(p, ())]
        if o is not None:
            return [(x, y, o) for x, y in self.by_o.get(o, ())]
        return [(t.s, t.p, t.o) for t in self._triples]

    def estimate(self, s: Term | None, p: str | None, o: Term | None) -> int:
        if s is not None and p is not None and o is not None:
            return 1
        if s is not None and p is not None:
            return len(self.sp.get((s, p), ()))
        if p is not None and o is not None:
            return len(self.po.get((p, o), ()))
        if s is not None and o is not None:
            return len(self.so.get((s, o), ()))
        if s is not None:
            return len(self.by_s.get(s, ()))
        if p is not None:
            return len(self.by_p.get(p, ()))
        if o is not None:
            return len(self.by_o.get(o, ()))
        return len(self._triples)


def _term_order(t: Term) -> tuple[int, str]:
    return (0, repr(t)) if isinstance(t, float) else (1, t)


def load_triples(path: str | Path) -> KnowledgeBase:
    """Read a UTF-8 ``s<TAB>p<TAB>o`` file."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            cells = line.split("\t")
            if len(cells) != 3:
                raise TripleParseError(path, lineno, f"expected 3 tab-separated cells, got {len(cells)}")
            s, p, o = cells
            try:
                rows.append(Triple(s, p, parse_object(o)))
            except ValueError as exc:
                raise TripleParseError(path, lineno, f"bad literal {o!r}") from exc
    kb = KnowledgeBase(rows)
    log.info("loaded %d rows, %d distinct triples from %s", len(rows), len(kb), path)
    return kb


def save_triples(kb: KnowledgeBase, path: str | Path) -> None:
    rows = sorted(kb.triples, key=lambda t: (t.s, t.p, _term_order(t.o)))
    with open(path, "w", encoding="utf-8") as fh:
        for t in rows:
            fh.write(f"{t.s}\t{t.p}\t{format_term(t.o)}\n")


# --------------------------------------------------------------------------- #
# pattern solving


@dataclass
class Pattern:
    """A triple pattern; any position may hold a ``?variable``."""

    s: Term
    p: Term
    o: Term

    def variables(self) -> set[str]:
        return {x for x in (self.s, self.p, self.o) if is_variable(x)}  # type: ignore[misc]


Row = dict


def solve_patterns(
    patterns: list[Pattern], kb: KnowledgeBase, free_vars: Iterable[str] = ()
) -> list[Row]:
    """All bindings satisfying every pattern.

    Join order is greedy by the index size of each pattern given the variables
    already bound; ``free_vars`` not mentioned by any pattern range over all KB nodes.
    """
    rows: list[Row] = [{}]
    remaining = [(pt, pt.variables()) for pt in patterns]
    bound: set[str] = set()
    while remaining and rows:
        probe = rows[0]

        def cost(item: tuple[Pattern, set[str]]) -> tuple[int, int]:
            pt, names = item
            s = probe.get(pt.s, pt.s) if pt.s in names else pt.s  # type: ignore[arg-type]
            p = probe.get(pt.p, pt.p) if pt.p in names else pt.p  # type: ignore[arg-type]
            o = probe.get(pt.o, pt.o) if pt.o in names else pt.o  # type: ignore[arg-type]
            s = None if s in names else s
            p = None if p in names else p
            o = None if o in names else o
            connected = bool(names & bound) or not names
            return (0 if connected or not bound else 1, kb.estimate(s, p, o))  # type: ignore[arg-type]

        remaining.sort(key=cost)
        pt, names = remaining.pop(0)
        terms = (pt.s, pt.p, pt.o)
        slots = [(i, t) for i, t in enumerate(terms) if is_variable(t)]
        sv, pv, ov = (is_variable(t) for t in terms)
        nxt: list[Row] = []
        for row in rows:
            s = row.get(pt.s) if sv else pt.s
            p = row.get(pt.p) if pv else pt.p
            o = row.get(pt.o) if ov else pt.o
            if p is not None and not isinstance(p, str):
                continue
            if s is not None and not isinstance(s, str):
                continue
            for triple in kb.match(s, p, o):  # type: ignore[arg-type]
                new = dict(row)
                ok = True
                for i, var in slots:
                    val = triple[i]
                    prev = new.get(var)
                    if prev is None:
                        new[var] = val
                    elif prev != val or type(prev) is not type(val):
                        ok = False
                        break
                if ok:
                    nxt.append(new)
        rows = nxt
        bound |= names
    for var in sorted(set(free_vars) - bound):
        rows = [dict(row, **{var: node}) for row in rows for node in kb.nodes]
    return rows


# --------------------------------------------------------------------------- #
# query execution


@dataclass
class _Plan:
    patterns: list[Pattern] = field(default_factory=list)
    pattern_vars: set[str] = field(default_factory=set)
    count_vars: set[str] = field(default_factory=set)
    valid: bool = True


def _plan(q: QueryGraph) -> _Plan:
    plan = _Plan()
    for e in q.edges:
        if e.cls is EdgeClass.CNT and q.vertices[e.v].cls is VertexClass.VAR:
            plan.count_vars.add(str(q.vertices[e.v].instance))
    for e in q.edges:
        if e.cls is EdgeClass.REL:
            if e.instance is None or e.direction not in ("uv", "vu"):
                plan.valid = False
                continue
            s, o = (e.u, e.v) if e.direction == "uv" else (e.v, e.u)
            plan.patterns.append(Pattern(q.term(s), e.instance, q.term(o)))
        elif e.cls is EdgeClass.ISA:
            plan.patterns.append(Pattern(q.term(e.u), RDF_TYPE, q.term(e.v)))
    for pt in plan.patterns:
        if pt.variables() & plan.count_vars:
            plan.valid = False
    for e in q.edges:
        if e.cls is EdgeClass.CNT:
            x = q.term(e.u)
            if is_variable(x) and x in plan.count_vars:
                plan.valid = False
        elif e.cls in (EdgeClass.CMP, EdgeClass.ORD):
            for t in (q.term(e.u), q.term(e.v)):
                if is_variable(t) and t in plan.count_vars:
                    plan.valid = False
    all_vars = {str(v.instance) for v in q.vertices if v.cls is VertexClass.VAR}
    plan.pattern_vars = all_vars - plan.count_vars
    return plan


def _num(x: Term | None) -> float | None:
    return x if isinstance(x, float) else None


def _compare(a: float, op: str, b: float) -> bool:
    if op == "<":
        return a < b
    if op == ">":
        return a > b
    if op == "=":
        return a == b
    raise ValueError(f"unknown comparison {op!r}")


def _value(q: QueryGraph, vid: int, row: Row) -> Term | None:
    t = q.term(vid)
    return row.get(t) if is_variable(t) else t  # type: ignore[arg-type]


def apply_constraints(q: QueryGraph, rows: list[Row], count_vars: set[str]) -> frozenset[Term]:
    """Steps 2-5 of the evaluation pipeline over already-solved pattern rows."""
    edges = sorted(q.edges, key=lambda e: e.id)
    for e in edges:
        if e.cls is EdgeClass.CMP:
            kept = []
            for row in rows:
                a, b = _num(_value(q, e.u, row)), _num(_value(q, e.v, row))
                if a is not None and b is not None and _compare(a, str(e.instance), b):
                    kept.append(row)
            rows = kept
    for e in edges:
        if e.cls is not EdgeClass.ORD:
            continue
        n = q.term(e.v)
        if not isinstance(n, float) or n < 1 or not n.is_integer():
            return frozenset()
        values = sorted({v for row in rows if (v := _num(_value(q, e.u, row))) is not None})
        if e.instance == "max_at_n":
            values.reverse()
        elif e.instance != "min_at_n":
            raise ValueError(f"unknown ordinal {e.instance!r}")
        if int(n) > len(values):
            return frozenset()
        target = values[int(n) - 1]
        rows = [row for row in rows if _num(_value(q, e.u, row)) == target]
    counts: dict[str, float] = {}
    for e in edges:
        if e.cls is not EdgeClass.CNT:
            continue
        distinct = {_key(v) for row in rows if (v := _value(q, e.u, row)) is not None}
        c = float(len(distinct))
        y = q.term(e.v)
        if is_variable(y) and y in count_vars:
            if not rows:
                return frozenset()
            if counts.setdefault(str(y), c) != c:
                return frozenset()
        elif isinstance(y, float):
            if c != y:
                return frozenset()
        else:
            return frozenset()
    ans = str(q.vertices[q.answer].instance)
    if ans in counts:
        return frozenset([counts[ans]])
    if ans in count_vars:
        return frozenset()
    return frozenset(row[ans] for row in rows if ans in row)


def _key(v: Term) -> tuple[type, Term]:
    return (type(v), v)


SolveCache = dict


def solve_cached(
    patterns: list[Pattern], kb: KnowledgeBase, free_vars: Iterable[str] = (), cache: SolveCache | None = None
) -> list[Row]:
    """``solve_patterns`` memoized in ``cache``; returned rows must not be mutated."""
    if cache is None:
        return solve_patterns(patterns, kb, free_vars)
    key = (tuple((pt.s, pt.p, pt.o) for pt in patterns), tuple(sorted(free_vars)))
    rows = cache.get(key)
    if rows is None:
        rows = cache[key] = solve_patterns(patterns, kb, free_vars)
    return rows


def execute(q: QueryGraph, kb: KnowledgeBase, cache: SolveCache | None = None) -> frozenset[Term]:
    """Answer set (distinct values of ``?v0``) of a grounded query."""
    plan = _plan(q)
    if not plan.valid:
        return frozenset()
    rows = solve_cached(plan.patterns, kb, plan.pattern_vars, cache)
    return apply_constraints(q, rows, plan.count_vars)


WILDCARD = "?__rel"


def relation_candidates(q: QueryGraph, edge_id: int, kb: KnowledgeBase) -> set[str]:
    """Relations that make ``q`` execute nonempty when placed on Rel edge ``edge_id``.

    The edge's ``instance`` is ignored (treated as a wildcard); its direction
    must be set.  Candidates come from the pattern with a predicate variable and
    are then confirmed by full execution.
    """
    edge = q.edges[edge_id]
    if edge.cls is not EdgeClass.REL:
        raise ValueError(f"edge {edge_id} is not a Rel edge")
    probe = q.replace_edge(Edge(edge.id, edge.cls, edge.u, edge.v, WILDCARD, edge.direction))
    plan = _plan(probe)
    if not plan.valid:
        return set()
    rows = solve_patterns(plan.patterns, kb, plan.pattern_vars)
    cands = {row[WILDCARD] for row in rows} - {RDF_TYPE}
    out = set()
    for r in cands:
        full = q.replace_edge(Edge(edge.id, edge.cls, edge.u, edge.v, r, edge.direction))
        if execute(full, kb):
            out.add(r)
    return out


# --------------------------------------------------------------------------- #
# SPARQL rendering (debugging only)


def _sparql_term(t: Term) -> str:
    if isinstance(t, float):
        return format_term(t)
    if is_variable(t) or t.startswith('"'):
        return t
    if t == RDF_TYPE:
        return t
    return f"<{t}>"


def to_sparql(q: QueryGraph) -> str:
    plan = _plan(q)
    lines = []
    for e in sorted(q.edges, key=lambda e: e.id):
        if e.cls is EdgeClass.REL:
            s, o = (e.u, e.v) if e.direction == "uv" else (e.v, e.u)
            lines.append(f"  {_sparql_term(q.term(s))} {_sparql_term(str(e.instance))} {_sparql_term(q.term(o))} .")
        elif e.cls is EdgeClass.ISA:
            lines.append(f"  {_sparql_term(q.term(e.u))} rdf:type {_sparql_term(q.term(e.v))} .")
    body = list(lines)
    for e in sorted(q.edges, key=lambda e: e.id):
        if e.cls is EdgeClass.CMP:
            op = "=" if e.instance == "=" else e.instance
            body.append(f"  FILTER({_sparql_term(q.term(e.u))} {op} {_sparql_term(q.term(e.v))})")
    for e in sorted(q.edges, key=lambda e: e.id):
        if e.cls is EdgeClass.ORD:
            x = _sparql_term(q.term(e.u))
            n = q.term(e.v)
            offset = int(n) - 1 if isinstance(n, float) and math.isfinite(n) else 0
            order = f"DESC({x})" if e.instance == "max_at_n" else f"ASC({x})"
            inner = "\n".join("  " + ln for ln in lines)
            body.append(
                f"  {{ SELECT DISTINCT {x} WHERE {{\n{inner}\n  }} ORDER BY {order} OFFSET {offset} LIMIT 1 }}"
            )
    ans = str(q.vertices[q.answer].instance)
    having = []
    select = f"SELECT DISTINCT {ans}"
    for e in sorted(q.edges, key=lambda e: e.id):
        if e.cls is EdgeClass.CNT:
            x = _sparql_term(q.term(e.u))
            y = q.term(e.v)
            if is_variable(y) and y in plan.count_vars:
                if y == ans:
                    select = f"SELECT (COUNT(DISTINCT {x}) AS {ans})"
            else:
                having.append(f"COUNT(DISTINCT {x}) = {_sparql_term(y)}")
    text = select + " WHERE {\n" + "\n".join(body) + "\n}"
    if having:
        text += "\nHAVING (" + " && ".join(having) + ")"
    return text
