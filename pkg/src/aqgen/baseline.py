"""Structure-unconstrained candidate generation and the token-overlap ranker."""

from __future__ import annotations

import re
from typing import Sequence

from .graph import AQG, EdgeClass, QueryGraph, VertexClass, canonical_code
from .grounding import LinkingResults, is_groundable
from .kb import KnowledgeBase, SolveCache, is_variable

_LEAF_ONLY = (VertexClass.TYPE, VertexClass.NUM)


def edge_allowed(parent: VertexClass, edge: EdgeClass, child: VertexClass) -> bool:
    """Whether ``parent -edge- child`` can appear in a well-formed AQG.

    Every edge touches a variable; Isa links a variable to a Type, Cmp/Ord a
    variable to a Num, Cnt a variable to a variable or Num.  Type and Num
    vertices are leaves.
    """
    if parent in _LEAF_ONLY:
        return False
    if parent is not VertexClass.VAR and child is not VertexClass.VAR:
        return False
    other = child if parent is VertexClass.VAR else parent
    if edge is EdgeClass.REL:
        return True
    if edge is EdgeClass.ISA:
        return other is VertexClass.TYPE
    if edge in (EdgeClass.CMP, EdgeClass.ORD):
        return other is VertexClass.NUM
    return other in (VertexClass.VAR, VertexClass.NUM)


def _linkable(g: AQG, linking: LinkingResults) -> bool:
    ents = g.count(VertexClass.ENT)
    return (
        ents <= sum(1 for m in linking.entities if m)
        and (not g.count(VertexClass.TYPE) or bool(linking.types))
        and (not g.count(VertexClass.NUM) or bool(linking.numbers))
    )


def constrained(g: AQG) -> bool:
    """Every variable except the answer sits on a Rel or Isa edge.

    A variable without a triple pattern ranges over the whole KB, which is
    never what a question means and makes counting it explode.
    """
    pattern = (EdgeClass.REL, EdgeClass.ISA)
    touched = {x for e in g.edges if e.cls in pattern for x in (e.u, e.v)}
    return all(
        i == g.answer or cls is not VertexClass.VAR or i in touched for i, cls in enumerate(g.vertices)
    )


def monotone(g: AQG) -> bool:
    """Dropping any leaf keeps a groundable tree groundable.

    True unless some Cnt edge compares a count with a number or feeds a
    non-answer variable, where relaxing the counted set changes the count.
    """
    for e in g.edges:
        if e.cls is EdgeClass.CNT:
            ends = (e.u, e.v)
            if g.answer not in ends or any(g.vertices[x] is VertexClass.NUM for x in ends):
                return False
    return True


def enumerate_aqgs(
    max_edges: int, linking: LinkingResults, kb: KnowledgeBase, cache: SolveCache | None = None
) -> list[AQG]:
    """All non-isomorphic well-formed groundable AQGs rooted at a Var answer vertex
    with at most ``max_edges`` edges.

    Trees are grown one leaf at a time.  A tree whose groundability is
    monotone under leaf removal is only extended if groundable; the rest are
    carried along and checked when emitted.
    """
    if max_edges > 4:
        raise ValueError("max_edges must be at most 4")
    cache = {} if cache is None else cache
    root = AQG((VertexClass.VAR,), (), 0)
    if not is_groundable(root, linking, kb, cache):
        return []
    frontier = [root]
    out = [root]
    seen = {canonical_code(root)}
    for _ in range(max_edges):
        nxt = []
        for g in frontier:
            for parent, pcls in enumerate(g.vertices):
                for vcls in VertexClass:
                    for ecls in EdgeClass:
                        if not edge_allowed(pcls, ecls, vcls):
                            continue
                        cand = g.add_leaf(parent, vcls, ecls)
                        code = canonical_code(cand)
                        if code in seen:
                            continue
                        seen.add(code)
                        if not _linkable(cand, linking):
                            continue
                        ok = constrained(cand) and is_groundable(cand, linking, kb, cache)
                        if ok:
                            out.append(cand)
                        if ok or not (constrained(cand) and monotone(cand)):
                            nxt.append(cand)
        frontier = nxt
    return out


_WORD = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    return _WORD.findall(text.lower())


def lexicon(q: QueryGraph) -> set[str]:
    """Surface tokens of the relations, types and entities used by ``q``."""
    words: set[str] = set()
    for v in q.vertices:
        if v.cls in (VertexClass.ENT, VertexClass.TYPE) and isinstance(v.instance, str):
            words.update(tokenize(v.instance))
    for e in q.edges:
        if e.cls is EdgeClass.REL and e.instance and not is_variable(e.instance):
            words.update(tokenize(e.instance.replace("_", " ")))
    return words


def overlap_score(tokens: Sequence[str], q: QueryGraph) -> float:
    qs = set(tokens)
    lex = lexicon(q)
    if not qs or not lex:
        return 0.0
    return len(qs & lex) / len(qs | lex)


def rank_baseline(tokens: Sequence[str], candidates: Sequence[QueryGraph]) -> tuple[QueryGraph, list[float]]:
    """Best candidate by token overlap; ties go to fewer edges, then serialization."""
    if not candidates:
        raise ValueError("no candidates to rank")
    scores = [overlap_score(tokens, c) for c in candidates]
    best = min(range(len(candidates)), key=lambda i: (-scores[i], len(candidates[i].edges), candidates[i].key()))
    return candidates[best], scores
