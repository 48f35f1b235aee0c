"""Grounding: turning an AQG into the executable query graphs that match it."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Iterator

from .graph import (
    AQG,
    BUILTIN_INSTANCES,
    RDF_TYPE,
    Edge,
    EdgeClass,
    QueryGraph,
    Vertex,
    VertexClass,
    answer_distances,
    builtin_orientation,
)
from .kb import WILDCARD, KnowledgeBase, Pattern, SolveCache, execute, solve_cached


class UnGroundable(ValueError):
    pass


@dataclass(frozen=True)
class LinkingResults:
    """Candidate instances found in a question: one entity set per mention."""

    entities: tuple[tuple[str, ...], ...] = ()
    types: tuple[str, ...] = ()
    numbers: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "entities", tuple(tuple(m) for m in self.entities))
        object.__setattr__(self, "types", tuple(self.types))
        object.__setattr__(self, "numbers", tuple(float(x) for x in self.numbers))

    def to_dict(self) -> dict[str, Any]:
        return {
            "entities": [list(m) for m in self.entities],
            "types": list(self.types),
            "numbers": list(self.numbers),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> LinkingResults:
        return cls(
            tuple(tuple(m) for m in d.get("entities", [])),
            tuple(d.get("types", [])),
            tuple(float(x) for x in d.get("numbers", [])),
        )


def _var_names(g: AQG, dist: list[int]) -> dict[int, str]:
    """?v0 for the answer, then ?v1, ?v2, ... by distance from it, then id."""
    order = sorted(
        (i for i, c in enumerate(g.vertices) if c is VertexClass.VAR and i != g.answer),
        key=lambda i: (dist[i], i),
    )
    names = {g.answer: "?v0"}
    names.update({vid: f"?v{k}" for k, vid in enumerate(order, start=1)})
    return names


def _entity_assignments(ent_vertices: list[int], linking: LinkingResults) -> Iterator[dict[int, str]]:
    for mentions in itertools.permutations(range(len(linking.entities)), len(ent_vertices)):
        pools = [linking.entities[m] for m in mentions]
        for choice in itertools.product(*pools):
            yield dict(zip(ent_vertices, choice))


def enumerate_intermediate(g: AQG, linking: LinkingResults) -> list[QueryGraph]:
    """All intermediate graphs: constants and built-in edges instantiated, Rel edges open.

    Each entity mention instantiates at most one Ent vertex.  Rel edges carry no
    instance and direction ``"none"``.
    """
    g.validate()
    if g.vertices[g.answer] is not VertexClass.VAR:
        raise UnGroundable("answer vertex is not a variable")
    dist = answer_distances(len(g.vertices), [(e.u, e.v) for e in g.edges], g.answer)
    names = _var_names(g, dist)
    ents = [i for i, c in enumerate(g.vertices) if c is VertexClass.ENT]
    types = [i for i, c in enumerate(g.vertices) if c is VertexClass.TYPE]
    nums = [i for i, c in enumerate(g.vertices) if c is VertexClass.NUM]
    if ents and len(ents) > len(linking.entities):
        raise UnGroundable(f"{len(ents)} entity vertices but {len(linking.entities)} mentions")
    if ents and not all(linking.entities):
        # a mention without candidates can still be skipped by the injective map
        if sum(1 for m in linking.entities if m) < len(ents):
            raise UnGroundable("not enough entity candidates")
    if types and not linking.types:
        raise UnGroundable("no type candidates")
    if nums and not linking.numbers:
        raise UnGroundable("no number candidates")

    builtin = [i for i, e in enumerate(g.edges) if e.cls is not EdgeClass.REL]
    oriented = {i: builtin_orientation(g.vertices, dist, g.edges[i].u, g.edges[i].v) for i in builtin}

    seen: set[str] = set()
    out: list[QueryGraph] = []
    for ent_map in _entity_assignments(ents, linking):
        for type_choice in itertools.product(linking.types, repeat=len(types)):
            for num_choice in itertools.product(linking.numbers, repeat=len(nums)):
                inst: dict[int, Any] = dict(ent_map)
                inst.update(zip(types, type_choice))
                inst.update(zip(nums, num_choice))
                vertices = tuple(
                    Vertex(i, c, names[i] if c is VertexClass.VAR else inst[i])
                    for i, c in enumerate(g.vertices)
                )
                for edge_choice in itertools.product(*(BUILTIN_INSTANCES[g.edges[i].cls] for i in builtin)):
                    chosen = dict(zip(builtin, edge_choice))
                    edges = []
                    for i, e in enumerate(g.edges):
                        if e.cls is EdgeClass.REL:
                            edges.append(Edge(i, e.cls, e.u, e.v, None, "none"))
                        else:
                            x, y = oriented[i]
                            edges.append(Edge(i, e.cls, x, y, chosen[i], "none"))
                    q = QueryGraph(vertices, tuple(edges), g.answer)
                    k = q.key()
                    if k not in seen:
                        seen.add(k)
                        out.append(q)
    return out


def enumerate_directions(g_star: QueryGraph) -> list[dict[int, str]]:
    """Every assignment of ``"uv"``/``"vu"`` to the Rel edges of ``g_star``."""
    rel = [e.id for e in g_star.edges if e.cls is EdgeClass.REL]
    return [dict(zip(rel, dirs)) for dirs in itertools.product(("uv", "vu"), repeat=len(rel))]


def _rel_order(q: QueryGraph) -> list[int]:
    dist = answer_distances(len(q.vertices), [(e.u, e.v) for e in q.edges], q.answer)
    rel = [e for e in q.edges if e.cls is EdgeClass.REL]
    return [e.id for e in sorted(rel, key=lambda e: (min(dist[e.u], dist[e.v]), e.id))]


def _relaxed_candidates(
    q: QueryGraph, fixed: list[int], edge_id: int, direction: str, kb: KnowledgeBase, cache: SolveCache
) -> list[str]:
    """Relations satisfying the pattern made of already-fixed Rel edges, nearby
    Isa edges and the open edge.  Dropping the remaining constraints only
    relaxes the query, so no relation of a final grounding is lost."""
    e = q.edges[edge_id]
    patterns = []
    touched = {q.answer, e.u, e.v}
    for fid in fixed:
        f = q.edges[fid]
        s, o = (f.u, f.v) if f.direction == "uv" else (f.v, f.u)
        patterns.append(Pattern(q.term(s), str(f.instance), q.term(o)))
        touched.update((f.u, f.v))
    for f in q.edges:
        if f.cls is EdgeClass.ISA and (f.u in touched or f.v in touched):
            patterns.append(Pattern(q.term(f.u), RDF_TYPE, q.term(f.v)))
    s, o = (e.u, e.v) if direction == "uv" else (e.v, e.u)
    patterns.append(Pattern(q.term(s), WILDCARD, q.term(o)))
    rows = solve_cached(patterns, kb, (), cache)
    return sorted({row[WILDCARD] for row in rows} - {RDF_TYPE})


def _search(q: QueryGraph, order: list[int], i: int, kb: KnowledgeBase, cache: SolveCache) -> Iterator[QueryGraph]:
    if i == len(order):
        if execute(q, kb, cache):
            yield q
        return
    eid = order[i]
    e = q.edges[eid]
    for direction in ("uv", "vu"):
        for rel in _relaxed_candidates(q, order[:i], eid, direction, kb, cache):
            yield from _search(q.replace_edge(Edge(eid, e.cls, e.u, e.v, rel, direction)), order, i + 1, kb, cache)


def _groundings(
    g: AQG, linking: LinkingResults, kb: KnowledgeBase, cache: SolveCache | None
) -> Iterator[QueryGraph]:
    try:
        inters = enumerate_intermediate(g, linking)
    except UnGroundable:
        return
    cache = {} if cache is None else cache
    for g_star in inters:
        yield from _search(g_star, _rel_order(g_star), 0, kb, cache)


def ground(
    g: AQG, linking: LinkingResults, kb: KnowledgeBase, cache: SolveCache | None = None
) -> list[QueryGraph]:
    """Candidate query graphs for ``g``: fully instantiated, nonempty on ``kb``.

    Deduplicated and sorted by serialization.  ``cache`` memoizes pattern solves
    and may be shared between calls against the same ``kb``.
    """
    found = {q.key(): q for q in _groundings(g, linking, kb, cache)}
    return [found[k] for k in sorted(found)]


def is_groundable(
    g: AQG, linking: LinkingResults, kb: KnowledgeBase, cache: SolveCache | None = None
) -> bool:
    return next(_groundings(g, linking, kb, cache), None) is not None


def attach_type(g: AQG, linking: LinkingResults, kb: KnowledgeBase) -> AQG | None:
    """Attach ``Type`` via ``Isa`` to the first Var vertex that keeps ``g`` groundable."""
    if VertexClass.TYPE in g.vertices or not linking.types:
        return None
    for vid, c in enumerate(g.vertices):
        if c is VertexClass.VAR:
            cand = g.add_leaf(vid, VertexClass.TYPE, EdgeClass.ISA)
            if is_groundable(cand, linking, kb):
                return cand
    return None


@dataclass
class CandidateSet:
    aqg: AQG
    queries: list[QueryGraph] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.queries)
