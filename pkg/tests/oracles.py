"""Slow reference implementations and random instance generators used by the tests."""

from __future__ import annotations

import itertools
import random
from typing import Any

from aqgen.graph import (
    AQG,
    BUILTIN_INSTANCES,
    RDF_TYPE,
    AQGEdge,
    Edge,
    EdgeClass,
    QueryGraph,
    Vertex,
    VertexClass,
    answer_distances,
    builtin_orientation,
)
from aqgen.grounding import LinkingResults
from aqgen.kb import KnowledgeBase, Triple, execute

VCLS = list(VertexClass)
ECLS = list(EdgeClass)


# --------------------------------------------------------------------------- #
# isomorphism


def brute_isomorphic(a: AQG, b: AQG) -> bool:
    """Try every bijection that maps answer to answer."""
    if len(a.vertices) != len(b.vertices) or len(a.edges) != len(b.edges):
        return False
    if a.vertices[a.answer] != b.vertices[b.answer]:
        return False
    eb = {(frozenset((e.u, e.v)), e.cls) for e in b.edges}
    rest_a = [i for i in range(len(a.vertices)) if i != a.answer]
    rest_b = [i for i in range(len(b.vertices)) if i != b.answer]
    for perm in itertools.permutations(rest_b):
        f = dict(zip(rest_a, perm))
        f[a.answer] = b.answer
        if any(a.vertices[i] != b.vertices[f[i]] for i in f):
            continue
        if all((frozenset((f[e.u], f[e.v])), e.cls) in eb for e in a.edges):
            return True
    return False


def random_tree(rng: random.Random, n: int, vclasses=VCLS, eclasses=ECLS, answer_var: bool = False) -> AQG:
    verts = [rng.choice(vclasses) for _ in range(n)]
    edges = [AQGEdge(rng.choice(eclasses), rng.randrange(i), i) for i in range(1, n)]
    perm = list(range(n))
    rng.shuffle(perm)
    # relabel so the storage order is arbitrary
    verts2 = [None] * n
    for old, new in enumerate(perm):
        verts2[new] = verts[old]
    edges2 = [AQGEdge(e.cls, perm[e.u], perm[e.v]) if rng.random() < 0.5 else AQGEdge(e.cls, perm[e.v], perm[e.u]) for e in edges]
    rng.shuffle(edges2)
    answer = rng.randrange(n)
    if answer_var:
        verts2[answer] = VertexClass.VAR
    return AQG(tuple(verts2), tuple(edges2), answer)  # type: ignore[arg-type]


def relabel(g: AQG, rng: random.Random) -> AQG:
    """Same graph, shuffled vertex ids and edge storage order."""
    n = len(g.vertices)
    perm = list(range(n))
    rng.shuffle(perm)
    verts = [None] * n
    for old, new in enumerate(perm):
        verts[new] = g.vertices[old]
    edges = [AQGEdge(e.cls, perm[e.v], perm[e.u]) for e in g.edges]
    rng.shuffle(edges)
    return AQG(tuple(verts), tuple(edges), perm[g.answer])  # type: ignore[arg-type]


# --------------------------------------------------------------------------- #
# query execution by nested loops


def _num(x: Any) -> float | None:
    return x if isinstance(x, float) else None


def nested_loop_execute(q: QueryGraph, kb: KnowledgeBase) -> frozenset:
    """Enumerate every assignment of KB nodes to variables, then filter."""
    term = {v.id: v.instance for v in q.vertices}
    is_var = {v.id: v.cls is VertexClass.VAR for v in q.vertices}
    count_vars = {e.v for e in q.edges if e.cls is EdgeClass.CNT and is_var[e.v]}
    for e in q.edges:
        if e.cls in (EdgeClass.REL, EdgeClass.ISA) and (e.u in count_vars or e.v in count_vars):
            return frozenset()
        if e.cls is EdgeClass.CNT and e.u in count_vars:
            return frozenset()
        if e.cls in (EdgeClass.CMP, EdgeClass.ORD) and (e.u in count_vars or e.v in count_vars):
            return frozenset()
    free = [v.id for v in q.vertices if is_var[v.id] and v.id not in count_vars]
    triples = kb.triples
    rows = []
    for combo in itertools.product(kb.nodes, repeat=len(free)):
        env = dict(zip(free, combo))

        def val(vid: int) -> Any:
            return env[vid] if vid in env else term[vid]

        ok = True
        for e in q.edges:
            if e.cls is EdgeClass.REL:
                s, o = (e.u, e.v) if e.direction == "uv" else (e.v, e.u)
                ok = Triple(val(s), e.instance, val(o)) in triples
            elif e.cls is EdgeClass.ISA:
                ok = Triple(val(e.u), RDF_TYPE, val(e.v)) in triples
            if not ok:
                break
        if ok:
            rows.append(env)

    def val_in(row: dict, vid: int) -> Any:
        return row[vid] if vid in row else term[vid]

    for e in sorted(q.edges, key=lambda e: e.id):
        if e.cls is EdgeClass.CMP:
            op = {"<": lambda a, b: a < b, ">": lambda a, b: a > b, "=": lambda a, b: a == b}[e.instance]
            rows = [
                r
                for r in rows
                if _num(val_in(r, e.u)) is not None
                and _num(val_in(r, e.v)) is not None
                and op(val_in(r, e.u), val_in(r, e.v))
            ]
    for e in sorted(q.edges, key=lambda e: e.id):
        if e.cls is EdgeClass.ORD:
            n = term[e.v]
            if not isinstance(n, float) or n < 1 or n != int(n):
                return frozenset()
            vals = sorted({val_in(r, e.u) for r in rows if _num(val_in(r, e.u)) is not None})
            if e.instance == "max_at_n":
                vals = vals[::-1]
            if int(n) > len(vals):
                return frozenset()
            rows = [r for r in rows if val_in(r, e.u) == vals[int(n) - 1] and _num(val_in(r, e.u)) is not None]
    counts: dict[int, float] = {}
    for e in sorted(q.edges, key=lambda e: e.id):
        if e.cls is not EdgeClass.CNT:
            continue
        c = float(len({(type(val_in(r, e.u)), val_in(r, e.u)) for r in rows}))
        if e.v in count_vars:
            if not rows or counts.setdefault(e.v, c) != c:
                return frozenset()
        elif isinstance(term[e.v], float):
            if c != term[e.v]:
                return frozenset()
        else:
            return frozenset()
    if q.answer in counts:
        return frozenset([counts[q.answer]])
    if q.answer in count_vars:
        return frozenset()
    return frozenset(r[q.answer] for r in rows)


# --------------------------------------------------------------------------- #
# random KBs, queries and linking


def random_kb(rng: random.Random, n_triples: int = 30, n_ent: int = 6, n_rel: int = 3) -> KnowledgeBase:
    ents = [f"E{i}" for i in range(n_ent)]
    rels = [f"p{i}" for i in range(n_rel)]
    types = ["T0", "T1"]
    rows = set()
    while len(rows) < n_triples:
        kind = rng.random()
        s = rng.choice(ents)
        if kind < 0.6:
            rows.add((s, rng.choice(rels), rng.choice(ents)))
        elif kind < 0.8:
            rows.add((s, RDF_TYPE, rng.choice(types)))
        else:
            rows.add((s, "score", float(rng.randint(1, 4))))
    return KnowledgeBase(rows)


def _edge_for(rng: random.Random, a: VertexClass, b: VertexClass) -> EdgeClass:
    """A plausible edge class between two vertex classes (occasionally odd ones)."""
    if rng.random() < 0.15:
        return rng.choice(ECLS)
    if VertexClass.TYPE in (a, b):
        return EdgeClass.ISA
    if VertexClass.NUM in (a, b):
        return rng.choice([EdgeClass.CMP, EdgeClass.ORD, EdgeClass.CNT])
    if a is VertexClass.VAR and b is VertexClass.VAR:
        return rng.choice([EdgeClass.REL, EdgeClass.REL, EdgeClass.REL, EdgeClass.CNT, EdgeClass.CMP])
    return EdgeClass.REL


def random_aqg(rng: random.Random, max_edges: int = 3) -> AQG:
    """Random AQG with a Var answer at id 0."""
    n = rng.randint(1, max_edges + 1)
    weights = [VertexClass.VAR] * 4 + [VertexClass.ENT] * 3 + [VertexClass.TYPE, VertexClass.NUM]
    verts = [VertexClass.VAR] + [rng.choice(weights) for _ in range(n - 1)]
    edges = []
    for i in range(1, n):
        parent = rng.randrange(i)
        edges.append(AQGEdge(_edge_for(rng, verts[parent], verts[i]), parent, i))
    return AQG(tuple(verts), tuple(edges), 0)


def instantiate(g: AQG, inst: dict[int, Any], rel: dict[int, tuple[str, str]], builtin: dict[int, str]) -> QueryGraph:
    """Grounded query for ``g`` with variables named after their vertex ids."""
    dist = answer_distances(len(g.vertices), [(e.u, e.v) for e in g.edges], g.answer)
    vertices = tuple(
        Vertex(i, c, f"?x{i}" if c is VertexClass.VAR else inst[i]) for i, c in enumerate(g.vertices)
    )
    edges = []
    for i, e in enumerate(g.edges):
        if e.cls is EdgeClass.REL:
            name, d = rel[i]
            edges.append(Edge(i, e.cls, e.u, e.v, name, d))
        else:
            x, y = builtin_orientation(g.vertices, dist, e.u, e.v)
            edges.append(Edge(i, e.cls, x, y, builtin[i], "none"))
    return QueryGraph(vertices, tuple(edges), g.answer)


def random_query(rng: random.Random, kb: KnowledgeBase, max_edges: int = 3) -> QueryGraph:
    g = random_aqg(rng, max_edges)
    ents = [n for n in kb.nodes if isinstance(n, str) and n.startswith("E")] or ["E0"]
    nums = [1.0, 2.0, 3.0, 4.0]
    inst = {}
    for i, c in enumerate(g.vertices):
        if c is VertexClass.ENT:
            inst[i] = rng.choice(ents)
        elif c is VertexClass.TYPE:
            inst[i] = rng.choice(["T0", "T1"])
        elif c is VertexClass.NUM:
            inst[i] = rng.choice(nums)
    rels = list(kb.relations) or ["p0"]
    rel = {i: (rng.choice(rels), rng.choice(["uv", "vu"])) for i, e in enumerate(g.edges) if e.cls is EdgeClass.REL}
    builtin = {i: rng.choice(BUILTIN_INSTANCES[e.cls]) for i, e in enumerate(g.edges) if e.cls is not EdgeClass.REL}
    return instantiate(g, inst, rel, builtin)


def random_linking(rng: random.Random, kb: KnowledgeBase) -> LinkingResults:
    ents = sorted(n for n in kb.nodes if isinstance(n, str) and n.startswith("E"))
    mentions = tuple(tuple(sorted(rng.sample(ents, min(len(ents), rng.randint(1, 2))))) for _ in range(rng.randint(0, 2)))
    types = tuple(sorted(rng.sample(["T0", "T1"], rng.randint(0, 2))))
    numbers = tuple(sorted(rng.sample([1.0, 2.0, 3.0], rng.randint(0, 2))))
    return LinkingResults(mentions, types, numbers)


# --------------------------------------------------------------------------- #
# grounding by full enumeration


def signature(q: QueryGraph) -> tuple:
    """Query identity that ignores variable names."""
    verts = tuple(None if v.cls is VertexClass.VAR else v.instance for v in sorted(q.vertices, key=lambda v: v.id))
    edges = tuple((e.id, e.u, e.v, e.instance, e.direction) for e in sorted(q.edges, key=lambda e: e.id))
    return verts, edges


def brute_ground(g: AQG, linking: LinkingResults, kb: KnowledgeBase) -> set[tuple]:
    """Every instance/direction assignment that executes nonempty."""
    if g.vertices[g.answer] is not VertexClass.VAR:
        return set()
    ent_ids = [i for i, c in enumerate(g.vertices) if c is VertexClass.ENT]
    type_ids = [i for i, c in enumerate(g.vertices) if c is VertexClass.TYPE]
    num_ids = [i for i, c in enumerate(g.vertices) if c is VertexClass.NUM]
    rel_ids = [i for i, e in enumerate(g.edges) if e.cls is EdgeClass.REL]
    bi_ids = [i for i, e in enumerate(g.edges) if e.cls is not EdgeClass.REL]
    relations = [r for r in kb.relations if r != RDF_TYPE]
    ent_choices = []
    for mentions in itertools.permutations(range(len(linking.entities)), len(ent_ids)):
        ent_choices.extend(itertools.product(*(linking.entities[m] for m in mentions)))
    out = set()
    for ents in ent_choices:
        for types in itertools.product(linking.types, repeat=len(type_ids)):
            for nums in itertools.product(linking.numbers, repeat=len(num_ids)):
                inst = dict(zip(ent_ids, ents)) | dict(zip(type_ids, types)) | dict(zip(num_ids, nums))
                for bis in itertools.product(*(BUILTIN_INSTANCES[g.edges[i].cls] for i in bi_ids)):
                    for rels in itertools.product(itertools.product(relations, ("uv", "vu")), repeat=len(rel_ids)):
                        q = instantiate(g, inst, dict(zip(rel_ids, rels)), dict(zip(bi_ids, bis)))
                        if execute(q, kb):
                            out.add(signature(q))
    return out
