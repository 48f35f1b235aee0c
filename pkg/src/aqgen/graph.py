"""Query graphs, abstract query graphs (AQGs) and their canonical codes."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Any, Iterable, Sequence


class VertexClass(str, Enum):
    ENT = "Ent"
    TYPE = "Type"
    NUM = "Num"
    VAR = "Var"


class EdgeClass(str, Enum):
    REL = "Rel"
    ORD = "Ord"
    CMP = "Cmp"
    CNT = "Cnt"
    ISA = "Isa"


# instance vocabularies of the built-in edge classes
BUILTIN_INSTANCES: dict[EdgeClass, tuple[str, ...]] = {
    EdgeClass.ORD: ("min_at_n", "max_at_n"),
    EdgeClass.CMP: ("<", ">", "="),
    EdgeClass.CNT: ("count",),
    EdgeClass.ISA: ("rdf:type",),
}

RDF_TYPE = "rdf:type"

DIRECTIONS = ("uv", "vu", "none")


class TreeError(ValueError):
    """Raised when a vertex/edge set is not a tree.

    ``reason`` is one of ``"disconnected"``, ``"cycle"``, ``"dangling-endpoint"``.
    """

    def __init__(self, reason: str, detail: str = ""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason


def validate_tree(n_vertices: int, edges: Iterable[tuple[int, int]]) -> None:
    """Raise :class:`TreeError` unless vertices ``0..n-1`` and ``edges`` form a tree."""
    edges = list(edges)
    for u, v in edges:
        if not (0 <= u < n_vertices and 0 <= v < n_vertices):
            raise TreeError("dangling-endpoint", f"edge ({u}, {v}) with {n_vertices} vertices")
    if n_vertices == 0:
        raise TreeError("disconnected", "empty graph")
    parent = list(range(n_vertices))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    components = n_vertices
    for u, v in edges:
        ru, rv = find(u), find(v)
        if ru == rv:
            raise TreeError("cycle", f"edge ({u}, {v}) closes a cycle")
        parent[ru] = rv
        components -= 1
    if components != 1:
        raise TreeError("disconnected", f"{components} components")


@dataclass(frozen=True)
class AQGEdge:
    cls: EdgeClass
    u: int
    v: int


@dataclass(frozen=True)
class AQG:
    """Abstract query graph: an undirected tree over class labels.

    Vertex ids are positions in ``vertices``; edge ids are positions in ``edges``.
    """

    vertices: tuple[VertexClass, ...]
    edges: tuple[AQGEdge, ...] = ()
    answer: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "vertices", tuple(VertexClass(c) for c in self.vertices))
        object.__setattr__(
            self, "edges", tuple(AQGEdge(EdgeClass(e.cls), e.u, e.v) for e in self.edges)
        )

    @classmethod
    def build(
        cls,
        vertices: Sequence[str | VertexClass],
        edges: Sequence[tuple[str | EdgeClass, int, int]] = (),
        answer: int = 0,
    ) -> AQG:
        return cls(
            tuple(VertexClass(v) for v in vertices),
            tuple(AQGEdge(EdgeClass(c), u, v) for c, u, v in edges),
            answer,
        )

    def __len__(self) -> int:
        return len(self.vertices)

    def validate(self) -> None:
        validate_tree(len(self.vertices), [(e.u, e.v) for e in self.edges])
        if not 0 <= self.answer < len(self.vertices):
            raise TreeError("dangling-endpoint", f"answer {self.answer}")

    def adjacency(self) -> list[list[tuple[int, int]]]:
        """Per vertex, the list of ``(neighbor, edge_id)`` pairs."""
        adj: list[list[tuple[int, int]]] = [[] for _ in self.vertices]
        for i, e in enumerate(self.edges):
            adj[e.u].append((e.v, i))
            adj[e.v].append((e.u, i))
        return adj

    def count(self, label: VertexClass | EdgeClass) -> int:
        pool = self.vertices if isinstance(label, VertexClass) else [e.cls for e in self.edges]
        return sum(1 for x in pool if x == label)

    def add_leaf(self, parent: int, vcls: VertexClass, ecls: EdgeClass) -> AQG:
        n = len(self.vertices)
        return AQG(self.vertices + (vcls,), self.edges + (AQGEdge(ecls, parent, n),), self.answer)

    def to_dict(self) -> dict[str, Any]:
        return {
            "vertices": [
                {"id": i, "class": c.value, "instance": None} for i, c in enumerate(self.vertices)
            ],
            "edges": [
                {"id": i, "class": e.cls.value, "instance": None, "u": e.u, "v": e.v, "dir": "none"}
                for i, e in enumerate(self.edges)
            ],
            "answer": self.answer,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> AQG:
        vs = sorted(d["vertices"], key=lambda x: x["id"])
        es = sorted(d["edges"], key=lambda x: x["id"])
        if [v["id"] for v in vs] != list(range(len(vs))):
            raise ValueError("vertex ids must be dense 0..n-1")
        return cls.build([v["class"] for v in vs], [(e["class"], e["u"], e["v"]) for e in es], d["answer"])


@dataclass(frozen=True)
class Vertex:
    id: int
    cls: VertexClass
    instance: str | float | None = None


@dataclass(frozen=True)
class Edge:
    """A query-graph edge.

    Rel edges are directed (``direction`` is ``"uv"`` for u→v or ``"vu"``).
    Built-in edges are stored in canonical orientation: ``u`` is the operand and
    ``v`` the constant / result side (see :func:`builtin_orientation`).
    """

    id: int
    cls: EdgeClass
    u: int
    v: int
    instance: str | None = None
    direction: str = "none"


@dataclass(frozen=True)
class QueryGraph:
    vertices: tuple[Vertex, ...]
    edges: tuple[Edge, ...]
    answer: int = 0

    def validate(self) -> None:
        validate_tree(len(self.vertices), [(e.u, e.v) for e in self.edges])
        if [v.id for v in self.vertices] != list(range(len(self.vertices))):
            raise ValueError("vertex ids must be dense 0..n-1")
        ans = self.vertices[self.answer]
        if ans.cls is not VertexClass.VAR or ans.instance != "?v0":
            raise ValueError("answer vertex must be the variable ?v0")
        for v in self.vertices:
            if v.cls is VertexClass.VAR and not (isinstance(v.instance, str) and v.instance.startswith("?")):
                raise ValueError(f"variable vertex {v.id} needs a ?name")
            if v.cls is VertexClass.NUM and not isinstance(v.instance, float):
                raise ValueError(f"number vertex {v.id} needs a numeric instance")
        for e in self.edges:
            if e.instance is None:
                raise ValueError(f"edge {e.id} is not instantiated")
            if e.cls is EdgeClass.REL:
                if e.direction not in ("uv", "vu"):
                    raise ValueError(f"Rel edge {e.id} must be directed")
            elif e.instance not in BUILTIN_INSTANCES[e.cls]:
                raise ValueError(f"edge {e.id}: {e.instance!r} is not a {e.cls.value} instance")

    @property
    def vertex_classes(self) -> tuple[VertexClass, ...]:
        return tuple(v.cls for v in self.vertices)

    def replace_edge(self, edge: Edge) -> QueryGraph:
        edges = list(self.edges)
        edges[edge.id] = edge
        return QueryGraph(self.vertices, tuple(edges), self.answer)

    def term(self, vid: int) -> str | float:
        """The pattern term of a vertex: variable name or constant."""
        v = self.vertices[vid]
        if v.cls is VertexClass.VAR:
            return str(v.instance)
        return v.instance  # type: ignore[return-value]

    def to_dict(self) -> dict[str, Any]:
        return {
            "vertices": [{"id": v.id, "class": v.cls.value, "instance": v.instance} for v in self.vertices],
            "edges": [
                {"id": e.id, "class": e.cls.value, "instance": e.instance, "u": e.u, "v": e.v, "dir": e.direction}
                for e in self.edges
            ],
            "answer": self.answer,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> QueryGraph:
        vertices = []
        for v in sorted(d["vertices"], key=lambda x: x["id"]):
            vc = VertexClass(v["class"])
            inst = v.get("instance")
            if vc is VertexClass.NUM and inst is not None:
                inst = float(inst)
            vertices.append(Vertex(v["id"], vc, inst))
        edges = tuple(
            Edge(e["id"], EdgeClass(e["class"]), e["u"], e["v"], e.get("instance"), e.get("dir", "none"))
            for e in sorted(d["edges"], key=lambda x: x["id"])
        )
        return cls(tuple(vertices), edges, d["answer"])

    def key(self) -> str:
        """Deterministic serialization, used for deduplication and ordering."""
        return json.dumps(self.to_dict(), sort_keys=True)


def abstract(q: QueryGraph) -> AQG:
    """Drop instances and Rel directions, keeping topology and the answer slot."""
    return AQG(
        tuple(v.cls for v in q.vertices),
        tuple(AQGEdge(e.cls, e.u, e.v) for e in q.edges),
        q.answer,
    )


def answer_distances(n: int, edges: Iterable[tuple[int, int]], answer: int) -> list[int]:
    adj: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    dist = [-1] * n
    dist[answer] = 0
    queue = deque([answer])
    while queue:
        x = queue.popleft()
        for y in adj[x]:
            if dist[y] < 0:
                dist[y] = dist[x] + 1
                queue.append(y)
    return dist


# higher rank ends up on the constant/result side of a built-in edge
_ORIENT_RANK = {VertexClass.NUM: 3, VertexClass.TYPE: 2, VertexClass.ENT: 1, VertexClass.VAR: 0}


def builtin_orientation(
    classes: Sequence[VertexClass], dist: Sequence[int], a: int, b: int
) -> tuple[int, int]:
    """Canonical ``(operand, value)`` orientation of an undirected built-in edge.

    Num beats Type beats Ent beats Var for the value slot; between equal classes
    the endpoint closer to the answer vertex is the value slot, so a Var-Cnt-Var
    edge touching ?v0 makes ?v0 the count.
    """
    ra, rb = _ORIENT_RANK[classes[a]], _ORIENT_RANK[classes[b]]
    if ra != rb:
        return (b, a) if ra > rb else (a, b)
    return (b, a) if dist[a] < dist[b] else (a, b)


def canonical_code(g: AQG) -> bytes:
    """Answer-rooted canonical encoding; equal codes iff the AQGs are isomorphic."""
    adj = g.adjacency()

    def encode(x: int, parent: int) -> str:
        parts = sorted(
            f"{g.edges[eid].cls.value}:{encode(y, x)}" for y, eid in adj[x] if y != parent
        )
        return f"{g.vertices[x].value}({','.join(parts)})"

    if not g.vertices:
        return b""
    return encode(g.answer, -1).encode()


def is_isomorphic(a: AQG, b: AQG) -> bool:
    return len(a.vertices) == len(b.vertices) and canonical_code(a) == canonical_code(b)
