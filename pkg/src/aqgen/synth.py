"""Synthetic KB and templated questions with gold query graphs.

Questions are realized from templates over four complexity levels (level =
number of edges in the gold query).  Every gold query is executed while the
record is built, so its answer set is never empty.
"""

from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable

from .data import DatasetRecord
from .graph import RDF_TYPE, Edge, EdgeClass, QueryGraph, Vertex, VertexClass
from .grounding import LinkingResults
from .kb import KnowledgeBase, Triple, execute, format_term
from .model import Mention

TYPE_WORDS = ["person", "city", "film", "company", "country", "book", "team", "album", "river", "school"]
RELATION_WORDS = [
    "founder", "director", "capital", "author", "member", "coach", "producer", "spouse",
    "location", "owner", "leader", "sponsor", "editor", "mayor", "rival", "partner",
    "designer", "publisher", "mentor", "successor",
]
ATTRIBUTE_WORDS = ["population", "height", "budget", "revenue", "age", "area"]
_SYLLABLES = ["ka", "zu", "mor", "bel", "tri", "vo", "nix", "dra", "pel", "qua", "ros", "tem", "lu", "gar", "fen", "sho"]


class SynthError(ValueError):
    pass


@dataclass
class SynthSpec:
    n_entities: int = 60
    n_types: int = 6
    n_relations: int = 12
    n_attributes: int = 3
    triples_per_relation: int = 20
    attribute_density: float = 0.7
    levels: tuple[int, ...] = (1, 2, 3)
    templates: tuple[str, ...] | None = None
    n_train: int = 500
    n_dev: int = 50
    n_test: int = 100
    entity_distractors: int = 1
    type_distractors: int = 1

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> SynthSpec:
        d = dict(d)
        for key in ("levels", "templates"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        return cls(**d)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class SynthWorld:
    kb: KnowledgeBase
    entity_type: dict[str, str]
    relations: dict[str, tuple[str, str]]  # name -> (domain type, range type)
    attributes: list[str]
    types: list[str]
    out_edges: dict[str, list[tuple[str, str]]] = field(default_factory=dict)
    in_edges: dict[str, list[tuple[str, str]]] = field(default_factory=dict)
    attr_values: dict[str, dict[str, float]] = field(default_factory=dict)


def _names(rng: random.Random, n: int) -> list[str]:
    out: set[str] = set()
    while len(out) < n:
        k = rng.choice([2, 3])
        out.add("".join(rng.choice(_SYLLABLES) for _ in range(k)).capitalize())
    return sorted(out)


def build_world(spec: SynthSpec, rng: random.Random) -> SynthWorld:
    if spec.n_types > len(TYPE_WORDS) or spec.n_relations > len(RELATION_WORDS):
        raise SynthError("not enough surface words for the requested vocabulary")
    if spec.n_attributes > len(ATTRIBUTE_WORDS):
        raise SynthError("not enough attribute words")
    types = TYPE_WORDS[: spec.n_types]
    names = _names(rng, spec.n_entities)
    entity_type = {e: types[i % len(types)] for i, e in enumerate(names)}
    by_type: dict[str, list[str]] = {t: [e for e in names if entity_type[e] == t] for t in types}
    relations = {}
    for r in RELATION_WORDS[: spec.n_relations]:
        relations[r] = (rng.choice(types), rng.choice(types))
    triples: set[Triple] = {Triple(e, RDF_TYPE, t) for e, t in entity_type.items()}
    for r, (dom, rng_t) in relations.items():
        for _ in range(spec.triples_per_relation):
            s, o = rng.choice(by_type[dom]), rng.choice(by_type[rng_t])
            if s != o:
                triples.add(Triple(s, r, o))
    attributes = ATTRIBUTE_WORDS[: spec.n_attributes]
    attr_values: dict[str, dict[str, float]] = {a: {} for a in attributes}
    for a in attributes:
        for e in names:
            if rng.random() < spec.attribute_density:
                v = float(rng.randint(1, 200))
                attr_values[a][e] = v
                triples.add(Triple(e, a, v))
    world = SynthWorld(KnowledgeBase(triples), entity_type, relations, attributes, types, attr_values=attr_values)
    for t in sorted(world.kb.triples, key=lambda t: (t.s, t.p, format_term(t.o))):
        if t.p in relations:
            world.out_edges.setdefault(t.s, []).append((t.p, t.o))  # type: ignore[arg-type]
            world.in_edges.setdefault(t.o, []).append((t.p, t.s))  # type: ignore[arg-type]
    return world


# --------------------------------------------------------------------------- #
# query construction helpers


class _Builder:
    def __init__(self) -> None:
        self.vertices: list[Vertex] = [Vertex(0, VertexClass.VAR, "?v0")]
        self.edges: list[Edge] = []
        self._vars = 1

    def var(self) -> int:
        vid = len(self.vertices)
        self.vertices.append(Vertex(vid, VertexClass.VAR, f"?v{self._vars}"))
        self._vars += 1
        return vid

    def const(self, cls: VertexClass, value: Any) -> int:
        vid = len(self.vertices)
        self.vertices.append(Vertex(vid, cls, value))
        return vid

    def rel(self, s: int, r: str, o: int) -> None:
        self.edges.append(Edge(len(self.edges), EdgeClass.REL, s, o, r, "uv"))

    def builtin(self, cls: EdgeClass, x: int, instance: str, y: int) -> None:
        self.edges.append(Edge(len(self.edges), cls, x, y, instance, "none"))

    def build(self) -> QueryGraph:
        q = QueryGraph(tuple(self.vertices), tuple(self.edges), 0)
        q.validate()
        return q


@dataclass
class _Draft:
    question: str
    query: QueryGraph
    entity_mentions: list[str]
    number_mentions: list[str] = field(default_factory=list)
    types: list[str] = field(default_factory=list)
    numbers: list[float] = field(default_factory=list)


def _pick_path(world: SynthWorld, rng: random.Random, hops: int) -> list[tuple[str, str, str]] | None:
    """A random forward path ``E -r1-> X1 -r2-> X2 ...`` with distinct relations."""
    starts = sorted(world.out_edges)
    s = rng.choice(starts)
    path = []
    for _ in range(hops):
        options = [(r, o) for r, o in world.out_edges.get(s, []) if r not in {p[1] for p in path}]
        if not options:
            return None
        r, o = rng.choice(options)
        path.append((s, r, o))
        s = o
    return path


def _chain(world: SynthWorld, rng: random.Random, hops: int, typed: bool = False) -> _Draft | None:
    path = _pick_path(world, rng, hops)
    if path is None:
        return None
    b = _Builder()
    # vertex ids: answer 0, hidden variables outward, then the entity
    chain_vars = [0] + [b.var() for _ in range(hops - 1)]
    ent = b.const(VertexClass.ENT, path[0][0])
    nodes = [ent] + list(reversed(chain_vars))
    for (s, r, o), a, c in zip(path, nodes, nodes[1:]):
        b.rel(a, r, c)
    phrase = " of the ".join(r for _, r, _ in reversed(path))
    name = path[0][0]
    if typed:
        t = world.entity_type[path[-1][2]]
        tv = b.const(VertexClass.TYPE, t)
        b.builtin(EdgeClass.ISA, 0, "rdf:type", tv)
        return _Draft(f"which {t} is the {phrase} of {name}", b.build(), [name], types=[t])
    return _Draft(f"what is the {phrase} of {name}", b.build(), [name])


def t_forward(world, rng):
    return _chain(world, rng, 1)


def t_backward(world, rng):
    o = rng.choice(sorted(world.in_edges))
    r, _ = rng.choice(world.in_edges[o])
    b = _Builder()
    ent = b.const(VertexClass.ENT, o)
    b.rel(0, r, ent)
    return _Draft(f"whose {r} is {o}", b.build(), [o])


def t_type(world, rng):
    t = rng.choice(world.types)
    b = _Builder()
    tv = b.const(VertexClass.TYPE, t)
    b.builtin(EdgeClass.ISA, 0, "rdf:type", tv)
    return _Draft(f"list every {t}", b.build(), [], types=[t])


def t_chain2(world, rng):
    return _chain(world, rng, 2)


def t_typed(world, rng):
    return _chain(world, rng, 1, typed=True)


def t_star(world, rng):
    s = rng.choice(sorted(world.out_edges))
    outs = world.out_edges[s]
    rels = sorted({r for r, _ in outs})
    if len(rels) < 2:
        return None
    r1, r2 = rng.sample(rels, 2)
    o1 = rng.choice([o for r, o in outs if r == r1])
    o2 = rng.choice([o for r, o in outs if r == r2])
    if o1 == o2:
        return None
    b = _Builder()
    e1 = b.const(VertexClass.ENT, o1)
    e2 = b.const(VertexClass.ENT, o2)
    b.rel(0, r1, e1)
    b.rel(0, r2, e2)
    return _Draft(f"whose {r1} is {o1} and whose {r2} is {o2}", b.build(), [o1, o2])


def _count(world, rng, hops: int):
    path = _pick_path(world, rng, hops)
    if path is None:
        return None
    b = _Builder()
    counted = b.var()
    hidden = [b.var() for _ in range(hops - 1)]
    ent = b.const(VertexClass.ENT, path[0][0])
    b.builtin(EdgeClass.CNT, counted, "count", 0)
    nodes = [ent] + list(reversed(hidden)) + [counted]
    for (s, r, o), a, c in zip(path, nodes, nodes[1:]):
        b.rel(a, r, c)
    name = path[0][0]
    if hops == 1:
        return _Draft(f"how many {path[0][1]} does {name} have", b.build(), [name])
    return _Draft(f"how many {path[1][1]} do the {path[0][1]} of {name} have", b.build(), [name])


def t_count(world, rng):
    return _count(world, rng, 1)


def t_count_chain(world, rng):
    return _count(world, rng, 2)


def _number_text(v: float) -> str:
    return format_term(v)


def t_compare(world, rng):
    if not world.attributes:
        raise SynthError("comparison template needs numeric attributes")
    a = rng.choice(world.attributes)
    values = sorted(set(world.attr_values[a].values()))
    if len(values) < 2:
        return None
    n = rng.choice(values[:-1])
    op, word = rng.choice([(">", "greater than"), ("<", "less than")])
    b = _Builder()
    x = b.var()
    num = b.const(VertexClass.NUM, n)
    b.rel(0, a, x)
    b.builtin(EdgeClass.CMP, x, op, num)
    text = _number_text(n)
    return _Draft(f"which entity has {a} {word} {text}", b.build(), [], [text], numbers=[n])


def t_chain3(world, rng):
    return _chain(world, rng, 3)


def t_typed_chain(world, rng):
    return _chain(world, rng, 2, typed=True)


def t_typed_chain3(world, rng):
    return _chain(world, rng, 3, typed=True)


def _attribute_of(world, rng, typed: bool, kind: str):
    if not world.attributes:
        raise SynthError(f"{kind} template needs numeric attributes")
    path = _pick_path(world, rng, 1)
    if path is None:
        return None
    e, r, _ = path[0]
    a = rng.choice(world.attributes)
    b = _Builder()
    ent = b.const(VertexClass.ENT, e)
    x = b.var()
    b.rel(ent, r, 0)
    b.rel(0, a, x)
    lead = f"which {r} of {e}"
    types: list[str] = []
    if typed:
        t = world.entity_type[path[0][2]]
        tv = b.const(VertexClass.TYPE, t)
        b.builtin(EdgeClass.ISA, 0, "rdf:type", tv)
        lead = f"which {t} among the {r} of {e}"
        types = [t]
    if kind == "ordinal":
        rank = rng.choice([1, 1, 2])
        op, word = rng.choice([("max_at_n", "largest"), ("min_at_n", "smallest")])
        num = b.const(VertexClass.NUM, float(rank))
        b.builtin(EdgeClass.ORD, x, op, num)
        ordinal = "the" if rank == 1 else "the second"
        return _Draft(f"{lead} has {ordinal} {word} {a}", b.build(), [e], types=types, numbers=[float(rank)])
    values = sorted(set(world.attr_values[a].values()))
    n = rng.choice(values[: max(1, len(values) // 2)])
    num = b.const(VertexClass.NUM, n)
    b.builtin(EdgeClass.CMP, x, ">", num)
    text = _number_text(n)
    return _Draft(f"{lead} has {a} greater than {text}", b.build(), [e], [text], types=types, numbers=[n])


def t_ordinal(world, rng):
    return _attribute_of(world, rng, False, "ordinal")


def t_filter(world, rng):
    return _attribute_of(world, rng, False, "filter")


def t_ordinal_typed(world, rng):
    return _attribute_of(world, rng, True, "ordinal")


TEMPLATES: dict[int, dict[str, Callable]] = {
    1: {"forward": t_forward, "backward": t_backward, "type": t_type},
    2: {"chain": t_chain2, "typed": t_typed, "star": t_star, "count": t_count, "compare": t_compare},
    3: {
        "chain3": t_chain3,
        "ordinal": t_ordinal,
        "typed_chain": t_typed_chain,
        "count_chain": t_count_chain,
        "filter": t_filter,
    },
    4: {"typed_chain3": t_typed_chain3, "ordinal_typed": t_ordinal_typed},
}


def _realize(draft: _Draft, world: SynthWorld, rng: random.Random, spec: SynthSpec, rid: str) -> DatasetRecord | None:
    answers = execute(draft.query, world.kb)
    if not answers:
        return None
    q = draft.question
    mentions: list[Mention] = []
    cursor = 0
    for surface, kind in [(e, "entity") for e in draft.entity_mentions] + [(n, "number") for n in draft.number_mentions]:
        start = q.find(surface, cursor if kind == "entity" else 0)
        if start < 0:
            return None
        mentions.append(Mention(start, start + len(surface), kind))
        if kind == "entity":
            cursor = start + len(surface)
    mentions.sort(key=lambda m: m.start)
    for a, b in zip(mentions, mentions[1:]):
        if b.start < a.end:
            return None
    entities = sorted(world.entity_type)
    ent_sets = []
    for e in draft.entity_mentions:
        pool = [x for x in entities if x != e]
        cands = [e] + rng.sample(pool, min(spec.entity_distractors, len(pool)))
        ent_sets.append(tuple(sorted(cands)))
    types: list[str] = []
    if draft.types:
        pool = [t for t in world.types if t not in draft.types]
        types = sorted(draft.types + rng.sample(pool, min(spec.type_distractors, len(pool))))
    linking = LinkingResults(tuple(ent_sets), tuple(types), tuple(draft.numbers))
    return DatasetRecord(rid, q, mentions, linking, draft.query, frozenset(answers))


def synth_generate(spec: SynthSpec, seed: int = 0) -> tuple[KnowledgeBase, dict[str, list[DatasetRecord]]]:
    """Deterministic synthetic KB plus train/dev/test records."""
    rng = random.Random(seed)
    for lvl in spec.levels:
        if lvl not in TEMPLATES:
            raise SynthError(f"no templates for level {lvl}")
    pool = [(lvl, name, fn) for lvl in spec.levels for name, fn in TEMPLATES[lvl].items()]
    if spec.templates is not None:
        pool = [p for p in pool if p[1] in spec.templates]
        if not pool:
            raise SynthError("template filter leaves nothing to generate")
    needs_numbers = {"compare", "ordinal", "filter", "ordinal_typed"}
    if spec.n_attributes == 0 and any(name in needs_numbers for _, name, _ in pool):
        raise SynthError("numeric templates requested but the KB has no numeric attributes")
    world = build_world(spec, rng)
    by_level: dict[int, list[tuple[str, Callable]]] = {}
    for lvl, name, fn in pool:
        by_level.setdefault(lvl, []).append((name, fn))
    levels = sorted(by_level)
    total = spec.n_train + spec.n_dev + spec.n_test
    records: list[DatasetRecord] = []
    failures = 0
    while len(records) < total:
        lvl = rng.choice(levels)
        name, fn = rng.choice(by_level[lvl])
        draft = fn(world, rng)
        rec = _realize(draft, world, rng, spec, f"q{len(records):05d}") if draft is not None else None
        if rec is None:
            failures += 1
            if failures > 200 * total + 1000:
                raise SynthError("could not realize enough questions for this spec")
            continue
        records.append(rec)
    splits = {
        "train": records[: spec.n_train],
        "dev": records[spec.n_train : spec.n_train + spec.n_dev],
        "test": records[spec.n_train + spec.n_dev :],
    }
    return world.kb, splits


def load_spec(path: str | Path) -> SynthSpec:
    return SynthSpec.from_dict(json.loads(Path(path).read_text()))
