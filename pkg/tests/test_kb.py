import random

import pytest

from aqgen.graph import Edge, EdgeClass, QueryGraph, Vertex, VertexClass
from aqgen.kb import (
    KnowledgeBase,
    Pattern,
    Triple,
    TripleParseError,
    execute,
    load_triples,
    parse_object,
    relation_candidates,
    save_triples,
    solve_patterns,
    to_sparql,
)
from oracles import nested_loop_execute, random_kb, random_query


def q_of(vertices, edges, answer=0):
    return QueryGraph(
        tuple(Vertex(i, VertexClass(c), inst) for i, (c, inst) in enumerate(vertices)),
        tuple(Edge(i, EdgeClass(c), u, v, inst, d) for i, (c, u, v, inst, d) in enumerate(edges)),
        answer,
    )


SCORES = KnowledgeBase([("A", "score", 3.0), ("B", "score", 7.0), ("C", "score", 5.0)])


def test_parse_object():
    assert parse_object("42") == 42.0
    assert parse_object("-1.5") == -1.5
    assert parse_object('"hello"') == '"hello"'
    assert parse_object("Berlin") == "Berlin"


def test_load_empty_and_duplicates(tmp_path):
    p = tmp_path / "kb.tsv"
    p.write_text("")
    assert len(load_triples(p)) == 0
    p.write_text("A\tp\tB\nA\tp\tB\n")
    assert len(load_triples(p)) == 1


def test_load_reports_line_number(tmp_path):
    p = tmp_path / "kb.tsv"
    p.write_text("A\tp\tB\nbroken line\n")
    with pytest.raises(TripleParseError) as err:
        load_triples(p)
    assert err.value.lineno == 2


def test_load_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_triples(tmp_path / "nope.tsv")


def test_indexes_agree_with_scan(tmp_path):
    p = tmp_path / "kb.tsv"
    p.write_text("A\tp\tB\nA\tq\tC\nB\tp\tC\nC\tage\t30\nB\trdf:type\tPerson\n")
    kb = load_triples(p)
    assert len(kb) == 5
    rows = [(t.s, t.p, t.o) for t in kb.triples]
    for s in ("A", "B", "C", None):
        for pr in ("p", "q", "age", "rdf:type", None):
            for o in ("B", "C", 30.0, "Person", None):
                scan = {r for r in rows if (s is None or r[0] == s) and (pr is None or r[1] == pr) and (o is None or r[2] == o)}
                assert set(kb.match(s, pr, o)) == scan
    save_triples(kb, tmp_path / "out.tsv")
    assert load_triples(tmp_path / "out.tsv").triples == kb.triples


def test_direction_matters():
    kb = KnowledgeBase([("A", "p", "B")])
    inbound = q_of([("Var", "?v0"), ("Ent", "A")], [("Rel", 0, 1, "p", "vu")])
    outbound = q_of([("Var", "?v0"), ("Ent", "A")], [("Rel", 0, 1, "p", "uv")])
    assert execute(inbound, kb) == {"B"}
    assert execute(outbound, kb) == frozenset()


def test_ord_max_at_1():
    q = q_of(
        [("Var", "?v0"), ("Var", "?v1"), ("Num", 1.0)],
        [("Rel", 0, 1, "score", "uv"), ("Ord", 1, 2, "max_at_n", "none")],
    )
    assert execute(q, SCORES) == {"B"}


def test_ord_second_smallest_and_out_of_range():
    q = q_of(
        [("Var", "?v0"), ("Var", "?v1"), ("Num", 2.0)],
        [("Rel", 0, 1, "score", "uv"), ("Ord", 1, 2, "min_at_n", "none")],
    )
    assert execute(q, SCORES) == {"C"}
    far = q_of(
        [("Var", "?v0"), ("Var", "?v1"), ("Num", 9.0)],
        [("Rel", 0, 1, "score", "uv"), ("Ord", 1, 2, "min_at_n", "none")],
    )
    assert execute(far, SCORES) == frozenset()


def test_count_with_filter():
    # ?v0 = count of ?v1 with score > 4
    q = q_of(
        [("Var", "?v0"), ("Var", "?v1"), ("Var", "?v2"), ("Num", 4.0)],
        [("Cnt", 1, 0, "count", "none"), ("Rel", 1, 2, "score", "uv"), ("Cmp", 2, 3, ">", "none")],
    )
    assert execute(q, SCORES) == {2.0}
    assert nested_loop_execute(q, SCORES) == {2.0}


def test_count_assertion_with_number():
    kb = KnowledgeBase([("A", "child", "X"), ("A", "child", "Y"), ("B", "child", "Z")])
    q = q_of(
        [("Var", "?v0"), ("Var", "?v1"), ("Num", 2.0)],
        [("Rel", 0, 1, "child", "uv"), ("Cnt", 1, 2, "count", "none")],
    )
    # the count is over the whole result set: X, Y and Z
    assert execute(q, kb) == frozenset()
    q3 = q_of(
        [("Var", "?v0"), ("Var", "?v1"), ("Num", 3.0)],
        [("Rel", 0, 1, "child", "uv"), ("Cnt", 1, 2, "count", "none")],
    )
    assert execute(q3, kb) == {"A", "B"}


def test_count_of_nothing_is_empty():
    q = q_of(
        [("Var", "?v0"), ("Var", "?v1"), ("Ent", "Nobody")],
        [("Cnt", 1, 0, "count", "none"), ("Rel", 1, 2, "p", "uv")],
    )
    assert execute(q, SCORES) == frozenset()


def test_compare_on_strings_is_empty():
    kb = KnowledgeBase([("A", "name", '"x"')])
    q = q_of(
        [("Var", "?v0"), ("Var", "?v1"), ("Num", 1.0)],
        [("Rel", 0, 1, "name", "uv"), ("Cmp", 1, 2, ">", "none")],
    )
    assert execute(q, kb) == frozenset()


def test_lone_variable_matches_every_node():
    kb = KnowledgeBase([("A", "p", "B")])
    assert execute(q_of([("Var", "?v0")], []), kb) == {"A", "B"}
    assert execute(q_of([("Var", "?v0")], []), KnowledgeBase()) == frozenset()


def test_relation_candidates_examples():
    kb = KnowledgeBase([("A", "p", "B"), ("C", "q", "A")])
    out_of_a = q_of([("Var", "?v0"), ("Ent", "A")], [("Rel", 0, 1, None, "vu")])
    into_a = q_of([("Var", "?v0"), ("Ent", "A")], [("Rel", 0, 1, None, "uv")])
    assert relation_candidates(out_of_a, 0, kb) == {"p"}
    assert relation_candidates(into_a, 0, kb) == {"q"}
    assert relation_candidates(into_a, 0, KnowledgeBase()) == set()


def test_relation_candidates_match_full_enumeration():
    rng = random.Random(11)
    checked = 0
    for _ in range(150):
        kb = random_kb(rng, rng.randint(5, 30))
        q = random_query(rng, kb)
        for e in q.edges:
            if e.cls is EdgeClass.REL:
                expect = {
                    r for r in kb.relations if r != "rdf:type"
                    and execute(q.replace_edge(Edge(e.id, e.cls, e.u, e.v, r, e.direction)), kb)
                }
                assert relation_candidates(q, e.id, kb) == expect
                checked += 1
    assert checked > 50


def test_execution_matches_nested_loops():
    rng = random.Random(5)
    seen = {c: 0 for c in ("Cmp", "Ord", "Cnt")}
    for _ in range(200):
        kb = random_kb(rng, rng.randint(5, 30))
        q = random_query(rng, kb)
        got = execute(q, kb)
        assert got == nested_loop_execute(q, kb), q.to_dict()
        for e in q.edges:
            if e.cls.value in seen and got:
                seen[e.cls.value] += 1
    assert all(v > 0 for v in seen.values()), seen


def test_compare_filter_never_enlarges():
    rng = random.Random(8)
    for _ in range(100):
        kb = random_kb(rng, 25)
        q = random_query(rng, kb, max_edges=2)
        vars_ = [v.id for v in q.vertices if v.cls is VertexClass.VAR]
        n = len(q.vertices)
        tgt = rng.choice(vars_)
        extra = QueryGraph(
            q.vertices + (Vertex(n, VertexClass.NUM, 2.0),),
            q.edges + (Edge(len(q.edges), EdgeClass.CMP, tgt, n, rng.choice("<>="), "none"),),
            q.answer,
        )
        before = execute(q, kb)
        if any(e.cls is EdgeClass.CNT for e in q.edges):
            continue
        assert execute(extra, kb) <= before


def test_insertion_order_independent():
    rng = random.Random(2)
    kb = random_kb(rng, 40)
    rows = [(t.s, t.p, t.o) for t in kb.triples]
    rng.shuffle(rows)
    kb2 = KnowledgeBase(rows)
    for _ in range(50):
        q = random_query(rng, kb)
        assert execute(q, kb) == execute(q, kb2)


def test_solve_patterns_free_vars():
    kb = KnowledgeBase([("A", "p", "B")])
    rows = solve_patterns([Pattern("?x", "p", "?y")], kb, ["?x", "?y", "?z"])
    assert len(rows) == 2 and {r["?z"] for r in rows} == {"A", "B"}


def test_sparql_text():
    q = q_of([("Var", "?v0"), ("Ent", "A")], [("Rel", 0, 1, "p", "vu")])
    assert "<A> <p> ?v0 ." in to_sparql(q)
    typed = q_of([("Var", "?v0"), ("Type", "T")], [("Isa", 0, 1, "rdf:type", "none")])
    assert "rdf:type <T>" in to_sparql(typed)
    ordq = q_of(
        [("Var", "?v0"), ("Var", "?v1"), ("Num", 2.0)],
        [("Rel", 0, 1, "score", "uv"), ("Ord", 1, 2, "max_at_n", "none")],
    )
    assert "OFFSET 1 LIMIT 1" in to_sparql(ordq)


def test_triple_is_hashable_value():
    assert Triple("A", "p", 1.0) in KnowledgeBase([("A", "p", 1.0)])
