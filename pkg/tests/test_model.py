import math
import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aqgen.autodiff import Tensor
from aqgen.config import GenerationConfig, Hyperparams
from aqgen.grammar import GenerationState, apply, build_ground_truth
from aqgen.graph import AQG, VertexClass
from aqgen.grounding import LinkingResults, is_groundable
from aqgen.kb import KnowledgeBase
from aqgen.model import (
    DecoderState,
    Mention,
    decode_step,
    encode_graph,
    encode_question,
    generate,
    init_params,
    load_word_vectors,
    loss,
    predict_add_edge,
    predict_add_vertex,
    predict_select_vertex,
    preprocess,
    teacher_forced,
)
from oracles import relabel
from strategies import aqgs

SMALL = Hyperparams(hidden=8, embedding=6, heads=2, graph_layers=2, seed=3)
VOCAB = ["who", "founded", "<e>", "movies", "after", "<n>", "what", "is"]


@pytest.fixture(scope="module")
def params():
    return init_params(SMALL, VOCAB)


def test_preprocess_examples():
    assert preprocess("who founded Acme", [Mention(12, 16, "entity")]) == ["who", "founded", "<e>"]
    assert preprocess("movies after 2008", [Mention(13, 17, "number")]) == ["movies", "after", "<n>"]
    assert preprocess("What is it?") == ["what", "is", "it"]


def test_preprocess_rejects_overlap():
    with pytest.raises(ValueError):
        preprocess("abcdef", [Mention(0, 3, "entity"), Mention(2, 5, "entity")])


def test_question_encoding_shape(params):
    enc = encode_question(["who"], params)
    assert enc.vectors.shape == (1, SMALL.hidden)
    with pytest.raises(ValueError):
        encode_question([], params)


def test_question_encoder_direction_symmetry(params):
    tokens = ["who", "founded", "<e>", "movies"]
    swapped = params.copy()
    for w in ("Wx", "Wh", "b"):
        swapped.arrays[f"qenc.fwd.{w}"], swapped.arrays[f"qenc.bwd.{w}"] = (
            swapped.arrays[f"qenc.bwd.{w}"],
            swapped.arrays[f"qenc.fwd.{w}"],
        )
    a = encode_question(tokens, params).vectors.value
    b = encode_question(tokens[::-1], swapped).vectors.value
    half = SMALL.hidden // 2
    np.testing.assert_allclose(b[::-1], np.concatenate([a[:, half:], a[:, :half]], axis=1), atol=1e-12)


def test_zero_embeddings_give_identical_rows_per_direction(params):
    p = params.copy()
    p.arrays["emb.word"].value[:] = 0.0
    enc = encode_question(["who", "is", "what"], p).vectors.value
    # the forward half only sees the (identical) inputs and its own state
    assert not np.allclose(enc, 0.0)
    np.testing.assert_allclose(enc[0], encode_question(["what", "is", "who"], p).vectors.value[0])


def test_empty_graph_returns_learned_vector(params):
    enc = encode_graph(AQG(()), params)
    assert enc.h_g is params["genc.empty"]


def test_single_vertex_graph_readout(params):
    enc = encode_graph(AQG.build(["Var"]), params)
    assert enc.vertices.shape == (1, SMALL.hidden)
    np.testing.assert_allclose(enc.h_g.value, enc.vertices.value[0])


@given(aqgs(max_vertices=7), st.randoms(use_true_random=False))
def test_graph_encoder_permutation_equivariance(g, rng):
    params = init_params(SMALL, VOCAB)
    n = len(g.vertices)
    perm = list(range(n))
    rng.shuffle(perm)
    verts = [None] * n
    for old, new in enumerate(perm):
        verts[new] = g.vertices[old]
    edges = [type(e)(e.cls, perm[e.u], perm[e.v]) for e in g.edges]
    h = AQG(tuple(verts), tuple(edges), perm[g.answer])
    a, b = encode_graph(g, params), encode_graph(h, params)
    np.testing.assert_allclose(a.h_g.value, b.h_g.value, atol=1e-10)
    np.testing.assert_allclose(a.vertices.value, b.vertices.value[perm], atol=1e-10)


def test_attention_single_token(params):
    q = encode_question(["who"], params)
    _, _, alpha = decode_step(DecoderState(q.final, Tensor(np.zeros(SMALL.hidden))), params["genc.empty"], q.vectors, params)
    assert alpha.value.tolist() == [1.0]


def test_attention_uniform_on_identical_tokens(params):
    rows = Tensor(np.tile(np.arange(SMALL.hidden, dtype=float), (4, 1)))
    _, _, alpha = decode_step(DecoderState(Tensor(np.zeros(SMALL.hidden)), Tensor(np.zeros(SMALL.hidden))), params["genc.empty"], rows, params)
    np.testing.assert_allclose(alpha.value, 0.25)


def test_uniform_heads(params):
    p = params.copy()
    p.arrays["head.vertex"].value[:] = 0.7
    probs = predict_add_vertex(Tensor(np.ones(SMALL.hidden)), p)
    np.testing.assert_allclose(probs, 0.2)


def test_scaling_preserves_argmax(params):
    rng = np.random.default_rng(0)
    for _ in range(20):
        h = Tensor(rng.normal(size=SMALL.hidden))
        for fn in (predict_add_vertex, predict_add_edge):
            base = fn(h, params)
            assert abs(base.sum() - 1) < 1e-9
            assert np.argmax(fn(Tensor(h.value * 3.7), params)) == np.argmax(base)


def test_select_vertex_masking():
    rng = np.random.default_rng(1)
    vv = Tensor(rng.normal(size=(2, 4)))
    h = Tensor(rng.normal(size=4))
    probs = predict_select_vertex(h, vv, pending=1)
    assert probs.tolist() == [1.0, 0.0]
    with pytest.raises(ValueError):
        predict_select_vertex(h, Tensor(rng.normal(size=(1, 4))), pending=0)


def test_select_vertex_matches_scalar_softmax():
    rng = np.random.default_rng(2)
    for _ in range(50):
        n = int(rng.integers(2, 7))
        vv = rng.normal(size=(n, 5))
        h = rng.normal(size=5)
        pending = int(rng.integers(0, n))
        probs = predict_select_vertex(Tensor(h), Tensor(vv), pending)
        scores = [sum(vv[i][k] * h[k] for k in range(5)) for i in range(n)]
        top = max(s for i, s in enumerate(scores) if i != pending)
        exps = [0.0 if i == pending else math.exp(s - top) for i, s in enumerate(scores)]
        total = sum(exps)
        assert probs[pending] == 0.0
        for i in range(n):
            assert abs(probs[i] - exps[i] / total) <= 1e-9


def test_loss_closed_form_under_uniform_heads(params):
    p = params.copy()
    p.arrays["head.vertex"].value[:] = 0.0
    value = float(loss(["who", "is"], ["Var", "End"], p).value)
    assert value == pytest.approx(2 * math.log(5), abs=1e-12)


def test_loss_is_nonnegative(params):
    rng = random.Random(0)
    for _ in range(10):
        g = AQG.build(["Var", "Ent", "Type"], [("Rel", 0, 1), ("Isa", 0, 2)])
        actions = build_ground_truth(g, "random", seed=rng.randint(0, 99))
        res = teacher_forced(["what", "is", "<e>"], actions, params)
        assert float(res.loss.value) >= 0 and 0 <= res.correct <= res.total == len(actions)


def test_generate_is_deterministic(params):
    toks = ["who", "founded", "<e>"]
    a = generate(toks, params, config=GenerationConfig(kb_constraint=False))
    b = generate(toks, params, config=GenerationConfig(kb_constraint=False))
    assert a == b
    assert len(a.vertices) <= GenerationConfig().max_vertices


def test_generate_respects_kb_constraint():
    kb = KnowledgeBase([("A", "p", "B"), ("B", "rdf:type", "T"), ("C", "q", "A"), ("B", "age", 4.0)])
    linking = LinkingResults((("A",),), ("T",), (4.0,))
    for seed in range(15):
        params = init_params(Hyperparams(hidden=8, embedding=6, heads=2, graph_layers=2, seed=seed), VOCAB)
        g = generate(["who", "is", "<e>"], params, linking, kb, GenerationConfig())
        assert is_groundable(g, linking, kb)
        assert g.vertices[g.answer] is VertexClass.VAR


def test_generate_ablation_switches_run():
    for flags in ({"use_attention": False}, {"use_skip": False}, {"use_graph_encoder": False}):
        params = init_params(Hyperparams(hidden=8, embedding=6, heads=2, graph_layers=2, **flags), VOCAB)
        g = generate(["who", "is"], params, config=GenerationConfig(kb_constraint=False))
        g.validate()


def test_word_vector_loader(tmp_path, params):
    p = params.copy()
    path = tmp_path / "vec.txt"
    path.write_text("who " + " ".join(["0.5"] * SMALL.embedding) + "\nbad 1 2\nzzz " + " ".join(["1"] * SMALL.embedding) + "\n")
    assert load_word_vectors(str(path), p) == 1
    assert np.all(p["emb.word"].value[p.index["who"]] == 0.5)


def test_pending_vertex_state_shape():
    s = apply(apply(GenerationState(), "Var"), "Ent")
    assert s.pending_vertex == 1
