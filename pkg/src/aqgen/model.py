"""Neural AQG generator: question encoder, graph encoder, attention decoder and
three pointer-style prediction heads."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .config import GenerationConfig, Hyperparams
from .grammar import (
    EDGE_LABELS,
    END,
    VERTEX_LABELS,
    Action,
    GenerationState,
    OperatorKind,
    apply,
)
from .graph import AQG, EdgeClass, VertexClass
from .grounding import LinkingResults, attach_type, is_groundable
from .kb import KnowledgeBase

PAD, UNK, ENT_TOKEN, NUM_TOKEN = "<pad>", "<unk>", "<e>", "<n>"
SPECIAL_TOKENS = (PAD, UNK, ENT_TOKEN, NUM_TOKEN)

VERTEX_CLASSES = tuple(VertexClass)
EDGE_CLASSES = tuple(EdgeClass)

_STRIP = re.compile(r"[?.,!;:]")


@dataclass(frozen=True)
class Mention:
    start: int
    end: int
    kind: str  # "entity" or "number"

    def to_dict(self) -> dict:
        return {"start": self.start, "end": self.end, "kind": self.kind}


def preprocess(question: str, mentions: Sequence[Mention] = ()) -> list[str]:
    """Lowercased tokens with each entity mention collapsed to ``<e>`` and each
    number mention to ``<n>``."""
    spans = sorted(mentions, key=lambda m: m.start)
    for a, b in zip(spans, spans[1:]):
        if b.start < a.end:
            raise ValueError(f"overlapping mentions {a} and {b}")
    pieces = []
    pos = 0
    for m in spans:
        if not 0 <= m.start < m.end <= len(question):
            raise ValueError(f"mention {m} outside the question")
        pieces.append(_STRIP.sub(" ", question[pos : m.start].lower()))
        pieces.append(f" {ENT_TOKEN if m.kind == 'entity' else NUM_TOKEN} ")
        pos = m.end
    pieces.append(_STRIP.sub(" ", question[pos:].lower()))
    return "".join(pieces).split()


# --------------------------------------------------------------------------- #
# parameters


@dataclass
class ModelParams:
    hyper: Hyperparams
    vocab: list[str]
    arrays: dict[str, Tensor] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.index = {tok: i for i, tok in enumerate(self.vocab)}

    def __getitem__(self, name: str) -> Tensor:
        return self.arrays[name]

    def token_ids(self, tokens: Sequence[str]) -> np.ndarray:
        unk = self.index[UNK]
        return np.array([self.index.get(t, unk) for t in tokens], dtype=np.int64)

    def zero_grad(self) -> None:
        for p in self.arrays.values():
            p.grad = None

    def copy(self) -> ModelParams:
        arrays = {k: Tensor(v.value.copy(), True, name=k) for k, v in self.arrays.items()}
        return ModelParams(self.hyper, list(self.vocab), arrays)


def _shapes(h: Hyperparams, vocab_size: int) -> dict[str, tuple[tuple[int, ...], float]]:
    """Parameter name -> (shape, uniform init bound)."""
    d, e, half = h.hidden, h.embedding, h.hidden // 2
    emb = 0.1
    shapes: dict[str, tuple[tuple[int, ...], float]] = {
        "emb.word": ((vocab_size, e), emb),
        "emb.vertex_class": ((len(VERTEX_CLASSES), d), emb),
        "emb.edge_class": ((len(EDGE_CLASSES), d), emb),
        "emb.answer": ((d,), emb),
    }
    for side in ("fwd", "bwd"):
        shapes[f"qenc.{side}.Wx"] = ((e, 4 * half), 1 / math.sqrt(e))
        shapes[f"qenc.{side}.Wh"] = ((half, 4 * half), 1 / math.sqrt(half))
        shapes[f"qenc.{side}.b"] = ((4 * half,), 1 / math.sqrt(half))
    for layer in range(h.graph_layers):
        for w in ("Wq", "Wk", "Wv", "Wo", "We_v", "We_e"):
            shapes[f"genc.{layer}.{w}"] = ((d, d), 1 / math.sqrt(d))
        shapes[f"genc.{layer}.be"] = ((d,), 1 / math.sqrt(d))
    shapes["genc.readout"] = ((d,), 1 / math.sqrt(d))
    shapes["genc.empty"] = ((d,), 1 / math.sqrt(d))
    shapes["dec.Wx"] = ((d, 4 * d), 1 / math.sqrt(d))
    shapes["dec.Wh"] = ((d, 4 * d), 1 / math.sqrt(d))
    shapes["dec.b"] = ((4 * d,), 1 / math.sqrt(d))
    shapes["att.W"] = ((d, d), 1 / math.sqrt(d))
    shapes["head.vertex"] = ((len(VERTEX_LABELS), d), 1 / math.sqrt(d))
    shapes["head.edge"] = ((len(EDGE_LABELS), d), 1 / math.sqrt(d))
    return shapes


def init_params(hyper: Hyperparams, vocab: Sequence[str]) -> ModelParams:
    vocab = list(SPECIAL_TOKENS) + [t for t in vocab if t not in SPECIAL_TOKENS]
    rng = np.random.default_rng(hyper.seed)
    arrays = {}
    for name, (shape, bound) in _shapes(hyper, len(vocab)).items():
        arrays[name] = Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True, name=name)
    arrays["emb.word"].value[0] = 0.0  # <pad>
    return ModelParams(hyper, vocab, arrays)


def build_vocab(token_lists: Sequence[Sequence[str]], min_count: int = 1) -> list[str]:
    counts: dict[str, int] = {}
    for toks in token_lists:
        for t in toks:
            counts[t] = counts.get(t, 0) + 1
    return sorted(t for t, c in counts.items() if c >= min_count)


def load_word_vectors(path: str, params: ModelParams) -> int:
    """Overwrite embedding rows from a ``token v1 ... vD`` text file; returns rows replaced."""
    table = params["emb.word"].value
    replaced = 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.rstrip().split(" ")
            if len(parts) != table.shape[1] + 1:
                continue
            idx = params.index.get(parts[0])
            if idx is not None:
                table[idx] = np.array(parts[1:], dtype=np.float64)
                replaced += 1
    return replaced


# --------------------------------------------------------------------------- #
# forward computation


@dataclass
class QuestionEncoding:
    vectors: Tensor  # (l, d)
    final: Tensor  # (d,) summary used to start the decoder

    def __len__(self) -> int:
        return self.vectors.shape[0]


@dataclass
class GraphEncoding:
    vertices: Tensor | None  # (n, d)
    edges: Tensor | None  # (m, d)
    h_g: Tensor  # (d,)


@dataclass
class DecoderState:
    h: Tensor
    c: Tensor
    step: int = 1


def _lstm_cell(xw: Tensor, h: Tensor, c: Tensor, Wh: Tensor, size: int) -> tuple[Tensor, Tensor]:
    z = xw + h @ Wh
    i = ad.sigmoid(z[0:size])
    f = ad.sigmoid(z[size : 2 * size])
    o = ad.sigmoid(z[2 * size : 3 * size])
    g = ad.tanh(z[3 * size :])
    c2 = f * c + i * g
    return o * ad.tanh(c2), c2


def encode_question(tokens: Sequence[str], params: ModelParams) -> QuestionEncoding:
    if not tokens:
        raise ValueError("empty question")
    half = params.hyper.hidden // 2
    emb = ad.gather(params["emb.word"], params.token_ids(tokens))
    outs = {}
    finals = {}
    for side, order in (("fwd", range(len(tokens))), ("bwd", range(len(tokens) - 1, -1, -1))):
        xw = emb @ params[f"qenc.{side}.Wx"] + params[f"qenc.{side}.b"]
        h = Tensor(np.zeros(half))
        c = Tensor(np.zeros(half))
        hs: list[Tensor | None] = [None] * len(tokens)
        for t in order:
            h, c = _lstm_cell(xw[t], h, c, params[f"qenc.{side}.Wh"], half)
            hs[t] = h
        outs[side] = hs
        finals[side] = h
    rows = [ad.concat([f, b]) for f, b in zip(outs["fwd"], outs["bwd"])]
    return QuestionEncoding(ad.stack(rows), ad.concat([finals["fwd"], finals["bwd"]]))


def initial_vertex_states(g: AQG, params: ModelParams) -> Tensor:
    """Class-label embeddings, with the answer marker added on the answer vertex."""
    ids = [VERTEX_CLASSES.index(c) for c in g.vertices]
    states = ad.gather(params["emb.vertex_class"], ids)
    marker = np.zeros((len(g.vertices), 1))
    marker[g.answer, 0] = 1.0
    return states + Tensor(marker) * params["emb.answer"]


def encode_graph(g: AQG, params: ModelParams) -> GraphEncoding:
    """Graph-transformer encoding of a (possibly empty) AQG.

    Every layer lets each vertex attend over itself and over each incident
    (neighbor + edge) pair with multi-head dot-product attention; edge states are
    then refreshed from their endpoints.  The graph vector is an attention-pooled
    sum over all vertex and edge states.
    """
    if not g.vertices:
        return GraphEncoding(None, None, params["genc.empty"])
    hp = params.hyper
    d, heads = hp.hidden, hp.heads
    dh = d // heads
    n, m = len(g.vertices), len(g.edges)
    V = initial_vertex_states(g, params)
    E = ad.gather(params["emb.edge_class"], [EDGE_CLASSES.index(e.cls) for e in g.edges]) if m else None

    owners = list(range(n))
    nbr, inc = [], []
    for eid, e in enumerate(g.edges):
        owners += [e.u, e.v]
        nbr += [e.v, e.u]
        inc += [eid, eid]
    mask = np.full((n, len(owners)), -np.inf)
    mask[owners, np.arange(len(owners))] = 0.0
    mask_t = Tensor(mask)
    us = [e.u for e in g.edges]
    vs = [e.v for e in g.edges]
    scale = 1.0 / math.sqrt(dh)

    for layer in range(hp.graph_layers):
        p = f"genc.{layer}."
        slots = V if not m else ad.concat([V, ad.gather(V, nbr) + ad.gather(E, inc)])  # type: ignore[arg-type]
        s = len(owners)
        q = (V @ params[p + "Wq"]).reshape(n, heads, dh).transpose(1, 0, 2)
        k = (slots @ params[p + "Wk"]).reshape(s, heads, dh).transpose(1, 2, 0)
        v = (slots @ params[p + "Wv"]).reshape(s, heads, dh).transpose(1, 0, 2)
        att = ad.softmax((q @ k) * scale + mask_t, axis=-1)
        ctx = (att @ v).transpose(1, 0, 2).reshape(n, d)
        V = ad.tanh(V + ctx @ params[p + "Wo"])
        if m:
            ends = ad.gather(V, us) + ad.gather(V, vs)
            E = ad.tanh(E @ params[p + "We_e"] + ends @ params[p + "We_v"] + params[p + "be"])  # type: ignore[operator]
    items = V if not m else ad.concat([V, E])  # type: ignore[list-item]
    weights = ad.softmax(items @ params["genc.readout"])
    return GraphEncoding(V, E, weights @ items)


def attention_weights(h_g: Tensor, question: Tensor, params: ModelParams) -> Tensor:
    return ad.softmax(question @ (h_g @ params["att.W"]))


def decode_step(
    prev: DecoderState, h_g_prev: Tensor, question: Tensor, params: ModelParams
) -> tuple[Tensor, DecoderState, Tensor]:
    """One decoder step.  Returns ``(h_out, next_state, alpha)``."""
    hp = params.hyper
    l = question.shape[0]
    if hp.use_attention:
        alpha = attention_weights(h_g_prev, question, params)
    else:
        alpha = Tensor(np.full(l, 1.0 / l))
    h_q = alpha @ question
    h_in = h_g_prev + h_q if hp.use_skip else h_q
    xw = h_in @ params["dec.Wx"] + params["dec.b"]
    h, c = _lstm_cell(xw, prev.h, prev.c, params["dec.Wh"], hp.hidden)
    return h, DecoderState(h, c, prev.step + 1), alpha


def add_vertex_logits(h_out: Tensor, params: ModelParams) -> Tensor:
    return params["head.vertex"] @ h_out


def add_edge_logits(h_out: Tensor, params: ModelParams) -> Tensor:
    return params["head.edge"] @ h_out


def select_vertex_logits(h_out: Tensor, vertex_vectors: Tensor, pending: int | None) -> Tensor:
    logits = vertex_vectors @ h_out
    if pending is None:
        return logits
    n = vertex_vectors.shape[0]
    if n < 2 and pending == 0:
        raise ValueError("no selectable vertex")
    mask = np.zeros(n)
    mask[pending] = -np.inf
    return logits + Tensor(mask)


def predict_add_vertex(h_out: Tensor, params: ModelParams) -> np.ndarray:
    return ad.softmax(add_vertex_logits(h_out, params)).value


def predict_add_edge(h_out: Tensor, params: ModelParams) -> np.ndarray:
    return ad.softmax(add_edge_logits(h_out, params)).value


def predict_select_vertex(h_out: Tensor, vertex_vectors: Tensor, pending: int | None) -> np.ndarray:
    return ad.softmax(select_vertex_logits(h_out, vertex_vectors, pending)).value


# --------------------------------------------------------------------------- #
# driving the grammar


class _Runner:
    """Shared machinery for teacher-forced scoring and free-running generation."""

    def __init__(self, tokens: Sequence[str], params: ModelParams):
        self.params = params
        self.q = encode_question(tokens, params)
        self.state = DecoderState(self.q.final, Tensor(np.zeros(params.hyper.hidden)))
        self._cache: dict[tuple, GraphEncoding] = {}
        self.h_out: Tensor | None = None

    def graph_encoding(self, gs: GenerationState) -> GraphEncoding:
        key = (gs.vertices, gs.edges)
        enc = self._cache.get(key)
        if enc is None:
            g = AQG(gs.vertices, gs.edges, 0)
            if self.params.hyper.use_graph_encoder:
                enc = encode_graph(g, self.params)
            else:
                verts = initial_vertex_states(g, self.params) if gs.vertices else None
                enc = GraphEncoding(verts, None, self.params["genc.empty"])
            self._cache[key] = enc
        return enc

    def logits(self, gs: GenerationState) -> Tensor:
        enc = self.graph_encoding(gs)
        if self.params.hyper.use_graph_encoder:
            h_prev = enc.h_g
        else:
            h_prev = self.h_out if self.h_out is not None else self.state.h
        h_out, self.state, _ = decode_step(self.state, h_prev, self.q.vectors, self.params)
        self.h_out = h_out
        op = gs.operator
        if op is OperatorKind.ADD_VERTEX:
            return add_vertex_logits(h_out, self.params)
        if op is OperatorKind.ADD_EDGE:
            return add_edge_logits(h_out, self.params)
        assert enc.vertices is not None
        return select_vertex_logits(h_out, enc.vertices, gs.pending_vertex)


def _target_index(op: OperatorKind, action: Action) -> int:
    if op is OperatorKind.ADD_VERTEX:
        return VERTEX_LABELS.index(str(action))
    if op is OperatorKind.ADD_EDGE:
        return EDGE_LABELS.index(str(action))
    return int(action)


@dataclass
class ForcedResult:
    loss: Tensor
    correct: int
    total: int

    @property
    def exact(self) -> bool:
        return self.correct == self.total


def teacher_forced(tokens: Sequence[str], actions: Sequence[Action], params: ModelParams) -> ForcedResult:
    """Negative log-likelihood of the gold action sequence under teacher forcing,
    plus how many steps the argmax got right."""
    run = _Runner(tokens, params)
    gs = GenerationState()
    terms = []
    correct = 0
    for a in actions:
        logits = run.logits(gs)
        target = _target_index(gs.operator, a)
        terms.append(ad.log_softmax(logits)[target])
        correct += int(np.argmax(logits.value) == target)
        gs = apply(gs, a)
    loss = ad.mul(ad.sum(ad.stack(terms)), -1.0)
    return ForcedResult(loss, correct, len(actions))


def loss(tokens: Sequence[str], actions: Sequence[Action], params: ModelParams) -> Tensor:
    return teacher_forced(tokens, actions, params).loss


def _single(label: str) -> AQG:
    return AQG((VertexClass(label),), (), 0)


def generate(
    tokens: Sequence[str],
    params: ModelParams,
    linking: LinkingResults | None = None,
    kb: KnowledgeBase | None = None,
    config: GenerationConfig | None = None,
) -> AQG:
    """Greedy AQG generation, optionally constrained by the KB."""
    config = config or GenerationConfig()
    linking = linking or LinkingResults()
    constrained = config.kb_constraint and kb is not None
    run = _Runner(tokens, params)
    gs = GenerationState()
    last_good: AQG | None = None
    while True:
        logits = run.logits(gs).value.copy()
        op = gs.operator
        if op is OperatorKind.ADD_VERTEX:
            if gs.step == 1:
                logits[VERTEX_LABELS.index(END)] = -np.inf
                if constrained:
                    for i, lab in enumerate(VERTEX_LABELS[:-1]):
                        if not is_groundable(_single(lab), linking, kb):  # type: ignore[arg-type]
                            logits[i] = -np.inf
                    if np.all(np.isneginf(logits)):
                        logits[VERTEX_LABELS.index("Var")] = 0.0
            elif len(gs.vertices) >= config.max_vertices:
                break
            label = VERTEX_LABELS[int(np.argmax(logits))]
            gs = apply(gs, label)
            if gs.finished:
                break
            if gs.step == 2:
                last_good = gs.graph()
        elif op is OperatorKind.SELECT_VERTEX:
            gs = apply(gs, int(np.argmax(logits)))
        else:
            gs = apply(gs, EDGE_LABELS[int(np.argmax(logits))])
            if constrained and not is_groundable(gs.graph(), linking, kb):  # type: ignore[arg-type]
                break
            last_good = gs.graph()
    result = last_good if last_good is not None else gs.completed()
    if config.attach_type and kb is not None and VertexClass.TYPE not in result.vertices and linking.types:
        augmented = attach_type(result, linking, kb)
        if augmented is not None:
            result = augmented
    return result
