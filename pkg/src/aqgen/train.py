"""Supervised training of the AQG generator, gradient checking and checkpoints."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .autodiff import Tensor
from .config import GenerationConfig, Hyperparams
from .data import DatasetRecord
from .grammar import Action, build_ground_truth
from .graph import is_isomorphic
from .kb import KnowledgeBase
from .model import ModelParams, build_vocab, generate, init_params, teacher_forced

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "aqgen-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class Example:
    tokens: list[str]
    actions: list[Action]
    record: DatasetRecord | None = None


def make_examples(records: Sequence[DatasetRecord], traversal: str = "dfs", seed: int = 0) -> list[Example]:
    return [
        Example(r.tokens(), build_ground_truth(r.gold_aqg, traversal, seed=seed + i), r)
        for i, r in enumerate(records)
    ]


class Adam:
    def __init__(
        self,
        params: ModelParams,
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        clip_norm: float | None = None,
    ):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.clip_norm = clip_norm
        self.m = {k: np.zeros_like(v.value) for k, v in params.arrays.items()}
        self.v = {k: np.zeros_like(v.value) for k, v in params.arrays.items()}
        self.t = 0

    def step(self) -> None:
        self.t += 1
        c1 = 1 - self.beta1**self.t
        c2 = 1 - self.beta2**self.t
        scale = 1.0
        if self.clip_norm is not None:
            norm = math.sqrt(sum(float(np.sum(p.grad**2)) for p in self.params.arrays.values() if p.grad is not None))
            if norm > self.clip_norm:
                scale = self.clip_norm / norm
        for k, p in self.params.arrays.items():
            if p.grad is None:
                continue
            g = p.grad * scale
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            p.value -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


@dataclass
class EpochReport:
    epoch: int
    train_loss: float
    train_action_acc: float
    train_aqg_acc: float
    dev_loss: float | None = None
    dev_action_acc: float | None = None
    dev_aqg_acc: float | None = None


@dataclass
class TrainResult:
    params: ModelParams
    history: list[EpochReport] = field(default_factory=list)
    best_epoch: int = 0


def score_examples(examples: Sequence[Example], params: ModelParams) -> tuple[float, float]:
    """Mean loss and teacher-forced action accuracy without updating anything."""
    tot_loss, correct, total = 0.0, 0, 0
    for ex in examples:
        res = teacher_forced(ex.tokens, ex.actions, params)
        tot_loss += float(res.loss.value)
        correct += res.correct
        total += res.total
    n = max(len(examples), 1)
    return tot_loss / n, correct / max(total, 1)


def aqg_accuracy(
    examples: Sequence[Example],
    params: ModelParams,
    kb: KnowledgeBase | None = None,
    config: GenerationConfig | None = None,
) -> float:
    if not examples:
        return 0.0
    hits = 0
    for ex in examples:
        assert ex.record is not None
        pred = generate(ex.tokens, params, ex.record.linking, kb, config)
        hits += is_isomorphic(pred, ex.record.gold_aqg)
    return hits / len(examples)


def train(
    train_records: Sequence[DatasetRecord],
    hyper: Hyperparams,
    dev_records: Sequence[DatasetRecord] = (),
    kb: KnowledgeBase | None = None,
    config: GenerationConfig | None = None,
    aqg_eval_limit: int | None = 100,
    stop_when_perfect: bool = False,
    patience: int | None = None,
    on_epoch: Callable[[EpochReport], None] | None = None,
) -> TrainResult:
    """Per-example Adam updates on the teacher-forced negative log-likelihood.

    Keeps the parameters of the epoch with the best dev AQG accuracy (ties go to
    lower dev loss); without a dev set the last epoch is kept.  AQG accuracy is
    measured by free-running generation on at most ``aqg_eval_limit`` examples.
    """
    train_ex = make_examples(train_records, hyper.traversal, hyper.seed)
    dev_ex = make_examples(dev_records, hyper.traversal, hyper.seed)
    params = init_params(hyper, build_vocab([ex.tokens for ex in train_ex]))
    opt = Adam(params, hyper.learning_rate, clip_norm=hyper.clip_norm)
    rng = np.random.default_rng(hyper.seed)
    result = TrainResult(params)
    best_key: tuple | None = None
    stale = 0
    probe = train_ex[:aqg_eval_limit] if aqg_eval_limit else train_ex
    for epoch in range(1, hyper.epochs + 1):
        tot_loss, correct, total = 0.0, 0, 0
        for i in rng.permutation(len(train_ex)):
            ex = train_ex[i]
            params.zero_grad()
            res = teacher_forced(ex.tokens, ex.actions, params)
            value = float(res.loss.value)
            if not math.isfinite(value):
                raise FloatingPointError(
                    f"non-finite loss {value} at epoch {epoch} on example "
                    f"{ex.record.id if ex.record else i}: tokens={ex.tokens} actions={ex.actions}"
                )
            res.loss.backward()
            opt.step()
            tot_loss += value
            correct += res.correct
            total += res.total
        report = EpochReport(
            epoch,
            tot_loss / len(train_ex),
            correct / total,
            aqg_accuracy(probe, params, kb, config),
        )
        if dev_ex:
            report.dev_loss, report.dev_action_acc = score_examples(dev_ex, params)
            dev_probe = dev_ex[:aqg_eval_limit] if aqg_eval_limit else dev_ex
            report.dev_aqg_acc = aqg_accuracy(dev_probe, params, kb, config)
            key = (report.dev_aqg_acc, report.dev_action_acc, -report.dev_loss)
            if best_key is None or key > best_key:
                best_key = key
                result.params = params.copy()
                result.best_epoch = epoch
                stale = 0
            else:
                stale += 1
        else:
            result.params = params
            result.best_epoch = epoch
        result.history.append(report)
        log.info("epoch %d %s", epoch, report)
        if on_epoch:
            on_epoch(report)
        if stop_when_perfect and report.train_action_acc == 1.0 and report.train_aqg_acc == 1.0:
            if not dev_ex or report.dev_aqg_acc == 1.0:
                break
        if patience is not None and stale >= patience:
            break
    if not dev_ex:
        result.params = params
    return result


# --------------------------------------------------------------------------- #
# gradient check


@dataclass
class GradCheckReport:
    per_array: dict[str, float]

    @property
    def max_rel_error(self) -> float:
        return max(self.per_array.values()) if self.per_array else 0.0

    def flagged(self, tol: float = 1e-3) -> list[str]:
        return sorted(k for k, v in self.per_array.items() if v > tol)


def grad_check(
    params: ModelParams,
    example: Example,
    coords: int = 20,
    h: float = 1e-5,
    seed: int = 0,
    detach: Sequence[str] = (),
) -> GradCheckReport:
    """Compare reverse-mode gradients to central differences on random coordinates.

    Arrays named in ``detach`` are taken off the tape, which must make the check
    flag them.
    """
    rng = np.random.default_rng(seed)
    saved = {k: params[k].requires_grad for k in params.arrays}
    for k in detach:
        params[k].requires_grad = False
    try:
        params.zero_grad()
        teacher_forced(example.tokens, example.actions, params).loss.backward()
        analytic = {
            k: (p.grad.copy() if p.grad is not None else np.zeros_like(p.value)) for k, p in params.arrays.items()
        }
    finally:
        for k, flag in saved.items():
            params[k].requires_grad = flag
        params.zero_grad()

    def f() -> float:
        return float(teacher_forced(example.tokens, example.actions, params).loss.value)

    out = {}
    for name, p in params.arrays.items():
        flat = p.value.reshape(-1)
        picks = _coordinates(name, p, example, params, rng, coords)
        worst = 0.0
        for idx in picks:
            old = flat[idx]
            flat[idx] = old + h
            up = f()
            flat[idx] = old - h
            down = f()
            flat[idx] = old
            numeric = (up - down) / (2 * h)
            exact = analytic[name].reshape(-1)[idx]
            denom = max(abs(numeric), abs(exact), 1e-6)
            worst = max(worst, abs(numeric - exact) / denom)
        out[name] = worst
    return GradCheckReport(out)


def _coordinates(name: str, p: Tensor, example: Example, params: ModelParams, rng, k: int) -> np.ndarray:
    if name == "emb.word":
        # only rows of tokens in the example influence the loss
        rows = np.unique(params.token_ids(example.tokens))
        cols = p.shape[1]
        flat = (rows[:, None] * cols + np.arange(cols)[None, :]).reshape(-1)
        return rng.choice(flat, size=min(k, flat.size), replace=False)
    return rng.choice(p.value.size, size=min(k, p.value.size), replace=False)


# --------------------------------------------------------------------------- #
# checkpoints


def save_checkpoint(params: ModelParams, path: str | Path) -> None:
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "hyperparams": params.hyper.to_dict(),
        "vocab": params.vocab,
        "params": {
            k: {"shape": list(v.shape), "data": v.value.reshape(-1).tolist()} for k, v in sorted(params.arrays.items())
        },
    }
    Path(path).write_text(json.dumps(payload))


def load_checkpoint(path: str | Path) -> ModelParams:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint {path} not found")
    payload = json.loads(path.read_text())
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path} is not a checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')}")
    hyper = Hyperparams.from_dict(payload["hyperparams"])
    arrays = {
        k: Tensor(np.array(v["data"], dtype=np.float64).reshape(v["shape"]), requires_grad=True, name=k)
        for k, v in payload["params"].items()
    }
    return ModelParams(hyper, payload["vocab"], arrays)
