"""Answer-level precision/recall/F1 and aggregate reports."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any, Iterable


def evaluate_answers(predicted: Iterable, gold: Iterable) -> tuple[float, float, float]:
    pred, ref = set(predicted), set(gold)
    if not pred and not ref:
        return 1.0, 1.0, 1.0
    if not pred or not ref:
        return 0.0, 0.0, 0.0
    hit = len(pred & ref)
    p, r = hit / len(pred), hit / len(ref)
    f1 = 0.0 if hit == 0 else 2 * p * r / (p + r)
    return p, r, f1


@dataclass
class LevelStats:
    count: int = 0
    precision: float = 0.0
    recall: float = 0.0
    f1: float = 0.0
    n_candidates: float = 0.0
    aqg_accuracy: float | None = None


@dataclass
class MetricsReport:
    mode: str
    n_questions: int
    precision: float
    recall: float
    f1: float
    n_candidates: float
    aqg_accuracy: float | None
    by_level: dict[str, LevelStats] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def _mean(xs: list[float]) -> float:
    return sum(xs) / len(xs) if xs else 0.0


def aggregate(mode: str, traces: list[dict[str, Any]]) -> MetricsReport:
    """Macro-averaged report over per-question trace rows."""

    def stats(rows: list[dict[str, Any]]) -> tuple:
        acc = [float(r["aqg_correct"]) for r in rows if r.get("aqg_correct") is not None]
        return (
            _mean([r["precision"] for r in rows]),
            _mean([r["recall"] for r in rows]),
            _mean([r["f1"] for r in rows]),
            _mean([float(r["n_candidates"]) for r in rows]),
            _mean(acc) if acc else None,
        )

    p, r, f1, nc, acc = stats(traces)
    levels: dict[str, LevelStats] = {}
    for lvl in sorted({t["level"] for t in traces}):
        rows = [t for t in traces if t["level"] == lvl]
        lp, lr, lf, lnc, lacc = stats(rows)
        levels[str(lvl)] = LevelStats(len(rows), lp, lr, lf, lnc, lacc)
    return MetricsReport(mode, len(traces), p, r, f1, nc, acc, levels)
