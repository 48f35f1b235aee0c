"""End-to-end question answering: AQG → candidates → ranking → answers."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from .baseline import enumerate_aqgs, rank_baseline, tokenize
from .config import GenerationConfig
from .data import DatasetRecord, answers_to_json
from .graph import is_isomorphic
from .grounding import ground
from .kb import KnowledgeBase, execute
from .metrics import MetricsReport, aggregate, evaluate_answers
from .model import ModelParams, generate

log = logging.getLogger(__name__)

MODES = ("aqg", "st", "oracle")


@dataclass
class PipelineConfig:
    mode: str = "aqg"
    st_max_edges: int = 3
    generation: GenerationConfig = field(default_factory=GenerationConfig)
    workers: int = 1
    top_scores: int = 5

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")


def answer_question(
    record: DatasetRecord, kb: KnowledgeBase, params: ModelParams | None, config: PipelineConfig
) -> dict[str, Any]:
    """Run one record through the pipeline and return its trace row."""
    tokens = record.tokens()
    cache: dict = {}
    aqg = None
    aqg_correct: bool | None = None
    if config.mode == "st":
        structures = enumerate_aqgs(config.st_max_edges, record.linking, kb, cache)
    else:
        if config.mode == "oracle":
            aqg = record.gold_aqg
        else:
            if params is None:
                raise ValueError("aqg mode needs a trained model")
            aqg = generate(tokens, params, record.linking, kb, config.generation)
        aqg_correct = is_isomorphic(aqg, record.gold_aqg)
        structures = [aqg]
    candidates = []
    for g in structures:
        candidates.extend(ground(g, record.linking, kb, cache))
    chosen = None
    scores: list[float] = []
    answers: frozenset = frozenset()
    if candidates:
        chosen, scores = rank_baseline(tokenize(record.question), candidates)
        answers = execute(chosen, kb, cache)
    p, r, f1 = evaluate_answers(answers, record.gold_answers)
    return {
        "id": record.id,
        "level": record.level,
        "aqg": aqg.to_dict() if aqg is not None else None,
        "n_structures": len(structures),
        "aqg_correct": aqg_correct,
        "n_candidates": len(candidates),
        "chosen": chosen.to_dict() if chosen is not None else None,
        "scores": sorted(scores, reverse=True)[: config.top_scores],
        "answers": answers_to_json(answers),
        "gold_answers": answers_to_json(record.gold_answers),
        "precision": p,
        "recall": r,
        "f1": f1,
    }


def run_e2e(
    records: Sequence[DatasetRecord],
    kb: KnowledgeBase,
    params: ModelParams | None,
    config: PipelineConfig | None = None,
    trace_path: str | Path | None = None,
) -> tuple[MetricsReport, list[dict[str, Any]]]:
    config = config or PipelineConfig()
    if not records:
        raise ValueError("empty test set")
    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            traces = list(pool.map(lambda r: answer_question(r, kb, params, config), records))
    else:
        traces = [answer_question(r, kb, params, config) for r in records]
    traces.sort(key=lambda t: t["id"])
    if trace_path is not None:
        write_trace(traces, trace_path)
    return aggregate(config.mode, traces), traces


def write_trace(traces: Sequence[dict[str, Any]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in traces:
            fh.write(json.dumps(t, sort_keys=True) + "\n")


def read_trace(path: str | Path) -> list[dict[str, Any]]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def metrics_json(report: MetricsReport) -> str:
    return json.dumps(report.to_dict(), sort_keys=True, indent=2)
