"""Experiment drivers shared by the CLI, the scripts and the acceptance suite."""

from __future__ import annotations

import logging
from dataclasses import replace
from typing import Any, Sequence

from .config import ABLATIONS, GenerationConfig, Hyperparams
from .data import DatasetRecord
from .graph import is_isomorphic
from .grounding import is_groundable
from .kb import KnowledgeBase
from .model import ModelParams, generate
from .pipeline import PipelineConfig, run_e2e
from .train import train

log = logging.getLogger(__name__)

MODEL_FLAGS = ("use_attention", "use_skip", "use_graph_encoder")


def split_variant(name: str) -> tuple[dict[str, bool], dict[str, bool]]:
    """Ablation flags as (Hyperparams overrides, GenerationConfig overrides)."""
    flags = ABLATIONS[name]
    return (
        {k: v for k, v in flags.items() if k in MODEL_FLAGS},
        {k: v for k, v in flags.items() if k not in MODEL_FLAGS},
    )


def aqg_report(
    records: Sequence[DatasetRecord],
    params: ModelParams,
    kb: KnowledgeBase | None,
    config: GenerationConfig,
) -> dict[str, Any]:
    """AQG accuracy overall, on multi-edge questions and per level, plus groundability."""
    hits: dict[int, list[bool]] = {}
    groundable = 0
    for r in records:
        pred = generate(r.tokens(), params, r.linking, kb, config)
        hits.setdefault(r.level, []).append(is_isomorphic(pred, r.gold_aqg))
        if kb is not None:
            groundable += is_groundable(pred, r.linking, kb)
    flat = [h for v in hits.values() for h in v]
    multi = [h for lvl, v in hits.items() if lvl >= 2 for h in v]
    return {
        "aqg_accuracy": sum(flat) / len(flat),
        "multi_edge_accuracy": sum(multi) / len(multi) if multi else None,
        "by_level": {str(k): sum(v) / len(v) for k, v in sorted(hits.items())},
        "groundable": groundable / len(flat) if kb is not None else None,
    }


def ablation_table(
    train_records: Sequence[DatasetRecord],
    dev_records: Sequence[DatasetRecord],
    test_records: Sequence[DatasetRecord],
    kb: KnowledgeBase,
    hyper: Hyperparams,
    gen: GenerationConfig,
    variants: Sequence[str] = tuple(ABLATIONS),
    traversals: Sequence[str] = ("dfs",),
    with_f1: bool = False,
    models: dict[tuple[str, str], ModelParams] | None = None,
) -> list[dict[str, Any]]:
    """Train each architecture variant once per traversal and score every variant.

    Inference-only variants reuse the model trained with the same architecture.
    Trained models are kept in ``models`` keyed by (traversal, architecture),
    where the architecture is "full" for inference-only variants; entries
    already present are reused instead of retrained.
    """
    models = {} if models is None else models
    rows = []
    for traversal in traversals:
        for name in variants:
            model_flags, gen_flags = split_variant(name)
            h = replace(hyper, traversal=traversal, **model_flags)
            g = replace(gen, **gen_flags)
            key = (traversal, name if model_flags else "full")
            if key not in models:
                log.info("training %s/%s", key[1], traversal)
                models[key] = train(train_records, h, dev_records, kb, gen).params
            params = models[key]
            row = {"variant": name, "traversal": traversal, **aqg_report(test_records, params, kb, g)}
            if with_f1:
                report, _ = run_e2e(test_records, kb, params, PipelineConfig(mode="aqg", generation=g))
                row["f1"] = report.f1
                row["n_candidates"] = report.n_candidates
            rows.append(row)
    return rows


def candidate_reduction(
    records: Sequence[DatasetRecord],
    kb: KnowledgeBase,
    params: ModelParams,
    gen: GenerationConfig | None = None,
    st_max_edges: int = 3,
) -> list[dict[str, Any]]:
    """Per-question candidate counts in AQG mode and ST mode."""
    gen = gen or GenerationConfig()
    _, aqg_traces = run_e2e(records, kb, params, PipelineConfig(mode="aqg", generation=gen))
    _, st_traces = run_e2e(records, kb, None, PipelineConfig(mode="st", st_max_edges=st_max_edges))
    return [
        {
            "id": a["id"],
            "level": a["level"],
            "aqg": a["n_candidates"],
            "st": s["n_candidates"],
            "aqg_f1": a["f1"],
            "st_f1": s["f1"],
        }
        for a, s in zip(aqg_traces, st_traces)
    ]
