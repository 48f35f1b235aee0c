"""Command-line entry point: ``aqgen {synth,train,generate,ground,eval,ablate}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from .config import ABLATIONS, GenerationConfig, Hyperparams, load_config
from .data import DatasetRecord, read_jsonl, write_jsonl
from .grammar import GrammarError
from .graph import AQG, TreeError
from .grounding import LinkingResults, UnGroundable, ground
from .kb import KnowledgeBase, TripleParseError, load_triples, save_triples
from .model import generate
from .pipeline import PipelineConfig, metrics_json, run_e2e
from .synth import SynthError, load_spec, synth_generate
from .train import load_checkpoint, save_checkpoint, train

log = logging.getLogger("aqgen")

EXPECTED_ERRORS = (
    FileNotFoundError,
    TripleParseError,
    TreeError,
    GrammarError,
    UnGroundable,
    SynthError,
    FloatingPointError,
    ValueError,
    KeyError,
    json.JSONDecodeError,
)


def _configs(path: str | None) -> tuple[Hyperparams, GenerationConfig, dict]:
    if path is None:
        return Hyperparams(), GenerationConfig(), {}
    return load_config(path)


def _dataset(path: str) -> list[DatasetRecord]:
    records = read_jsonl(path)
    if not records:
        raise ValueError(f"{path} holds no records")
    return records


def cmd_synth(args: argparse.Namespace) -> int:
    spec = load_spec(args.spec)
    kb, splits = synth_generate(spec, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_triples(kb, out / "kb.tsv")
    for name, records in splits.items():
        write_jsonl(records, out / f"{name}.jsonl")
    print(json.dumps({"triples": len(kb), **{k: len(v) for k, v in splits.items()}}, sort_keys=True))
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    hyper, gen, _ = _configs(args.config)
    if args.epochs is not None:
        hyper = replace(hyper, epochs=args.epochs)
    train_records = _dataset(args.train)
    dev_records = _dataset(args.dev) if args.dev else []
    kb = load_triples(args.kb) if args.kb else None
    result = train(train_records, hyper, dev_records, kb, gen)
    save_checkpoint(result.params, args.out)
    last = result.history[-1]
    print(json.dumps({"best_epoch": result.best_epoch, "last": last.__dict__}, sort_keys=True))
    return 0


def _load_record(path: str) -> DatasetRecord:
    text = Path(path).read_text()
    return DatasetRecord.from_dict(json.loads(text.splitlines()[0] if path.endswith(".jsonl") else text))


def cmd_generate(args: argparse.Namespace) -> int:
    params = load_checkpoint(args.checkpoint)
    _, gen, _ = _configs(args.config)
    if args.no_kb_constraint:
        gen = replace(gen, kb_constraint=False)
    record = _load_record(args.record)
    kb = load_triples(args.kb) if args.kb else None
    if kb is None and gen.kb_constraint:
        raise ValueError("--kb is required unless --no-kb-constraint is given")
    g = generate(record.tokens(), params, record.linking, kb, gen)
    print(json.dumps(g.to_dict(), sort_keys=True))
    return 0


def cmd_ground(args: argparse.Namespace) -> int:
    g = AQG.from_dict(json.loads(Path(args.aqg).read_text()))
    g.validate()
    linking = LinkingResults.from_dict(json.loads(Path(args.linking).read_text()))
    kb = load_triples(args.kb)
    found = ground(g, linking, kb)
    print(json.dumps([q.to_dict() for q in found], sort_keys=True))
    return 0


def _evaluate(
    kb: KnowledgeBase, records: list[DatasetRecord], checkpoint: str | None, mode: str, args: argparse.Namespace
) -> str:
    _, gen, raw = _configs(args.config)
    params = None
    if mode == "aqg":
        if checkpoint is None:
            raise ValueError("aqg mode needs --checkpoint")
        params = load_checkpoint(checkpoint)
    cfg = PipelineConfig(mode=mode, st_max_edges=args.st_max_edges, generation=gen)
    report, _ = run_e2e(records, kb, params, cfg, args.trace)
    return metrics_json(report)


def cmd_eval(args: argparse.Namespace) -> int:
    kb = load_triples(args.kb)
    text = _evaluate(kb, _dataset(args.test), args.checkpoint, args.mode, args)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    from .experiments import ablation_table

    hyper, gen, _ = _configs(args.config)
    if args.epochs is not None:
        hyper = replace(hyper, epochs=args.epochs)
    kb = load_triples(args.kb)
    rows = ablation_table(
        _dataset(args.train),
        _dataset(args.dev) if args.dev else [],
        _dataset(args.test),
        kb,
        hyper,
        gen,
        variants=args.variants or list(ABLATIONS),
        traversals=args.traversals,
    )
    text = json.dumps(rows, sort_keys=True, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="aqgen", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic KB and question splits")
    p.add_argument("spec", help="JSON synthesis spec")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the AQG generator")
    p.add_argument("train", help="training records (.jsonl)")
    p.add_argument("--dev", help="dev records for checkpoint selection")
    p.add_argument("--kb", help="KB used for constrained free-running accuracy")
    p.add_argument("--config", help="JSON hyperparameters and mode flags")
    p.add_argument("--epochs", type=int)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="predict the AQG of one record")
    p.add_argument("checkpoint")
    p.add_argument("record", help="record JSON (first line if .jsonl)")
    p.add_argument("--kb")
    p.add_argument("--config")
    p.add_argument("--no-kb-constraint", action="store_true")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("ground", help="ground an AQG into candidate query graphs")
    p.add_argument("aqg", help="AQG JSON")
    p.add_argument("linking", help="linking results JSON")
    p.add_argument("kb", help="triples TSV")
    p.set_defaults(func=cmd_ground)

    p = sub.add_parser("eval", help="end-to-end evaluation")
    p.add_argument("test", help="test records (.jsonl)")
    p.add_argument("--kb", required=True)
    p.add_argument("--checkpoint")
    p.add_argument("--mode", choices=("aqg", "st", "oracle"), default="aqg")
    p.add_argument("--st-max-edges", type=int, default=3)
    p.add_argument("--config")
    p.add_argument("--trace", help="per-question JSON-lines trace")
    p.add_argument("--out", help="metrics JSON path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train and evaluate the ablation matrix")
    p.add_argument("train")
    p.add_argument("test")
    p.add_argument("--dev")
    p.add_argument("--kb", required=True)
    p.add_argument("--config")
    p.add_argument("--epochs", type=int)
    p.add_argument("--variants", nargs="+", choices=list(ABLATIONS))
    p.add_argument("--traversals", nargs="+", choices=("dfs", "bfs", "random"), default=["dfs"])
    p.add_argument("--out")
    p.set_defaults(func=cmd_ablate)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except EXPECTED_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
