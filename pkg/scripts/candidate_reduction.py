"""Compare per-question candidate counts of AQG-constrained grounding against
exhaustive structure enumeration on a synthetic test set.

    python3 scripts/candidate_reduction.py --spec configs/synth.json --config configs/default.json
"""

from __future__ import annotations

import argparse
import json
import logging
from statistics import mean

from aqgen.config import load_config
from aqgen.experiments import candidate_reduction
from aqgen.synth import load_spec, synth_generate
from aqgen.train import load_checkpoint, train


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--spec", default="configs/synth.json")
    ap.add_argument("--config", default="configs/default.json")
    ap.add_argument("--checkpoint", help="skip training and load this model")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--st-max-edges", type=int, default=3)
    ap.add_argument("--limit", type=int, help="only the first N test questions")
    ap.add_argument("--out")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    hyper, gen, _ = load_config(args.config)
    kb, splits = synth_generate(load_spec(args.spec), args.seed)
    if args.checkpoint:
        params = load_checkpoint(args.checkpoint)
    else:
        params = train(splits["train"], hyper, splits["dev"], kb, gen).params
    test = splits["test"][: args.limit] if args.limit else splits["test"]
    rows = candidate_reduction(test, kb, params, gen, args.st_max_edges)

    print(f"{'level':<7}{'n':>4}{'Nc AQG':>9}{'Nc ST':>9}{'F1 AQG':>8}{'F1 ST':>8}")
    for lvl in sorted({r["level"] for r in rows}) + ["all"]:
        part = [r for r in rows if lvl == "all" or r["level"] == lvl]
        print(
            f"{lvl!s:<7}{len(part):>4}{mean(r['aqg'] for r in part):>9.1f}{mean(r['st'] for r in part):>9.1f}"
            f"{mean(r['aqg_f1'] for r in part):>8.3f}{mean(r['st_f1'] for r in part):>8.3f}"
        )
    print(f"N_c(AQG) <= N_c(ST) on {sum(r['aqg'] <= r['st'] for r in rows)}/{len(rows)} questions")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(rows, fh, sort_keys=True, indent=2)


if __name__ == "__main__":
    main()
