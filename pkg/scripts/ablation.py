"""Train the ablation variants on a synthetic dataset and print AQG accuracy per variant.

    python3 scripts/ablation.py --spec configs/synth.json --config configs/default.json
"""

from __future__ import annotations

import argparse
import json
import logging
import time

from aqgen.config import ABLATIONS, load_config
from aqgen.experiments import ablation_table
from aqgen.synth import load_spec, synth_generate


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--spec", default="configs/synth.json")
    ap.add_argument("--config", default="configs/default.json")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--traversals", nargs="+", default=["dfs"])
    ap.add_argument("--variants", nargs="+", default=list(ABLATIONS))
    ap.add_argument("--f1", action="store_true", help="also run the end-to-end pipeline per variant")
    ap.add_argument("--out")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    hyper, gen, _ = load_config(args.config)
    kb, splits = synth_generate(load_spec(args.spec), args.seed)
    start = time.time()
    rows = ablation_table(
        splits["train"], splits["dev"], splits["test"], kb, hyper, gen, args.variants, args.traversals, args.f1
    )
    full = {r["traversal"]: r for r in rows if r["variant"] == "full"}
    print(f"{'variant':<18}{'trav':<8}{'acc':>7}{'multi':>8}{'drop':>8}{'ground':>8}")
    for r in rows:
        base = full.get(r["traversal"])
        drop = base["multi_edge_accuracy"] - r["multi_edge_accuracy"] if base else float("nan")
        print(
            f"{r['variant']:<18}{r['traversal']:<8}{r['aqg_accuracy']:>7.3f}"
            f"{r['multi_edge_accuracy']:>8.3f}{drop:>8.3f}{r['groundable']:>8.2f}"
        )
    print(f"elapsed {time.time() - start:.0f}s")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(rows, fh, sort_keys=True, indent=2)


if __name__ == "__main__":
    main()
