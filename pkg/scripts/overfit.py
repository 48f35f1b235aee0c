"""Memorize a small synthetic training set and report per-epoch accuracy.

    python3 scripts/overfit.py --n 50 --hidden 64
"""

from __future__ import annotations

import argparse
import time

from aqgen.config import Hyperparams
from aqgen.synth import SynthSpec, synth_generate
from aqgen.train import train


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--n", type=int, default=50)
    ap.add_argument("--hidden", type=int, default=64)
    ap.add_argument("--epochs", type=int, default=200)
    ap.add_argument("--traversal", default="dfs", choices=("dfs", "bfs", "random"))
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    kb, splits = synth_generate(SynthSpec(levels=(1, 2, 3), n_train=args.n, n_dev=0, n_test=0), args.seed)
    hyper = Hyperparams(hidden=args.hidden, embedding=args.hidden, epochs=args.epochs, traversal=args.traversal)
    start = time.time()

    def show(r) -> None:
        print(f"epoch {r.epoch:>3}  loss {r.train_loss:8.4f}  action {r.train_action_acc:.3f}  aqg {r.train_aqg_acc:.3f}")

    result = train(splits["train"], hyper, kb=kb, aqg_eval_limit=None, stop_when_perfect=True, on_epoch=show)
    print(f"stopped after {result.history[-1].epoch} epochs in {time.time() - start:.0f}s")


if __name__ == "__main__":
    main()
