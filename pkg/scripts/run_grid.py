"""Train and evaluate a set of configs, then print one W1 line per run.

    python3 scripts/run_grid.py configs/table1/banana_*.json --seeds 0 1 2
"""
import argparse
import json
import time
from pathlib import Path

import numpy as np

from ksdtransport.config import load_config
from ksdtransport.errors import ConfigError, NumericFailure
from ksdtransport.experiment import evaluate_run, run_training


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("configs", nargs="+")
    ap.add_argument("--seeds", nargs="+", type=int, default=[0])
    ap.add_argument("--summary", help="write the per-run results to this JSON file")
    args = ap.parse_args()

    rows = []
    for path in args.configs:
        w1s = []
        for seed in args.seeds:
            cfg = load_config(path).with_seed(seed)
            t0 = time.perf_counter()
            try:
                run = run_training(cfg)
                metrics, _ = evaluate_run(cfg, run.target, run.reference, run.tmap, run.theta,
                                          with_floor=False)
            except (ConfigError, NumericFailure) as exc:
                print(f"{Path(path).stem:<36} seed {seed}  failed: {type(exc).__name__}: {exc}")
                rows.append({"config": path, "seed": seed, "error": str(exc)})
                continue
            w1s.append(metrics["w1"])
            rows.append({"config": path, "seed": seed, "seconds": time.perf_counter() - t0,
                         **{k: v for k, v in metrics.items() if k != "noise_floor"}})
            print(f"{Path(path).stem:<36} seed {seed}  W1 {metrics['w1']:.3f}  "
                  f"V {metrics['ksd_v']:.3g}  {time.perf_counter() - t0:.0f}s", flush=True)
        if len(w1s) > 1:
            print(f"{Path(path).stem:<36} median W1 {np.median(w1s):.3f}")
    if args.summary:
        Path(args.summary).write_text(json.dumps(rows, indent=2) + "\n")


if __name__ == "__main__":
    main()
