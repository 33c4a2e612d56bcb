"""Command-line runner: ``python -m ksdtransport <command> ...``.

Exit codes: 0 ok, 1 self-check failure, 2 configuration error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, load_config
from .errors import ConfigError, NumericFailure, ResourceLimitError
from .experiment import (build_reference, build_target, build_transport, evaluate_run,
                         gold_samples, pushforward_samples, run_training)
from .hmc import hmc_sample
from .selfcheck import run_checks

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def header(cfg: ExperimentConfig) -> dict:
    """Block shared by every artifact of a run."""
    return {
        "config": cfg.to_dict(),
        "seeds": {"train": cfg.seeds.train, "eval": cfg.seeds.eval},
        "version": __version__,
    }


def write_json(path: Path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_csv(path: Path, columns, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def read_samples_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ConfigError(f"{path} holds no samples")
    return np.array([[float(v) for v in r] for r in rows[1:]])


def coordinate_names(d):
    return [f"y{i + 1}" for i in range(d)]


def _out_dir(cfg: ExperimentConfig) -> Path:
    return Path(cfg.output_dir)


def _resolve(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seed(args.seed)
    if getattr(args, "out", None):
        cfg = cfg.with_output_dir(args.out)
    return cfg


def cmd_train(args) -> int:
    cfg = _resolve(args)
    out = _out_dir(cfg)
    run = run_training(cfg)
    rep = run.report
    write_csv(out / "loss.csv", ["iteration", "loss"], rep.loss_trace)
    write_json(out / "theta.json", {
        "header": header(cfg),
        "topology": run.tmap.topology(),
        "theta": [float(v) for v in rep.theta],
    })
    write_json(out / "run.json", {
        "header": header(cfg),
        "wall_clock_seconds": rep.wall_clock,
        "target_evaluations": rep.evaluations,
        "iterations": len(rep.loss_trace),
        "final_loss": rep.loss_trace[-1][1],
    })
    print(f"trained {cfg.map.kind} on {cfg.target.kind} for {len(rep.loss_trace)} iterations "
          f"in {rep.wall_clock:.1f}s; artifacts in {out}")
    return EXIT_OK


def _load_theta(cfg, path, tmap):
    try:
        blob = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read parameters from {path}: {exc}") from exc
    expected = json.loads(json.dumps(tmap.topology()))
    if blob.get("topology") != expected:
        raise ConfigError(f"map topology in {path} does not match the config: "
                          f"{blob.get('topology')} vs {expected}")
    theta = np.asarray(blob["theta"], dtype=np.float64)
    if theta.shape != (tmap.param_count,):
        raise ConfigError(f"{path} has {theta.size} parameters, map expects {tmap.param_count}")
    return theta


def _trained(cfg, args):
    target = build_target(cfg)
    reference = build_reference(cfg)
    tmap = build_transport(cfg, reference, target)
    path = args.theta or (_out_dir(cfg) / "theta.json")
    return target, reference, tmap, _load_theta(cfg, path, tmap)


def metrics_schema() -> dict:
    return json.loads(resources.files("ksdtransport").joinpath("schemas/metrics.schema.json").read_text())


def cmd_eval_w1(args) -> int:
    cfg = _resolve(args)
    target, reference, tmap, theta = _trained(cfg, args)
    gold = read_samples_csv(args.gold_samples) if args.gold_samples else None
    metrics, _ = evaluate_run(cfg, target, reference, tmap, theta, gold=gold)
    metrics["header"] = header(cfg)
    write_json(_out_dir(cfg) / "metrics.json", metrics)
    floor = metrics["noise_floor"]
    print(f"W1 = {metrics['w1']:.4f} (n = {metrics['w1_samples']}"
          + (f", noise floor {floor:.4f})" if floor is not None else ")"))
    return EXIT_OK


def cmd_hmc(args) -> int:
    cfg = _resolve(args)
    target = build_target(cfg)
    chain = hmc_sample(target, cfg.hmc.config(cfg.seeds.eval))
    out = _out_dir(cfg)
    write_csv(out / "samples.csv", coordinate_names(target.dim), chain.samples)
    write_json(out / "hmc.json", {
        "header": header(cfg),
        "draws": int(len(chain.samples)),
        "mean_accept": chain.mean_accept,
        "step_size": [float(e) for e in chain.step_size],
        "divergences": chain.divergences,
    })
    print(f"{len(chain.samples)} draws, mean acceptance {chain.mean_accept:.3f}")
    return EXIT_OK


def cmd_sample(args) -> int:
    cfg = _resolve(args)
    out = _out_dir(cfg)
    target = build_target(cfg)
    if args.source == "gold":
        pts = gold_samples(cfg, target, args.n, cfg.seeds.eval)
    else:
        _, reference, tmap, theta = _trained(cfg, args)
        pts = pushforward_samples(tmap, theta, reference, args.n, cfg.seeds.eval)
    write_csv(out / "samples.csv", coordinate_names(target.dim), pts)
    print(f"wrote {len(pts)} {args.source} samples to {out / 'samples.csv'}")
    return EXIT_OK


def cmd_check(args) -> int:
    results = run_checks()
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  {r.detail}")
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_CHECK if failed else EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="ksdtransport", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="experiment JSON")
        sp.add_argument("--out", help="output directory (overrides config and OUTPUT_DIR)")
        sp.add_argument("--seed", type=int, help="override both train and eval seeds")

    sp = sub.add_parser("train", help="fit a transport map")
    common(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval-w1", help="W1 and KSD metrics for trained parameters")
    common(sp)
    sp.add_argument("--theta", help="theta.json (default: <out>/theta.json)")
    sp.add_argument("--gold-samples", help="CSV of target samples instead of the configured gold standard")
    sp.set_defaults(func=cmd_eval_w1)

    sp = sub.add_parser("hmc", help="gold-standard HMC draws")
    common(sp)
    sp.set_defaults(func=cmd_hmc)

    sp = sub.add_parser("sample", help="draw from a trained map or the gold standard")
    common(sp)
    sp.add_argument("--theta", help="theta.json (default: <out>/theta.json)")
    sp.add_argument("-n", "--n", type=int, default=2000)
    sp.add_argument("--source", choices=("map", "gold"), default="map")
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("check", help="finite-difference self-checks")
    sp.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ResourceLimitError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
