"""Command line interface.

Subcommands: gen-data, train, eval, grid, sweep. Exit codes: 0 success,
2 configuration/parse error, 1 any other runtime failure.
"""

import argparse
import math
import os
import sys
from dataclasses import replace

from . import harness
from .config import load_config
from .errors import ConfigError, ParseError
from .model import TwinModel
from .synthdata import load_csv_dataset


def _build_parser():
    parser = argparse.ArgumentParser(prog="divuda",
                                     description="Divergence-optimization domain "
                                                 "adaptation experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate scenario CSV datasets")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("train", help="run one training configuration")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--variant", default=None)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a CSV dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--seed", type=int, default=0, help="split seed for source eval")

    p = sub.add_parser("grid", help="export a decision-boundary grid")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bounds", nargs=4, type=float, required=True,
                   metavar=("X0", "X1", "Y0", "Y1"))
    p.add_argument("--resolution", type=int, default=200)
    p.add_argument("--delta", type=float, default=None)

    p = sub.add_parser("sweep", help="run every sweep point and seed of a config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    return parser


def _resolved_delta(arg_delta, num_classes):
    return arg_delta if arg_delta is not None else math.log(num_classes)


def _run(args):
    if args.command == "gen-data":
        cfg = load_config(args.config)
        scenario = cfg.scenario
        if args.seed is not None:
            scenario = replace(scenario, seed=args.seed)
        harness.generate_data(scenario, args.out or cfg.out_dir)
        return 0

    if args.command == "train":
        cfg = load_config(args.config)
        seed = args.seed if args.seed is not None else cfg.seeds[0]
        variant = args.variant or cfg.variant
        out_dir = args.out or os.path.join(cfg.out_dir, f"seed{seed}")
        scenario = replace(cfg.scenario, seed=seed)
        harness.run_single(scenario, cfg.hyper, variant, seed, cfg.model_mode,
                           out_dir, eval_every=cfg.eval_every,
                           density_bins=cfg.density_bins,
                           grid_resolution=cfg.grid_resolution,
                           grid_bounds=cfg.grid_bounds)
        return 0

    if args.command == "eval":
        model = TwinModel.load(args.model)
        dataset = load_csv_dataset(args.data)
        delta = _resolved_delta(args.delta, model.arch.num_classes)
        if dataset.domain == "target":
            report = harness.evaluate_target(model, dataset, delta)
        else:
            report = harness.evaluate_source(model, dataset, delta,
                                             split_seed=args.seed)
        report.to_json(args.out)
        print(f"averaged accuracy: {report.averaged_accuracy:.4f}")
        return 0

    if args.command == "grid":
        model = TwinModel.load(args.model)
        delta = _resolved_delta(args.delta, model.arch.num_classes)
        grid = harness.decision_grid(model, tuple(args.bounds), args.resolution, delta)
        harness.write_grid_csv(args.out, grid)
        return 0

    if args.command == "sweep":
        cfg = load_config(args.config)
        if args.out:
            cfg = replace(cfg, out_dir=args.out)
        results = harness.run_experiment(cfg)
        for label in sorted(results):
            accs = results[label].values()
            print(f"{label}: mean target acc {sum(accs) / len(accs):.4f} "
                  f"over {len(accs)} seed(s)")
        return 0

    raise ConfigError(f"unknown command {args.command!r}")


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        return _run(args)
    except (ConfigError, ParseError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
