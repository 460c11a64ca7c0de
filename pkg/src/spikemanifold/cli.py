"""Command line entry point.

``spikemanifold train`` runs the full pipeline and writes the results
document; ``spikemanifold eval`` reloads saved parameters and scores
them on the dataset they were trained for.
"""

import argparse
import json
import sys
import time

import numpy as np

from .errors import SpikeManifoldError
from .harness import (RunConfig, emit_results, estimate_energy, evaluate,
                      run_and_report, run_train)


def _energy_pair(text: str):
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(
            f"expected mac_pj,ac_pj, got {text!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"energy constants must be numbers, got {text!r}") from None


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--task", choices=("nc", "lp"), default="nc")
    p.add_argument("--geometry", default="h32",
                   help="product spec such as h32 or s16xh16")
    p.add_argument("--time-steps", type=int, default=15)
    p.add_argument("--lr", type=float, default=0.003)
    p.add_argument("--geo-step", type=float, default=0.1)
    p.add_argument("--margin", type=float, default=0.1)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dataset", help="directory with edges.txt, "
                   "features.csv and optionally labels.txt")
    p.add_argument("--synthetic",
                   help="generator spec such as tree:depth=6,branching=2")
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--mode", choices=("sample", "expected", "dense"),
                   default="sample")
    p.add_argument("--negatives-per-edge", type=int, default=1)
    p.add_argument("--energy-constants", type=_energy_pair,
                   metavar="MAC_PJ,AC_PJ", default=None)
    p.add_argument("--check-every", type=int, default=0,
                   help="validate on-manifold states every N epochs")
    p.add_argument("--out", help="path for the results JSON")


def _config_from_args(args) -> RunConfig:
    mac_pj, ac_pj = (args.energy_constants
                     if args.energy_constants is not None
                     else (RunConfig.e_mac_pj, RunConfig.e_ac_pj))
    return RunConfig(
        task=args.task, geometry=args.geometry,
        time_steps=args.time_steps, lr=args.lr, geo_step=args.geo_step,
        margin=args.margin, epochs=args.epochs, seed=args.seed,
        dataset=args.dataset, synthetic=args.synthetic,
        dropout=args.dropout, n_layers=args.layers, mode=args.mode,
        negatives_per_edge=args.negatives_per_edge,
        e_mac_pj=mac_pj, e_ac_pj=ac_pj, check_every=args.check_every)


def _cmd_train(args) -> int:
    config = _config_from_args(args)
    if args.save_params:
        t0 = time.time()
        result = run_train(config)
        final = {}
        for which in ("train", "val", "test"):
            try:
                final[which] = evaluate(result.model, result.graph,
                                        config.task, config,
                                        link=result.link, which=which)
            except SpikeManifoldError:
                final[which] = None
        final["metric"] = "accuracy" if config.task == "nc" else "auc"
        doc = emit_results(result, estimate_energy(result), final,
                           wall_clock_sec=time.time() - t0,
                           path=args.out)
        arrays = result.model.export_arrays()
        np.savez(args.save_params,
                 __config__=np.array(json.dumps(config.to_dict())),
                 **arrays)
    else:
        doc = run_and_report(config, out_path=args.out)
        final = doc["final_metrics"]
    metric = final["metric"]
    for which in ("train", "val", "test"):
        if final.get(which) is not None:
            print(f"{which} {metric}: {final[which]:.4f}")
    spiking = doc["energy"]["spiking"]["total_mj"]
    dense = doc["energy"]["dense"]["total_mj"]
    print(f"energy (mJ): spiking {spiking:.6f}  dense {dense:.6f}")
    if args.out:
        print(f"results written to {args.out}")
    return 0


def _cmd_eval(args) -> int:
    with np.load(args.params, allow_pickle=False) as data:
        stored = {k: data[k] for k in data.files}
    raw = stored.pop("__config__", None)
    if raw is None:
        print("parameter file has no embedded config", file=sys.stderr)
        return 2
    cfg_dict = json.loads(str(raw))
    for key in ("node_fractions", "edge_fractions"):
        cfg_dict[key] = tuple(cfg_dict[key])
    config = RunConfig(**cfg_dict)

    # rebuild the exact data pipeline the parameters were trained on,
    # then swap in the saved parameters
    from dataclasses import replace
    result = run_train(replace(config, epochs=0))
    result.model.load_arrays(stored)
    final = {}
    for which in ("train", "val", "test"):
        try:
            final[which] = evaluate(result.model, result.graph,
                                    config.task, config,
                                    link=result.link, which=which)
        except SpikeManifoldError:
            final[which] = None
    final["metric"] = "accuracy" if config.task == "nc" else "auc"
    doc = emit_results(result, estimate_energy(result), final,
                       wall_clock_sec=0.0, path=args.out)
    metric = final["metric"]
    for which in ("train", "val", "test"):
        if final.get(which) is not None:
            print(f"{which} {metric}: {final[which]:.4f}")
    if args.out:
        print(f"results written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spikemanifold",
        description="geometry-aware spiking graph networks")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="train and report")
    _add_common(train)
    train.add_argument("--save-params",
                       help="write trained parameters to this .npz")
    train.set_defaults(func=_cmd_train)

    ev = sub.add_parser("eval", help="score saved parameters")
    ev.add_argument("--params", required=True,
                    help=".npz written by train --save-params")
    ev.add_argument("--out", help="path for the results JSON")
    ev.set_defaults(func=_cmd_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SpikeManifoldError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
