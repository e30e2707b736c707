"""Command-line workflow: train, export, run, verify, robustness, bench.

One binary, subcommand style. Every run is reproducible: all randomness
flows from --seed, reports carry no timestamps, and results are identical
for any --jobs value (wall-clock timing fields excepted). Failures print a
single machine-readable JSON line on stderr and exit 1; bad flags exit 2.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import harness
from .accel import AccelConfig
from .artifact import load_artifact, save_artifact
from .builder import EncoderConfig, LayerSpec, NeuronConfig, build_sequential, export
from .errors import SnnAccelError
from .trainer import ALPHA_DEFAULT, LADDER_DEFAULT, train_linear_ttfs


def _dataset_args(p, labels_required=True):
    p.add_argument("--images", required=True, help="IDX image file")
    p.add_argument("--labels", required=labels_required, help="IDX label file")
    p.add_argument("--limit", type=int, default=0, help="use only the first N images")


def _common_args(p):
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.add_argument(
        "--cycle-mode", choices=("deployed", "measured"), default="deployed"
    )


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="snnaccel",
        description="single-artifact SNN deployment: train, export, execute, measure",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a classifier, write tensor files")
    _dataset_args(p)
    _common_args(p)
    p.add_argument("--weights-out", required=True, help="WTS1 weight file to write")
    p.add_argument("--thresholds-out", required=True, help="WTS1 threshold file to write")
    p.add_argument("--out-dim", type=int, default=150)
    p.add_argument("--num-classes", type=int, default=10)
    p.add_argument("--time-window", type=int, default=64)
    p.add_argument("--alpha", type=float, default=ALPHA_DEFAULT)
    p.add_argument("--threshold-ladder", type=float, default=LADDER_DEFAULT)
    p.add_argument("--epochs", type=int, default=400)

    p = sub.add_parser("export", help="build a deployment artifact from tensor files")
    p.add_argument("--weights", required=True, help="WTS1 weight file (out x in)")
    p.add_argument("--thresholds", help="WTS1 threshold file (out x 1)")
    p.add_argument("--threshold-value", type=float, help="constant threshold instead")
    p.add_argument("--out", required=True, help="artifact file to write (.snna)")
    p.add_argument("--num-classes", type=int, default=10)
    p.add_argument("--time-window", type=int, default=64)
    p.add_argument("--leak-num", type=int, default=1)
    p.add_argument("--leak-den", type=int, default=1)
    p.add_argument("--clock-hz", type=int, default=80_000_000)

    p = sub.add_parser("run", help="classify images with one backend")
    p.add_argument("--artifact", required=True)
    _dataset_args(p, labels_required=False)
    _common_args(p)
    p.add_argument(
        "--backend",
        choices=("reference", "accel", "dense-fp32", "dense-int8"),
        default="accel",
    )
    p.add_argument("--out", help="prediction CSV to write")

    p = sub.add_parser("verify", help="check accelerator/reference agreement")
    p.add_argument("--artifact", required=True)
    _dataset_args(p)
    _common_args(p)
    p.add_argument("--out", help="mismatch CSV to write")

    p = sub.add_parser("robustness", help="accuracy under input spike drop")
    p.add_argument("--artifact", required=True)
    _dataset_args(p)
    _common_args(p)
    p.add_argument("--ratios", default="0,0.25,0.5,0.75")
    p.add_argument("--out", required=True, help="ratio/accuracy CSV to write")

    p = sub.add_parser("bench", help="aligned-scope benchmark report")
    p.add_argument("--artifact", required=True)
    _dataset_args(p)
    _common_args(p)
    p.add_argument("--out", help="platform table CSV to write")
    p.add_argument("--scope-out", help="phase breakdown CSV to write")
    return ap


def _check_paths(*paths):
    for path in paths:
        if path and not os.path.exists(path):
            raise FileNotFoundError(f"input path does not exist: {path}")


def _load_dataset(args, labels_optional=False) -> harness.Dataset:
    paths = [args.images] + ([args.labels] if args.labels else [])
    _check_paths(*paths)
    if args.labels:
        ds = harness.load_mnist_idx(args.images, args.labels)
    elif labels_optional:
        images = harness.load_idx_images(args.images)
        ds = harness.Dataset(images, np.zeros(len(images), dtype=np.int64))
    else:
        raise FileNotFoundError("label file required")
    if args.limit:
        ds = ds.subset(args.limit)
    return ds


def _cfg(args) -> AccelConfig:
    return AccelConfig(cycle_mode=args.cycle_mode)


def cmd_train(args) -> int:
    _check_paths(args.images, args.labels)
    ds = harness.load_mnist_idx(args.images, args.labels)
    if args.limit:
        ds = ds.subset(args.limit)
    net = train_linear_ttfs(
        ds.images,
        ds.labels,
        out_dim=args.out_dim,
        num_classes=args.num_classes,
        time_window=args.time_window,
        alpha=args.alpha,
        threshold_ladder=args.threshold_ladder,
        seed=args.seed,
        epochs=args.epochs,
    )
    harness.write_wts(args.weights_out, np.asarray(net.stages[0].weights))
    harness.write_wts(
        args.thresholds_out, net.neuron_config.threshold.reshape(-1, 1)
    )
    print(f"trained {args.out_dim}x{ds.images.shape[1]} -> {args.weights_out}")
    return 0


def cmd_export(args) -> int:
    _check_paths(args.weights, args.thresholds)
    w = harness.read_wts(args.weights).astype(np.float64)
    if args.thresholds:
        thr = harness.read_wts(args.thresholds).reshape(-1).astype(np.float64)
    elif args.threshold_value is not None:
        thr = np.full(w.shape[0], args.threshold_value)
    else:
        raise FileNotFoundError("provide --thresholds or --threshold-value")
    net = build_sequential(
        [
            LayerSpec("linear", w.shape[1], w.shape[0], w),
            LayerSpec("lif", w.shape[0], w.shape[0]),
        ],
        NeuronConfig(threshold=thr, leak_num=args.leak_num, leak_den=args.leak_den),
        EncoderConfig(time_window=args.time_window),
    )
    artifact = export(net, num_classes=args.num_classes, clock_hz=args.clock_hz)
    n = save_artifact(artifact, args.out)
    print(f"wrote {args.out}: {n} bytes, digest {artifact.digest.hex()[:16]}")
    return 0


def cmd_run(args) -> int:
    _check_paths(args.artifact)
    artifact = load_artifact(args.artifact)
    ds = _load_dataset(args, labels_optional=True)
    preds = harness.predictions(artifact, ds, args.backend, _cfg(args), args.jobs)
    lines = ["index,label,no_spike"]
    lines += [f"{i},{l},{int(ns)}" for i, (l, ns) in enumerate(preds)]
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_verify(args) -> int:
    _check_paths(args.artifact)
    artifact = load_artifact(args.artifact)
    ds = _load_dataset(args)
    matches, mismatched = harness.verify_equivalence(
        artifact, ds, _cfg(args), args.jobs
    )
    print(f"matches={matches}/{len(ds)}")
    if args.out:
        with open(args.out, "w") as f:
            f.write("index\n" + "".join(f"{i}\n" for i in mismatched))
    if mismatched:
        print(f"mismatched indices: {mismatched[:20]}" + ("..." if len(mismatched) > 20 else ""))
        return 1
    return 0


def cmd_robustness(args) -> int:
    _check_paths(args.artifact)
    artifact = load_artifact(args.artifact)
    ds = _load_dataset(args)
    ratios = tuple(float(r) for r in args.ratios.split(","))
    report = harness.robustness_sweep(
        artifact, ds, ratios, args.seed, _cfg(args), args.jobs
    )
    report.write_csv(args.out)
    for r, a in zip(report.drop_ratios, report.accuracies):
        print(f"drop {r:g}: {a:.2f}%")
    return 0


def cmd_bench(args) -> int:
    _check_paths(args.artifact)
    artifact = load_artifact(args.artifact)
    ds = _load_dataset(args)
    report = harness.evaluate(artifact, ds, _cfg(args), args.jobs)
    sys.stdout.write(report.to_csv())
    print(f"accel/reference matches: {report.matches}/{report.n}")
    if args.out:
        report.write_csv(args.out)
    if args.scope_out:
        scope = harness.scope_profile(artifact, ds.subset(min(len(ds), 200)), _cfg(args))
        scope.write_csv(args.scope_out)
    return 0


_COMMANDS = {
    "train": cmd_train,
    "export": cmd_export,
    "run": cmd_run,
    "verify": cmd_verify,
    "robustness": cmd_robustness,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (SnnAccelError, OSError, ArithmeticError) as exc:
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
