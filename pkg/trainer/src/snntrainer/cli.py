"""CLI: train one exported architecture or rank a directory of them."""

from __future__ import annotations

import argparse
import json
import sys

from .model import ArchitectureError
from .train import TrainSpec, TrainingDiverged, rank_topk, train_and_eval


def _add_train_args(sp):
    sp.add_argument("--epochs", type=int, default=20)
    sp.add_argument("--timesteps", type=int, default=4)
    sp.add_argument("--lr", type=float, default=0.01)
    sp.add_argument("--batch-size", type=int, default=16)
    sp.add_argument("--train-size", type=int, default=128)
    sp.add_argument("--test-size", type=int, default=64)
    sp.add_argument("--dataset", default="bars")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--surrogate-window", type=float, default=2.0)
    sp.add_argument("--out", help="write the results JSON here as well")


def _spec(args, arch_path: str, weights_path=None) -> TrainSpec:
    return TrainSpec(
        arch_path=arch_path,
        epochs=args.epochs,
        timesteps=args.timesteps,
        learning_rate=args.lr,
        batch_size=args.batch_size,
        train_size=args.train_size,
        test_size=args.test_size,
        dataset=args.dataset,
        seed=args.seed,
        surrogate_window=args.surrogate_window,
        weights_path=weights_path,
    )


def _emit(doc, out_path) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    sys.stdout.write(text)
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)


def main(argv=None) -> int:
    p = argparse.ArgumentParser(
        prog="snntrain",
        description="Surrogate-gradient screening for exported spiking architectures.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("train", help="train one architecture and report accuracy")
    sp.add_argument("arch", help="architecture JSON file")
    sp.add_argument("--weights", help="optional exported .npz weights to start from")
    _add_train_args(sp)

    sp = sub.add_parser("rank", help="train every arch_*.json in a directory and rank")
    sp.add_argument("arch_dir", help="directory of architecture JSON files")
    _add_train_args(sp)

    args = p.parse_args(argv)
    try:
        if args.command == "train":
            result = train_and_eval(_spec(args, args.arch, args.weights))
        else:
            result = rank_topk(args.arch_dir, _spec(args, arch_path=""))
    except (ArchitectureError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TrainingDiverged as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 3
    _emit(result, args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
