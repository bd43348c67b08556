"""Command-line front end.

Subcommands: ``generate`` a dataset from a config, ``train`` on a recorded
dataset, ``evaluate`` a checkpoint, run a ``study``, or rebuild a ``report``
from study CSVs. Study and report exit nonzero iff any claim check fails,
so they can gate CI.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .dataset import load_dataset, split_shuffle
from .experiment import (
    ExperimentConfig,
    emit_report,
    load_report_tables,
    run_cross_scenario_study,
    run_env_change_study,
    run_generation,
    run_signal_type_study,
)
from .network import (
    Arch,
    TrainConfig,
    evaluate,
    load_checkpoint,
    save_checkpoint,
    save_history,
    train,
)

STUDIES = {
    "signal-type": run_signal_type_study,
    "env-change": run_env_change_study,
    "cross-scenario": run_cross_scenario_study,
}


def _cmd_generate(args) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    manifest = run_generation(cfg, args.out)
    print(
        f"wrote {sum(manifest['counts'])} windows to {args.out} "
        f"(header failures: {manifest['header_failures']}, "
        f"no-frame: {manifest['no_frames']}, mislabels: {manifest['mislabels']})"
    )
    return 0


def _cmd_train(args) -> int:
    ds = load_dataset(args.dataset)
    split = split_shuffle(ds, args.split_seed)
    cfg = TrainConfig(epochs=args.epochs, seed=args.seed, l1_lambda=args.l1)
    params, history = train(ds, split, Arch(n_classes=ds.n_classes), cfg)
    save_checkpoint(params, args.out)
    save_history(history, Path(args.out).with_suffix(".history.csv"))
    print(f"saved {args.out}; final val accuracy {history[-1][2]:.4f}")
    return 0


def _cmd_evaluate(args) -> int:
    ds = load_dataset(args.dataset)
    split = split_shuffle(ds, args.split_seed)
    params = load_checkpoint(args.ckpt)
    acc, confusion = evaluate(params, ds, split, args.part)
    print(f"{args.part} accuracy: {acc:.4f} over {int(confusion.sum())} examples")
    return 0


def _cmd_study(args) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    cache = args.cache or str(Path(args.out) / "cache")
    table = STUDIES[args.name](cfg, cache)
    summary, all_pass = emit_report({table.study: table}, args.out)
    print(summary.read_text())
    return 0 if all_pass else 1


def _cmd_report(args) -> int:
    tables = load_report_tables(args.dir)
    if not tables:
        print(f"no study CSVs found in {args.dir}", file=sys.stderr)
        return 2
    summary, all_pass = emit_report(tables, args.dir)
    print(summary.read_text())
    return 0 if all_pass else 1


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="txident")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate one dataset from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_generate)

    p = sub.add_parser("train", help="train a classifier on a recorded dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--seed", type=int, default=55)
    p.add_argument("--l1", type=float, default=1e-5)
    p.add_argument("--split-seed", type=int, default=55)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on a dataset split")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--part", default="test", choices=["train", "val", "test"])
    p.add_argument("--split-seed", type=int, default=55)
    p.set_defaults(fn=_cmd_evaluate)

    p = sub.add_parser("study", help="run one study end to end")
    p.add_argument("name", choices=sorted(STUDIES))
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--cache", default=None)
    p.set_defaults(fn=_cmd_study)

    p = sub.add_parser("report", help="rebuild the summary from study CSVs")
    p.add_argument("dir")
    p.set_defaults(fn=_cmd_report)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
