"""Command-line entry point: ``python -m sparse_wsvm {simulate,real,tune-report}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .bench import (
    BenchmarkError,
    ExperimentConfig,
    RealSource,
    format_table,
    run_benchmark,
    worker_count,
)
from .datasets import SimSpec, gen_gaussian_example, load_idx_images, load_label_matrix_csv, replicate_seed
from .pipelines import PipelineMethod, PipelineSpec, run_pipeline
from .wsvm_train import Dataset, TrainingError

EXIT_OK = 0
EXIT_DATA = 3
EXIT_TRAINING = 4

log = logging.getLogger("sparse_wsvm")


def _methods(text: str) -> list[PipelineMethod]:
    out = []
    for token in text.split(","):
        token = token.strip()
        try:
            out.append(PipelineMethod(token.upper()))
        except ValueError:
            names = ", ".join(m.value for m in PipelineMethod)
            raise argparse.ArgumentTypeError(f"unknown method {token!r} (choose from {names})")
    return out


def _digits(text: str) -> tuple[int, int]:
    parts = text.split(",")
    if len(parts) != 2 or not all(p.strip().isdigit() for p in parts):
        raise argparse.ArgumentTypeError("--digits takes two digits, e.g. 6,9")
    return int(parts[0]), int(parts[1])


def sample_per_class(data: Dataset, per_class: int, seed: int, exclude=None) -> np.ndarray:
    """Sorted row indices with ``per_class`` samples of each label."""
    rng = np.random.default_rng(seed)
    allowed = np.ones(data.n, dtype=bool)
    if exclude is not None:
        allowed[exclude] = False
    idx = []
    for label in (1.0, -1.0):
        pool = np.flatnonzero((data.labels == label) & allowed)
        if pool.size < per_class:
            raise ValueError(f"class {int(label):+d} has {pool.size} samples, need {per_class}")
        idx.append(rng.choice(pool, per_class, replace=False))
    return np.sort(np.concatenate(idx))


def stratified_holdout(data: Dataset, train_size: int, seed: int) -> tuple[Dataset, Dataset]:
    """Stratified train/test split with ``train_size`` training rows."""
    if not 4 <= train_size < data.n:
        raise ValueError(f"train size must be in [4, {data.n - 1}]")
    rng = np.random.default_rng(seed)
    frac = train_size / data.n
    pos = np.flatnonzero(data.labels > 0)
    neg = np.flatnonzero(data.labels < 0)
    n_pos = int(round(frac * pos.size))
    n_neg = train_size - n_pos
    train = np.concatenate([rng.choice(pos, n_pos, replace=False), rng.choice(neg, n_neg, replace=False)])
    mask = np.zeros(data.n, dtype=bool)
    mask[train] = True
    return data.rows(np.flatnonzero(mask)), data.rows(np.flatnonzero(~mask))


def _real_source(args) -> RealSource:
    if args.csv:
        if args.label_col is None:
            raise ValueError("--label-col is required with --csv")
        label = int(args.label_col) if args.label_col.isdigit() else args.label_col
        data = load_label_matrix_csv(args.csv, label, args.positive_token)
        train, test = stratified_holdout(data, args.train_size, replicate_seed(args.seed, 0, 9))
        return RealSource(Path(args.csv).stem, train, test)
    if not (args.idx_images and args.idx_labels):
        raise ValueError("give --csv or both --idx-images and --idx-labels")
    pos, neg = args.digits
    full = load_idx_images(args.idx_images, args.idx_labels, pos, neg)
    train_idx = sample_per_class(full, args.train_per_class, replicate_seed(args.seed, 0, 7))
    train = full.rows(train_idx)
    if args.idx_test_images and args.idx_test_labels:
        test_pool = load_idx_images(args.idx_test_images, args.idx_test_labels, pos, neg)
        test_idx = sample_per_class(test_pool, args.test_per_class, replicate_seed(args.seed, 0, 8))
    else:
        # no separate test files: hold the test sample out of the same pool
        test_pool = full
        test_idx = sample_per_class(
            full, args.test_per_class, replicate_seed(args.seed, 0, 8), exclude=train_idx
        )
    return RealSource(f"digits {pos} vs {neg}", train, test_pool.rows(test_idx))


def _pipeline_specs(methods, seed, standardize=True) -> list[PipelineSpec]:
    return [PipelineSpec(m, seed=seed, standardize=standardize) for m in methods]


def cmd_simulate(args) -> int:
    spec = SimSpec(args.example, args.n, args.p)
    config = ExperimentConfig(
        spec, _pipeline_specs(args.methods, args.seed), args.replicates,
        args.test_size, args.out, args.seed,
    )
    rows = run_benchmark(config, args.workers)
    sys.stdout.write(format_table(rows))
    return EXIT_OK


def cmd_real(args) -> int:
    source = _real_source(args)
    log.info("training pool %d x %d, test %d", source.train_pool.n, source.train_pool.p, source.test.n)
    standardize = not bool(args.idx_images)  # pixel intensities are already on [0, 1]
    config = ExperimentConfig(
        source, _pipeline_specs(args.methods, args.seed, standardize), args.replicates,
        None, args.out, args.seed,
    )
    rows = run_benchmark(config, args.workers)
    sys.stdout.write(format_table(rows))
    return EXIT_OK


def cmd_tune_report(args) -> int:
    spec = SimSpec(args.example, args.n, args.p)
    train = gen_gaussian_example(spec.with_seed(replicate_seed(args.seed, 0, 0))).dataset
    tune = gen_gaussian_example(spec.with_seed(replicate_seed(args.seed, 0, 1))).dataset
    fit = run_pipeline(PipelineSpec(args.method[0], seed=args.seed), train, tune)
    doc = {
        "method": args.method[0].value,
        "example": spec.example_id.value,
        "n": spec.n,
        "p": spec.p,
        "best": list(fit.lambdas),
        "cells": fit.tuning_table.as_rows(),
    }
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparse_wsvm", description="Sparse weighted-SVM probability estimation benchmarks."
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="Monte-Carlo study on a Gaussian design")
    sim.add_argument("--example", type=int, choices=(1, 2, 3), required=True)
    sim.add_argument("--n", type=int, default=100, help="size of the train and of the tune set")
    sim.add_argument("--p", type=int, default=100)
    sim.add_argument("--methods", type=_methods, default=_methods("LTWSVM,LOTWSVM,ENPWSVM"))
    sim.add_argument("--replicates", type=int, default=20)
    sim.add_argument("--test-size", type=int, default=None, help="default 50n capped at 5000")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", default=None, help="report path; writes .json and .txt")
    sim.add_argument("--workers", type=int, default=None)
    sim.set_defaults(func=cmd_simulate)

    real = sub.add_parser("real", help="benchmark on a CSV matrix or an IDX digit pair")
    real.add_argument("--csv")
    real.add_argument("--label-col", help="header name or 0-based column index")
    real.add_argument("--positive-token", default="1")
    real.add_argument("--train-size", type=int, default=38)
    real.add_argument("--idx-images")
    real.add_argument("--idx-labels")
    real.add_argument("--idx-test-images")
    real.add_argument("--idx-test-labels")
    real.add_argument("--digits", type=_digits, default=(6, 9))
    real.add_argument("--train-per-class", type=int, default=250)
    real.add_argument("--test-per-class", type=int, default=750)
    real.add_argument("--methods", type=_methods, default=_methods("LTWSVM,LOTWSVM,ENPWSVM"))
    real.add_argument("--replicates", type=int, default=10)
    real.add_argument("--seed", type=int, default=0)
    real.add_argument("--out", default=None)
    real.add_argument("--workers", type=int, default=None)
    real.set_defaults(func=cmd_real)

    tr = sub.add_parser("tune-report", help="dump the EGKL tuning table of one fit")
    tr.add_argument("--example", type=int, choices=(1, 2, 3), default=1)
    tr.add_argument("--n", type=int, default=100)
    tr.add_argument("--p", type=int, default=100)
    tr.add_argument("--method", type=_methods, default=_methods("LOTWSVM"))
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--out", default=None)
    tr.set_defaults(func=cmd_tune_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if getattr(args, "workers", None) is None and hasattr(args, "workers"):
        args.workers = worker_count()
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingError, BenchmarkError) as exc:
        print(f"training error: {exc}", file=sys.stderr)
        return EXIT_TRAINING


if __name__ == "__main__":
    sys.exit(main())
