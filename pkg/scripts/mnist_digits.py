"""Two-digit MNIST comparison (default 6 vs 9) from local IDX files.

    python scripts/mnist_digits.py /data/mnist --methods ENPWSVM LTWSVM

The directory must hold the four standard IDX files, optionally gzipped.
"""

import argparse
import logging
from pathlib import Path

from sparse_wsvm.bench import ExperimentConfig, RealSource, format_table, run_benchmark
from sparse_wsvm.cli import sample_per_class
from sparse_wsvm.datasets import load_idx_images, replicate_seed
from sparse_wsvm.pipelines import PipelineSpec

FILES = ("train-images-idx3-ubyte", "train-labels-idx1-ubyte", "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")


def locate(root: Path) -> list[Path]:
    out = []
    for name in FILES:
        hits = [root / f for f in (name, name + ".gz") if (root / f).exists()]
        if not hits:
            raise SystemExit(f"{root}: missing {name}[.gz]")
        out.append(hits[0])
    return out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("directory", type=Path)
    parser.add_argument("--digits", type=int, nargs=2, default=[6, 9])
    parser.add_argument("--train-per-class", type=int, default=250)
    parser.add_argument("--test-per-class", type=int, default=750)
    parser.add_argument("--methods", nargs="+", default=["LTWSVM", "LOTWSVM", "ENPWSVM"])
    parser.add_argument("--replicates", type=int, default=1)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="results/mnist")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    tr_img, tr_lab, te_img, te_lab = locate(args.directory)
    pos, neg = args.digits
    train_full = load_idx_images(tr_img, tr_lab, pos, neg)
    test_full = load_idx_images(te_img, te_lab, pos, neg)
    train = train_full.rows(sample_per_class(train_full, args.train_per_class, replicate_seed(args.seed, 0, 7)))
    test = test_full.rows(sample_per_class(test_full, args.test_per_class, replicate_seed(args.seed, 0, 8)))
    config = ExperimentConfig(
        RealSource(f"digits {pos} vs {neg}", train, test),
        # pixel intensities are already on [0, 1]
        [PipelineSpec(m, seed=args.seed, standardize=False) for m in args.methods],
        replicates=args.replicates,
        root_seed=args.seed,
        output_path=args.out,
    )
    print(format_table(run_benchmark(config)))


if __name__ == "__main__":
    main()
