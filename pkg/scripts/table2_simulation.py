"""Classification and probability-estimation table for the simulated examples.

    python scripts/table2_simulation.py --example 1 --p 100 1000 --replicates 20
"""

import argparse
import logging

from sparse_wsvm.bench import ExperimentConfig, format_table, run_benchmark
from sparse_wsvm.datasets import SimSpec
from sparse_wsvm.pipelines import PipelineMethod, PipelineSpec


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--example", type=int, choices=(1, 2, 3), default=1)
    parser.add_argument("--n", type=int, default=100)
    parser.add_argument("--p", type=int, nargs="+", default=[100, 1000])
    parser.add_argument("--methods", nargs="+", default=["LTWSVM", "LOTWSVM", "ENPWSVM", "ENTPWSVM"],
                        choices=[m.value for m in PipelineMethod])
    parser.add_argument("--replicates", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="results/table2", help="report prefix; one pair per p")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    for p in args.p:
        config = ExperimentConfig(
            SimSpec(args.example, args.n, p),
            [PipelineSpec(m) for m in args.methods],
            replicates=args.replicates,
            root_seed=args.seed,
            output_path=f"{args.out}_ex{args.example}_p{p}",
        )
        print(format_table(run_benchmark(config)))


if __name__ == "__main__":
    main()
