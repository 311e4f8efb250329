"""Monte-Carlo and closed-form Bayes error of the three simulated designs."""

import argparse
import math

import numpy as np
from scipy.stats import norm

from sparse_wsvm.datasets import SimSpec, class_means, gen_gaussian_example, informative_block


def closed_form(example: int) -> float:
    spec = SimSpec(example, 10, 10)
    S = informative_block(spec)
    mp, mn = class_means(spec)
    d = mp - mn
    delta = math.sqrt(d @ np.linalg.solve(S, d))
    pr = spec.positive_fraction
    shift = math.log(pr / (1 - pr)) / delta
    return pr * norm.cdf(-delta / 2 - shift) + (1 - pr) * norm.cdf(-delta / 2 + shift)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--samples", type=int, default=100_000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    print(f"{'design':<8}{'E min(eta,1-eta)':>18}{'plug-in':>10}{'closed form':>13}")
    for ex in (1, 2, 3):
        sample = gen_gaussian_example(SimSpec(ex, args.samples, 10, seed=args.seed + ex))
        eta = sample.true_probabilities
        risk = np.mean(np.minimum(eta, 1 - eta))
        plug = np.mean(np.where(eta >= 0.5, 1.0, -1.0) != sample.dataset.labels)
        print(f"Ex{ex:<6}{risk:>18.4f}{plug:>10.4f}{closed_form(ex):>13.4f}")


if __name__ == "__main__":
    main()
