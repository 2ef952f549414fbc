"""Null variances of the split statistics: Monte Carlo against the per-split
formula and against the exact covariance-inclusive variance of their sum."""

import argparse

import numpy as np

from ustatcpd.simulation import Covariance
from ustatcpd.variance import sigma_s_squared, sum_variance_additive, sum_variance_exact
from ustatcpd.window import split_indices, splits_from_gram


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--window", type=int, default=20)
    ap.add_argument("--p", type=int, default=200)
    ap.add_argument("--windows", type=int, default=4000)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    cov = Covariance("ar1", 0.5)
    rng = np.random.default_rng(args.seed)
    H, tr2 = args.window, cov.tr_sigma2(args.p)
    U = np.array([splits_from_gram(W @ W.T) for W in (cov.draw(rng, H, args.p) for _ in range(args.windows))])

    print("s,empirical_var,formula_var,ratio")
    for k, s in enumerate(split_indices(H)):
        f = sigma_s_squared(int(s), H, tr2)
        v = U[:, k].var(ddof=1)
        print(f"{s},{v:.2f},{f:.2f},{v / f:.3f}")
    emp = U.sum(axis=1).var(ddof=1)
    add, exact = sum_variance_additive(H, tr2), sum_variance_exact(H, tr2)
    print(f"# sum: empirical={emp:.1f} additive={add:.1f} exact={exact:.1f} "
          f"emp/additive={emp / add:.3f} emp/exact={emp / exact:.3f}")


if __name__ == "__main__":
    main()
