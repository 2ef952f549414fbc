"""EDD of both rules over a grid of change magnitudes, with the Monte Carlo
overshoots plugged into the delay formulas.

``--delta-scale auto`` multiplies each delta by (p/2000)^(1/4), which keeps
delta^2 / sqrt(tr Sigma^2) equal to the p=2000 setting.
"""

import argparse

from ustatcpd.simulation import Covariance, SimulationConfig, estimate_overshoots
from ustatcpd.theory import edd_max_bounds, edd_sum_formula


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=int, default=500)
    ap.add_argument("--delta", type=float, nargs="+", default=[5.0, 10.0, 15.0, 20.0])
    ap.add_argument("--delta-scale", default="auto")
    ap.add_argument("--arl", type=float, default=1000.0)
    ap.add_argument("--reps", type=int, default=200)
    ap.add_argument("--window", type=int, default=100)
    ap.add_argument("--train", type=int, default=200)
    ap.add_argument("--seed", type=int, default=909)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    scale = (args.p / 2000) ** 0.25 if args.delta_scale == "auto" else float(args.delta_scale)
    print("delta,edd_max,se_max,edd_sum,se_sum,max_bound_lo,max_bound_hi,sum_formula,"
          "rho_min,rho_max,rho2")
    for d in args.delta:
        delta = d * scale
        cfg = SimulationConfig(
            p=args.p, n0=args.train, H=args.window, covariance=Covariance("ar1", 0.5),
            replications=args.reps, seed=args.seed, nominal_arl=args.arl, delta=delta,
            workers=args.workers,
        )
        o = estimate_overshoots(cfg)
        d2 = delta * delta
        lo, hi = edd_max_bounds(o.a, o.sigma_min, o.sigma_max, o.rho_min, o.rho_max, d2)
        pred = edd_sum_formula(o.b, o.sigma_sum, o.rho2, d2, args.window)
        print(f"{delta:.3f},{o.edd_max.mean:.3f},{o.edd_max.se:.3f},{o.edd_sum.mean:.3f},"
              f"{o.edd_sum.se:.3f},{lo:.3f},{hi:.3f},{pred:.3f},{o.rho_min:.2f},"
              f"{o.rho_max:.2f},{o.rho2:.2f}", flush=True)


if __name__ == "__main__":
    main()
