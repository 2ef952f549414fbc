"""Monte Carlo ARL against the nominal ARL used for calibration.

Default is the desk-scale setting (p=500, 200 replicates, nominal 1000);
pass e.g. ``--p 1000 1500 2000 2500 --arl 1000 3000 5000 7000 --reps 1000``
for the full grid (hours on one core; use --workers).
"""

import argparse

from ustatcpd.simulation import Covariance, SimulationConfig, run_arl_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=int, nargs="+", default=[500])
    ap.add_argument("--arl", type=float, nargs="+", default=[1000.0])
    ap.add_argument("--reps", type=int, default=200)
    ap.add_argument("--window", type=int, default=100)
    ap.add_argument("--train", type=int, default=200)
    ap.add_argument("--rho", type=float, default=0.5)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    print("p,nominal_arl,rule,threshold,mc_arl,se,censored,seconds")
    for p in args.p:
        for arl in args.arl:
            for rule in ("max", "sum"):
                cfg = SimulationConfig(
                    p=p, n0=args.train, H=args.window, covariance=Covariance("ar1", args.rho),
                    replications=args.reps, seed=args.seed, nominal_arl=arl, rule=rule,
                    workers=args.workers,
                )
                r = run_arl_experiment(cfg)
                print(f"{p},{arl:g},{rule},{r.threshold:.4f},{r.mean:.1f},{r.se:.1f},"
                      f"{r.n_censored},{r.runtime_s:.1f}", flush=True)


if __name__ == "__main__":
    main()
