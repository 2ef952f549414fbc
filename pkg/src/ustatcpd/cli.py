"""Command-line front end.

Subcommands: ``calibrate``, ``detect``, ``simulate {arl,edd}``,
``estimate-variance``. Each prints a one-line summary on stdout followed by
the JSON report (or writes the report to ``--out`` instead).

Exit codes: 0 success, 1 usage or invalid parameters, 2 data error,
3 numeric failure. Errors are reported on a single stderr line
``error[<kind>]: <message>``.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from . import __version__
from .detector import Detector, DetectorConfig
from .errors import (
    ConfigError,
    DataError,
    DetectionError,
    InconclusiveError,
    NumericError,
)
from .io import iter_csv_rows, read_prefix, write_report
from .simulation import Covariance, SimulationConfig, run_arl_experiment, run_edd_experiment
from .theory import arl_max, arl_sum, solve_threshold
from .variance import estimate_tr_sigma2

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

ARL_CAVEAT = (
    "thresholds come from first-order ARL approximations; "
    "Monte Carlo ARLs at moderate H typically differ by up to about 30%"
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def read_config_file(path: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    cfg = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config {path} line {lineno}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        cfg[key.replace("-", "_")] = value
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ustatcpd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="key=value file; explicit flags take precedence")
        p.add_argument("--out", help="write the JSON report here as well")

    cal = sub.add_parser("calibrate", help="solve the threshold for a target ARL")
    cal.add_argument("--rule", choices=["max", "sum"], required=True)
    cal.add_argument("--window", type=int, default=100)
    cal.add_argument("--arl", type=float, required=True)
    common(cal)

    det = sub.add_parser("detect", help="monitor a CSV stream")
    det.add_argument("stream")
    det.add_argument("--rule", choices=["max", "sum"], default="max")
    det.add_argument("--window", type=int, default=100)
    det.add_argument("--train", type=int, default=200)
    src = det.add_mutually_exclusive_group()
    src.add_argument("--threshold", type=float)
    src.add_argument("--arl", type=float)
    det.add_argument("--sum-scale", choices=["exact", "additive"], default="exact")
    det.add_argument("--trajectory", action="store_true", help="include per-step statistics")
    common(det)

    sim = sub.add_parser("simulate", help="Monte Carlo ARL or EDD experiment")
    sim.add_argument("kind", choices=["arl", "edd"])
    sim.add_argument("--p", type=int, default=500)
    sim.add_argument("--window", type=int, default=100)
    sim.add_argument("--train", type=int, default=200)
    sim.add_argument("--cov", default="ar1:0.5")
    sim.add_argument("--arl", type=float, default=1000.0)
    sim.add_argument("--reps", type=int, default=200)
    sim.add_argument("--rule", choices=["max", "sum"], default="max")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--delta", type=float, default=0.0)
    sim.add_argument("--pattern", choices=["dense", "first-k"], default="dense")
    sim.add_argument("--k", type=int, default=1)
    sim.add_argument("--threshold", type=float)
    sim.add_argument("--horizon-factor", type=float, default=20.0)
    sim.add_argument("--sum-scale", choices=["exact", "additive"], default="exact")
    sim.add_argument("--workers", type=int, default=1)
    common(sim)

    est = sub.add_parser("estimate-variance", help="estimate tr(Sigma^2) from a CSV prefix")
    est.add_argument("stream")
    est.add_argument("--train", type=int, help="rows to use (default: all)")
    common(est)
    return parser


def _config_path(argv) -> str | None:
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def parse_args(argv) -> argparse.Namespace:
    """Parse flags; values from ``--config`` become subcommand defaults."""
    argv = list(argv)
    parser = build_parser()
    path = _config_path(argv)
    if path is None:
        return parser.parse_args(argv)

    command = next((tok for tok in argv if tok in COMMANDS), None)
    if command is None:
        return parser.parse_args(argv)
    sub = parser._subparsers._group_actions[0].choices[command]
    known = {a.dest: a for a in sub._actions}
    cfg = read_config_file(path)
    unknown = set(cfg) - set(known)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    defaults = {}
    for key, value in cfg.items():
        action = known[key]
        if action.type is not None:
            try:
                value = action.type(value)
            except ValueError:
                raise UsageError(f"config key {key}: bad value {value!r}") from None
        elif isinstance(action, argparse._StoreTrueAction):
            value = value.lower() in ("1", "true", "yes", "on")
        if action.choices is not None and value not in action.choices:
            raise UsageError(f"config key {key}: {value!r} not in {sorted(action.choices)}")
        action.required = False
        defaults[key] = value
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def cmd_calibrate(args) -> dict:
    if not args.arl > args.window:
        raise ConfigError(f"target_arl must exceed H (got arl={args.arl}, H={args.window})")
    thr = solve_threshold(args.rule, args.window, args.arl)
    arl_fn = arl_max if args.rule == "max" else arl_sum
    print(f"{thr:.6f}")
    return {
        "command": "calibrate",
        "rule": args.rule,
        "H": args.window,
        "target_arl": args.arl,
        "threshold": thr,
        "arl_at_threshold": arl_fn(args.window, thr),
        "caveat": ARL_CAVEAT,
    }


def cmd_detect(args) -> dict:
    rows = iter_csv_rows(args.stream)
    training = read_prefix(rows, args.train)
    p = training.shape[1]
    if args.threshold is not None:
        threshold, source = args.threshold, "explicit"
    elif args.arl is not None:
        if not args.arl > args.window:
            raise ConfigError(f"target_arl must exceed H (got arl={args.arl}, H={args.window})")
        threshold, source = solve_threshold(args.rule, args.window, args.arl), "target_arl"
    else:
        raise ConfigError("detect needs --threshold or --arl")
    cfg = DetectorConfig(
        args.rule, args.window, args.train, threshold, p,
        target_arl=args.arl, sum_scale=args.sum_scale, record_trajectory=args.trajectory,
    )
    det = Detector(cfg, training)
    report = det.run(rows)
    out = {
        "command": "detect",
        "stream": str(args.stream),
        "rule": cfg.rule,
        "H": cfg.H,
        "n0": cfg.n0,
        "p": p,
        "threshold": threshold,
        "threshold_source": source,
        "target_arl": args.arl,
        "sum_scale": cfg.sum_scale,
        "stopped": report.stopped,
        "stopping_time": report.stopping_time,
        "n": report.n,
        "trigger_split": report.trigger_split,
        "trigger_t": report.trigger_t,
        "trigger_statistic": report.trigger_statistic,
        "tr2_hat": det.summary.tr2_hat,
        "rows_read": report.n,
        "version": __version__,
    }
    if report.trajectory is not None:
        out["trajectory"] = report.trajectory
    print(f"stopped={str(report.stopped).lower()} stopping_time={report.stopping_time}")
    return out


def cmd_simulate(args) -> dict:
    tau = args.train if args.kind == "edd" else None
    cfg = SimulationConfig(
        p=args.p, n0=args.train, H=args.window, covariance=Covariance.parse(args.cov),
        tau=tau, delta=args.delta, pattern=args.pattern, k=args.k, replications=args.reps,
        seed=args.seed, nominal_arl=args.arl, rule=args.rule, threshold=args.threshold,
        horizon_factor=args.horizon_factor, sum_scale=args.sum_scale, workers=args.workers,
    )
    result = run_arl_experiment(cfg) if args.kind == "arl" else run_edd_experiment(cfg)
    print(f"{result.mean:.6f} {result.se:.6f}")
    out = result.to_dict()
    out["command"] = f"simulate {args.kind}"
    return out


def cmd_estimate_variance(args) -> dict:
    rows = iter_csv_rows(args.stream)
    if args.train is not None:
        data = read_prefix(rows, args.train)
    else:
        import numpy as np

        data = np.array(list(rows))
    if data.shape[0] < 4:
        raise DataError(f"need at least 4 rows, got {data.shape[0]}")
    tr2 = estimate_tr_sigma2(data)
    print(repr(tr2))
    return {"command": "estimate-variance", "n0": int(data.shape[0]), "p": int(data.shape[1]), "tr2_hat": tr2}


COMMANDS = {
    "calibrate": cmd_calibrate,
    "detect": cmd_detect,
    "simulate": cmd_simulate,
    "estimate-variance": cmd_estimate_variance,
}


def _fail(kind: str, code: int, message) -> int:
    msg = " ".join(str(message).split())
    print(f"error[{kind}]: {msg}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    try:
        args = parse_args(sys.argv[1:] if argv is None else argv)
        report = COMMANDS[args.command](args)
        text = write_report(report, args.out)
        if args.out is None:
            print(text)
        return EXIT_OK
    except UsageError as exc:
        return _fail("usage", EXIT_USAGE, exc)
    except ConfigError as exc:
        return _fail("config", EXIT_USAGE, exc)
    except InconclusiveError as exc:
        return _fail("inconclusive", EXIT_NUMERIC, exc)
    except NumericError as exc:
        return _fail("numeric", EXIT_NUMERIC, exc)
    except DataError as exc:
        return _fail("data", EXIT_DATA, exc)
    except OSError as exc:
        return _fail("io", EXIT_DATA, exc)
    except DetectionError as exc:
        return _fail("error", EXIT_USAGE, exc)


if __name__ == "__main__":
    sys.exit(main())
