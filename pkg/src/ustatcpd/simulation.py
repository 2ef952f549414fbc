"""Monte Carlo harness: Gaussian streams with an optional mean shift, ARL and
EDD experiments, and overshoot estimates for the delay formulas.

Every replicate draws from ``np.random.default_rng([seed, replicate])``, so
results do not depend on execution order or on the number of workers.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterator

import numpy as np
from scipy.signal import lfilter

from .detector import Detector, DetectorConfig
from .errors import ConfigError, InconclusiveError
from .theory import solve_threshold

BLOCK = 256


@dataclass(frozen=True)
class Covariance:
    """``kind`` is ``"identity"``, ``"ar1"`` (``Sigma_ij = rho^|i-j|``) or ``"matrix"``."""

    kind: str = "identity"
    rho: float = 0.0
    matrix: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("identity", "ar1", "matrix"):
            raise ConfigError(f"unknown covariance kind {self.kind!r}")
        if self.kind == "ar1" and not -1.0 < self.rho < 1.0:
            raise ConfigError(f"AR(1) coefficient must lie in (-1, 1), got {self.rho}")
        if self.kind == "matrix":
            if self.matrix is None:
                raise ConfigError("matrix covariance requires a matrix")
            M = np.asarray(self.matrix, dtype=float)
            if M.ndim != 2 or M.shape[0] != M.shape[1] or not np.allclose(M, M.T):
                raise ConfigError("covariance matrix must be square and symmetric")
            try:
                L = np.linalg.cholesky(M)
            except np.linalg.LinAlgError:
                raise ConfigError("covariance matrix is not positive definite") from None
            object.__setattr__(self, "matrix", M)
            object.__setattr__(self, "_chol", L)

    @classmethod
    def parse(cls, text: str) -> "Covariance":
        """``"identity"`` or ``"ar1:<rho>"``."""
        text = text.strip().lower()
        if text in ("identity", "iid", "i"):
            return cls("identity")
        if text.startswith("ar1:"):
            try:
                rho = float(text[4:])
            except ValueError:
                raise ConfigError(f"bad AR(1) coefficient in {text!r}") from None
            return cls("ar1", rho)
        raise ConfigError(f"unknown covariance spec {text!r}; use 'identity' or 'ar1:<rho>'")

    def describe(self) -> str:
        if self.kind == "ar1":
            return f"ar1:{self.rho!r}"
        return self.kind

    def dense(self, p: int) -> np.ndarray:
        if self.kind == "identity":
            return np.eye(p)
        if self.kind == "ar1":
            idx = np.arange(p)
            return self.rho ** np.abs(idx[:, None] - idx[None, :])
        return self.matrix

    def tr_sigma2(self, p: int) -> float:
        """Exact tr(Sigma^2)."""
        if self.kind == "identity":
            return float(p)
        if self.kind == "ar1":
            lags = np.arange(1, p)
            return float(p + 2.0 * np.sum((p - lags) * self.rho ** (2 * lags)))
        return float(np.sum(self.matrix * self.matrix))

    def draw(self, rng: np.random.Generator, n: int, p: int) -> np.ndarray:
        """``n`` independent zero-mean rows with this covariance."""
        Z = rng.standard_normal((n, p))
        if self.kind == "identity":
            return Z
        if self.kind == "ar1":
            c = math.sqrt(1.0 - self.rho**2)
            # X_0 = Z_0, X_j = rho X_{j-1} + c Z_j along the coordinate axis
            Z[:, 0] /= c
            return lfilter([c], [1.0, -self.rho], Z, axis=1)
        if self.matrix.shape[0] != p:
            raise ConfigError(f"covariance matrix is {self.matrix.shape[0]}x{self.matrix.shape[0]}, p={p}")
        return Z @ self._chol.T


def change_vector(p: int, delta: float, pattern: str = "dense", k: int = 1) -> np.ndarray:
    """Mean shift with Euclidean norm ``delta``.

    ``"dense"`` spreads it equally over all coordinates; ``"first-k"`` puts it
    equally on the first ``k`` coordinates.
    """
    if delta < 0:
        raise ConfigError(f"delta must be non-negative, got {delta}")
    mu = np.zeros(p)
    if delta == 0:
        return mu
    if pattern in ("dense", "dense-equal"):
        mu[:] = delta / math.sqrt(p)
    elif pattern in ("first-k", "first_k"):
        if not 1 <= k <= p:
            raise ConfigError(f"k must lie in [1, {p}], got {k}")
        mu[:k] = delta / math.sqrt(k)
    else:
        raise ConfigError(f"unknown change pattern {pattern!r}")
    return mu


@dataclass(frozen=True)
class SimulationConfig:
    """``tau`` is the index of the last pre-change observation (``None`` = no change)."""

    p: int = 500
    n0: int = 200
    H: int = 100
    covariance: Covariance = Covariance("ar1", 0.5)
    tau: int | None = None
    delta: float = 0.0
    pattern: str = "dense"
    k: int = 1
    replications: int = 200
    seed: int = 0
    nominal_arl: float = 1000.0
    rule: str = "max"
    threshold: float | None = None
    horizon_factor: float = 20.0
    sum_scale: str = "exact"
    workers: int = 1

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigError(f"replications must be >= 1, got {self.replications}")
        if self.delta < 0:
            raise ConfigError(f"delta must be non-negative, got {self.delta}")
        if self.p < 1:
            raise ConfigError(f"p must be positive, got {self.p}")
        if self.rule not in ("max", "sum"):
            raise ConfigError(f"rule must be 'max' or 'sum', got {self.rule!r}")
        if self.tau is not None and self.tau < self.n0:
            raise ConfigError(f"tau must be >= n0={self.n0}, got {self.tau}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @property
    def horizon(self) -> int:
        return int(math.ceil(self.horizon_factor * self.nominal_arl))

    def resolved_threshold(self) -> float:
        if self.threshold is not None:
            return float(self.threshold)
        return solve_threshold(self.rule, self.H, self.nominal_arl)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["covariance"] = self.covariance.describe()
        return d


def replicate_rng(seed: int, replicate: int) -> np.random.Generator:
    return np.random.default_rng([seed, replicate])


def sample_stream(config: SimulationConfig, rng: np.random.Generator) -> Iterator[np.ndarray]:
    """Endless stream: ``N_p(0, Sigma)`` up to ``tau``, ``N_p(mu, Sigma)`` after.

    Vectors are generated in blocks; the first yielded vector has global
    index 1.
    """
    mu = change_vector(config.p, config.delta, config.pattern, config.k)
    tau = config.tau
    n = 0
    while True:
        block = config.covariance.draw(rng, BLOCK, config.p)
        if tau is not None and config.delta > 0:
            idx = n + 1 + np.arange(BLOCK)
            block[idx > tau] += mu
        for row in block:
            yield row
        n += BLOCK


def _run_replicate(config: SimulationConfig, threshold: float, replicate: int) -> dict:
    rng = replicate_rng(config.seed, replicate)
    stream = sample_stream(config, rng)
    training = np.array([next(stream) for _ in range(config.n0)])
    det_cfg = DetectorConfig(
        config.rule, config.H, config.n0, threshold, config.p,
        target_arl=config.nominal_arl, sum_scale=config.sum_scale,
    )
    det = Detector(det_cfg, training)
    rep = det.run(stream, max_steps=config.horizon)
    return {
        "stopping_time": rep.stopping_time if rep.stopped else config.horizon,
        "censored": not rep.stopped,
        "max_abs_u": rep.max_abs_u,
        "abs_sum_u": rep.abs_sum_u,
        "sigma_min": det.summary.sigma_min,
        "sigma_max": det.summary.sigma_max,
        "sigma_sum": det.sigma_sum,
        "tr2_hat": det.summary.tr2_hat,
    }


def _run_chunk(args):
    config, threshold, reps = args
    return [_run_replicate(config, threshold, r) for r in reps]


def parallel_map_replicates(config: SimulationConfig, threshold: float) -> list[dict]:
    reps = list(range(config.replications))
    if config.workers == 1:
        return [_run_replicate(config, threshold, r) for r in reps]
    chunks = [reps[i :: config.workers] for i in range(config.workers)]
    with ProcessPoolExecutor(max_workers=config.workers) as pool:
        parts = list(pool.map(_run_chunk, [(config, threshold, c) for c in chunks]))
    by_rep = {}
    for chunk, res in zip(chunks, parts):
        by_rep.update(zip(chunk, res))
    return [by_rep[r] for r in reps]


@dataclass
class ExperimentResult:
    kind: str
    rule: str
    threshold: float
    nominal_arl: float
    stopping_times: np.ndarray
    censored: np.ndarray
    mean: float
    se: float
    horizon: int
    config: dict
    runtime_s: float = 0.0
    extras: dict = field(default_factory=dict, repr=False)

    @property
    def n_censored(self) -> int:
        return int(np.sum(self.censored))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "rule": self.rule,
            "threshold": self.threshold,
            "nominal_arl": self.nominal_arl,
            "mean": self.mean,
            "se": self.se,
            "replications": int(len(self.stopping_times)),
            "n_censored": self.n_censored,
            "horizon": self.horizon,
            "stopping_times": [int(t) for t in self.stopping_times],
            "config": self.config,
            "runtime_s": self.runtime_s,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _summarize(kind: str, config: SimulationConfig, threshold: float, rows: list[dict], t0: float) -> ExperimentResult:
    times = np.array([r["stopping_time"] for r in rows], dtype=float)
    censored = np.array([r["censored"] for r in rows], dtype=bool)
    n = len(times)
    se = float(times.std(ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
    res = ExperimentResult(
        kind=kind,
        rule=config.rule,
        threshold=threshold,
        nominal_arl=config.nominal_arl,
        stopping_times=times.astype(int),
        censored=censored,
        mean=float(times.mean()),
        se=se,
        horizon=config.horizon,
        config=config.to_dict(),
        runtime_s=time.perf_counter() - t0,
        extras={k: np.array([r[k] for r in rows], dtype=float)
                for k in ("max_abs_u", "abs_sum_u", "sigma_min", "sigma_max", "sigma_sum", "tr2_hat")
                if all(r[k] is not None for r in rows)},
    )
    if censored.all():
        err = InconclusiveError(f"all {n} replicates censored at horizon {config.horizon}")
        err.result = res
        raise err
    return res


def run_arl_experiment(config: SimulationConfig) -> ExperimentResult:
    """Mean stopping time with no change. Censored replicates count at the horizon."""
    if config.tau is not None and config.delta > 0:
        raise ConfigError("ARL experiments require no change (tau=None or delta=0)")
    t0 = time.perf_counter()
    threshold = config.resolved_threshold()
    rows = parallel_map_replicates(config, threshold)
    return _summarize("arl", config, threshold, rows, t0)


def run_edd_experiment(config: SimulationConfig) -> ExperimentResult:
    """Mean detection delay for a change right after training (``tau = n0``)."""
    if config.delta <= 0:
        raise ConfigError("EDD experiments need delta > 0")
    if config.tau is None:
        config = _replace(config, tau=config.n0)
    t0 = time.perf_counter()
    threshold = config.resolved_threshold()
    rows = parallel_map_replicates(config, threshold)
    # with tau = n0 the stopping time is already the delay past the change
    offset = config.tau - config.n0
    for r in rows:
        if not r["censored"]:
            r["stopping_time"] -= offset
    return _summarize("edd", config, threshold, rows, t0)


def _replace(config: SimulationConfig, **changes) -> SimulationConfig:
    from dataclasses import replace

    return replace(config, **changes)


@dataclass
class Overshoots:
    rho_min: float
    rho_max: float
    rho2: float
    rho_min_se: float
    rho_max_se: float
    rho2_se: float
    a: float
    b: float
    sigma_min: float
    sigma_max: float
    sigma_sum: float
    edd_max: ExperimentResult = field(repr=False)
    edd_sum: ExperimentResult = field(repr=False)


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    se = float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else float("nan")
    return float(x.mean()), se


def estimate_overshoots(config: SimulationConfig) -> Overshoots:
    """Monte Carlo overshoots of both rules at their stopping times.

    ``rho_min = E[max_s|U_s| - a sigma_min]``, ``rho_max`` likewise with
    ``sigma_max``, ``rho2 = E[|sum_s U_s| - b sigma]``, each replicate using
    its own training-sample standardizers. Censored replicates are dropped.
    """
    if config.delta <= 0:
        raise ConfigError("overshoots need delta > 0")
    edd_max = run_edd_experiment(_replace(config, rule="max", threshold=None))
    edd_sum = run_edd_experiment(_replace(config, rule="sum", threshold=None))
    a, b = edd_max.threshold, edd_sum.threshold

    keep = ~edd_max.censored
    ex = edd_max.extras
    rmin = _mean_se(ex["max_abs_u"][keep] - a * ex["sigma_min"][keep])
    rmax = _mean_se(ex["max_abs_u"][keep] - a * ex["sigma_max"][keep])
    keep2 = ~edd_sum.censored
    es = edd_sum.extras
    r2 = _mean_se(es["abs_sum_u"][keep2] - b * es["sigma_sum"][keep2])
    return Overshoots(
        rho_min=rmin[0], rho_max=rmax[0], rho2=r2[0],
        rho_min_se=rmin[1], rho_max_se=rmax[1], rho2_se=r2[1],
        a=a, b=b,
        sigma_min=float(ex["sigma_min"].mean()),
        sigma_max=float(ex["sigma_max"].mean()),
        sigma_sum=float(es["sigma_sum"].mean()),
        edd_max=edd_max, edd_sum=edd_sum,
    )
