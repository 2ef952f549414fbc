"""Max-type and sum-type stopping rules run online over a stream.

Max rule: stop at the first ``n > n0`` with ``max_s |U_s / sigma_s| > a``.
Sum rule: stop at the first ``n > n0`` with ``|sum_s U_s / sigma| > b``.
The reported stopping time is ``n - n0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Literal

import numpy as np

from .errors import ConfigError, InsufficientTrainingError
from .theory import solve_threshold
from .variance import TrainingSummary, build_training_summary
from .window import SlidingWindow, check_window_length, split_indices

Rule = Literal["max", "sum"]
SumScale = Literal["exact", "additive"]


@dataclass(frozen=True)
class DetectorConfig:
    """``sum_scale`` picks the sum-rule standardizer: ``"exact"`` uses the
    true null SD of ``sum_s U_s`` (split covariances included),
    ``"additive"`` uses ``sqrt(sum_s sigma_s^2)``."""

    rule: Rule
    H: int
    n0: int
    threshold: float
    p: int
    target_arl: float | None = None
    sum_scale: SumScale = "exact"
    record_trajectory: bool = False

    def __post_init__(self):
        if self.rule not in ("max", "sum"):
            raise ConfigError(f"rule must be 'max' or 'sum', got {self.rule!r}")
        check_window_length(self.H)
        if self.n0 < 4:
            raise ConfigError(f"n0 must be at least 4, got {self.n0}")
        if self.n0 < self.H:
            raise ConfigError(
                f"n0={self.n0} is smaller than the window H={self.H}; "
                "the window is seeded from the training tail"
            )
        if not self.threshold > 0:
            raise ConfigError(f"threshold must be positive, got {self.threshold}")
        if self.p < 1:
            raise ConfigError(f"p must be positive, got {self.p}")
        if self.sum_scale not in ("exact", "additive"):
            raise ConfigError(f"unknown sum_scale {self.sum_scale!r}")

    @classmethod
    def calibrated(cls, rule: Rule, H: int, n0: int, p: int, target_arl: float, **kw) -> "DetectorConfig":
        """Config whose threshold is solved from the ARL approximation."""
        return cls(rule, H, n0, solve_threshold(rule, H, target_arl), p, target_arl=target_arl, **kw)


@dataclass
class DetectionReport:
    stopped: bool
    stopping_time: int | None
    n: int
    threshold: float
    rule: str
    trigger_statistic: float | None = None
    trigger_split: int | None = None
    trigger_t: int | None = None
    max_abs_u: float | None = None
    abs_sum_u: float | None = None
    trajectory: list[float] | None = field(default=None, repr=False)


class Detector:
    """Online detector; call :meth:`step` once per post-training observation.

    Observations are centred by the training mean before entering the window.
    The statistics are exactly location invariant, so this changes nothing
    algebraically but keeps the Gram entries well conditioned.
    """

    def __init__(self, config: DetectorConfig, training):
        X = np.asarray(training, dtype=float)
        if X.ndim != 2 or X.shape[1] != config.p:
            raise ConfigError(f"training must have shape (n0, {config.p}), got {X.shape}")
        if X.shape[0] != config.n0:
            raise InsufficientTrainingError(
                f"expected {config.n0} training observations, got {X.shape[0]}"
            )
        self.config = config
        self.summary: TrainingSummary = build_training_summary(X, config.H)
        self._center = self.summary.mean
        self.window = SlidingWindow(config.H, config.p)
        for x in X[-config.H:]:
            self.window.push(x - self._center)
        self.window.count = config.n0
        self._inv_sigma_s = 1.0 / self.summary.sigma_s
        self._sigma_sum = (
            self.summary.sigma_sum_exact if config.sum_scale == "exact" else self.summary.sigma_sum
        )
        self._splits = split_indices(config.H)
        self.trajectory: list[float] | None = [] if config.record_trajectory else None
        self.stopped = False

    @property
    def n(self) -> int:
        return self.window.count

    @property
    def sigma_sum(self) -> float:
        """Standardizer actually used by the sum rule."""
        return self._sigma_sum

    def statistic(self, u: np.ndarray) -> tuple[float, int | None]:
        if self.config.rule == "max":
            z = np.abs(u) * self._inv_sigma_s
            k = int(np.argmax(z))
            return float(z[k]), int(self._splits[k])
        return abs(float(u.sum())) / self._sigma_sum, None

    def step(self, x) -> DetectionReport | None:
        """Consume one observation; return a report on stop, else ``None``."""
        if self.stopped:
            raise RuntimeError("detector has already stopped")
        x = np.asarray(x, dtype=float)
        if x.shape != self._center.shape:
            raise ConfigError(f"observation has shape {x.shape}, expected ({self.config.p},)")
        self.window.push(x - self._center)
        u = self.window.splits()
        stat, split = self.statistic(u)
        if self.trajectory is not None:
            self.trajectory.append(stat)
        if stat > self.config.threshold:
            self.stopped = True
            return self._report(True, stat, split, u)
        return None

    def _report(self, stopped, stat=None, split=None, u=None) -> DetectionReport:
        n = self.n
        return DetectionReport(
            stopped=stopped,
            stopping_time=n - self.config.n0 if stopped else None,
            n=n,
            threshold=self.config.threshold,
            rule=self.config.rule,
            trigger_statistic=stat,
            trigger_split=split,
            trigger_t=None if split is None else n - self.config.H + split,
            max_abs_u=None if u is None else float(np.max(np.abs(u))),
            abs_sum_u=None if u is None else abs(float(u.sum())),
            trajectory=None if self.trajectory is None else list(self.trajectory),
        )

    def run(self, stream: Iterable, max_steps: int | None = None) -> DetectionReport:
        """Step through ``stream`` until a stop, exhaustion or ``max_steps``."""
        steps = 0
        for x in stream:
            if max_steps is not None and steps >= max_steps:
                break
            rep = self.step(x)
            steps += 1
            if rep is not None:
                return rep
        return self._report(False)


def offline_statistics(config: DetectorConfig, data) -> np.ndarray:
    """Batch recomputation of the monitored statistic at every ``n > n0``.

    ``data`` holds the training sample followed by the monitored stream. Each
    window is evaluated from scratch from its own Gram matrix.
    """
    from .window import splits_from_gram

    X = np.asarray(data, dtype=float)
    summary = build_training_summary(X[: config.n0], config.H)
    Xc = X - summary.mean
    sigma_sum = summary.sigma_sum_exact if config.sum_scale == "exact" else summary.sigma_sum
    out = []
    for n in range(config.n0 + 1, X.shape[0] + 1):
        W = Xc[n - config.H : n]
        u = splits_from_gram(W @ W.T)
        if config.rule == "max":
            out.append(float(np.max(np.abs(u) / summary.sigma_s)))
        else:
            out.append(abs(float(u.sum())) / sigma_sum)
    return np.array(out)
