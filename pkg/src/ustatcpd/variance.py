"""Training-sample estimate of tr(Sigma^2) and the null standard deviations
used to standardize the split statistics."""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError, InsufficientTrainingError
from .window import check_window_length, split_coefficients, split_indices


def _training_gram(training) -> np.ndarray:
    X = np.asarray(training, dtype=float)
    if X.ndim != 2:
        raise ConfigError("training data must be a 2-D array of shape (n0, p)")
    if X.shape[0] < 4:
        raise InsufficientTrainingError(
            f"need at least 4 training observations, got {X.shape[0]}"
        )
    if not np.all(np.isfinite(X)):
        raise InsufficientTrainingError("training data contains NaN or Inf")
    return X @ X.T


def estimate_tr_sigma2(training, *, clamp: bool = True) -> float:
    """Unbiased U-statistic estimate of tr(Sigma^2).

    Uses sums over mutually distinct indices of ``(X_i'X_j)^2``,
    ``X_i'X_j X_j'X_k`` and ``X_i'X_j X_k'X_l``, reduced to Gram-matrix row
    sums by inclusion-exclusion so the cost is ``O(n0^2 p)``.

    The estimate equals the average of ``((X_i - X_j)'(X_k - X_l))^2 / 4``
    over distinct quadruples, so it is non-negative; it is zero only for
    degenerate samples (or slightly negative through rounding). Such values
    are clamped to a tiny positive floor with a warning unless ``clamp=False``.
    """
    G = _training_gram(training)
    n = G.shape[0]
    G0 = G - np.diag(np.diagonal(G))
    frob = float(np.sum(G0 * G0))
    rows = G0.sum(axis=1)
    row_sq = float(rows @ rows)
    total = float(rows.sum())

    distinct3 = row_sq - frob
    distinct4 = total * total - 4.0 * row_sq + 2.0 * frob
    est = (
        frob / (n * (n - 1))
        - 2.0 * distinct3 / (n * (n - 1) * (n - 2))
        + distinct4 / (n * (n - 1) * (n - 2) * (n - 3))
    )
    if clamp and est <= 0.0:
        p = np.asarray(training).shape[1]
        floor = np.finfo(float).eps * p
        warnings.warn(
            f"tr(Sigma^2) estimate {est:.3g} is not positive; clamped to {floor:.3g}",
            RuntimeWarning,
            stacklevel=2,
        )
        est = floor
    return float(est)


def tr_sigma2_brute_force(training) -> float:
    """Quadruple loop over distinct indices. Only usable for ``n0 <= 10``."""
    X = np.asarray(training, dtype=float)
    n = X.shape[0]
    if n < 4:
        raise InsufficientTrainingError("need at least 4 training observations")
    G = X @ X.T
    t1 = sum(G[i, j] ** 2 for i, j in itertools.permutations(range(n), 2))
    t2 = sum(G[i, j] * G[j, k] for i, j, k in itertools.permutations(range(n), 3))
    t3 = sum(G[i, j] * G[k, l] for i, j, k, l in itertools.permutations(range(n), 4))
    return (
        t1 / (n * (n - 1))
        - 2.0 * t2 / (n * (n - 1) * (n - 2))
        + t3 / (n * (n - 1) * (n - 2) * (n - 3))
    )


def sigma_s_squared(s, H: int, tr2: float):
    """Null variance of ``U_s`` for a window of length ``H``.

    ``(m2/(m1-1) + 2 + m1/(m2-1)) * 2 m1 m2 tr2 / H^2`` with ``m1 = s``,
    ``m2 = H - s``. Accepts a scalar or an array of split sizes.
    """
    H = check_window_length(H)
    s_arr = np.asarray(s)
    if np.any(s_arr < 2) or np.any(s_arr > H - 2) or np.any(s_arr != np.floor(s_arr)):
        raise ConfigError(f"split index must be an integer in [2, {H - 2}], got {s}")
    s_f = s_arr.astype(float)
    m2 = H - s_f
    out = (m2 / (s_f - 1) + 2.0 + s_f / (m2 - 1)) * 2.0 * s_f * m2 * tr2 / H**2
    return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=32)
def _split_weights(H: int) -> np.ndarray:
    # W[k, i, j]: ordered-pair coefficient of X_i'X_j in U_{s_k}, diagonal zero
    s_all = split_indices(H)
    c1, c2 = split_coefficients(H)
    idx = np.arange(H)
    W = np.empty((len(s_all), H, H))
    for k, s in enumerate(s_all):
        first = idx < s
        same_first = np.logical_and.outer(first, first)
        same_second = np.logical_and.outer(~first, ~first)
        w = np.full((H, H), -1.0)
        w[same_first] = c1[k]
        w[same_second] = c2[k]
        np.fill_diagonal(w, 0.0)
        W[k] = w / H
    W.setflags(write=False)
    return W


def split_covariance(H: int, tr2: float = 1.0) -> np.ndarray:
    """Exact null covariance matrix of ``(U_2, ..., U_{H-2})``.

    Each ``U_s`` is a linear combination of the pair products ``X_i'X_j``;
    distinct unordered pairs are uncorrelated under the null and each has
    variance ``tr(Sigma^2)``. The diagonal reproduces :func:`sigma_s_squared`.
    """
    H = check_window_length(H)
    W = _split_weights(H).reshape(H - 3, -1)
    return 2.0 * tr2 * (W @ W.T)


def sum_variance_exact(H: int, tr2: float) -> float:
    """Exact null variance of ``sum_s U_s`` (all split covariances included)."""
    H = check_window_length(H)
    W = _split_weights(H).sum(axis=0)
    return float(2.0 * tr2 * np.sum(W * W))


def sum_variance_additive(H: int, tr2: float) -> float:
    """``sum_s sigma_s^2``: the sum-statistic variance if splits were uncorrelated."""
    H = check_window_length(H)
    return float(np.sum(sigma_s_squared(split_indices(H), H, tr2)))


@dataclass(frozen=True)
class TrainingSummary:
    n0: int
    H: int
    tr2_hat: float
    sigma_s: np.ndarray
    sigma_sum: float
    sigma_sum_exact: float
    mean: np.ndarray

    @property
    def sigma_min(self) -> float:
        return float(self.sigma_s.min())

    @property
    def sigma_max(self) -> float:
        return float(self.sigma_s.max())


def build_training_summary(training, H: int) -> TrainingSummary:
    """Estimate tr(Sigma^2) from ``training`` and tabulate the split SDs.

    ``sigma_sum`` is ``sqrt(sum_s sigma_s^2)``; ``sigma_sum_exact`` also
    accounts for the covariances between split statistics, which are large
    because every split reuses the same pairs.
    """
    H = check_window_length(H)
    X = np.asarray(training, dtype=float)
    tr2 = estimate_tr_sigma2(X)
    sig2 = sigma_s_squared(split_indices(H), H, tr2)
    sigma_s = np.sqrt(sig2)
    sigma_s.setflags(write=False)
    return TrainingSummary(
        n0=X.shape[0],
        H=H,
        tr2_hat=tr2,
        sigma_s=sigma_s,
        sigma_sum=float(np.sqrt(np.sum(sig2))),
        sigma_sum_exact=float(np.sqrt(sum_variance_exact(H, tr2))),
        mean=X.mean(axis=0),
    )
