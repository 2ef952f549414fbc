"""Sliding window and the windowed two-sample U-statistic.

For a full window ``X_1, ..., X_H`` and split ``s`` (first group of size
``m1 = s``, second of size ``m2 = H - s``)::

    U_s = (1/H) * ( m2/(m1-1) * sum_{i!=j in G1} X_i'X_j
                    - 2 * sum_{i in G1, j in G2} X_i'X_j
                    + m1/(m2-1) * sum_{i!=j in G2} X_i'X_j )

with ordered-pair sums. Splits run over ``s = 2, ..., H-2``; the global
index of the split point is ``t = n - H + s``.

The window keeps the H x H Gram matrix in window order. A push costs ``H``
inner products; all ``H - 3`` split statistics then come from prefix sums of
the Gram rows in ``O(H^2)``.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, DataError, NotReadyError

MIN_WINDOW = 5


def split_indices(H: int) -> np.ndarray:
    """Window-relative split sizes ``s = 2, ..., H-2``."""
    return np.arange(2, H - 1)


def split_coefficients(H: int) -> tuple[np.ndarray, np.ndarray]:
    """Within-group weights ``m2/(m1-1)`` and ``m1/(m2-1)`` for every split."""
    s = split_indices(H).astype(float)
    return (H - s) / (s - 1), s / (H - s - 1)


def check_window_length(H: int) -> int:
    if int(H) != H or H < MIN_WINDOW:
        raise ConfigError(f"window length H must be an integer >= {MIN_WINDOW}, got {H}")
    return int(H)


def splits_from_gram(gram: np.ndarray) -> np.ndarray:
    """All split statistics of a window given its (window-ordered) Gram matrix."""
    H = gram.shape[0]
    # lower[i] = sum_{j<i} G_ij, so the ordered within-prefix sum is 2*cumsum(lower)
    lower = np.tril(gram, -1).sum(axis=1)
    rows = gram.sum(axis=1) - np.diagonal(gram)
    within_first = 2.0 * np.cumsum(lower)
    row_prefix = np.cumsum(rows)
    total = row_prefix[-1]

    s = split_indices(H)
    a = within_first[s - 1]
    cross = row_prefix[s - 1] - a
    c = total - a - 2.0 * cross
    c1, c2 = split_coefficients(H)
    return (c1 * a - 2.0 * cross + c2 * c) / H


class SlidingWindow:
    """Ring buffer of the last ``H`` observations plus their Gram matrix.

    ``count`` is the global number of observations pushed so far.
    """

    def __init__(self, H: int, p: int):
        self.H = check_window_length(H)
        if int(p) != p or p < 1:
            raise ConfigError(f"dimension p must be a positive integer, got {p}")
        self.p = int(p)
        self._buf = np.zeros((self.H, self.p))
        self._head = 0  # slot holding the oldest observation once full
        self._size = 0
        self._gram = np.zeros((self.H, self.H))
        self.count = 0

    @property
    def full(self) -> bool:
        return self._size == self.H

    def __len__(self) -> int:
        return self._size

    def _order(self) -> np.ndarray:
        if self.full:
            return (self._head + np.arange(self.H)) % self.H
        return np.arange(self._size)

    @property
    def buffer(self) -> np.ndarray:
        """Observations in the window, oldest first (a copy)."""
        return self._buf[self._order()].copy()

    @property
    def gram(self) -> np.ndarray:
        """Inner products ``X_i'X_j`` of the window, oldest first (a copy)."""
        k = self._size
        return self._gram[:k, :k].copy()

    @property
    def sq_norms(self) -> np.ndarray:
        return np.diagonal(self.gram).copy()

    def push(self, x) -> None:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.p,):
            raise ConfigError(f"observation has shape {x.shape}, expected ({self.p},)")
        if not np.all(np.isfinite(x)):
            raise DataError("observation contains NaN or Inf")

        if self.full:
            self._gram[:-1, :-1] = self._gram[1:, 1:]
            self._buf[self._head] = x
            self._head = (self._head + 1) % self.H
        else:
            self._buf[self._size] = x
            self._size += 1
        k = self._size
        row = self._buf[self._order()] @ x
        self._gram[k - 1, :k] = row
        self._gram[:k, k - 1] = row
        self.count += 1

    def splits(self) -> np.ndarray:
        """``U_s`` for ``s = 2, ..., H-2``; raises :class:`NotReadyError` until full."""
        if not self.full:
            raise NotReadyError(f"window holds {self._size} of {self.H} observations")
        return splits_from_gram(self._gram)

    def split_times(self) -> np.ndarray:
        """Global 1-based split indices ``t = n - H + s`` matching :meth:`splits`."""
        return self.count - self.H + split_indices(self.H)


def compute_all_splits(window: SlidingWindow) -> np.ndarray:
    return window.splits()


def splits_brute_force(X: np.ndarray) -> np.ndarray:
    """Direct triple-loop evaluation over ordered pairs; test oracle only."""
    X = np.asarray(X, dtype=float)
    H = X.shape[0]
    out = []
    for s in range(2, H - 1):
        m1, m2 = s, H - s
        a = b = c = 0.0
        for i in range(H):
            for j in range(H):
                if i == j:
                    continue
                v = float(np.dot(X[i], X[j]))
                if i < s and j < s:
                    a += v
                elif i >= s and j >= s:
                    c += v
                elif i < s <= j:
                    b += v
        out.append((m2 / (m1 - 1) * a - 2.0 * b + m1 / (m2 - 1) * c) / H)
    return np.array(out)
