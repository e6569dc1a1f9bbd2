"""Least-squares identification of the per-window state matrix.

Each window is fit with the one-step-ahead model ``x[t+1] ~ A_hat x[t]``.
Degenerate windows never raise: they return the minimum-norm estimate and an
infinite ``cond``.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidInputError
from .numerics import as_matrix, condition_number


@dataclass(frozen=True)
class WindowedSeries:
    """Channels x samples recording plus sliding-window parameters (in samples)."""

    data: np.ndarray
    rate: float
    window_len: int
    step: int
    channel_labels: tuple = None

    def __post_init__(self):
        data = as_matrix(self.data, name="data")
        object.__setattr__(self, "data", data)
        channels, samples = data.shape
        if not (np.isfinite(self.rate) and self.rate > 0):
            raise InvalidInputError(f"rate must be positive, got {self.rate}")
        if not channels + 1 <= self.window_len <= samples:
            raise InvalidInputError(
                f"need channels + 1 <= window_len <= samples, got "
                f"channels={channels}, window_len={self.window_len}, samples={samples}"
            )
        if self.step < 1:
            raise InvalidInputError(f"step must be >= 1, got {self.step}")
        labels = self.channel_labels
        if labels is None:
            labels = tuple(f"ch{i}" for i in range(channels))
        labels = tuple(str(lab) for lab in labels)
        if len(labels) != channels:
            raise InvalidInputError(f"{len(labels)} channel labels for {channels} channels")
        object.__setattr__(self, "channel_labels", labels)

    @property
    def n_channels(self):
        return self.data.shape[0]

    @property
    def n_samples(self):
        return self.data.shape[1]

    @property
    def n_windows(self):
        return (self.n_samples - self.window_len) // self.step + 1

    def window_starts(self):
        return np.arange(self.n_windows) * self.step

    def window_times(self):
        """Start time of each window in seconds."""
        return self.window_starts() / self.rate

    def window(self, i):
        start = i * self.step
        return self.data[:, start:start + self.window_len]


@dataclass(frozen=True)
class EstimationReport:
    A_hat: np.ndarray
    residual_fro: float
    cond: float  # condition number of the data Gram matrix; inf when rank-deficient
    window_index: int = 0

    @property
    def degenerate(self):
        return not np.isfinite(self.cond)


def estimate_window(X, ridge=None, window_index=0):
    """Fit ``A_hat = argmin_A sum_t ||x[t+1] - A x[t]||^2`` on one window.

    Parameters
    ----------
    X : array of shape (channels, T)
        Window samples, ``T >= channels + 1``.
    ridge : float, optional
        Tikhonov parameter added to the Gram matrix. ``None`` (default) gives
        the plain minimum-norm least-squares solution.
    """
    X = as_matrix(X, name="X")
    n, T = X.shape
    if T < n + 1:
        raise InvalidInputError(f"window has {T} samples, need at least {n + 1}")
    if ridge is not None and ridge < 0:
        raise InvalidInputError(f"ridge must be nonnegative, got {ridge}")

    X0, X1 = X[:, :-1], X[:, 1:]
    gram = X0 @ X0.T
    if ridge:
        A_hat = np.linalg.solve(gram + ridge * np.eye(n), X0 @ X1.T).T
    else:
        A_hat = np.linalg.lstsq(X0.T, X1.T, rcond=None)[0].T

    residual = float(np.linalg.norm(X1 - A_hat @ X0))
    return EstimationReport(
        A_hat=A_hat,
        residual_fro=residual,
        cond=condition_number(gram),
        window_index=window_index,
    )


def sliding_estimate(ws, ridge=None, threads=1):
    """One EstimationReport per window, ordered by ``window_index``."""

    def fit(i):
        return estimate_window(ws.window(i), ridge=ridge, window_index=i)

    indices = range(ws.n_windows)
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fit, indices))
    return [fit(i) for i in indices]
