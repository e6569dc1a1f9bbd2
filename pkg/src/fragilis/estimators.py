"""scikit-learn compatible wrappers.

Inputs follow the scikit-learn convention of shape ``(n_timepoints,
n_channels)``, i.e. the transpose of the channels x samples layout used
elsewhere in the package.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, validate_data

from .fragility import default_targets, heatmap
from .sysid import WindowedSeries, estimate_window, sliding_estimate


class LinearSystemEstimator(BaseEstimator):
    """Least-squares fit of ``x[t+1] ~ A x[t]`` on a single multichannel segment.

    Parameters
    ----------
    ridge : float or None, default=None
        Optional Tikhonov regularization of the data Gram matrix.

    Attributes
    ----------
    A_ : ndarray of shape (n_channels, n_channels)
    residual_ : float
        Frobenius norm of the one-step residuals on the training data.
    cond_ : float
        Condition number of the Gram matrix (``inf`` when rank-deficient).
    """

    def __init__(self, ridge=None):
        self.ridge = ridge

    def fit(self, X, y=None):
        X = validate_data(self, X, ensure_min_samples=2)
        if X.shape[0] < X.shape[1] + 1:
            raise ValueError(f"need at least n_channels + 1 = {X.shape[1] + 1} timepoints, got {X.shape[0]}")
        rep = estimate_window(X.T, ridge=self.ridge)
        self.A_ = rep.A_hat
        self.residual_ = rep.residual_fro
        self.cond_ = rep.cond
        return self

    def predict(self, X):
        """One-step-ahead prediction of every row of ``X``."""
        check_is_fitted(self)
        X = validate_data(self, X, reset=False)
        return X @ self.A_.T

    def score(self, X, y=None):
        """Coefficient of determination of one-step predictions on ``X``."""
        check_is_fitted(self)
        X = validate_data(self, X, reset=False, ensure_min_samples=2)
        target, pred = X[1:], self.predict(X[:-1])
        ss_res = np.sum((target - pred) ** 2)
        ss_tot = np.sum((target - target.mean(axis=0)) ** 2)
        return 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0


class FragilityTransformer(TransformerMixin, BaseEstimator):
    """Map a recording to its windows x channels fragility grid.

    Stateless apart from input validation: ``fit`` only records the channel
    count. ``transform`` returns raw fragility (or the per-window normalized
    grid when ``normalize=True``) with one row per window.

    Parameters
    ----------
    window_len : int, default=250
        Window length in samples.
    step : int, default=125
    targets : sequence of complex or None
        Target eigenvalues; ``None`` uses the unit-circle grid.
    structure : {"row", "column"}, default="row"
    ridge : float or None, default=None
    normalize : bool, default=False
    n_jobs : int, default=1
        Worker threads.
    """

    def __init__(self, window_len=250, step=125, targets=None, structure="row", ridge=None,
                 normalize=False, n_jobs=1):
        self.window_len = window_len
        self.step = step
        self.targets = targets
        self.structure = structure
        self.ridge = ridge
        self.normalize = normalize
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        validate_data(self, X)
        return self

    def compute_heatmap(self, X, rate=1.0, channel_labels=None):
        """Full :class:`~fragilis.fragility.FragilityHeatmap` for ``X``."""
        check_is_fitted(self, "n_features_in_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} channels, expected {self.n_features_in_}")
        ws = WindowedSeries(X.T, rate, self.window_len, self.step, channel_labels)
        reports = sliding_estimate(ws, ridge=self.ridge, threads=self.n_jobs)
        targets = default_targets() if self.targets is None else self.targets
        return heatmap(reports, targets, self.structure, window_times=ws.window_times(),
                       channel_labels=ws.channel_labels, threads=self.n_jobs)

    def transform(self, X):
        hm = self.compute_heatmap(X)
        return hm.normalized if self.normalize else hm.values
