"""Scikit-learn style front ends for the two imaging functionals.

``fit`` consumes a :class:`~coinv.acquisition.PhaselessDataset` and
precomputes the data-dependent weights; ``transform`` / ``score_samples``
evaluate the indicator at arbitrary sampling points, so the imagers plug
into anything that speaks the estimator protocol (``get_params``,
``set_params``, ``clone``).
"""

import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_dataset, check_grid, check_points
from .geometry import grid_points
from .inversion import (
    IndicatorGrid,
    extract_peaks,
    normalize,
    obstacle_indicator_at,
    obstacle_weights,
    recover_modulus,
    source_indicator_at,
    source_weights,
    theta,
)

__all__ = ["ObstacleImager", "SourceImager", "SourceLocator"]


class _IndicatorImager(TransformerMixin, BaseEstimator):
    _kind = None

    def __init__(self, n_jobs=None):
        self.n_jobs = n_jobs

    def _evaluate(self, X):
        raise NotImplementedError

    def score_samples(self, X):
        """Indicator value at each row of ``X``; shape ``(n,)``."""
        check_is_fitted(self, "weights_")
        return self._evaluate(check_points(X))

    def transform(self, X):
        return self.score_samples(X)[:, None]

    def image(self, grid, normalized=True):
        """Evaluate on a :class:`SamplingGrid` (or ``(bbox, n)``) and wrap as an IndicatorGrid."""
        grid = check_grid(grid)
        vals = self.score_samples(grid_points(grid)).reshape(grid.shape)
        g = IndicatorGrid(grid, vals, self._kind)
        return normalize(g) if normalized else g


class ObstacleImager(_IndicatorImager):
    """Reverse time migration of the recovered reference-field modulus."""

    _kind = "obstacle_ID"

    def fit(self, X, y=None):
        ds = check_dataset(X)
        modulus, self.n_clamped_ = recover_modulus(ds)
        self.dataset_ = ds
        self.weights_ = obstacle_weights(ds, modulus)
        return self

    def _evaluate(self, X):
        return obstacle_indicator_at(self.dataset_, X, n_jobs=self.n_jobs, weights=self.weights_)


class SourceImager(_IndicatorImager):
    """Direct sampling of the recovered cross term."""

    _kind = "source_IP"

    def fit(self, X, y=None):
        ds = check_dataset(X)
        self.dataset_ = ds
        self.weights_ = source_weights(ds, theta(ds))
        return self

    def _evaluate(self, X):
        return source_indicator_at(self.dataset_, X, n_jobs=self.n_jobs, weights=self.weights_)


class SourceLocator(BaseEstimator):
    """Image the sources on a grid and keep the significant local maxima.

    After ``fit``: ``indicator_`` (normalized IndicatorGrid), ``peaks_``
    (PeakSet) and ``locations_`` (``(n_peaks, 2)`` array).
    """

    def __init__(self, bbox=(-5.0, 5.0, -5.0, 5.0), n=200, tau=0.5, min_sep=None, n_jobs=None):
        self.bbox = bbox
        self.n = n
        self.tau = tau
        self.min_sep = min_sep
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        ds = check_dataset(X)
        imager = SourceImager(n_jobs=self.n_jobs).fit(ds)
        self.indicator_ = imager.image((self.bbox, self.n))
        min_sep = math.pi / ds.k if self.min_sep is None else self.min_sep
        self.peaks_ = extract_peaks(self.indicator_, self.tau, min_sep)
        self.locations_ = np.asarray(self.peaks_.points)
        return self

    def fit_predict(self, X, y=None):
        return self.fit(X).locations_
