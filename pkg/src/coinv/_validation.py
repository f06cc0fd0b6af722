"""Input validation helpers shared by the estimators and the CLI."""

import numpy as np
from sklearn.utils.validation import check_array

from .acquisition import PhaselessDataset
from .exceptions import ConfigurationError
from .geometry import SamplingGrid


def check_dataset(ds):
    if not isinstance(ds, PhaselessDataset):
        raise ConfigurationError(f"expected a PhaselessDataset, got {type(ds).__name__}")
    return ds


def check_points(X):
    """Validate an ``(n, 2)`` array of finite sampling points."""
    X = check_array(X, dtype=np.float64, ensure_2d=True, ensure_all_finite=True)
    if X.shape[1] != 2:
        raise ConfigurationError(f"sampling points must have 2 columns, got {X.shape[1]}")
    return X


def check_grid(grid):
    if isinstance(grid, SamplingGrid):
        return grid
    bbox, n = grid
    return SamplingGrid(tuple(bbox), int(n))
