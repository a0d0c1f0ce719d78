"""Per-feature z-scoring and three-level discretization."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError

# a column is constant when its population std is below this fraction of its scale
_CONSTANT_RTOL = 1e-12


@dataclass(frozen=True)
class StandardizedMatrix:
    values: np.ndarray
    feature_means: np.ndarray
    feature_stds: np.ndarray
    constant: np.ndarray

    def transform(self, values) -> np.ndarray:
        """Apply the fitted statistics to new rows (e.g. held-out samples)."""
        return standardize_with(values, self.feature_means, self.feature_stds, self.constant)


def standardize_with(values, means, stds, constant) -> np.ndarray:
    x = np.asarray(values, dtype=float)
    z = (x - means) / stds
    if np.any(constant):
        z[..., constant] = 0.0
    return z


def fit_statistics(values: np.ndarray):
    """Column means, population stds (1.0 where constant) and the constant mask."""
    means = values.mean(axis=0)
    stds = values.std(axis=0)
    constant = stds <= _CONSTANT_RTOL * np.maximum(1.0, np.abs(means))
    stds = np.where(constant, 1.0, stds)
    return means, stds, constant


def zscore(matrix) -> StandardizedMatrix:
    """Z-score each column with the population standard deviation.

    Accepts a ModalityMatrix or any 2-D array. Constant columns become zeros and
    are flagged in ``constant``.
    """
    values = np.asarray(getattr(matrix, "values", matrix), dtype=float)
    if values.ndim != 2 or values.size == 0:
        raise ContractError("zscore needs a nonempty 2-D matrix")
    means, stds, constant = fit_statistics(values)
    z = standardize_with(values, means, stds, constant)
    return StandardizedMatrix(z, means, stds, constant)


@dataclass(frozen=True)
class DiscreteMatrix:
    levels: np.ndarray


def discretize(std_matrix, cutoff: float = 1.5) -> DiscreteMatrix:
    """Map z <= -cutoff to 0, |z| < cutoff to 1 and z >= cutoff to 2."""
    if not cutoff > 0:
        raise ContractError(f"cutoff must be positive, got {cutoff}")
    z = np.asarray(getattr(std_matrix, "values", std_matrix), dtype=float)
    levels = np.ones(z.shape, dtype=np.int8)
    levels[z <= -cutoff] = 0
    levels[z >= cutoff] = 2
    return DiscreteMatrix(levels)
