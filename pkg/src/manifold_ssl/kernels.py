"""Mercer kernels and Gram matrices."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError, ContractError

KERNEL_KINDS = ("linear", "polynomial", "rbf")


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "polynomial"
    degree: int = 3
    offset: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ConfigError(f"unknown kernel kind {self.kind!r}; expected one of {KERNEL_KINDS}")
        if self.kind == "polynomial" and (int(self.degree) != self.degree or self.degree < 1):
            raise ConfigError(f"polynomial degree must be a positive integer, got {self.degree}")
        if self.kind == "rbf" and not self.gamma > 0:
            raise ConfigError(f"rbf gamma must be positive, got {self.gamma}")

    def to_dict(self) -> dict:
        return asdict(self)


def gram(points_a, points_b, spec: KernelSpec) -> np.ndarray:
    """K(a_i, b_j) for all pairs."""
    a = np.atleast_2d(np.asarray(points_a, dtype=float))
    b = np.atleast_2d(np.asarray(points_b, dtype=float))
    if a.shape[1] != b.shape[1]:
        raise ContractError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    dots = a @ b.T
    if points_b is points_a:
        dots = 0.5 * (dots + dots.T)
    if spec.kind == "linear":
        return dots
    if spec.kind == "polynomial":
        return (dots + spec.offset) ** int(spec.degree)
    sq = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * dots
    if points_b is points_a:
        np.fill_diagonal(sq, 0.0)
    return np.exp(-spec.gamma * np.maximum(sq, 0.0))
