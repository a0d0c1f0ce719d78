"""Minimum-redundancy maximum-relevance feature ranking on discrete features.

Mutual information is the plug-in estimate in bits. The greedy criterion is the
weighted difference form::

    w * I(f; c) - (1 - w) * mean_{s in S} I(f; s)
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError

# objective values this close to the step maximum count as ties (lowest index wins)
TIE_TOL = 1e-12


def _codes(x) -> tuple[np.ndarray, int]:
    _, inv = np.unique(np.asarray(x).ravel(), return_inverse=True)
    return inv.astype(np.intp), int(inv.max()) + 1 if inv.size else 0


def _mi_from_joint(joint: np.ndarray, n: int) -> float:
    p = joint / n
    px = p.sum(axis=1, keepdims=True)
    py = p.sum(axis=0, keepdims=True)
    nz = p > 0
    return float(max(0.0, np.sum(p[nz] * np.log2(p[nz] / (px @ py)[nz]))))


def entropy(x) -> float:
    """Empirical Shannon entropy in bits."""
    codes, m = _codes(x)
    if codes.size == 0:
        raise ContractError("entropy of an empty sequence")
    p = np.bincount(codes, minlength=m) / codes.size
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def mutual_information(x, y) -> float:
    """Plug-in mutual information (bits) between two discrete sequences."""
    x = np.asarray(x).ravel()
    y = np.asarray(y).ravel()
    if x.size != y.size:
        raise ContractError(f"length mismatch: {x.size} vs {y.size}")
    if x.size == 0:
        raise ContractError("mutual information of empty sequences")
    cx, mx = _codes(x)
    cy, my = _codes(y)
    joint = np.zeros((mx, my))
    np.add.at(joint, (cx, cy), 1.0)
    return _mi_from_joint(joint, x.size)


def mutual_information_columns(levels: np.ndarray, target) -> np.ndarray:
    """I(levels[:, j]; target) for every column j at once."""
    levels = np.asarray(levels)
    n, p = levels.shape
    cx, mx = _codes(levels)
    cx = cx.reshape(n, p)
    cy, my = _codes(target)
    if cy.size != n:
        raise ContractError(f"target has {cy.size} entries, matrix has {n} rows")
    # joint counts[a, b, j] via indicator products; counts are exact integers in float
    ind_y = np.stack([(cy == b) for b in range(my)], axis=1).astype(float)
    joint = np.stack([(cx == a).astype(float).T @ ind_y for a in range(mx)])  # (mx, p, my)
    joint = joint.transpose(0, 2, 1) / n                                        # (mx, my, p)
    px = joint.sum(axis=1, keepdims=True)
    py = joint.sum(axis=0, keepdims=True)
    denom = px * py
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(joint > 0, joint * np.log2(joint / denom), 0.0)
    return np.maximum(terms.sum(axis=(0, 1)), 0.0)


@dataclass(frozen=True)
class MrmrSelection:
    selected: tuple
    scores: tuple
    relevance_weight: float
    relevance: np.ndarray | None = None

    def prefix(self, k: int) -> tuple:
        return self.selected[:k]


def mrmr_select(features, labels, k: int, relevance_weight: float = 0.5) -> MrmrSelection:
    """Greedy incremental mRMR selection of ``k`` columns.

    ``features`` is a DiscreteMatrix (or integer array) restricted to labeled
    rows; ``labels`` is aligned with those rows.
    """
    levels = np.asarray(getattr(features, "levels", features))
    if levels.ndim != 2:
        raise ContractError("features must be a 2-D matrix")
    n, p = levels.shape
    labels = np.asarray(labels).ravel()
    if labels.size != n:
        raise ContractError(f"{labels.size} labels for {n} rows")
    if k < 1 or k > p:
        raise ConfigError(f"k must be in [1, {p}], got {k}")
    if not 0 < relevance_weight <= 1:
        raise ConfigError(f"relevance_weight must be in (0, 1], got {relevance_weight}")
    if np.unique(labels).size < 2:
        raise ContractError("mRMR needs samples from both classes")

    relevance = mutual_information_columns(levels, labels)
    redundancy = np.zeros(p)
    available = np.ones(p, dtype=bool)
    selected, scores = [], []
    for step in range(k):
        objective = relevance_weight * relevance
        if step:
            objective = objective - (1.0 - relevance_weight) * redundancy / step
        objective = np.where(available, objective, -np.inf)
        best = objective.max()
        pick = int(np.flatnonzero(objective >= best - TIE_TOL * max(1.0, abs(best)))[0])
        selected.append(pick)
        scores.append(float(objective[pick]))
        available[pick] = False
        if step + 1 < k:
            redundancy += mutual_information_columns(levels, levels[:, pick])
    return MrmrSelection(tuple(selected), tuple(scores), float(relevance_weight), relevance)
