"""Two-sided Wilcoxon signed-rank test for paired accuracies."""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from scipy.stats import rankdata

from .errors import ContractError

MIN_PAIRS = 6
EXACT_MAX_N = 25
ZERO_TOL = 1e-12


class SignedRankResult(NamedTuple):
    statistic: float   # sum of ranks of positive differences
    p_value: float
    n: int             # nonzero differences used
    method: str        # "exact", "normal" or "degenerate"


def _exact_two_sided(ranks: np.ndarray, w_plus: float) -> float:
    # doubled ranks are integers even with mid-rank ties
    r2 = np.rint(2 * ranks).astype(np.int64)
    total = int(r2.sum())
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in r2:
        counts[r:] = counts[r:] + counts[: total + 1 - r].copy()
    probs = counts / counts.sum()
    s = int(round(2 * w_plus))
    lower = probs[: s + 1].sum()
    upper = probs[s:].sum()
    return float(min(1.0, 2.0 * min(lower, upper)))


def wilcoxon_signed_rank(a, b) -> SignedRankResult:
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size != b.size:
        raise ContractError(f"paired samples differ in length: {a.size} vs {b.size}")
    if a.size < MIN_PAIRS:
        raise ContractError(f"need at least {MIN_PAIRS} pairs, got {a.size}")
    d = a - b
    d = d[np.abs(d) > ZERO_TOL]
    n = d.size
    if n == 0:
        return SignedRankResult(0.0, 1.0, 0, "degenerate")
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    if n <= EXACT_MAX_N:
        return SignedRankResult(w_plus, _exact_two_sided(ranks, w_plus), n, "exact")
    _, tie_counts = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(tie_counts ** 3 - tie_counts)) / 48.0
    if var <= 0:
        return SignedRankResult(w_plus, 1.0, n, "degenerate")
    z = (w_plus - n * (n + 1) / 4.0) / math.sqrt(var)
    return SignedRankResult(w_plus, min(1.0, math.erfc(abs(z) / math.sqrt(2.0))), n, "normal")


def paired_test(accuracies_a, accuracies_b) -> float:
    """p-value of the two-sided signed-rank test (1.0 when every pair ties)."""
    return wilcoxon_signed_rank(accuracies_a, accuracies_b).p_value
