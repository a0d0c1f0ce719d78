"""k-NN heat-kernel affinity graphs over samples and their Laplacians."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.spatial.distance import cdist

from .errors import ContractError

AFFINITY_FORMS = ("squared", "plain")


def pairwise_distances(points, other=None) -> np.ndarray:
    """Euclidean distance matrix; symmetric with exact zero diagonal when ``other`` is None."""
    a = np.atleast_2d(np.asarray(points, dtype=float))
    if a.size == 0:
        raise ContractError("pairwise_distances needs at least one point")
    if other is not None:
        return cdist(a, np.atleast_2d(np.asarray(other, dtype=float)))
    d = cdist(a, a)
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    return d


def heat_affinity(distances, bandwidth: float, form: str = "squared") -> np.ndarray:
    """exp(-d^2 / (2 t^2)) for ``squared``, exp(-d / t) for ``plain``; zero diagonal."""
    if not bandwidth > 0:
        raise ContractError(f"bandwidth must be positive, got {bandwidth}")
    d = np.asarray(distances, dtype=float)
    if form == "squared":
        w = np.exp(-(d ** 2) / (2.0 * bandwidth ** 2))
    elif form == "plain":
        w = np.exp(-d / bandwidth)
    else:
        raise ContractError(f"unknown affinity form {form!r}; expected one of {AFFINITY_FORMS}")
    if w.ndim == 2 and w.shape[0] == w.shape[1]:
        np.fill_diagonal(w, 0.0)
    return w


@dataclass(frozen=True)
class AffinityGraph:
    weights: sp.csr_matrix
    bandwidth: float

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def degree(self) -> np.ndarray:
        return np.asarray(self.weights.sum(axis=1)).ravel()

    def edges(self):
        """Upper-triangle edge list as (i, j, weight) tuples, i < j."""
        upper = sp.triu(self.weights, k=1).tocoo()
        order = np.lexsort((upper.col, upper.row))
        return [(int(upper.row[o]), int(upper.col[o]), float(upper.data[o])) for o in order]


@dataclass(frozen=True)
class GraphLaplacian:
    matrix: sp.csr_matrix

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def quadratic_form(self, f) -> float:
        f = np.asarray(f, dtype=float)
        return float(f @ (self.matrix @ f))


def knn_mask(scores: np.ndarray, k: int) -> np.ndarray:
    """Union-symmetrized mask of each row's ``k`` highest off-diagonal scores.

    Ties are resolved towards the lower column index.
    """
    if k < 1:
        raise ContractError(f"k must be at least 1, got {k}")
    s = np.array(scores, dtype=float)
    n = s.shape[0]
    mask = np.zeros((n, n), dtype=bool)
    if n < 2:
        return mask
    np.fill_diagonal(s, -np.inf)
    kk = min(k, n - 1)
    nbrs = np.argsort(-s, axis=1, kind="stable")[:, :kk]
    mask[np.repeat(np.arange(n), kk), nbrs.ravel()] = True
    return mask | mask.T


def knn_sparsify(W, k: int = 5, bandwidth: float = float("nan")) -> AffinityGraph:
    """Keep w_ij when j is among the k strongest neighbours of i or vice versa."""
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ContractError("affinity matrix must be square")
    mask = knn_mask(W, k)
    kept = np.where(mask, W, 0.0)
    np.fill_diagonal(kept, 0.0)
    # retained zero-weight edges (underflow) are dropped from the sparse structure
    return AffinityGraph(sp.csr_matrix(kept), float(bandwidth))


def median_knn_distance(distances: np.ndarray, k: int) -> float:
    """Median length of the edges retained by the k-NN rule; 1.0 if all are zero."""
    # nearest by distance == strongest by any decreasing affinity
    distances = np.asarray(distances)
    mask = knn_mask(-distances, k)
    iu = np.triu_indices_from(mask, k=1)
    retained = distances[iu][mask[iu]]
    if retained.size == 0:
        return 1.0
    med = float(np.median(retained))
    if med > 0:
        return med
    positive = retained[retained > 0]
    return float(np.median(positive)) if positive.size else 1.0


def build_graph(points, k: int = 5, form: str = "squared", bandwidth: float | None = None) -> AffinityGraph:
    """Distances -> heat affinities -> k-NN graph, with the median-edge bandwidth by default."""
    d = pairwise_distances(points)
    if bandwidth is None:
        bandwidth = median_knn_distance(d, k)
    # neighbours chosen on distances so underflowed affinities cannot reorder them
    mask = knn_mask(-d, k)
    kept = np.where(mask, heat_affinity(d, bandwidth, form), 0.0)
    np.fill_diagonal(kept, 0.0)
    return AffinityGraph(sp.csr_matrix(kept), float(bandwidth))


def laplacian(graph: AffinityGraph) -> GraphLaplacian:
    """Unnormalized Laplacian D - W."""
    W = graph.weights
    L = sp.diags(graph.degree) - W
    return GraphLaplacian(sp.csr_matrix(L))


def write_edge_list(graph: AffinityGraph, path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("i,j,weight\n")
        for i, j, w in graph.edges():
            fh.write(f"{i},{j},{w!r}\n")
