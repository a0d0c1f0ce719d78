"""Supervised SVM and Laplacian SVM in representer form.

Both learners minimise

    (1/l) sum_i max(0, 1 - y_i f(x_i)) + gA ||f||_K^2 + gI f' L f

with f(x) = sum_j alpha_j K(x_j, x) + b over the l + u training anchors (gI = 0
and u = 0 for the plain SVM). The hinge is handled through the dual in
``beta`` (0 <= beta <= 1/l, y'beta = 0) with

    alpha = (2 gA I + 2 gI L K)^{-1} J' Y beta,    Q = Y J K alpha(beta)

where J selects the labeled anchors.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from .errors import ContractError, SolverError, TrainingError
from .graph import GraphLaplacian
from .kernels import KernelSpec, gram
from .qp import QpSolution, solve_dual

log = logging.getLogger(__name__)

KKT_TOL = 1e-6
MAX_PAIR_UPDATES = 100_000
JITTER = 1e-10


@dataclass(frozen=True)
class TrainedModel:
    anchors: np.ndarray
    alphas: np.ndarray
    bias: float
    kernel: KernelSpec
    gamma_ambient: float
    gamma_intrinsic: float = 0.0
    n_labeled: int = 0
    objective: float = float("nan")
    kkt_residual: float = 0.0
    qp: QpSolution | None = field(default=None, repr=False, compare=False)

    def decision_scores(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.anchors.shape[1]:
            raise ContractError(f"expected {self.anchors.shape[1]} features, got {X.shape[1]}")
        return gram(X, self.anchors, self.kernel) @ self.alphas + self.bias

    def predict(self, X) -> np.ndarray:
        return np.where(self.decision_scores(X) >= 0, 1.0, -1.0)

    @property
    def linear_weights(self) -> np.ndarray:
        """Primal weight vector; only meaningful for the linear kernel."""
        if self.kernel.kind != "linear":
            raise ContractError("linear_weights requires a linear kernel")
        return self.anchors.T @ self.alphas

    def to_dict(self) -> dict:
        return {
            "type": "TrainedModel",
            "kernel": self.kernel.to_dict(),
            "gamma_ambient": self.gamma_ambient,
            "gamma_intrinsic": self.gamma_intrinsic,
            "n_labeled": self.n_labeled,
            "bias": self.bias,
            "objective": self.objective,
            "kkt_residual": self.kkt_residual,
            "anchors": self.anchors.tolist(),
            "alphas": self.alphas.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainedModel":
        anchors = np.asarray(d["anchors"], dtype=float)
        return cls(
            anchors=anchors.reshape(len(d["anchors"]), -1),
            alphas=np.asarray(d["alphas"], dtype=float),
            bias=float(d["bias"]),
            kernel=KernelSpec(**d["kernel"]),
            gamma_ambient=float(d["gamma_ambient"]),
            gamma_intrinsic=float(d["gamma_intrinsic"]),
            n_labeled=int(d["n_labeled"]),
            objective=float(d["objective"]),
            kkt_residual=float(d["kkt_residual"]),
        )


def decision_score(model: TrainedModel, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ContractError("decision_score takes a single feature vector")
    return float(model.decision_scores(x[None, :])[0])


def save_model(model: TrainedModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict()), encoding="utf-8")


def load_model(path) -> TrainedModel:
    return TrainedModel.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _check_labels(y, n):
    y = np.asarray(y, dtype=float).ravel()
    if y.size != n:
        raise ContractError(f"{y.size} labels for {n} labeled points")
    if not np.all(np.abs(y) == 1):
        raise ContractError("labels must be +1/-1")
    if not ((y > 0).any() and (y < 0).any()):
        raise ContractError("both classes must be present")
    return y


def _bias(beta, r, y, box):
    """Mean of r = y - K alpha over in-bound support vectors, else the KKT interval midpoint."""
    eps = box * 1e-10
    free = (beta > eps) & (beta < box - eps)
    if free.any():
        return float(r[free].mean())
    at_zero = beta <= eps
    lower = np.concatenate([r[(y > 0) & at_zero], r[(y < 0) & ~at_zero]])
    upper = np.concatenate([r[(y < 0) & at_zero], r[(y > 0) & ~at_zero]])
    if lower.size and upper.size:
        return float(0.5 * (lower.max() + upper.min()))
    if lower.size:
        return float(lower.max())
    return float(upper.min())


def primal_objective(alphas, bias, K_all, y, n_labeled, gamma_ambient, gamma_intrinsic=0.0, L=None) -> float:
    """Regularized hinge risk for a representer expansion over ``K_all`` (anchors x anchors)."""
    f = K_all @ alphas
    hinge = np.maximum(0.0, 1.0 - y * (f[:n_labeled] + bias)).mean()
    value = hinge + gamma_ambient * float(alphas @ f)
    if gamma_intrinsic and L is not None:
        value += gamma_intrinsic * float(f @ (L @ f))
    return float(value)


def _solve_expansion(M, rhs):
    for attempt in range(2):
        A = M if attempt == 0 else M + JITTER * np.eye(M.shape[0])
        try:
            with np.errstate(all="raise"):
                lu = sla.lu_factor(A, check_finite=True)
                if np.any(np.abs(np.diag(lu[0])) < np.finfo(float).tiny):
                    raise sla.LinAlgError("singular factor")
                sol = sla.lu_solve(lu, rhs)
            if np.all(np.isfinite(sol)):
                return sol
        except (sla.LinAlgError, FloatingPointError, ValueError):
            log.debug("expansion solve failed (attempt %d); retrying with jitter", attempt)
    raise SolverError("singular expansion system (2 gA I + 2 gI L K)")


def _fit(X_lab, y, X_unl, spec, gamma_ambient, gamma_intrinsic, L, tol, max_iter) -> TrainedModel:
    if not gamma_ambient > 0:
        raise ContractError(f"gamma_ambient must be positive, got {gamma_ambient}")
    if gamma_intrinsic < 0:
        raise ContractError(f"gamma_intrinsic must be non-negative, got {gamma_intrinsic}")
    X_lab = np.atleast_2d(np.asarray(X_lab, dtype=float))
    l = X_lab.shape[0]
    y = _check_labels(y, l)
    # solve in a canonical orientation (first label +1) so y and -y give exactly negated models
    flip = y[0] < 0
    if flip:
        y = -y
    anchors = X_lab if X_unl is None else np.vstack([X_lab, np.atleast_2d(np.asarray(X_unl, dtype=float))])
    n = anchors.shape[0]
    K = gram(anchors, anchors, spec)
    box = 1.0 / l

    # G maps beta to alpha; G = M^{-1} J'Y
    if gamma_intrinsic == 0.0:
        G = np.zeros((n, l))
        G[np.arange(l), np.arange(l)] = y / (2.0 * gamma_ambient)
        Ld = None
    else:
        Ld = L.toarray() if hasattr(L, "toarray") else np.asarray(L, dtype=float)
        M = 2.0 * gamma_ambient * np.eye(n) + 2.0 * gamma_intrinsic * (Ld @ K)
        rhs = np.zeros((n, l))
        rhs[np.arange(l), np.arange(l)] = y
        G = _solve_expansion(M, rhs)
    Q = y[:, None] * (K[:l] @ G)
    Q = 0.5 * (Q + Q.T)

    sol = solve_dual(Q, y, box, tol=tol, max_iter=max_iter)
    alphas = G @ sol.betas
    k_lab = K[:l] @ alphas
    bias = _bias(sol.betas, y - k_lab, y, box)
    objective = primal_objective(alphas, bias, K, y, l, gamma_ambient, gamma_intrinsic, Ld)
    if flip:
        alphas, bias = -alphas, -bias
    return TrainedModel(
        anchors=anchors.copy(),
        alphas=alphas,
        bias=bias,
        kernel=spec,
        gamma_ambient=float(gamma_ambient),
        gamma_intrinsic=float(gamma_intrinsic),
        n_labeled=l,
        objective=objective,
        kkt_residual=sol.kkt_residual,
        qp=sol,
    )


def train_svm(features, labels, spec: KernelSpec, gamma_ambient: float,
              tol: float = KKT_TOL, max_iter: int = MAX_PAIR_UPDATES) -> TrainedModel:
    """Hinge-loss SVM with unregularized bias over the labeled points."""
    return _fit(features, labels, None, spec, gamma_ambient, 0.0, None, tol, max_iter)


def train_lapsvm(labeled_features, labels, unlabeled_features, spec: KernelSpec, gamma_ambient: float,
                 gamma_intrinsic: float, laplacian: GraphLaplacian | None,
                 tol: float = KKT_TOL, max_iter: int = MAX_PAIR_UPDATES) -> TrainedModel:
    """Laplacian SVM; the Laplacian must cover labeled rows first, then unlabeled rows."""
    l = np.atleast_2d(labeled_features).shape[0]
    u = 0 if unlabeled_features is None else np.atleast_2d(unlabeled_features).shape[0]
    if gamma_intrinsic > 0:
        if laplacian is None:
            raise ContractError("gamma_intrinsic > 0 requires a Laplacian")
        L = getattr(laplacian, "matrix", laplacian)
        if L.shape != (l + u, l + u):
            raise ContractError(f"Laplacian is {L.shape[0]}x{L.shape[1]}, expected {l + u} nodes")
    else:
        L = None
    if u == 0:
        unlabeled_features = None
    try:
        return _fit(labeled_features, labels, unlabeled_features, spec, gamma_ambient, gamma_intrinsic, L, tol, max_iter)
    except FloatingPointError as exc:
        raise TrainingError(str(exc)) from exc
