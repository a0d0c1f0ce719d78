"""Stacked generalization over per-modality decision scores."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ContractError, TrainingError
from .kernels import KernelSpec
from .learner import TrainedModel, train_svm


@dataclass(frozen=True)
class ScoreMatrix:
    values: np.ndarray
    modality_names: tuple
    sample_ids: tuple = ()

    def __post_init__(self):
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "modality_names", tuple(self.modality_names))
        object.__setattr__(self, "sample_ids", tuple(self.sample_ids))
        if values.shape[1] != len(self.modality_names):
            raise ContractError(f"{values.shape[1]} score columns for {len(self.modality_names)} modalities")
        if not np.all(np.isfinite(values)):
            raise ContractError("scores must be finite")


@dataclass(frozen=True)
class ScoreNormalizer:
    mean: float
    std: float
    degenerate: bool = False

    def apply(self, column):
        if self.degenerate:
            return np.zeros_like(np.asarray(column, dtype=float))
        return (np.asarray(column, dtype=float) - self.mean) / self.std


def fit_normalizers(scores: ScoreMatrix) -> tuple:
    out = []
    for col in scores.values.T:
        mean, std = float(col.mean()), float(col.std())
        if std <= 1e-12 * max(1.0, abs(mean)):
            out.append(ScoreNormalizer(mean, 1.0, True))
        else:
            out.append(ScoreNormalizer(mean, std))
    return tuple(out)


def normalize_scores(scores: ScoreMatrix, fit: bool = True, normalizers: Sequence[ScoreNormalizer] | None = None) -> ScoreMatrix:
    """Z-score each modality column; constant columns map to zeros."""
    if fit:
        normalizers = fit_normalizers(scores)
    elif normalizers is None:
        raise ContractError("normalizers are required when fit is False")
    if len(normalizers) != scores.values.shape[1]:
        raise ContractError(f"{len(normalizers)} normalizers for {scores.values.shape[1]} columns")
    cols = [n.apply(c) for n, c in zip(normalizers, scores.values.T)]
    return ScoreMatrix(np.column_stack(cols), scores.modality_names, scores.sample_ids)


def collect_oof_scores(fold_models: Mapping[str, Sequence], folds, features: Mapping) -> ScoreMatrix:
    """Out-of-fold scores: samples of fold f are scored by ``fold_models[m][f]``.

    ``folds`` is a SplitPlan or a sequence of id lists. Each model must expose
    ``decision_scores(X)``; ``features[m]`` is a ModalityMatrix (raw values,
    the model handles its own preprocessing).
    """
    folds = getattr(folds, "folds", folds)
    names = list(fold_models)
    ids = [sid for fold in folds for sid in fold]
    cols = []
    for m in names:
        models = fold_models[m]
        if len(models) != len(folds) or any(mod is None for mod in models):
            raise ContractError(f"modality {m!r}: need one model per fold ({len(folds)})")
        parts = [models[f].decision_scores(features[m].rows(list(fold))) for f, fold in enumerate(folds) if len(fold)]
        cols.append(np.concatenate(parts) if parts else np.empty(0))
    return ScoreMatrix(np.column_stack(cols), names, ids)


@dataclass(frozen=True)
class StackedModel:
    normalizers: tuple
    meta: TrainedModel
    modality_names: tuple

    @property
    def weights(self) -> np.ndarray:
        return self.meta.linear_weights

    def decision_scores(self, raw_scores) -> np.ndarray:
        raw = np.atleast_2d(np.asarray(raw_scores, dtype=float))
        z = normalize_scores(ScoreMatrix(raw, self.modality_names), fit=False, normalizers=self.normalizers)
        return self.meta.decision_scores(z.values)

    def to_dict(self, sub_model_paths: Mapping[str, str] | None = None) -> dict:
        return {
            "type": "StackedModel",
            "modality_names": list(self.modality_names),
            "normalizers": [[n.mean, n.std, n.degenerate] for n in self.normalizers],
            "meta": self.meta.to_dict(),
            "sub_models": dict(sub_model_paths or {}),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StackedModel":
        return cls(
            normalizers=tuple(ScoreNormalizer(float(m), float(s), bool(g)) for m, s, g in d["normalizers"]),
            meta=TrainedModel.from_dict(d["meta"]),
            modality_names=tuple(d["modality_names"]),
        )


def train_stacker(oof_scores: ScoreMatrix, labels, gamma_ambient: float) -> StackedModel:
    """Fit score normalizers, then a linear-kernel SVM on the normalized scores."""
    normalizers = fit_normalizers(oof_scores)
    if all(n.degenerate for n in normalizers):
        raise TrainingError("every modality produced constant meta-training scores")
    z = normalize_scores(oof_scores, fit=False, normalizers=normalizers)
    meta = train_svm(z.values, labels, KernelSpec("linear"), gamma_ambient)
    return StackedModel(normalizers, meta, oof_scores.modality_names)


def predict_stacked(model: StackedModel, sub_models: Mapping, x: Mapping) -> tuple[float, int]:
    """Score one sample given its per-modality feature vectors."""
    missing = [m for m in model.modality_names if m not in x or m not in sub_models]
    if missing:
        raise ContractError(f"missing modalities: {', '.join(missing)}")
    raw = [float(np.ravel(sub_models[m].decision_scores(np.atleast_2d(x[m])))[0]) for m in model.modality_names]
    score = float(model.decision_scores(np.array([raw]))[0])
    return score, 1 if score >= 0 else -1


def save_stack(model: StackedModel, path, sub_model_paths: Mapping[str, str] | None = None) -> None:
    Path(path).write_text(json.dumps(model.to_dict(sub_model_paths)), encoding="utf-8")


def load_stack(path) -> tuple[StackedModel, dict]:
    """Return the stack and its recorded sub-model file references."""
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    return StackedModel.from_dict(d), dict(d.get("sub_models", {}))
