"""Repeated cross-validated comparison of SVM, LapSVM, LapSVM_L and stacked pipelines.

Per repetition ``r`` (seed ``base_seed + r``):

* a stratified split gives a validation holdout plus ``n_folds`` folds;
* for each modality and base learner, hyperparameters are picked on the
  validation set after training on all folds;
* each fold serves once as test set for a model trained on the other folds;
  preprocessing, mRMR and the graph are refit on that model's training rows;
* the stacked pipelines are trained on nested out-of-fold scores: for test fold
  ``t`` the meta-training score of a sample in fold ``s`` comes from a model
  trained on the folds other than ``s`` and ``t``.
"""
from __future__ import annotations

import csv
import enum
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg as sla

from .dataset import LabelAssignment, ModalityMatrix, SplitPlan, make_split
from .errors import ConfigError, ContractError, ExperimentError, IntegrityError, ManifoldSSLError
from .graph import build_graph, laplacian
from .kernels import KernelSpec
from .learner import TrainedModel, train_lapsvm, train_svm
from .mrmr import mrmr_select
from .preprocess import discretize, fit_statistics, standardize_with
from .stacking import ScoreMatrix, train_stacker
from .stats import wilcoxon_signed_rank

log = logging.getLogger(__name__)

COMBINED = "combined"
THREADS_ENV = "MANIFOLD_SSL_THREADS"
MAX_FAILED_FRACTION = 0.10


class MethodId(str, enum.Enum):
    SVM = "svm"
    LAPSVM = "lapsvm"
    LAPSVM_LABELED_ONLY = "lapsvm_labeled_only"
    STACKED_SVM = "stacked_svm"
    STACKED_LAPSVM = "stacked_lapsvm"

    @property
    def stacked(self) -> bool:
        return self in (MethodId.STACKED_SVM, MethodId.STACKED_LAPSVM)

    @property
    def base(self) -> "MethodId":
        """Layer-1 learner behind a method (itself for single-modality methods)."""
        return {MethodId.STACKED_SVM: MethodId.SVM, MethodId.STACKED_LAPSVM: MethodId.LAPSVM}.get(self, self)


ALL_METHODS = tuple(MethodId)


@dataclass(frozen=True)
class GridPoint:
    feature_count: int
    gamma_ambient: float
    gamma_intrinsic: float = 0.0
    bandwidth: float | None = None


@dataclass(frozen=True)
class HyperGrid:
    gamma_ambient: tuple = (1e-4, 1e-2, 1.0, 1e2)
    gamma_intrinsic: tuple = (1e-4, 1e-2, 1.0, 1e2)
    feature_counts: tuple = (50, 100, 200)
    bandwidths: tuple | None = None

    def __post_init__(self):
        for name in ("gamma_ambient", "gamma_intrinsic", "feature_counts"):
            if not getattr(self, name):
                raise ConfigError(f"grid.{name} must be nonempty")
        if any(not g > 0 for g in self.gamma_ambient):
            raise ConfigError("grid.gamma_ambient values must be positive")
        if any(g < 0 for g in self.gamma_intrinsic):
            raise ConfigError("grid.gamma_intrinsic values must be non-negative")
        if any(int(k) != k or k < 1 for k in self.feature_counts):
            raise ConfigError("grid.feature_counts must be positive integers")
        if self.bandwidths is not None and (not self.bandwidths or any(not b > 0 for b in self.bandwidths)):
            raise ConfigError("grid.bandwidths must be positive when given")

    def points(self, method: MethodId, n_features: int) -> list[GridPoint]:
        """Grid points in tie-break order: feature count, then gamma_I, then gamma_A."""
        method = MethodId(method).base
        counts = []
        for k in sorted(set(int(k) for k in self.feature_counts)):
            if k > n_features:
                log.warning("skipping feature count %d: only %d features available", k, n_features)
            else:
                counts.append(k)
        if method is MethodId.SVM:
            gi, bws = [0.0], [None]
        else:
            gi = sorted({float(g) for g in self.gamma_intrinsic if g > 0})
            bws = sorted(self.bandwidths) if self.bandwidths else [None]
            if not gi:
                raise ConfigError(f"{method.value} needs a positive gamma_intrinsic in the grid")
        ga = sorted({float(g) for g in self.gamma_ambient})
        return [GridPoint(k, a, i, b) for k in counts for i in gi for a in ga for b in bws]


@dataclass(frozen=True)
class PipelineSettings:
    kernel: KernelSpec = KernelSpec()
    k_neighbors: int = 5
    affinity: str = "squared"
    bandwidth: float | None = None
    relevance_weight: float = 0.5
    discretize_cutoff: float = 1.5


@dataclass(frozen=True)
class ModalityModel:
    """Standardization + mRMR column choice + trained learner for one modality."""
    modality: str
    means: np.ndarray
    stds: np.ndarray
    constant: np.ndarray
    selected: tuple
    model: TrainedModel
    graph_nodes: int = 0

    def transform(self, X) -> np.ndarray:
        z = standardize_with(np.atleast_2d(X), self.means, self.stds, self.constant)
        return z[:, list(self.selected)]

    def decision_scores(self, X) -> np.ndarray:
        return self.model.decision_scores(self.transform(X))


class FeatureRanker:
    """Caches standardization statistics and mRMR rankings per training set."""

    def __init__(self, settings: PipelineSettings, max_k: int):
        self.settings = settings
        self.max_k = max_k
        self._cache = {}

    def rank(self, matrix: ModalityMatrix, train_ids: Sequence[str], y: np.ndarray):
        key = (matrix.modality_name, frozenset(train_ids))
        hit = self._cache.get(key)
        if hit is None:
            X = matrix.rows(train_ids)
            means, stds, constant = fit_statistics(X)
            z = standardize_with(X, means, stds, constant)
            levels = discretize(z, self.settings.discretize_cutoff)
            k = min(self.max_k, X.shape[1])
            sel = mrmr_select(levels, y, k, self.settings.relevance_weight)
            hit = (means, stds, constant, sel.selected)
            self._cache[key] = hit
        return hit


def fit_modality_model(matrix: ModalityMatrix, train_ids: Sequence[str], y_train, unlabeled_ids: Sequence[str],
                       method: MethodId, point: GridPoint, settings: PipelineSettings,
                       ranker: FeatureRanker) -> ModalityModel:
    method = MethodId(method).base
    y_train = np.asarray(y_train, dtype=float)
    means, stds, constant, ranking = ranker.rank(matrix, train_ids, y_train)
    selected = tuple(ranking[: point.feature_count])
    cols = list(selected)
    Z_lab = standardize_with(matrix.rows(train_ids), means, stds, constant)[:, cols]
    if method is MethodId.SVM:
        model = train_svm(Z_lab, y_train, settings.kernel, point.gamma_ambient)
        return ModalityModel(matrix.modality_name, means, stds, constant, selected, model)
    if method is MethodId.LAPSVM and len(unlabeled_ids):
        Z_unl = standardize_with(matrix.rows(unlabeled_ids), means, stds, constant)[:, cols]
    else:
        Z_unl = None
    nodes = Z_lab if Z_unl is None else np.vstack([Z_lab, Z_unl])
    bandwidth = point.bandwidth if point.bandwidth is not None else settings.bandwidth
    graph = build_graph(nodes, settings.k_neighbors, settings.affinity, bandwidth)
    model = train_lapsvm(Z_lab, y_train, Z_unl, settings.kernel, point.gamma_ambient,
                         point.gamma_intrinsic, laplacian(graph))
    return ModalityModel(matrix.modality_name, means, stds, constant, selected, model, graph.n)


def accuracy(predictions, truth) -> float:
    p = np.asarray(predictions).ravel()
    t = np.asarray(truth).ravel()
    if p.size != t.size:
        raise ContractError(f"length mismatch: {p.size} predictions for {t.size} labels")
    if p.size == 0:
        raise ContractError("accuracy of an empty sequence")
    return float(np.mean(p == t))


def labels_from_scores(scores) -> np.ndarray:
    return np.where(np.asarray(scores) >= 0, 1.0, -1.0)


@dataclass(frozen=True)
class GridChoice:
    point: GridPoint
    validation_accuracy: float
    model: ModalityModel | None = None


def grid_search(matrix: ModalityMatrix, split: SplitPlan, assignment: LabelAssignment, grid: HyperGrid,
                method: MethodId, settings: PipelineSettings, ranker: FeatureRanker | None = None) -> GridChoice:
    """Pick the grid point with the best validation accuracy after training on all folds."""
    points = grid.points(method, matrix.shape[1])
    if not points:
        raise ConfigError("hyperparameter grid has no usable points")
    if ranker is None:
        ranker = FeatureRanker(settings, max(p.feature_count for p in points))
    if len(points) == 1:
        return GridChoice(points[0], float("nan"))
    if not split.validation_ids:
        raise ConfigError("grid search needs a nonempty validation set")
    train = split.training_ids()
    y_train = assignment.signs(train)
    y_val = assignment.signs(split.validation_ids)
    X_val = matrix.rows(split.validation_ids)
    best = None
    for point in points:
        mm = fit_modality_model(matrix, train, y_train, split.unlabeled_ids, method, point, settings, ranker)
        acc = accuracy(labels_from_scores(mm.decision_scores(X_val)), y_val)
        if best is None or acc > best.validation_accuracy:
            best = GridChoice(point, acc, mm)
    return best


@dataclass(frozen=True)
class Cell:
    repetition: int
    modality: str
    method: MethodId
    accuracy: float
    gamma_a: float | None = None
    gamma_i: float | None = None
    k: int | None = None

    @property
    def failed(self) -> bool:
        return math.isnan(self.accuracy)


@dataclass
class ExperimentData:
    modalities: dict            # name -> ModalityMatrix
    assignment: LabelAssignment

    def __post_init__(self):
        if not self.modalities:
            raise ConfigError("at least one modality is required")
        ids = list(self.assignment.labels)
        for name, mat in self.modalities.items():
            missing = set(ids) - set(mat.sample_ids)
            if missing:
                raise IntegrityError(f"modality {name!r} lacks {len(missing)} clinical samples, e.g. {sorted(missing)[0]!r}")


@dataclass(frozen=True)
class ExperimentSettings:
    methods: tuple = ALL_METHODS
    repetitions: int = 100
    base_seed: int = 0
    validation_fraction: float = 0.15
    n_folds: int = 5
    grid: HyperGrid = HyperGrid()
    pipeline: PipelineSettings = PipelineSettings()


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return "" if math.isnan(x) else repr(x)
    return str(x)


def _mean_std(values):
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return float("nan"), float("nan")
    return float(v.mean()), float(v.std(ddof=1)) if v.size > 1 else 0.0


COMPARISONS = (
    (MethodId.LAPSVM, MethodId.SVM),
    (MethodId.LAPSVM, MethodId.LAPSVM_LABELED_ONLY),
    (MethodId.SVM, MethodId.LAPSVM_LABELED_ONLY),
    (MethodId.STACKED_LAPSVM, MethodId.STACKED_SVM),
)


@dataclass
class ExperimentReport:
    cells: list
    modalities: tuple
    methods: tuple
    repetitions: int
    failures: list = field(default_factory=list)   # (repetition, message)

    def rows(self):
        return [(m, meth) for m in (*self.modalities, COMBINED) for meth in self.methods
                if (m == COMBINED) == MethodId(meth).stacked]

    def values(self, modality, method) -> dict:
        """repetition -> accuracy for successful cells."""
        method = MethodId(method)
        return {c.repetition: c.accuracy for c in self.cells
                if c.modality == modality and c.method is method and not c.failed}

    def summary(self) -> list[dict]:
        out = []
        for modality, method in self.rows():
            vals = list(self.values(modality, method).values())
            mean, std = _mean_std(vals)
            out.append({"modality": modality, "method": MethodId(method).value, "n": len(vals), "mean": mean, "std": std})
        return out

    def pvalues(self) -> list[dict]:
        out = []
        for modality in (*self.modalities, COMBINED):
            for a, b in COMPARISONS:
                if a not in self.methods or b not in self.methods:
                    continue
                if (modality == COMBINED) != a.stacked:
                    continue
                va, vb = self.values(modality, a), self.values(modality, b)
                reps = sorted(set(va) & set(vb))
                row = {"modality": modality, "method_a": a.value, "method_b": b.value, "n": len(reps)}
                try:
                    res = wilcoxon_signed_rank([va[r] for r in reps], [vb[r] for r in reps])
                    row.update(p_value=res.p_value, test=res.method)
                except ContractError:
                    row.update(p_value=float("nan"), test="insufficient")
                out.append(row)
        return out

    def table3(self) -> list[dict]:
        """Modality rows with supervised / semi-supervised / labeled-only mean and std."""
        cols = {
            "supervised": (MethodId.SVM, MethodId.STACKED_SVM),
            "semi_supervised": (MethodId.LAPSVM, MethodId.STACKED_LAPSVM),
            "labeled_only": (MethodId.LAPSVM_LABELED_ONLY, None),
        }
        out = []
        for modality in (*self.modalities, COMBINED):
            row = {"modality": modality}
            for name, (single, stacked) in cols.items():
                method = stacked if modality == COMBINED else single
                if method is None or method not in self.methods:
                    row[f"{name}_mean"] = row[f"{name}_std"] = float("nan")
                    continue
                row[f"{name}_mean"], row[f"{name}_std"] = _mean_std(list(self.values(modality, method).values()))
            out.append(row)
        return out

    def write(self, out_dir) -> dict:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"raw": out / "raw_cells.csv", "summary": out / "summary.csv", "pvalues": out / "pvalues.csv"}
        write_raw_cells(paths["raw"], self.cells)
        t3 = self.table3()
        _write_rows(paths["summary"], list(t3[0]), t3)
        _write_rows(paths["pvalues"], ["modality", "method_a", "method_b", "n", "p_value", "test"], self.pvalues())
        return paths


RAW_HEADER = ["repetition", "modality", "method", "accuracy", "chosen_gamma_a", "chosen_gamma_i", "chosen_k"]


def write_raw_cells(path, cells) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RAW_HEADER)
        for c in cells:
            w.writerow([c.repetition, c.modality, c.method.value, _fmt(c.accuracy),
                        _fmt(c.gamma_a), _fmt(c.gamma_i), _fmt(c.k)])


def read_raw_cells(path) -> list[Cell]:
    def num(s, cast=float):
        return cast(s) if s != "" else None

    cells = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RAW_HEADER:
            raise ConfigError(f"{path}: not a raw-cells report (header {reader.fieldnames})")
        for row in reader:
            acc = num(row["accuracy"])
            cells.append(Cell(int(row["repetition"]), row["modality"], MethodId(row["method"]),
                              float("nan") if acc is None else acc,
                              num(row["chosen_gamma_a"]), num(row["chosen_gamma_i"]), num(row["chosen_k"], int)))
    return cells


def report_from_cells(cells: Sequence[Cell]) -> ExperimentReport:
    modalities = tuple(dict.fromkeys(c.modality for c in cells if c.modality != COMBINED))
    present = {c.method for c in cells}
    methods = tuple(m for m in ALL_METHODS if m in present)
    reps = len({c.repetition for c in cells})
    return ExperimentReport(list(cells), modalities, methods, reps)


def _write_rows(path, header, rows) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(row[h]) for h in header])


class _Repetition:
    """All model fitting for one repetition; owns its caches, shares nothing."""

    def __init__(self, r: int, data: ExperimentData, cfg: ExperimentSettings):
        self.r = r
        self.data = data
        self.cfg = cfg
        self.assignment = data.assignment
        self.split = make_split(data.assignment, cfg.base_seed + r, cfg.validation_fraction, cfg.n_folds)
        max_k = max(int(k) for k in cfg.grid.feature_counts)
        self.ranker = FeatureRanker(cfg.pipeline, max_k)

    def _fit(self, matrix, exclude, method, point):
        train = self.split.training_ids(exclude)
        return fit_modality_model(matrix, train, self.assignment.signs(train), self.split.unlabeled_ids,
                                  method, point, self.cfg.pipeline, self.ranker)

    def run(self) -> list[Cell]:
        cfg, split = self.cfg, self.split
        methods = cfg.methods
        bases = [b for b in (MethodId.SVM, MethodId.LAPSVM, MethodId.LAPSVM_LABELED_ONLY)
                 if any(m.base is b for m in methods)]
        stacked_bases = {m.base for m in methods if m.stacked}
        nf = split.n_folds
        fold_truth = [self.assignment.signs(f) for f in split.folds]
        cells = []
        test_scores, inner_scores, val_scores = {}, {}, {}
        for name, matrix in self.data.modalities.items():
            for b in bases:
                choice = grid_search(matrix, split, self.assignment, cfg.grid, b, cfg.pipeline, self.ranker)
                point = choice.point
                outer = [self._fit(matrix, {t}, b, point) for t in range(nf)]
                scores = [outer[t].decision_scores(matrix.rows(split.folds[t])) for t in range(nf)]
                test_scores[name, b] = scores
                if b in methods:
                    accs = [accuracy(labels_from_scores(s), fold_truth[t]) for t, s in enumerate(scores)]
                    cells.append(Cell(self.r, name, b, float(np.mean(accs)), point.gamma_ambient,
                                      point.gamma_intrinsic, point.feature_count))
                if b in stacked_bases:
                    full = choice.model or self._fit(matrix, (), b, point)
                    val_scores[name, b] = (full.decision_scores(matrix.rows(split.validation_ids))
                                           if split.validation_ids else np.empty(0))
                    for s, t in combinations(range(nf), 2):
                        inner = self._fit(matrix, {s, t}, b, point)
                        # model trained without folds s and t scores both of them
                        inner_scores[name, b, s, t] = inner.decision_scores(matrix.rows(split.folds[s]))
                        inner_scores[name, b, t, s] = inner.decision_scores(matrix.rows(split.folds[t]))
        for method in methods:
            if method.stacked:
                cells.append(self._stack(method, test_scores, inner_scores, val_scores, fold_truth))
        order = {m: i for i, m in enumerate(methods)}
        mods = {m: i for i, m in enumerate((*self.data.modalities, COMBINED))}
        cells.sort(key=lambda c: (mods[c.modality], order[c.method]))
        return cells

    def _stack(self, method, test_scores, inner_scores, val_scores, fold_truth) -> Cell:
        b = method.base
        split, names = self.split, list(self.data.modalities)
        nf = split.n_folds
        pool = split.training_ids()
        y_pool = self.assignment.signs(pool)

        # meta regularization: train on rotation OOF scores, pick by validation accuracy
        gammas = sorted({float(g) for g in self.cfg.grid.gamma_ambient})
        chosen = gammas[0]
        if len(gammas) > 1 and split.validation_ids:
            oof = ScoreMatrix(np.column_stack([np.concatenate(test_scores[n, b]) for n in names]), names)
            val = np.column_stack([val_scores[n, b] for n in names])
            y_val = self.assignment.signs(split.validation_ids)
            best = -1.0
            for g in gammas:
                acc = accuracy(labels_from_scores(train_stacker(oof, y_pool, g).decision_scores(val)), y_val)
                if acc > best:
                    best, chosen = acc, g

        accs = []
        for t in range(nf):
            others = [s for s in range(nf) if s != t]
            meta_x = np.column_stack([np.concatenate([inner_scores[n, b, s, t] for s in others]) for n in names])
            meta_y = np.concatenate([fold_truth[s] for s in others])
            stack = train_stacker(ScoreMatrix(meta_x, names), meta_y, chosen)
            test_x = np.column_stack([test_scores[n, b][t] for n in names])
            accs.append(accuracy(labels_from_scores(stack.decision_scores(test_x)), fold_truth[t]))
        return Cell(self.r, COMBINED, method, float(np.mean(accs)), chosen, None, None)


def expected_cells(r: int, modalities, methods) -> list[Cell]:
    nan = float("nan")
    cells = [Cell(r, m, meth, nan) for m in modalities for meth in methods if not meth.stacked]
    cells += [Cell(r, COMBINED, meth, nan) for meth in methods if meth.stacked]
    return cells


def run_repetition(r: int, data: ExperimentData, cfg: ExperimentSettings) -> tuple[list[Cell], str | None]:
    try:
        return _Repetition(r, data, cfg).run(), None
    except (ManifoldSSLError, sla.LinAlgError, ArithmeticError) as exc:
        log.warning("repetition %d failed: %s", r, exc)
        return expected_cells(r, list(data.modalities), cfg.methods), f"{type(exc).__name__}: {exc}"


def worker_count(workers: int | None = None) -> int:
    if workers is None:
        raw = os.environ.get(THREADS_ENV, "1")
        try:
            workers = int(raw)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    return max(1, workers)


def run_experiment(cfg: ExperimentSettings, data: ExperimentData, workers: int | None = None) -> ExperimentReport:
    """Run every repetition (possibly concurrently) and assemble the report in repetition order."""
    if cfg.repetitions < 1:
        raise ConfigError("repetitions must be at least 1")
    methods = tuple(MethodId(m) for m in cfg.methods)
    cfg = ExperimentSettings(methods, cfg.repetitions, cfg.base_seed, cfg.validation_fraction, cfg.n_folds,
                             cfg.grid, cfg.pipeline)
    n_workers = min(worker_count(workers), cfg.repetitions)
    reps = range(cfg.repetitions)
    if n_workers == 1:
        results = [run_repetition(r, data, cfg) for r in reps]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(lambda r: run_repetition(r, data, cfg), reps))
    cells, failures = [], []
    for r, (rep_cells, err) in zip(reps, results):
        cells.extend(rep_cells)
        if err is not None:
            failures.append((r, err))
    if len(failures) > MAX_FAILED_FRACTION * cfg.repetitions:
        first = failures[0]
        raise ExperimentError(f"{len(failures)} of {cfg.repetitions} repetitions failed; "
                              f"first (repetition {first[0]}): {first[1]}")
    return ExperimentReport(cells, tuple(data.modalities), methods, cfg.repetitions, failures)


def transductive_comparison(X_labeled, y_labeled, X_unlabeled, y_unlabeled, kernel: KernelSpec,
                            gamma_ambient: float, gamma_intrinsic: float, k_neighbors: int = 5,
                            affinity: str = "squared") -> dict:
    """Accuracy on the unlabeled pool for SVM, LapSVM and LapSVM_L trained on the same labels."""
    X_labeled = np.atleast_2d(X_labeled)
    svm = train_svm(X_labeled, y_labeled, kernel, gamma_ambient)
    nodes = np.vstack([X_labeled, X_unlabeled])
    lap = train_lapsvm(X_labeled, y_labeled, X_unlabeled, kernel, gamma_ambient, gamma_intrinsic,
                       laplacian(build_graph(nodes, k_neighbors, affinity)))
    lap_l = train_lapsvm(X_labeled, y_labeled, None, kernel, gamma_ambient, gamma_intrinsic,
                         laplacian(build_graph(X_labeled, k_neighbors, affinity)))
    return {
        MethodId.SVM: accuracy(svm.predict(X_unlabeled), y_unlabeled),
        MethodId.LAPSVM: accuracy(lap.predict(X_unlabeled), y_unlabeled),
        MethodId.LAPSVM_LABELED_ONLY: accuracy(lap_l.predict(X_unlabeled), y_unlabeled),
    }
