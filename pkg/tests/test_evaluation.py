import logging
import math

import numpy as np
import pytest

from conftest import balanced_assignment
from manifold_ssl import synthetic
from manifold_ssl.dataset import ModalityMatrix, derive_labels, make_split
from manifold_ssl.errors import ConfigError, ContractError, ExperimentError, SolverError
from manifold_ssl.evaluation import (COMBINED, ExperimentData, ExperimentSettings, FeatureRanker, GridPoint,
                                     HyperGrid, MethodId, PipelineSettings, accuracy, fit_modality_model,
                                     grid_search, read_raw_cells, report_from_cells, run_experiment,
                                     transductive_comparison, worker_count, write_raw_cells)
import manifold_ssl.evaluation as evaluation
from manifold_ssl.kernels import KernelSpec

SMALL_GRID = HyperGrid((1e-2, 1.0), (1e-4, 1e-2), (4,))


def small_data(seed=1, n=120):
    ds = synthetic.multimodal_manifold(seed, n_samples=n)
    return ExperimentData(ds.modalities, derive_labels(ds.records, synthetic.THRESHOLD_DAYS))


def test_accuracy_values():
    t = np.array([1, -1] * 5)
    assert accuracy(t, t) == 1.0
    assert accuracy(np.ones(10), t) == 0.5
    assert accuracy(-t, t) == 0.0
    with pytest.raises(ContractError):
        accuracy([], [])
    with pytest.raises(ContractError):
        accuracy([1], [1, 1])


def test_grid_points_order_and_skips(caplog):
    grid = HyperGrid((1.0, 1e-2), (0.0, 1e-2), (8, 4, 500))
    with caplog.at_level(logging.WARNING):
        pts = grid.points(MethodId.LAPSVM, 20)
    assert "500" in caplog.text
    assert [p.feature_count for p in pts] == [4, 4, 8, 8]
    assert all(p.gamma_intrinsic == 1e-2 for p in pts)
    assert [p.gamma_ambient for p in pts[:2]] == [1e-2, 1.0]
    assert all(p.gamma_intrinsic == 0.0 for p in grid.points(MethodId.STACKED_SVM, 20))
    with pytest.raises(ConfigError):
        HyperGrid((1.0,), (0.0,), (4,)).points(MethodId.LAPSVM, 10)
    with pytest.raises(ConfigError):
        HyperGrid((0.0,), (1.0,), (4,))


def test_method_bases():
    assert MethodId.STACKED_LAPSVM.base is MethodId.LAPSVM and MethodId.STACKED_LAPSVM.stacked
    assert MethodId.LAPSVM_LABELED_ONLY.base is MethodId.LAPSVM_LABELED_ONLY


def test_single_point_grid_returned_untrained():
    data = small_data()
    split = make_split(data.assignment, 0)
    grid = HyperGrid((0.5,), (0.1,), (3,))
    choice = grid_search(data.modalities["gene"], split, data.assignment, grid, MethodId.LAPSVM, PipelineSettings())
    assert choice.point == GridPoint(3, 0.5, 0.1)
    assert math.isnan(choice.validation_accuracy) and choice.model is None


def test_planted_optimum():
    rng = np.random.default_rng(4)
    n = 200
    x = rng.normal(size=(4 * n, 2))
    x = x[np.abs(x.sum(1)) > 0.3][:n]
    y = np.where(x.sum(1) > 0, 1.0, -1.0)
    X = np.column_stack([x, rng.normal(size=(n, 4))])
    ids = [f"P{i:03d}" for i in range(n)]
    from manifold_ssl.dataset import ClinicalRecord, VitalStatus
    recs = [ClinicalRecord(s, VitalStatus.DECEASED, survival_days=2000 if v > 0 else 100) for s, v in zip(ids, y)]
    assignment = derive_labels(recs, 1825)
    matrix = ModalityMatrix("m", ids, [f"f{j}" for j in range(6)], X)
    split = make_split(assignment, 0)
    settings = PipelineSettings(kernel=KernelSpec("linear"), discretize_cutoff=0.5)
    choice = grid_search(matrix, split, assignment, HyperGrid((1e-3,), (0.0,), (1, 2)), MethodId.SVM, settings)
    assert choice.point.feature_count == 2
    assert choice.validation_accuracy == 1.0
    assert set(choice.model.selected) == {0, 1}


def test_graph_nodes_per_method():
    data = small_data()
    split = make_split(data.assignment, 0)
    train = split.training_ids()
    y = data.assignment.signs(train)
    ranker = FeatureRanker(PipelineSettings(), 4)
    point = GridPoint(4, 1e-2, 1e-2)
    m = data.modalities["gene"]
    lap = fit_modality_model(m, train, y, split.unlabeled_ids, MethodId.LAPSVM, point, PipelineSettings(), ranker)
    lab = fit_modality_model(m, train, y, split.unlabeled_ids, MethodId.LAPSVM_LABELED_ONLY, point,
                             PipelineSettings(), ranker)
    assert lap.graph_nodes == len(train) + len(split.unlabeled_ids)
    assert lab.graph_nodes == len(train)
    assert lap.selected == lab.selected


def test_one_repetition_structure(tmp_path):
    data = small_data()
    report = run_experiment(ExperimentSettings(repetitions=1, grid=SMALL_GRID), data)
    assert len(report.cells) == 3 * 3 + 2
    assert {(c.modality, c.method) for c in report.cells} == set(report.rows())
    assert all(0.0 <= c.accuracy <= 1.0 for c in report.cells)
    assert sum(c.modality == COMBINED for c in report.cells) == 2
    paths = report.write(tmp_path)
    assert all(p.is_file() for p in paths.values())
    back = read_raw_cells(paths["raw"])
    assert [c.accuracy for c in back] == [c.accuracy for c in report.cells]
    assert report_from_cells(back).summary() == report.summary()


def test_deterministic_and_thread_independent(tmp_path):
    data = small_data()
    cfg = ExperimentSettings(methods=(MethodId.SVM, MethodId.LAPSVM, MethodId.STACKED_LAPSVM), repetitions=2,
                             grid=SMALL_GRID)
    a = run_experiment(cfg, data, workers=1)
    b = run_experiment(cfg, data, workers=2)
    write_raw_cells(tmp_path / "a.csv", a.cells)
    write_raw_cells(tmp_path / "b.csv", b.cells)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_failed_repetitions(monkeypatch):
    data = small_data()
    real_run = evaluation._Repetition.run

    def flaky(self):
        if self.r == 0:
            raise SolverError("forced", 1.0)
        return real_run(self)

    monkeypatch.setattr(evaluation._Repetition, "run", flaky)
    cfg = ExperimentSettings(methods=(MethodId.SVM,), repetitions=2, grid=HyperGrid((1.0,), (0.0,), (4,)))
    with pytest.raises(ExperimentError, match="forced"):
        run_experiment(cfg, data)
    cfg = ExperimentSettings(methods=(MethodId.SVM,), repetitions=12, grid=HyperGrid((1.0,), (0.0,), (4,)))
    report = run_experiment(cfg, data)
    assert report.failures and report.failures[0][0] == 0
    assert math.isnan(report.cells[0].accuracy)
    assert report.summary()[0]["n"] == 11


def test_worker_count(monkeypatch):
    monkeypatch.delenv(evaluation.THREADS_ENV, raising=False)
    assert worker_count() == 1
    monkeypatch.setenv(evaluation.THREADS_ENV, "3")
    assert worker_count() == 3
    assert worker_count(0) == 1
    monkeypatch.setenv(evaluation.THREADS_ENV, "many")
    with pytest.raises(ConfigError):
        worker_count()


def test_missing_modality_samples():
    a = balanced_assignment(6, 6)
    m = ModalityMatrix("g", ["P000"], ["f"], [[1.0]])
    from manifold_ssl.errors import IntegrityError
    with pytest.raises(IntegrityError):
        ExperimentData({"g": m}, a)


def test_pvalues_and_table_layout():
    cells = []
    for r in range(8):
        for meth, acc in ((MethodId.SVM, 0.6), (MethodId.LAPSVM, 0.7 + 0.01 * r)):
            cells.append(evaluation.Cell(r, "g", meth, acc))
    report = report_from_cells(cells)
    rows = report.pvalues()
    assert len(rows) == 1 and rows[0]["method_a"] == "lapsvm" and rows[0]["p_value"] < 0.01
    t3 = report.table3()
    assert t3[0]["supervised_mean"] == pytest.approx(0.6)
    assert math.isnan(t3[0]["labeled_only_mean"])


def test_transductive_comparison_moons():
    ds = synthetic.two_moons(1)
    lab, unl = ds.index("labeled"), ds.index("unlabeled")
    X = ds.modalities["moons"].values
    acc = transductive_comparison(X[lab], ds.labels[lab], X[unl], ds.labels[unl], KernelSpec("rbf", gamma=4.0),
                                  1e-3, 1.0)
    assert set(acc) == {MethodId.SVM, MethodId.LAPSVM, MethodId.LAPSVM_LABELED_ONLY}
    assert acc[MethodId.LAPSVM] > acc[MethodId.SVM]


def test_no_scoring_of_training_rows(monkeypatch):
    """Every model only ever scores rows it was not trained on."""
    data = small_data(3)
    violations = []
    real_fit = evaluation.fit_modality_model

    def spying_fit(matrix, train_ids, *args, **kwargs):
        mm = real_fit(matrix, train_ids, *args, **kwargs)
        seen = {row.tobytes() for row in matrix.rows(train_ids)}

        class Guard:
            def __getattr__(self, name):
                return getattr(mm, name)

            def decision_scores(self, X):
                violations.extend(r for r in np.atleast_2d(X) if r.tobytes() in seen)
                return mm.decision_scores(X)

        return Guard()

    monkeypatch.setattr(evaluation, "fit_modality_model", spying_fit)
    run_experiment(ExperimentSettings(repetitions=1, grid=SMALL_GRID), data)
    assert violations == []


def test_summary_matches_raw_values():
    data = small_data(4)
    report = run_experiment(ExperimentSettings(methods=(MethodId.SVM, MethodId.STACKED_SVM), repetitions=3,
                                               grid=SMALL_GRID), data)
    for row in report.summary():
        vals = np.array(list(report.values(row["modality"], row["method"]).values()))
        assert abs(row["mean"] - vals.mean()) <= 1e-12
        assert abs(row["std"] - vals.std(ddof=1)) <= 1e-12


def surrogate_medians(out):
    report = report_from_cells(read_raw_cells(out / "raw_cells.csv"))
    return {modality: {m: float(np.median(list(report.values(modality, m).values())))
                       for m in (MethodId.SVM, MethodId.LAPSVM, MethodId.LAPSVM_LABELED_ONLY)}
            for modality in report.modalities}


def describe(medians):
    return "; ".join(f"{mod}: " + ", ".join(f"{m.value} {100 * v:.1f}" for m, v in med.items())
                     for mod, med in medians.items())


def test_ablation_lapsvm_not_below_svm(surrogate_run):
    medians = surrogate_medians(surrogate_run[2])
    assert all(m[MethodId.LAPSVM] >= m[MethodId.SVM] for m in medians.values()), describe(medians)


def test_ablation_lapsvm_not_below_labeled_only(surrogate_run):
    medians = surrogate_medians(surrogate_run[2])
    assert all(m[MethodId.LAPSVM] >= m[MethodId.LAPSVM_LABELED_ONLY] for m in medians.values()), describe(medians)
