"""Graph-based semi-supervised survival classification across data modalities."""

from .dataset import (ClinicalRecord, Label, LabelAssignment, ModalityMatrix, SplitPlan, derive_labels,
                      load_clinical, load_feature_matrix, make_split)
from .evaluation import (ExperimentReport, HyperGrid, MethodId, accuracy, grid_search, run_experiment,
                         transductive_comparison)
from .graph import AffinityGraph, GraphLaplacian, build_graph, heat_affinity, knn_sparsify, laplacian, pairwise_distances
from .kernels import KernelSpec, gram
from .learner import TrainedModel, decision_score, load_model, save_model, train_lapsvm, train_svm
from .mrmr import MrmrSelection, mrmr_select, mutual_information
from .preprocess import DiscreteMatrix, StandardizedMatrix, discretize, zscore
from .stacking import (ScoreMatrix, StackedModel, collect_oof_scores, normalize_scores, predict_stacked,
                       train_stacker)
from .stats import paired_test

__version__ = "0.1.0"
