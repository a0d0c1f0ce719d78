"""Desk-scale synthetic stand-ins for the restricted expression cohorts.

Every preset writes feature CSVs, a clinical CSV (so labels go through the same
survival-threshold rule as real data), a ``roles.csv`` describing how each
sample was generated and a ready-to-run ``config.ini``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import ClinicalRecord, ModalityMatrix, VitalStatus, write_clinical, write_feature_matrix
from .errors import ConfigError

PRESETS = ("two_moons", "multimodal_manifold", "null_noise")
THRESHOLD_YEARS = 5
THRESHOLD_DAYS = THRESHOLD_YEARS * 365


@dataclass
class SyntheticDataset:
    modalities: dict          # name -> ModalityMatrix
    labels: np.ndarray        # +1/-1 ground truth for every sample (including unlabeled)
    roles: list               # per sample: "labeled", "unlabeled" or "test"
    sample_ids: list
    records: list             # ClinicalRecord per sample
    config: dict              # section -> {key: value} for the bundled config

    def index(self, role: str) -> np.ndarray:
        return np.array([i for i, r in enumerate(self.roles) if r == role], dtype=int)


def moons(n_per_class: int, rng, noise: float = 0.1):
    """Two interleaving half circles; returns points and +1/-1 labels."""
    t_up = rng.uniform(0.0, np.pi, n_per_class)
    t_dn = rng.uniform(0.0, np.pi, n_per_class)
    up = np.c_[np.cos(t_up), np.sin(t_up)]
    dn = np.c_[1.0 - np.cos(t_dn), 0.5 - np.sin(t_dn)]
    X = np.vstack([up, dn]) + noise * rng.normal(size=(2 * n_per_class, 2))
    y = np.r_[np.ones(n_per_class), -np.ones(n_per_class)]
    return X, y


def _record(sid, label, role, rng) -> ClinicalRecord:
    """Clinical record whose survival rule reproduces ``label`` (or censoring when unlabeled)."""
    if role == "unlabeled":
        return ClinicalRecord(sid, VitalStatus.ALIVE, last_followup_days=int(rng.integers(30, THRESHOLD_DAYS)))
    if label > 0:
        if rng.random() < 0.5:
            return ClinicalRecord(sid, VitalStatus.ALIVE,
                                  last_followup_days=int(rng.integers(THRESHOLD_DAYS, 3 * THRESHOLD_DAYS)))
        return ClinicalRecord(sid, VitalStatus.DECEASED,
                              survival_days=int(rng.integers(THRESHOLD_DAYS, 3 * THRESHOLD_DAYS)))
    return ClinicalRecord(sid, VitalStatus.DECEASED, survival_days=int(rng.integers(30, THRESHOLD_DAYS)))


def two_moons(seed: int = 1, n_unlabeled: int = 200, n_test: int = 200, noise: float = 0.1) -> SyntheticDataset:
    """One labeled point per class, the rest split between unlabeled and test pools."""
    rng = np.random.default_rng(seed)
    n_total = 2 + n_unlabeled + n_test
    X, y = moons(n_total // 2 + 1, rng, noise)
    order = rng.permutation(len(y))
    X, y = X[order][:n_total], y[order][:n_total]
    roles = ["unlabeled"] * n_unlabeled + ["test"] * n_test
    # the two labeled points: first positive and first negative of the permuted pool
    first_pos = int(np.flatnonzero(y > 0)[0])
    first_neg = int(np.flatnonzero(y < 0)[0])
    rest = [i for i in range(n_total) if i not in (first_pos, first_neg)]
    idx = [first_pos, first_neg] + rest
    X, y = X[idx], y[idx]
    roles = ["labeled", "labeled"] + roles
    ids = [f"M{i:04d}" for i in range(n_total)]
    records = [_record(s, lab, role, rng) for s, lab, role in zip(ids, y, roles)]
    mat = ModalityMatrix("moons", ids, ["x1", "x2"], X)
    config = {
        "kernel": {"kind": "rbf", "gamma": "2.0"},
        "graph": {"k_neighbors": "5", "affinity": "squared"},
        "grid": {"gamma_ambient": "1e-2", "gamma_intrinsic": "1", "feature_counts": "2"},
        "experiment": {"repetitions": "2", "methods": "svm, lapsvm, lapsvm_labeled_only"},
    }
    return SyntheticDataset({"moons": mat}, y, roles, ids, records, config)


# per-modality (agreement of the modality's latent class with the outcome, mean shift of informative features)
MODALITY_STRENGTHS = {"gene": (0.85, 2.5), "isoform": (0.80, 2.5), "junction": (0.75, 2.5)}


def multimodal_manifold(seed: int = 1, n_samples: int = 240, unlabeled_fraction: float = 0.55,
                        n_informative: int = 8, n_noise: int = 24, active_fraction: float = 0.6) -> SyntheticDataset:
    """Three modalities sharing a latent binary class, each with its own noise.

    In modality m every sample carries a modality-level class that matches the
    outcome with probability ``agree_m``, independently across modalities. The
    ``n_informative`` differentially expressed features are shifted by
    ``+-shift_m`` (unit noise) according to that class, each one only in a
    random ``active_fraction`` of samples (subtype heterogeneity keeps the
    features from being fully redundant); ``n_noise`` pure-noise features follow
    and every column gets a random affine rescaling.
    """
    if not 0 <= unlabeled_fraction < 1:
        raise ConfigError(f"unlabeled_fraction must be in [0, 1), got {unlabeled_fraction}")
    rng = np.random.default_rng(seed)
    y = np.where(rng.random(n_samples) < 0.5, 1.0, -1.0)
    n_unl = int(np.floor(unlabeled_fraction * n_samples + 0.5))
    roles = ["labeled"] * n_samples
    for i in rng.permutation(n_samples)[:n_unl]:
        roles[i] = "unlabeled"
    ids = [f"S{i:04d}" for i in range(n_samples)]
    modalities = {}
    for name, (agree, shift) in MODALITY_STRENGTHS.items():
        latent = np.where(rng.random(n_samples) < agree, y, -y)
        signs = rng.choice([-1.0, 1.0], n_informative)
        active = rng.random((n_samples, n_informative)) < active_fraction
        informative = shift * active * latent[:, None] * signs + rng.normal(size=(n_samples, n_informative))
        values = np.hstack([informative, rng.normal(size=(n_samples, n_noise))])
        values = values[:, rng.permutation(values.shape[1])]
        values = values * rng.uniform(0.5, 5.0, values.shape[1]) + rng.uniform(-3.0, 3.0, values.shape[1])
        feats = [f"{name}_{j:03d}" for j in range(values.shape[1])]
        modalities[name] = ModalityMatrix(name, ids, feats, values)
    records = [_record(s, lab, role, rng) for s, lab, role in zip(ids, y, roles)]
    config = {
        "kernel": {"kind": "polynomial", "degree": "3", "offset": "1"},
        "graph": {"k_neighbors": "5", "affinity": "squared"},
        "grid": {"gamma_ambient": "1e-2, 1", "gamma_intrinsic": "1e-4, 1e-2", "feature_counts": "4, 8"},
        "experiment": {"repetitions": "1"},
    }
    return SyntheticDataset(modalities, y, roles, ids, records, config)


def null_noise(seed: int = 1, n_samples: int = 200, n_features: int = 20,
               unlabeled_fraction: float = 0.5) -> SyntheticDataset:
    """Features drawn independently of the (balanced, random) labels."""
    rng = np.random.default_rng(seed)
    y = np.where(rng.permutation(n_samples) < n_samples // 2, 1.0, -1.0)
    n_unl = int(np.floor(unlabeled_fraction * n_samples + 0.5))
    roles = ["labeled"] * n_samples
    for i in rng.permutation(n_samples)[:n_unl]:
        roles[i] = "unlabeled"
    ids = [f"N{i:04d}" for i in range(n_samples)]
    X = rng.normal(size=(n_samples, n_features))
    records = [_record(s, lab, role, rng) for s, lab, role in zip(ids, y, roles)]
    mat = ModalityMatrix("noise", ids, [f"f{j:03d}" for j in range(n_features)], X)
    config = {
        "kernel": {"kind": "linear"},
        "grid": {"gamma_ambient": "1e-2", "gamma_intrinsic": "1e-2", "feature_counts": "5"},
        "experiment": {"repetitions": "1"},
    }
    return SyntheticDataset({"noise": mat}, y, roles, ids, records, config)


def generate(preset: str, seed: int = 1, **kwargs) -> SyntheticDataset:
    builders = {"two_moons": two_moons, "multimodal_manifold": multimodal_manifold, "null_noise": null_noise}
    if preset not in builders:
        raise ConfigError(f"unknown preset {preset!r}; expected one of {', '.join(PRESETS)}")
    return builders[preset](seed=seed, **kwargs)


def write_dataset(ds: SyntheticDataset, out_dir) -> dict:
    """Write features, clinical records, roles and a bundled config; return the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    for name, mat in ds.modalities.items():
        p = out / f"{name}.csv"
        write_feature_matrix(p, mat)
        paths[name] = p
    write_clinical(out / "clinical.csv", ds.records)
    paths["clinical"] = out / "clinical.csv"
    with (out / "roles.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", "role", "label"])
        for sid, role, lab in zip(ds.sample_ids, ds.roles, ds.labels):
            w.writerow([sid, role, int(lab)])
    paths["roles"] = out / "roles.csv"

    lines = [
        "[data]",
        "clinical = clinical.csv",
        f"survival_threshold_years = {THRESHOLD_YEARS}",
        "",
        "[modalities]",
        *(f"{name} = {name}.csv" for name in ds.modalities),
        "",
    ]
    for section, values in ds.config.items():
        lines.append(f"[{section}]")
        lines.extend(f"{k} = {v}" for k, v in values.items())
        lines.append("")
    lines += ["[output]", "directory = results", ""]
    (out / "config.ini").write_text("\n".join(lines), encoding="utf-8")
    paths["config"] = out / "config.ini"
    return paths
