"""Loading of modality matrices and clinical records, survival labels and splits."""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, FormatError, IntegrityError, ParseError

DAYS_PER_YEAR = 365


def years_to_days(years: float) -> int:
    return int(math.floor(years * DAYS_PER_YEAR + 0.5))


@dataclass(frozen=True)
class ModalityMatrix:
    modality_name: str
    sample_ids: tuple
    feature_ids: tuple
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        object.__setattr__(self, "sample_ids", tuple(self.sample_ids))
        object.__setattr__(self, "feature_ids", tuple(self.feature_ids))
        if values.ndim != 2:
            raise FormatError(f"{self.modality_name}: values must be 2-D, got {values.ndim}-D")
        if values.shape != (len(self.sample_ids), len(self.feature_ids)):
            raise FormatError(
                f"{self.modality_name}: shape {values.shape} does not match "
                f"{len(self.sample_ids)} samples x {len(self.feature_ids)} features"
            )
        _check_unique(self.sample_ids, f"{self.modality_name}: sample id")
        _check_unique(self.feature_ids, f"{self.modality_name}: feature id")
        if not np.all(np.isfinite(values)):
            raise ParseError(f"{self.modality_name}: non-finite values present")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def shape(self):
        return self.values.shape

    def rows(self, ids: Sequence[str]) -> np.ndarray:
        """Return the value rows for ``ids`` in the order given."""
        index = self._index()
        try:
            return self.values[[index[i] for i in ids]]
        except KeyError as exc:
            raise IntegrityError(f"{self.modality_name}: unknown sample id {exc.args[0]!r}") from None

    def _index(self):
        cached = self.__dict__.get("_row_index")
        if cached is None:
            cached = {sid: i for i, sid in enumerate(self.sample_ids)}
            object.__setattr__(self, "_row_index", cached)
        return cached


def _check_unique(ids, what):
    seen = set()
    for i in ids:
        if i in seen:
            raise IntegrityError(f"duplicate {what} {i!r}")
        seen.add(i)


def load_feature_matrix(path, modality_name: str) -> ModalityMatrix:
    """Read a ``sample_id,<feature>...`` CSV into a :class:`ModalityMatrix`.

    Line numbers in error messages are 1-based and count the header.
    """
    path = Path(path)
    sample_ids, rows = [], []
    seen = set()
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        if len(header) < 2 or header[0].strip() != "sample_id":
            raise FormatError(f"{path}: line 1: header must start with 'sample_id' and name at least one feature")
        feature_ids = [h.strip() for h in header[1:]]
        n_cols = len(header)
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != n_cols:
                raise FormatError(f"{path}: line {line}: expected {n_cols} fields, found {len(row)}")
            sid = row[0].strip()
            if sid in seen:
                raise IntegrityError(f"{path}: line {line}: duplicate sample id {sid!r}")
            seen.add(sid)
            try:
                vals = [float(c) for c in row[1:]]
            except ValueError:
                bad = next(c for c in row[1:] if not _is_float(c))
                raise ParseError(f"{path}: line {line}: non-numeric cell {bad!r}") from None
            if not all(math.isfinite(v) for v in vals):
                raise ParseError(f"{path}: line {line}: non-finite value")
            sample_ids.append(sid)
            rows.append(vals)
    values = np.array(rows, dtype=float).reshape(len(rows), len(feature_ids))
    return ModalityMatrix(modality_name, sample_ids, feature_ids, values)


def _is_float(cell):
    try:
        float(cell)
    except ValueError:
        return False
    return True


def write_feature_matrix(path, matrix: ModalityMatrix) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", *matrix.feature_ids])
        for sid, row in zip(matrix.sample_ids, matrix.values):
            w.writerow([sid, *(repr(float(v)) for v in row)])


class VitalStatus(str, enum.Enum):
    DECEASED = "deceased"
    ALIVE = "alive"


@dataclass(frozen=True)
class ClinicalRecord:
    sample_id: str
    vital_status: VitalStatus
    survival_days: int | None = None
    last_followup_days: int | None = None

    def __post_init__(self):
        status = VitalStatus(self.vital_status)
        object.__setattr__(self, "vital_status", status)
        days = self.survival_days if status is VitalStatus.DECEASED else self.last_followup_days
        other = self.last_followup_days if status is VitalStatus.DECEASED else self.survival_days
        if days is None or other is not None:
            raise FormatError(
                f"{self.sample_id}: {status.value} records need exactly "
                f"{'survival_days' if status is VitalStatus.DECEASED else 'last_followup_days'}"
            )
        if days < 0:
            raise FormatError(f"{self.sample_id}: negative day count {days}")

    @property
    def days(self) -> int:
        return self.survival_days if self.vital_status is VitalStatus.DECEASED else self.last_followup_days


CLINICAL_HEADER = ["sample_id", "vital_status", "survival_days", "last_followup_days"]


def load_clinical(path) -> list[ClinicalRecord]:
    path = Path(path)
    records = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if header != CLINICAL_HEADER:
            raise FormatError(f"{path}: line 1: header must be {','.join(CLINICAL_HEADER)}")
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != 4:
                raise FormatError(f"{path}: line {line}: expected 4 fields, found {len(row)}")
            sid, status, surv, follow = (c.strip() for c in row)
            try:
                status = VitalStatus(status)
            except ValueError:
                raise ParseError(f"{path}: line {line}: unknown vital_status {status!r}") from None
            try:
                surv_d = int(surv) if surv else None
                follow_d = int(follow) if follow else None
            except ValueError:
                raise ParseError(f"{path}: line {line}: day fields must be integers") from None
            try:
                records.append(ClinicalRecord(sid, status, surv_d, follow_d))
            except FormatError as exc:
                raise FormatError(f"{path}: line {line}: {exc}") from None
    return records


def write_clinical(path, records: Iterable[ClinicalRecord]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CLINICAL_HEADER)
        for r in records:
            w.writerow([
                r.sample_id,
                r.vital_status.value,
                "" if r.survival_days is None else r.survival_days,
                "" if r.last_followup_days is None else r.last_followup_days,
            ])


class Label(str, enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    UNLABELED = "unlabeled"


@dataclass(frozen=True)
class LabelAssignment:
    labels: dict
    threshold_days: int

    def ids(self, label: Label) -> list[str]:
        return [sid for sid, lab in self.labels.items() if lab is label]

    @property
    def labeled_ids(self) -> list[str]:
        return [sid for sid, lab in self.labels.items() if lab is not Label.UNLABELED]

    @property
    def unlabeled_ids(self) -> list[str]:
        return self.ids(Label.UNLABELED)

    def counts(self) -> dict:
        out = {lab: 0 for lab in Label}
        for lab in self.labels.values():
            out[lab] += 1
        return out

    def signs(self, ids: Sequence[str]) -> np.ndarray:
        """±1 targets for labeled ids (positive -> +1)."""
        out = np.empty(len(ids))
        for n, sid in enumerate(ids):
            lab = self.labels[sid]
            if lab is Label.UNLABELED:
                raise IntegrityError(f"{sid!r} is unlabeled")
            out[n] = 1.0 if lab is Label.POSITIVE else -1.0
        return out


def derive_labels(records: Sequence[ClinicalRecord], threshold_days: int) -> LabelAssignment:
    """Assign survival classes; alive patients followed for less than the threshold are unlabeled."""
    if not records:
        raise ConfigError("no clinical records")
    if threshold_days <= 0:
        raise ConfigError(f"threshold_days must be positive, got {threshold_days}")
    labels = {}
    for r in records:
        if r.sample_id in labels:
            raise IntegrityError(f"duplicate sample id {r.sample_id!r}")
        if r.vital_status is VitalStatus.DECEASED:
            labels[r.sample_id] = Label.POSITIVE if r.survival_days >= threshold_days else Label.NEGATIVE
        else:
            labels[r.sample_id] = Label.POSITIVE if r.last_followup_days >= threshold_days else Label.UNLABELED
    return LabelAssignment(labels, int(threshold_days))


@dataclass(frozen=True)
class SplitPlan:
    seed: int
    validation_ids: tuple
    folds: tuple
    unlabeled_ids: tuple = field(default=())

    @property
    def n_folds(self) -> int:
        return len(self.folds)

    def training_ids(self, exclude: Iterable[int] = ()) -> list[str]:
        """Ids of every fold not in ``exclude``, in fold order."""
        skip = set(exclude)
        return [sid for f, ids in enumerate(self.folds) if f not in skip for sid in ids]

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "validation_ids": list(self.validation_ids),
            "folds": [list(f) for f in self.folds],
            "unlabeled_ids": list(self.unlabeled_ids),
        }


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def make_split(assignment: LabelAssignment, seed: int, validation_fraction: float = 0.15,
               n_folds: int = 5) -> SplitPlan:
    """Class-stratified validation holdout plus ``n_folds`` stratified folds.

    Ids are sorted before shuffling so the plan depends only on the label map and
    the seed. Folds are dealt round-robin across the concatenated per-class
    permutations, which keeps both fold sizes and per-class counts within one.
    """
    if not 0 <= validation_fraction < 1:
        raise ConfigError(f"validation_fraction must be in [0, 1), got {validation_fraction}")
    if n_folds < 2:
        raise ConfigError(f"n_folds must be at least 2, got {n_folds}")
    rng = np.random.default_rng(seed)
    classes = [sorted(assignment.ids(Label.POSITIVE)), sorted(assignment.ids(Label.NEGATIVE))]
    n_labeled = sum(len(c) for c in classes)
    n_val = _round_half_up(validation_fraction * n_labeled)

    # largest-remainder allocation of the holdout across classes, positives first on ties
    quotas = [n_val * len(c) / n_labeled if n_labeled else 0.0 for c in classes]
    alloc = [int(math.floor(q)) for q in quotas]
    order = sorted(range(len(classes)), key=lambda i: (-(quotas[i] - alloc[i]), i))
    for i in order[: n_val - sum(alloc)]:
        alloc[i] += 1

    for c, a in zip(classes, alloc):
        if len(c) - a < n_folds:
            raise ConfigError(
                f"need at least {n_folds} labeled samples per class after the validation holdout, "
                f"class sizes are {[len(c) for c in classes]}"
            )

    validation, pool = [], []
    for c, a in zip(classes, alloc):
        perm = [c[i] for i in rng.permutation(len(c))]
        validation.extend(perm[:a])
        pool.extend(perm[a:])
    folds = [pool[f::n_folds] for f in range(n_folds)]
    return SplitPlan(
        seed=int(seed),
        validation_ids=tuple(validation),
        folds=tuple(tuple(f) for f in folds),
        unlabeled_ids=tuple(sorted(assignment.unlabeled_ids)),
    )
