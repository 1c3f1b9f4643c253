"""Minority-object typing from the composition of k-nearest-neighbor neighborhoods."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping

import numpy as np

from .dataset import Dataset, Observation

DEFAULT_K = 5


class ObjectType(Enum):
    """Neighborhood category of a minority observation.

    Safe points sit inside their own class, borderline points near the
    class boundary, rare points almost alone among foreign neighbors, and
    outliers entirely so.
    """

    SAFE = "safe"
    BORDERLINE = "borderline"
    RARE = "rare"
    OUTLIER = "outlier"

    def __str__(self) -> str:  # serializes as plain lowercase token
        return self.value


@dataclass(frozen=True)
class TypedObservation:
    observation_index: int
    type: ObjectType
    same_class_neighbors: int


@dataclass(frozen=True)
class FeatureScaler:
    """Per-feature min/max ranges for scaling distances to [0, 1] per axis.

    Constant features scale to zero everywhere, so they never contribute
    to a distance.
    """

    mins: np.ndarray
    maxs: np.ndarray

    @classmethod
    def fit(cls, features: np.ndarray) -> "FeatureScaler":
        feats = np.asarray(features, dtype=np.float64)
        return cls(mins=feats.min(axis=0), maxs=feats.max(axis=0))

    def transform(self, features: np.ndarray) -> np.ndarray:
        feats = np.atleast_2d(np.asarray(features, dtype=np.float64))
        span = self.maxs - self.mins
        safe_span = np.where(span > 0, span, 1.0)
        return (feats - self.mins) / safe_span


def neighborhood(
    d: Dataset, index: int, k: int, scaler: FeatureScaler | None = None
) -> list[int]:
    """Indices of the k nearest observations to ``d[index]``, excluding itself.

    Distances are Euclidean on min/max-scaled features (scaler fitted on
    ``d`` unless one is supplied); exact distance ties break toward the
    smaller observation index.
    """
    n = len(d)
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    if k >= n:
        raise ValueError(f"k={k} needs more than k observations, dataset has {n}")
    if not (0 <= index < n):
        raise IndexError(f"observation index {index} out of range for {n} rows")
    if scaler is None:
        scaler = FeatureScaler.fit(d.features)
    scaled = scaler.transform(d.features)
    diffs = scaled - scaled[index]
    dist2 = np.einsum("ij,ij->i", diffs, diffs)
    order = np.lexsort((np.arange(n), dist2))
    picked = [int(i) for i in order if i != index][:k]
    return picked


def label_type(same_class_count: int, k: int = DEFAULT_K) -> ObjectType:
    """Map a same-class neighbor count out of ``k`` to an object type.

    For the canonical k=5 rule: 4-5 same-class neighbors are safe, 2-3
    borderline, 1 rare, 0 outlier. Other k use the same proportional bands.
    """
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    if not (0 <= same_class_count <= k):
        raise ValueError(f"same-class count {same_class_count} outside [0, {k}]")
    proportion = same_class_count / k
    if proportion >= 0.7:
        return ObjectType.SAFE
    if proportion >= 0.3:
        return ObjectType.BORDERLINE
    if same_class_count > 0:
        return ObjectType.RARE
    return ObjectType.OUTLIER


def _same_class_counts(
    d: Dataset, target_indices: np.ndarray, k: int
) -> dict[int, int]:
    scaler = FeatureScaler.fit(d.features)
    scaled = scaler.transform(d.features)
    n = len(d)
    row_ids = np.arange(n)
    counts: dict[int, int] = {}
    for i in target_indices:
        diffs = scaled - scaled[i]
        dist2 = np.einsum("ij,ij->i", diffs, diffs)
        order = np.lexsort((row_ids, dist2))
        neighbors = order[order != i][:k]
        counts[int(i)] = int(np.sum(d.labels[neighbors] == d.labels[i]))
    return counts


def label_dataset_types(
    d: Dataset, classes: Iterable[str], k: int = DEFAULT_K
) -> dict[int, TypedObservation]:
    """Type every observation of ``d`` whose label belongs to ``classes``.

    Neighborhoods are searched over the whole dataset; observations of
    other classes stay untyped (absent from the result).
    """
    wanted = set(classes)
    known = set(d.class_labels)
    missing = wanted - known
    if missing:
        raise ValueError(f"classes {sorted(missing)} not present in dataset")
    if len(d) <= k:
        raise ValueError(f"typing with k={k} needs more than k observations, dataset has {len(d)}")
    targets = np.flatnonzero(np.isin(d.labels, sorted(wanted)))
    counts = _same_class_counts(d, targets, k)
    return {
        i: TypedObservation(
            observation_index=i, type=label_type(c, k), same_class_neighbors=c
        )
        for i, c in counts.items()
    }


def label_candidate_type(base: Dataset, candidate: Observation, k: int = DEFAULT_K) -> ObjectType:
    """Type ``candidate`` as it would be typed once added to ``base``.

    The min/max scaler is refitted on base plus the candidate, and the
    candidate's k nearest neighbors are searched among the base rows.
    """
    if len(base) < k:
        raise ValueError(f"candidate typing with k={k} needs a base of at least k rows")
    if candidate.features.shape[0] != base.dimension:
        raise ValueError(
            f"candidate dimension {candidate.features.shape[0]} != base dimension {base.dimension}"
        )
    union = np.vstack([base.features, candidate.features])
    scaler = FeatureScaler.fit(union)
    scaled = scaler.transform(base.features)
    cand = scaler.transform(candidate.features)[0]
    diffs = scaled - cand
    dist2 = np.einsum("ij,ij->i", diffs, diffs)
    order = np.lexsort((np.arange(len(base)), dist2))
    neighbors = order[:k]
    same = int(np.sum(base.labels[neighbors] == candidate.label))
    return label_type(same, k)


def type_counts(typed: Mapping[int, TypedObservation]) -> dict[ObjectType, int]:
    """Tally of typed observations per category (the four counts partition the input)."""
    out = {t: 0 for t in ObjectType}
    for rec in typed.values():
        out[rec.type] += 1
    return out
