"""Dataset container, CSV ingestion, class statistics, and stratified splitting."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

PROVENANCE_BASE = "base"
PROVENANCE_EXTERNAL = "external"
PROVENANCE_SYNTHETIC = "synthetic"

_PROVENANCE_VALUES = frozenset(
    (PROVENANCE_BASE, PROVENANCE_EXTERNAL, PROVENANCE_SYNTHETIC)
)

DEFAULT_MINORITY_THRESHOLD = 0.2


class DatasetFormatError(ValueError):
    """A dataset file could not be parsed.

    ``row`` is the zero-based data-row index (header excluded) and ``column``
    the offending column name, when known.
    """

    def __init__(self, message: str, *, row: int | None = None, column: str | None = None):
        context = []
        if row is not None:
            context.append(f"data row {row}")
        if column is not None:
            context.append(f"column {column!r}")
        if context:
            message = f"{message} ({', '.join(context)})"
        super().__init__(message)
        self.row = row
        self.column = column


@dataclass(frozen=True)
class DatasetSchema:
    """Column schema for CSV ingestion.

    ``label_column`` names the class column (default: last column of the
    file). ``positive_class`` is accepted for binary tasks and carried along
    unused by the loader itself.
    """

    label_column: str | None = None
    positive_class: str | None = None

    @classmethod
    def from_json(cls, path: str | Path) -> "DatasetSchema":
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise DatasetFormatError(f"schema file {path} must contain a JSON object")
        known = {"label_column", "positive_class"}
        unknown = set(raw) - known
        if unknown:
            raise DatasetFormatError(f"unknown schema keys {sorted(unknown)} in {path}")
        return cls(**raw)


@dataclass(frozen=True)
class Observation:
    """A single labeled feature vector."""

    features: np.ndarray
    label: str
    provenance: str = PROVENANCE_BASE

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64).reshape(-1)
        if feats.size == 0:
            raise ValueError("observation needs at least one feature")
        if not np.all(np.isfinite(feats)):
            raise ValueError("observation features must be finite")
        if self.provenance not in _PROVENANCE_VALUES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        feats.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "label", str(self.label))


class Dataset:
    """Immutable table of labeled observations with per-row provenance.

    Parameters
    ----------
    features : array-like, shape (n_observations, dimension)
        Finite real feature values.
    labels : sequence of str
        Class label per observation.
    provenance : sequence of str, optional
        Origin tag per observation, one of ``base`` / ``external`` /
        ``synthetic``. Defaults to all-``base``. Tags survive every
        enrichment and resampling operation so the evaluation harness can
        keep non-base rows out of test and validation splits.
    feature_names : sequence of str, optional
        Column names, default ``f1..fd``.
    label_column : str
        Name used for the label column on serialization.
    """

    __slots__ = ("features", "labels", "provenance", "feature_names", "label_column")

    def __init__(
        self,
        features,
        labels,
        provenance=None,
        feature_names: Sequence[str] | None = None,
        label_column: str = "class",
    ):
        feats = np.array(features, dtype=np.float64, ndmin=2)
        if feats.ndim != 2:
            raise ValueError("features must be a 2-D table")
        n, d = feats.shape
        if n < 1:
            raise ValueError("dataset needs at least one observation")
        if d < 1:
            raise ValueError("dataset needs at least one feature")
        if not np.all(np.isfinite(feats)):
            bad = np.argwhere(~np.isfinite(feats))[0]
            raise ValueError(
                f"non-finite feature value at data row {bad[0]}, feature index {bad[1]}"
            )
        labs = np.array([str(x) for x in labels], dtype=str)
        if labs.shape != (n,):
            raise ValueError(f"expected {n} labels, got {labs.shape}")
        if provenance is None:
            prov = np.full(n, PROVENANCE_BASE, dtype="U9")
        else:
            prov = np.array([str(x) for x in provenance], dtype="U9")
            if prov.shape != (n,):
                raise ValueError(f"expected {n} provenance tags, got {prov.shape}")
            bad_tags = set(prov.tolist()) - _PROVENANCE_VALUES
            if bad_tags:
                raise ValueError(f"unknown provenance tags {sorted(bad_tags)}")
        if feature_names is None:
            names = tuple(f"f{i + 1}" for i in range(d))
        else:
            names = tuple(str(x) for x in feature_names)
            if len(names) != d:
                raise ValueError(f"expected {d} feature names, got {len(names)}")
        feats.setflags(write=False)
        labs.setflags(write=False)
        prov.setflags(write=False)
        self.features = feats
        self.labels = labs
        self.provenance = prov
        self.feature_names = names
        self.label_column = str(label_column)

    @property
    def dimension(self) -> int:
        return self.features.shape[1]

    @property
    def class_labels(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.labels.tolist())))

    def __len__(self) -> int:
        return self.features.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.features.shape == other.features.shape
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.provenance, other.provenance)
        )

    def __hash__(self):
        return hash((self.features.shape, self.features.tobytes(), tuple(self.labels)))

    def __repr__(self) -> str:
        return (
            f"Dataset(n={len(self)}, dimension={self.dimension}, "
            f"classes={list(self.class_labels)})"
        )

    def counts(self) -> dict[str, int]:
        """Per-class observation counts."""
        labels, counts = np.unique(self.labels, return_counts=True)
        return {str(c): int(n) for c, n in zip(labels, counts)}

    def indices_of_class(self, label: str) -> np.ndarray:
        """Row indices carrying ``label``, in table order."""
        return np.flatnonzero(self.labels == label)

    def observation(self, index: int) -> Observation:
        return Observation(
            self.features[index], str(self.labels[index]), str(self.provenance[index])
        )

    def subset(self, indices) -> "Dataset":
        """New dataset restricted to ``indices`` (order preserved)."""
        idx = np.asarray(indices, dtype=np.intp)
        if idx.size == 0:
            raise ValueError("subset must keep at least one observation")
        return Dataset(
            self.features[idx],
            self.labels[idx],
            self.provenance[idx],
            feature_names=self.feature_names,
            label_column=self.label_column,
        )

    def with_rows(self, features, labels, provenance) -> "Dataset":
        """New dataset with extra rows appended after the existing ones."""
        extra = np.asarray(features, dtype=np.float64).reshape(-1, self.dimension)
        if extra.shape[0] == 0:
            return self
        labs = list(self.labels) + [str(x) for x in labels]
        prov = list(self.provenance) + [str(x) for x in provenance]
        return Dataset(
            np.vstack([self.features, extra]),
            labs,
            prov,
            feature_names=self.feature_names,
            label_column=self.label_column,
        )

    def with_observations(self, observations: Iterable[Observation]) -> "Dataset":
        obs = list(observations)
        if not obs:
            return self
        return self.with_rows(
            np.vstack([o.features for o in obs]),
            [o.label for o in obs],
            [o.provenance for o in obs],
        )

    def concat(self, other: "Dataset") -> "Dataset":
        if other.dimension != self.dimension:
            raise ValueError(
                f"dimension mismatch: {self.dimension} vs {other.dimension}"
            )
        return self.with_rows(other.features, other.labels, other.provenance)

    def retagged(self, provenance: str) -> "Dataset":
        """Copy with every row's provenance replaced."""
        if provenance not in _PROVENANCE_VALUES:
            raise ValueError(f"unknown provenance {provenance!r}")
        return Dataset(
            self.features,
            self.labels,
            np.full(len(self), provenance, dtype="U9"),
            feature_names=self.feature_names,
            label_column=self.label_column,
        )


@dataclass(frozen=True)
class ClassDistribution:
    """Per-class counts plus each class's size ratio to the dominant class.

    ``ratio`` maps every class to ``count / dominant_count`` (in (0, 1]);
    ``inverse_ratio`` maps to ``dominant_count / count``, which is the
    direction customarily quoted in imbalance reports. Dominant-count ties
    break toward the lexicographically smaller label.
    """

    counts: dict[str, int]
    dominant: str
    ratio: dict[str, float]
    inverse_ratio: dict[str, float]

    @property
    def total(self) -> int:
        return sum(self.counts.values())


def class_distribution(d: Dataset) -> ClassDistribution:
    """Exact class counts and both imbalance-ratio directions for ``d``."""
    counts = d.counts()
    dominant = min(counts, key=lambda c: (-counts[c], c))
    dom_count = counts[dominant]
    ratio = {c: n / dom_count for c, n in counts.items()}
    inverse = {c: dom_count / n for c, n in counts.items()}
    return ClassDistribution(counts=counts, dominant=dominant, ratio=ratio, inverse_ratio=inverse)


def minority_classes(
    dist: ClassDistribution, threshold: float = DEFAULT_MINORITY_THRESHOLD
) -> set[str]:
    """Non-dominant classes whose size ratio to the dominant falls below ``threshold``."""
    if not (0.0 < threshold <= 1.0):
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    return {
        c
        for c, r in dist.ratio.items()
        if c != dist.dominant and r < threshold
    }


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def stratified_split(d: Dataset, fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Split ``d`` into two class-stratified parts.

    Part A receives ``round(fraction * count)`` members of each class
    (half-up rounding), clamped so that every class with at least two
    members keeps at least one member in each part. Deterministic for a
    given seed; raises if either part ends up empty.
    """
    if not (0.0 < fraction < 1.0):
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    rng = np.random.default_rng(seed)
    part_a: list[np.ndarray] = []
    part_b: list[np.ndarray] = []
    for label in sorted(set(d.labels.tolist())):
        idx = d.indices_of_class(label)
        n = idx.size
        n_a = _round_half_up(fraction * n)
        if n >= 2:
            n_a = min(max(n_a, 1), n - 1)
        shuffled = rng.permutation(idx)
        part_a.append(np.sort(shuffled[:n_a]))
        part_b.append(np.sort(shuffled[n_a:]))
    idx_a = np.sort(np.concatenate(part_a)) if part_a else np.array([], dtype=np.intp)
    idx_b = np.sort(np.concatenate(part_b)) if part_b else np.array([], dtype=np.intp)
    if idx_a.size == 0 or idx_b.size == 0:
        raise ValueError(f"fraction {fraction} yields an empty part for {d!r}")
    return d.subset(idx_a), d.subset(idx_b)


def _resolve_schema(path: Path, schema) -> DatasetSchema:
    if schema is None:
        sidecar = Path(str(path) + ".schema.json")
        if sidecar.exists():
            return DatasetSchema.from_json(sidecar)
        return DatasetSchema()
    if isinstance(schema, DatasetSchema):
        return schema
    if isinstance(schema, (str, Path)):
        return DatasetSchema.from_json(schema)
    raise TypeError(f"schema must be DatasetSchema, path, or None, got {type(schema)}")


def load_dataset(path: str | Path, schema: DatasetSchema | str | Path | None = None) -> Dataset:
    """Load a dataset from a UTF-8, comma-separated, headered CSV file.

    Every column except the label column must be numeric and finite. The
    label column is taken from ``schema`` (an explicit
    :class:`DatasetSchema`, a path to a JSON schema file, or ``None`` to
    pick up an optional ``<file>.schema.json`` sidecar); without any schema
    the last column is the label. Row order is preserved and all rows are
    tagged with base provenance.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset file not found: {path}")
    resolved = _resolve_schema(path, schema)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetFormatError(f"empty dataset file: {path}") from None
        header = [h.strip() for h in header]
        label_column = resolved.label_column if resolved.label_column is not None else header[-1]
        if label_column not in header:
            raise DatasetFormatError(
                f"unknown label column {label_column!r}; file has {header}", column=label_column
            )
        label_pos = header.index(label_column)
        feature_names = [h for i, h in enumerate(header) if i != label_pos]
        if not feature_names:
            raise DatasetFormatError(f"{path} has no feature columns", column=label_column)
        rows: list[list[float]] = []
        labels: list[str] = []
        for row_idx, row in enumerate(reader):
            if len(row) != len(header):
                raise DatasetFormatError(
                    f"expected {len(header)} cells, found {len(row)}", row=row_idx
                )
            feats = []
            for col_idx, cell in enumerate(row):
                if col_idx == label_pos:
                    continue
                name = header[col_idx]
                try:
                    value = float(cell)
                except ValueError:
                    raise DatasetFormatError(
                        f"non-numeric feature value {cell!r}", row=row_idx, column=name
                    ) from None
                if not math.isfinite(value):
                    raise DatasetFormatError(
                        f"non-finite feature value {cell!r}", row=row_idx, column=name
                    )
                feats.append(value)
            label = row[label_pos].strip()
            if not label:
                raise DatasetFormatError("empty class label", row=row_idx, column=label_column)
            rows.append(feats)
            labels.append(label)
    if not rows:
        raise DatasetFormatError(f"empty dataset file: {path}")
    return Dataset(rows, labels, feature_names=feature_names, label_column=label_column)


def write_dataset(d: Dataset, path: str | Path) -> None:
    """Write ``d`` back to CSV (features then label column; provenance is not serialized).

    Floats are written with shortest round-trip formatting so that
    ``load_dataset(write_dataset(d))`` reproduces ``d`` exactly.
    """
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(d.feature_names) + [d.label_column])
        for feats, label in zip(d.features, d.labels):
            writer.writerow([repr(float(v)) for v in feats] + [str(label)])


def counts_distribution(counts: Mapping[str, int]) -> ClassDistribution:
    """ClassDistribution straight from a counts table (no feature data needed)."""
    clean = {str(c): int(n) for c, n in counts.items()}
    if not clean or any(n <= 0 for n in clean.values()):
        raise ValueError("counts must be a nonempty map of positive integers")
    dominant = min(clean, key=lambda c: (-clean[c], c))
    dom = clean[dominant]
    return ClassDistribution(
        counts=clean,
        dominant=dominant,
        ratio={c: n / dom for c, n in clean.items()},
        inverse_ratio={c: dom / n for c, n in clean.items()},
    )
