"""Tabular data ingestion, encoding, splitting and class bookkeeping.

The raw side of the boundary is :class:`RawTable` (parsed CSV cells in
original units); the numeric side is :class:`Dataset` (standardized feature
matrix plus integer labels). :class:`TabularEncoder` maps between them with
sklearn fit/transform semantics: statistics are fitted once (on a training
split) and reused everywhere else.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .errors import ContractError, DataError, DomainError, ShapeError
from .schema import CATEGORICAL, NUMERIC, Schema

__all__ = [
    "RawTable", "Dataset", "TabularEncoder", "load_csv", "write_csv",
    "split_stratified", "class_histogram", "dequantize_onehot", "discretize_onehot",
]

# dequantization noise level for one-hot blocks at flow-training time
DEQUANT_NOISE = 0.05


@dataclass
class RawTable:
    """Parsed, validated rows in original units; column-major storage."""

    schema: Schema
    columns: dict[str, list]   # feature name -> list[float] | list[str]; label -> list[str]

    def __post_init__(self):
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) > 1:
            raise DataError(f"ragged columns: lengths {sorted(lengths)}")

    @property
    def n_rows(self) -> int:
        return len(self.columns[self.schema.label])

    def labels_as_ints(self) -> np.ndarray:
        idx = {c: i for i, c in enumerate(self.schema.classes)}
        return np.array([idx[v] for v in self.columns[self.schema.label]], dtype=np.int64)

    def take(self, indices) -> "RawTable":
        indices = np.asarray(indices, dtype=np.intp)
        cols = {name: [vals[i] for i in indices] for name, vals in self.columns.items()}
        return RawTable(self.schema, cols)


@dataclass
class Dataset:
    """Encoded feature matrix with integer labels and the fitted statistics.

    ``X`` holds standardized numerics and one-hot categoricals; ``norm_stats``
    maps each numeric column name to its fitted (mean, stddev) so values can
    be mapped back to original units. ``provenance`` tags where the rows came
    from (which split of which split family, or synthetic generation) so the
    evaluation protocol can refuse leaky inputs.
    """

    X: np.ndarray
    y: np.ndarray
    schema: Schema
    norm_stats: dict[str, tuple[float, float]] = field(default_factory=dict)
    provenance: str | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2:
            raise ShapeError(f"X must be 2-D, got ndim={self.X.ndim}")
        if self.y.shape != (self.X.shape[0],):
            raise ShapeError(f"y shape {self.y.shape} does not match X rows {self.X.shape[0]}")
        if self.X.shape[1] != self.schema.encoded_width:
            raise ShapeError(
                f"X has {self.X.shape[1]} columns, schema encodes {self.schema.encoded_width}")
        if not np.isfinite(self.X).all():
            raise DomainError("dataset contains non-finite feature values")
        if self.y.size and (self.y.min() < 0 or self.y.max() >= self.schema.n_classes):
            raise DataError(f"labels must lie in [0, {self.schema.n_classes})")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def width(self) -> int:
        return self.X.shape[1]

    def take(self, indices, provenance: str | None = None) -> "Dataset":
        indices = np.asarray(indices, dtype=np.intp)
        return replace(self, X=self.X[indices].copy(), y=self.y[indices].copy(),
                       provenance=provenance if provenance is not None else self.provenance)


# ---------------------------------------------------------------------------
# CSV ingestion / emission
# ---------------------------------------------------------------------------

def load_csv(path, schema: Schema) -> RawTable:
    """Parse and validate a CSV file against a schema.

    The header must contain exactly the schema's columns (any order). Cells
    are parsed per column kind; any unparseable or unknown value raises
    :class:`DataError` naming the 1-based data row and the column.
    """
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"cannot read CSV file {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, expected a header row") from None
        expected = [f.name for f in schema.features] + [schema.label]
        if sorted(header) != sorted(expected):
            missing = sorted(set(expected) - set(header))
            extra = sorted(set(header) - set(expected))
            raise DataError(f"{path}: header mismatch (missing {missing}, unexpected {extra})")

        col_of = {name: header.index(name) for name in expected}
        columns: dict[str, list] = {name: [] for name in expected}
        kind_of = {f.name: f for f in schema.features}
        classes = set(schema.classes)

        for row_no, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise DataError(f"row {row_no}: expected {len(header)} cells, got {len(row)}")
            for name in expected:
                cell = row[col_of[name]]
                if cell == "":
                    raise DataError(f"row {row_no}, column {name!r}: missing value")
                if name == schema.label:
                    if cell not in classes:
                        raise DataError(f"row {row_no}, column {name!r}: unknown label {cell!r}")
                    columns[name].append(cell)
                    continue
                feat = kind_of[name]
                if feat.kind == NUMERIC:
                    try:
                        value = float(cell)
                    except ValueError:
                        raise DataError(
                            f"row {row_no}, column {name!r}: cannot parse {cell!r} as a number"
                        ) from None
                    if not np.isfinite(value):
                        raise DataError(f"row {row_no}, column {name!r}: non-finite value {cell!r}")
                    columns[name].append(value)
                else:
                    if cell not in feat.levels:
                        raise DataError(f"row {row_no}, column {name!r}: unknown level {cell!r}")
                    columns[name].append(cell)
    return RawTable(schema, columns)


def write_csv(path, table: RawTable) -> None:
    """Write a raw table back to CSV (schema column order, label last)."""
    names = [f.name for f in table.schema.features] + [table.schema.label]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        cols = [table.columns[n] for n in names]
        for i in range(table.n_rows):
            writer.writerow([repr(c[i]) if isinstance(c[i], float) else c[i] for c in cols])


# ---------------------------------------------------------------------------
# Encoding
# ---------------------------------------------------------------------------

class TabularEncoder(BaseEstimator, TransformerMixin):
    """Standardize numerics and one-hot categoricals per a fixed schema.

    Parameters
    ----------
    schema : Schema
        Column layout; fixes encoded width and label ids.

    Attributes
    ----------
    stats_ : dict[str, tuple[float, float]]
        Per-numeric-column (mean, stddev) fitted by :meth:`fit`.
    """

    def __init__(self, schema: Schema):
        self.schema = schema

    def fit(self, table: RawTable, y=None) -> "TabularEncoder":
        """Fit standardization statistics; the table should be a training split."""
        self._check_table(table)
        stats: dict[str, tuple[float, float]] = {}
        for feat in self.schema.features:
            if feat.kind != NUMERIC:
                continue
            values = np.asarray(table.columns[feat.name], dtype=np.float64)
            mean = float(values.mean()) if values.size else 0.0
            std = float(values.std()) if values.size else 1.0
            if values.size and std == 0.0:
                raise DataError(f"column {feat.name!r} has zero variance; cannot standardize")
            stats[feat.name] = (mean, std if values.size else 1.0)
        self.stats_ = stats
        return self

    @classmethod
    def from_stats(cls, schema: Schema, stats: dict[str, tuple[float, float]]) -> "TabularEncoder":
        """Rebuild an encoder from previously fitted statistics."""
        enc = cls(schema)
        expected = {f.name for f in schema.features if f.kind == NUMERIC}
        if set(stats) != expected:
            raise DataError(f"stats columns {sorted(stats)} do not match schema numerics {sorted(expected)}")
        for name, (mean, std) in stats.items():
            if std <= 0.0:
                raise DataError(f"column {name!r}: stddev must be positive, got {std}")
        enc.stats_ = dict(stats)
        return enc

    def transform(self, table: RawTable, provenance: str | None = None) -> Dataset:
        """Encode a raw table with the fitted statistics."""
        self._require_fitted()
        self._check_table(table)
        n = table.n_rows
        X = np.zeros((n, self.schema.encoded_width))
        for feat, start, stop in self.schema.encoded_blocks():
            if feat.kind == NUMERIC:
                mean, std = self.stats_[feat.name]
                X[:, start] = (np.asarray(table.columns[feat.name], dtype=np.float64) - mean) / std
            else:
                level_of = {lv: i for i, lv in enumerate(feat.levels)}
                for i, cell in enumerate(table.columns[feat.name]):
                    X[i, start + level_of[cell]] = 1.0
        return Dataset(X, table.labels_as_ints(), self.schema, dict(self.stats_), provenance)

    def inverse_transform(self, ds: Dataset) -> RawTable:
        """Map an encoded dataset back to original units and names."""
        self._require_fitted()
        if ds.schema != self.schema:
            raise ContractError("dataset schema does not match encoder schema")
        columns: dict[str, list] = {}
        for feat, start, stop in self.schema.encoded_blocks():
            if feat.kind == NUMERIC:
                mean, std = self.stats_[feat.name]
                columns[feat.name] = [float(v) for v in ds.X[:, start] * std + mean]
            else:
                picks = np.argmax(ds.X[:, start:stop], axis=1)
                columns[feat.name] = [feat.levels[p] for p in picks]
        columns[self.schema.label] = [self.schema.classes[c] for c in ds.y]
        return RawTable(self.schema, columns)

    def _require_fitted(self):
        if not hasattr(self, "stats_"):
            raise NotFittedError("TabularEncoder is not fitted; call fit() or from_stats() first")

    def _check_table(self, table: RawTable):
        if table.schema != self.schema:
            raise ContractError("table schema does not match encoder schema")


# ---------------------------------------------------------------------------
# Splitting and class bookkeeping
# ---------------------------------------------------------------------------

def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def split_digest(seed: int, test_frac: float, n: int, schema: Schema) -> str:
    """Short stable identifier for one split decision; rows carrying the same
    digest but different sides are guaranteed disjoint."""
    key = f"{seed}|{test_frac!r}|{n}|{schema.digest()}"
    return hashlib.sha256(key.encode()).hexdigest()[:12]


def split_stratified(data: Union[Dataset, RawTable], test_frac: float, seed: int):
    """Deterministic per-class split: test takes round(class_count * test_frac).

    Accepts an encoded :class:`Dataset` (outputs share schema and norm_stats
    and get tagged with split provenance) or a :class:`RawTable` (so encoding
    statistics can be fitted on the training part afterwards).
    """
    if not (0.0 < test_frac < 0.5):
        raise ContractError(f"test_frac must lie in (0, 0.5), got {test_frac}")

    if isinstance(data, Dataset):
        y, schema, n = data.y, data.schema, data.n
    else:
        y, schema, n = data.labels_as_ints(), data.schema, data.n_rows

    counts = np.bincount(y, minlength=schema.n_classes)
    for c, cnt in enumerate(counts):
        if cnt < 2:
            raise DataError(f"class {schema.classes[c]!r} has {cnt} samples; need at least 2 to split")

    rng = np.random.default_rng(seed)
    test_idx: list[np.ndarray] = []
    train_idx: list[np.ndarray] = []
    for c in range(schema.n_classes):
        members = np.flatnonzero(y == c)
        shuffled = members[rng.permutation(members.size)]
        n_test = _round_half_up(counts[c] * test_frac)
        test_idx.append(shuffled[:n_test])
        train_idx.append(shuffled[n_test:])
    test_indices = np.sort(np.concatenate(test_idx))
    train_indices = np.sort(np.concatenate(train_idx))

    if isinstance(data, Dataset):
        digest = split_digest(seed, test_frac, n, schema)
        return (data.take(train_indices, provenance=f"split:{digest}:train"),
                data.take(test_indices, provenance=f"split:{digest}:test"))
    return data.take(train_indices), data.take(test_indices)


def class_histogram(data: Union[Dataset, RawTable]) -> np.ndarray:
    """Per-class sample counts, in schema class order."""
    if isinstance(data, Dataset):
        return np.bincount(data.y, minlength=data.schema.n_classes)
    return np.bincount(data.labels_as_ints(), minlength=data.schema.n_classes)


# ---------------------------------------------------------------------------
# One-hot helpers for the flow (continuous-density requirement)
# ---------------------------------------------------------------------------

def dequantize_onehot(X: np.ndarray, schema: Schema, rng: np.random.Generator) -> np.ndarray:
    """Add uniform [0, 0.05) noise to one-hot columns (flow training only)."""
    blocks = schema.onehot_blocks()
    if not blocks:
        return X
    out = X.copy()
    for start, stop in blocks:
        out[:, start:stop] += rng.uniform(0.0, DEQUANT_NOISE, size=(X.shape[0], stop - start))
    return out


def discretize_onehot(X: np.ndarray, schema: Schema) -> np.ndarray:
    """Snap each one-hot block back to exact one-hot by argmax."""
    blocks = schema.onehot_blocks()
    if not blocks:
        return X
    out = X.copy()
    for start, stop in blocks:
        picks = np.argmax(out[:, start:stop], axis=1)
        out[:, start:stop] = 0.0
        out[np.arange(X.shape[0]), start + picks] = 1.0
    return out
