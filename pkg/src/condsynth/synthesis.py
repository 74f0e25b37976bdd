"""Class-conditional sample synthesis.

Generation picks real source rows of the requested class, extracts their
conditioning features z with the frozen classifier, draws fresh latents
nu ~ N(0, I), and runs the flow inverse. Holding z fixed while resampling
nu yields new samples with the same class character as the source row.
"""

from __future__ import annotations

import numpy as np

from .dataset import Dataset, discretize_onehot
from .errors import ContractError, DataError, ShapeError
from .flow import ConditionalFlow

SYNTHETIC_PROVENANCE = "synthetic"


def rebalance_counts(histogram) -> np.ndarray:
    """Per-class synthesis counts that top every class up to the largest:
    count_c = max(histogram) - histogram_c."""
    hist = np.asarray(histogram, dtype=np.int64)
    if hist.ndim != 1 or hist.size == 0:
        raise ContractError("histogram must be a non-empty 1-D sequence")
    if (hist < 0).any():
        raise ContractError("histogram counts must be non-negative")
    return hist.max() - hist


def train_flow(flow: ConditionalFlow, train: Dataset, classifier) -> ConditionalFlow:
    """Fit the flow on a dataset, conditioning on frozen-classifier features.

    Features come from the clean encoded rows; dequantization noise is
    applied inside the flow's fit, per batch, to the one-hot blocks only.
    """
    if not getattr(classifier, "frozen_", False):
        raise ContractError("classifier must be frozen before flow training")
    if classifier.n_features_in_ != train.width:
        raise ShapeError(f"classifier expects width {classifier.n_features_in_}, "
                         f"dataset has width {train.width}")
    z = classifier.transform(train.X)
    return flow.fit(train.X, z, schema=train.schema)


def _normalize_counts(per_class_counts, n_classes: int) -> np.ndarray:
    counts = np.zeros(n_classes, dtype=np.int64)
    if isinstance(per_class_counts, dict):
        for c, v in per_class_counts.items():
            c = int(c)
            if not 0 <= c < n_classes:
                raise ContractError(f"class index {c} out of range [0, {n_classes})")
            counts[c] = int(v)
    else:
        arr = np.asarray(per_class_counts, dtype=np.int64)
        if arr.shape != (n_classes,):
            raise ShapeError(f"expected {n_classes} per-class counts, got shape {arr.shape}")
        counts[:] = arr
    if (counts < 0).any():
        raise ContractError("per-class counts must be non-negative")
    return counts


def generate(flow: ConditionalFlow, classifier, source: Dataset, per_class_counts,
             random_state, latents=None) -> Dataset:
    """Synthesize per_class_counts[c] samples of each class c.

    Source rows of class c are used round-robin as conditioning anchors.
    ``latents`` (total x width) overrides the fresh N(0, I) draws; passing
    the forward-mapped latents of the source rows reproduces them exactly.
    The output carries the source schema and normalization stats, and its
    one-hot blocks are re-discretized by argmax.
    """
    if not getattr(classifier, "frozen_", False):
        raise ContractError("classifier must be frozen before generation")
    schema = source.schema
    counts = _normalize_counts(per_class_counts, schema.n_classes)
    if flow.dim_x_ != source.width:
        raise ShapeError(f"flow width {flow.dim_x_} does not match data width {source.width}")

    total = int(counts.sum())
    if latents is not None:
        latents = np.asarray(latents, dtype=np.float64)
        if latents.shape != (total, source.width):
            raise ShapeError(f"expected latents of shape {(total, source.width)}, "
                             f"got {latents.shape}")
    rng = np.random.default_rng(random_state)

    xs, ys = [], []
    offset = 0
    for c in range(schema.n_classes):
        if counts[c] == 0:
            continue
        rows = np.flatnonzero(source.y == c)
        if rows.size == 0:
            raise DataError(f"no source samples of class {schema.classes[c]!r} "
                            "to condition on")
        picked = rows[np.arange(counts[c]) % rows.size]
        z = classifier.transform(source.X[picked])
        if latents is None:
            nu = rng.standard_normal((counts[c], source.width))
        else:
            nu = latents[offset:offset + counts[c]]
        xs.append(flow.inverse(nu, z))
        ys.append(np.full(counts[c], c, dtype=np.int64))
        offset += counts[c]

    if xs:
        X = discretize_onehot(np.vstack(xs), schema)
        y = np.concatenate(ys)
    else:
        X = np.zeros((0, source.width))
        y = np.zeros(0, dtype=np.int64)
    return Dataset(X, y, schema, norm_stats=source.norm_stats,
                   provenance=SYNTHETIC_PROVENANCE)
