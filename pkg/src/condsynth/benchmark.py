"""Synthetic imbalanced benchmark corpus: Gaussian class clusters at desk scale.

Stands in for real sensor recordings: k overlapping Gaussian clusters with a
skewed prior (default 65/17.5/17.5), far enough apart to be learnable but
close enough that classifiers stay in a realistic accuracy regime.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import RawTable, _round_half_up
from .errors import ContractError
from .schema import Feature, NUMERIC, Schema

__all__ = ["BenchmarkSpec", "make_benchmark", "benchmark_schema"]

DEFAULT_CLASSES = ("NoChange", "Warmer", "Cooler")
DEFAULT_PRIORS = (0.65, 0.175, 0.175)


def _default_means(k: int, d: int, distance: float) -> np.ndarray:
    # scaled identity corners: |e_i - e_j| = sqrt(2), so pairwise distance is exact
    if k > d:
        raise ContractError(f"default mean placement needs d >= k ({d} < {k})")
    means = np.zeros((k, d))
    for c in range(k):
        means[c, c] = distance / np.sqrt(2.0)
    return means


@dataclass(frozen=True)
class BenchmarkSpec:
    """Parameters of the generated corpus; a pure function input (seeded)."""

    n: int = 5000
    d: int = 16
    priors: tuple[float, ...] = DEFAULT_PRIORS
    sigma: float = 1.0
    mean_distance: float = 2.0    # pairwise distance between class means, in sigmas
    seed: int = 42
    classes: tuple[str, ...] = DEFAULT_CLASSES
    means: tuple[tuple[float, ...], ...] | None = None  # None -> simplex-corner default

    def __post_init__(self):
        k = len(self.priors)
        if k != len(self.classes):
            raise ContractError(f"{k} priors for {len(self.classes)} classes")
        if abs(sum(self.priors) - 1.0) > 1e-12:
            raise ContractError(f"priors must sum to 1, got {sum(self.priors)!r}")
        if any(p < 0 for p in self.priors):
            raise ContractError("priors must be non-negative")
        if self.n < 10 * k:
            raise ContractError(f"n must be >= 10*k = {10 * k}, got {self.n}")
        if self.d < 2:
            raise ContractError(f"d must be >= 2, got {self.d}")
        if self.sigma <= 0:
            raise ContractError("sigma must be positive")
        if self.means is not None:
            arr = np.asarray(self.means, dtype=float)
            if arr.shape != (k, self.d):
                raise ContractError(f"means must have shape ({k}, {self.d}), got {arr.shape}")

    def mean_matrix(self) -> np.ndarray:
        if self.means is not None:
            return np.asarray(self.means, dtype=float)
        return _default_means(len(self.priors), self.d, self.mean_distance * self.sigma)

    def class_counts(self) -> np.ndarray:
        counts = np.array([_round_half_up(self.n * p) for p in self.priors], dtype=np.int64)
        counts[0] += self.n - counts.sum()   # rounding remainder goes to class 0
        return counts


def benchmark_schema(spec: BenchmarkSpec) -> Schema:
    features = tuple(Feature(f"f{i:02d}", NUMERIC) for i in range(spec.d))
    return Schema(features, "preference", tuple(spec.classes))


def make_benchmark(spec: BenchmarkSpec) -> RawTable:
    """Draw the corpus: class c gets count rows from N(mean_c, sigma^2 I)."""
    schema = benchmark_schema(spec)
    counts = spec.class_counts()
    means = spec.mean_matrix()
    rng = np.random.default_rng(spec.seed)

    feats = np.empty((spec.n, spec.d))
    labels = np.empty(spec.n, dtype=np.int64)
    row = 0
    for c, count in enumerate(counts):
        feats[row:row + count] = means[c] + spec.sigma * rng.standard_normal((count, spec.d))
        labels[row:row + count] = c
        row += count
    order = rng.permutation(spec.n)
    feats, labels = feats[order], labels[order]

    columns: dict[str, list] = {f.name: [float(v) for v in feats[:, j]]
                                for j, f in enumerate(schema.features)}
    columns[schema.label] = [schema.classes[c] for c in labels]
    return RawTable(schema, columns)
