"""Train-on-synthetic, test-on-real comparison.

Two classifiers with identical architecture, hyperparameters and seed are
trained, one on real rows and one on synthetic rows, then both are scored
on the same real hold-out. The training-data source is the only varying
factor, so paired metric gaps measure synthetic-data quality directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .classifier import PreferenceClassifier
from .dataset import Dataset, class_histogram
from .errors import ContractError
from .metrics import accuracy, auc_macro_ovr, cohens_kappa, confusion

METRIC_NAMES = ("kappa", "accuracy", "auc")


@dataclass
class EvalReport:
    """Paired metric values plus enough metadata to rerun the comparison."""

    metrics: dict  # name -> (real-trained value, synthetic-trained value)
    seed: int
    sizes: dict  # dataset name -> row count
    class_counts: dict  # dataset name -> per-class counts
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in METRIC_NAMES:
            if name not in self.metrics:
                raise ContractError(f"report is missing metric {name!r}")
        lo = {"kappa": -1.0, "accuracy": 0.0, "auc": 0.0}
        for name, pair in self.metrics.items():
            for v in pair:
                if not lo[name] <= v <= 1.0:
                    raise ContractError(f"{name}={v} outside its valid range")

    def gap(self, name: str) -> float:
        real, synth = self.metrics[name]
        return abs(real - synth)


def _split_tag(provenance):
    # provenance tags look like "split:<digest>:train" / "split:<digest>:test"
    if isinstance(provenance, str) and provenance.startswith("split:"):
        parts = provenance.split(":")
        if len(parts) == 3:
            return parts[1], parts[2]
    return None


def _check_disjoint(real_train: Dataset, holdout: Dataset) -> None:
    train_tag = _split_tag(real_train.provenance)
    test_tag = _split_tag(holdout.provenance)
    if train_tag is None or test_tag is None:
        return  # untagged data is the caller's responsibility
    if train_tag[0] != test_tag[0]:
        raise ContractError(f"training and hold-out rows come from different splits "
                            f"({train_tag[0]} vs {test_tag[0]})")
    if train_tag[1] == test_tag[1]:
        raise ContractError("training and hold-out rows come from the same split side; "
                            "they must be disjoint")


def run_tstr(real_train: Dataset, synth_train: Dataset, holdout: Dataset,
             classifier_params: dict | None = None, seed: int = 0) -> EvalReport:
    """Train twin classifiers on real and synthetic rows, score both on the
    hold-out, and return the paired metrics."""
    classifier_params = dict(classifier_params or {})
    for ds_name, ds in (("synthetic", synth_train), ("holdout", holdout)):
        if ds.schema != real_train.schema:
            raise ContractError(f"{ds_name} dataset schema differs from the real "
                                "training schema")
    _check_disjoint(real_train, holdout)

    k = real_train.schema.n_classes
    classifier_params.setdefault("n_classes", k)
    classifier_params["random_state"] = seed

    pairs = {}
    probs_by_side = {}
    for side, train in (("real", real_train), ("synth", synth_train)):
        clf = PreferenceClassifier(**classifier_params)
        clf.fit(train.X, train.y)
        probs = clf.predict_proba(holdout.X)
        probs_by_side[side] = probs
        cm = confusion(probs.argmax(axis=1), holdout.y, k)
        pairs[side] = {"kappa": cohens_kappa(cm), "accuracy": accuracy(cm),
                       "auc": auc_macro_ovr(probs, holdout.y)}

    metrics = {name: (pairs["real"][name], pairs["synth"][name])
               for name in METRIC_NAMES}
    sizes = {"real_train": real_train.n, "synth_train": synth_train.n,
             "holdout": holdout.n}
    counts = {name: class_histogram(ds).tolist() for name, ds in
              (("real_train", real_train), ("synth_train", synth_train),
               ("holdout", holdout))}
    return EvalReport(metrics=metrics, seed=seed, sizes=sizes, class_counts=counts)


def format_report(report: EvalReport) -> str:
    """Human-readable paired table: kappa and accuracy as percentages with
    two decimals, AUC as a plain two-decimal number."""
    lines = ["metric          real-trained  synthetic-trained"]
    shown = {"kappa": "Cohen's kappa", "accuracy": "Accuracy", "auc": "AUC"}
    for name in METRIC_NAMES:
        real, synth = report.metrics[name]
        if name == "auc":
            pair = f"{real:13.2f}  {synth:17.2f}"
        else:
            pair = f"{100 * real:12.2f}%  {100 * synth:16.2f}%"
        lines.append(f"{shown[name]:<15s}{pair}")
    lines.append("")
    lines.append(f"seed: {report.seed}")
    for name in ("real_train", "synth_train", "holdout"):
        lines.append(f"{name}: {report.sizes[name]} rows, "
                     f"class counts {report.class_counts[name]}")
    return "\n".join(lines) + "\n"


def machine_lines(report: EvalReport) -> str:
    """One metric per line: name, real value, synthetic value."""
    out = [f"{name} {report.metrics[name][0]!r} {report.metrics[name][1]!r}"
           for name in METRIC_NAMES]
    return "\n".join(out) + "\n"
