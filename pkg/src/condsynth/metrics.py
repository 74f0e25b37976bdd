"""Classification metrics over confusion matrices and score columns.

All three metrics are computed from first principles so they stay
independent of any model code they are used to judge: accuracy and kappa
from an explicit confusion matrix, AUC from midrank statistics.
"""

from __future__ import annotations

import warnings

import numpy as np

from .errors import ContractError, DomainError, UndefinedMetricError


def confusion(pred, true, k: int) -> np.ndarray:
    """k x k counts; entry (i, j) = samples with true class i predicted as j."""
    pred = np.asarray(pred, dtype=np.int64).reshape(-1)
    true = np.asarray(true, dtype=np.int64).reshape(-1)
    if pred.shape[0] != true.shape[0]:
        raise ContractError(f"{pred.shape[0]} predictions but {true.shape[0]} labels")
    if k < 1:
        raise ContractError(f"k must be positive, got {k}")
    for name, arr in (("pred", pred), ("true", true)):
        if arr.size and (arr.min() < 0 or arr.max() >= k):
            raise DomainError(f"{name} labels must lie in [0, {k})")
    cm = np.zeros((k, k), dtype=np.int64)
    np.add.at(cm, (true, pred), 1)
    return cm


def accuracy(cm: np.ndarray) -> float:
    """Trace over total of a confusion matrix."""
    cm = _check_cm(cm)
    return float(np.trace(cm) / cm.sum())


def cohens_kappa(cm: np.ndarray) -> float:
    """Chance-corrected agreement (p_o - p_e) / (1 - p_e).

    p_e is the agreement expected from the row/column marginals alone.
    When p_e = 1 (all mass in a single cell) the correction is vacuous and
    the result is defined as 0.
    """
    cm = _check_cm(cm)
    total = cm.sum()
    p_o = np.trace(cm) / total
    p_e = float(cm.sum(axis=1) @ cm.sum(axis=0)) / (total * total)
    if p_e == 1.0:
        return 0.0
    return float((p_o - p_e) / (1.0 - p_e))


def _check_cm(cm) -> np.ndarray:
    cm = np.asarray(cm)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
        raise ContractError(f"confusion matrix must be square, got shape {cm.shape}")
    if (cm < 0).any():
        raise DomainError("confusion matrix entries must be non-negative")
    if cm.sum() == 0:
        raise UndefinedMetricError("confusion matrix is empty")
    return cm


def _midranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their group's average rank."""
    order = np.argsort(x, kind="mergesort")
    sx = x[order]
    ranks = np.empty(x.shape[0])
    i = 0
    while i < len(sx):
        j = i
        while j + 1 < len(sx) and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def auc_binary(scores: np.ndarray, positive: np.ndarray) -> float:
    """Ranking AUC of scores for a boolean positive mask, by the
    Mann-Whitney statistic with midrank tie handling."""
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    positive = np.asarray(positive, dtype=bool).reshape(-1)
    if scores.shape[0] != positive.shape[0]:
        raise ContractError(f"{scores.shape[0]} scores but {positive.shape[0]} flags")
    n_pos = int(positive.sum())
    n_neg = int((~positive).sum())
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("binary AUC needs both positives and negatives")
    ranks = _midranks(scores)
    u = ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def auc_macro_ovr(probs, true) -> float:
    """Macro average over classes of the one-vs-rest binary AUC of each
    score column. Classes absent from ``true`` are skipped with a warning."""
    probs = np.asarray(probs, dtype=np.float64)
    true = np.asarray(true, dtype=np.int64).reshape(-1)
    if probs.ndim != 2:
        raise ContractError(f"probs must be 2-D, got shape {probs.shape}")
    if probs.shape[0] != true.shape[0]:
        raise ContractError(f"{probs.shape[0]} probability rows but {true.shape[0]} labels")
    if probs.shape[0] == 0:
        raise UndefinedMetricError("AUC needs at least one sample")
    if len(np.unique(true)) < 2:
        raise UndefinedMetricError("AUC needs at least two classes present")
    per_class = []
    for c in range(probs.shape[1]):
        positive = true == c
        if positive.all() or not positive.any():
            warnings.warn(f"class {c} absent from one side; skipped in macro AUC",
                          RuntimeWarning)
            continue
        per_class.append(auc_binary(probs[:, c], positive))
    return float(np.mean(per_class))
