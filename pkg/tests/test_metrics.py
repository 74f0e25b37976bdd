"""Metric tests against brute-force oracles and closed-form anchors."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from condsynth.errors import ContractError, DomainError, UndefinedMetricError
from condsynth.metrics import accuracy, auc_binary, auc_macro_ovr, cohens_kappa, confusion

# -- oracles: independent triple-loop / pairwise implementations -------------


def oracle_confusion(pred, true, k):
    cm = [[0] * k for _ in range(k)]
    for p, t in zip(pred, true):
        cm[t][p] += 1
    return np.array(cm)


def oracle_accuracy(pred, true):
    return sum(int(p == t) for p, t in zip(pred, true)) / len(pred)


def oracle_kappa(pred, true, k):
    n = len(pred)
    p_o = oracle_accuracy(pred, true)
    p_e = 0.0
    for c in range(k):
        row = sum(int(t == c) for t in true)
        col = sum(int(p == c) for p in pred)
        p_e += row * col / (n * n)
    if p_e == 1.0:
        return 0.0
    return (p_o - p_e) / (1.0 - p_e)


def oracle_auc(scores, positive):
    pos = [s for s, flag in zip(scores, positive) if flag]
    neg = [s for s, flag in zip(scores, positive) if not flag]
    wins = 0.0
    for a in pos:
        for b in neg:
            if a > b:
                wins += 1.0
            elif a == b:
                wins += 0.5
    return wins / (len(pos) * len(neg))


class TestConfusion:
    def test_perfect_predictions_are_diagonal(self):
        y = np.array([0, 1, 2, 1, 0])
        cm = confusion(y, y, 3)
        assert np.array_equal(cm, np.diag([2, 2, 1]))

    def test_empty_inputs_zero_matrix(self):
        cm = confusion([], [], 3)
        assert np.array_equal(cm, np.zeros((3, 3)))

    def test_hand_tabulated_entries(self):
        cm = confusion(np.array([0, 1, 1]), np.array([0, 1, 2]), 3)
        expected = np.zeros((3, 3), dtype=int)
        expected[0, 0] = expected[1, 1] = expected[2, 1] = 1
        assert np.array_equal(cm, expected)

    def test_length_mismatch(self):
        with pytest.raises(ContractError):
            confusion([0, 1], [0], 2)

    def test_out_of_range_labels(self):
        with pytest.raises(DomainError):
            confusion([0, 2], [0, 1], 2)


class TestAccuracy:
    def test_diagonal_is_one(self):
        assert accuracy(np.diag([3, 4, 5])) == 1.0

    def test_zero_diagonal_is_zero(self):
        assert accuracy(np.array([[0, 2], [3, 0]])) == 0.0

    def test_hand_value(self):
        assert accuracy(np.array([[50, 10], [15, 25]])) == 0.75

    def test_empty_matrix_undefined(self):
        with pytest.raises(UndefinedMetricError):
            accuracy(np.zeros((3, 3)))


class TestKappa:
    def test_perfect_diagonal(self):
        assert cohens_kappa(np.diag([7, 3])) == 1.0

    def test_independent_marginals(self):
        # outer product of marginals: agreement is exactly chance level
        row = np.array([6, 4])
        col = np.array([3, 7])
        cm = np.outer(row, col)  # total 10 * 10, p_o == p_e
        assert cohens_kappa(cm) == pytest.approx(0.0, abs=1e-15)

    def test_hand_value(self):
        cm = np.array([[50, 10], [15, 25]])
        assert cohens_kappa(cm) == pytest.approx((0.75 - 0.53) / (1 - 0.53), abs=1e-12)
        assert cohens_kappa(cm) == pytest.approx(0.4681, abs=1e-4)

    def test_degenerate_single_cell(self):
        cm = np.array([[5, 0], [0, 0]])
        assert cohens_kappa(cm) == 0.0

    def test_empty_matrix_undefined(self):
        with pytest.raises(UndefinedMetricError):
            cohens_kappa(np.zeros((2, 2)))

    @settings(max_examples=200, deadline=None)
    @given(st.integers(2, 5), st.integers(1, 50), st.integers(0, 2 ** 31 - 1))
    def test_matches_oracle_and_stays_below_accuracy(self, k, n, seed):
        rng = np.random.default_rng(seed)
        pred = rng.integers(0, k, size=n)
        true = rng.integers(0, k, size=n)
        cm = confusion(pred, true, k)
        assert np.array_equal(cm, oracle_confusion(pred, true, k))
        assert accuracy(cm) == oracle_accuracy(pred, true)
        assert cohens_kappa(cm) == pytest.approx(oracle_kappa(pred, true, k), abs=1e-12)
        assert cohens_kappa(cm) <= accuracy(cm) + 1e-12
        assert -1.0 - 1e-12 <= cohens_kappa(cm) <= 1.0 + 1e-12


class TestBinaryAuc:
    def test_perfect_separation(self):
        scores = np.array([0.9, 0.8, 0.2, 0.1])
        assert auc_binary(scores, np.array([True, True, False, False])) == 1.0

    def test_all_ties(self):
        assert auc_binary(np.ones(6), np.array([1, 0, 1, 0, 1, 0], bool)) == 0.5

    def test_needs_both_sides(self):
        with pytest.raises(UndefinedMetricError):
            auc_binary(np.ones(3), np.array([True, True, True]))

    @settings(max_examples=300, deadline=None)
    @given(st.integers(2, 20), st.integers(0, 2 ** 31 - 1), st.booleans())
    def test_matches_pairwise_oracle(self, n, seed, with_ties):
        rng = np.random.default_rng(seed)
        scores = rng.integers(0, 4, size=n) / 4.0 if with_ties else rng.normal(size=n)
        positive = rng.integers(0, 2, size=n).astype(bool)
        if positive.all() or not positive.any():
            positive[0] = not positive[0]
        assert auc_binary(scores, positive) == pytest.approx(
            oracle_auc(scores, positive), abs=1e-12)

    def test_invariant_under_monotone_transform(self):
        rng = np.random.default_rng(8)
        scores = rng.normal(size=30)
        positive = rng.integers(0, 2, size=30).astype(bool)
        positive[0], positive[1] = True, False
        a = auc_binary(scores, positive)
        b = auc_binary(np.exp(3.0 * scores), positive)
        assert a == pytest.approx(b, abs=1e-12)


class TestMacroAuc:
    def test_perfectly_separating_probs(self):
        true = np.array([0, 0, 1, 1, 2, 2])
        probs = np.eye(3)[true] * 0.8 + 0.1
        assert auc_macro_ovr(probs, true) == 1.0

    def test_identical_scores_give_half(self):
        probs = np.full((8, 3), 1.0 / 3.0)
        true = np.array([0, 1, 2, 0, 1, 2, 0, 1])
        assert auc_macro_ovr(probs, true) == 0.5

    def test_absent_class_skipped_with_warning(self):
        probs = np.random.default_rng(0).dirichlet(np.ones(3), size=10)
        true = np.array([0, 1] * 5)  # class 2 never appears
        with pytest.warns(RuntimeWarning, match="class 2"):
            value = auc_macro_ovr(probs, true)
        assert 0.0 <= value <= 1.0

    def test_single_class_undefined(self):
        probs = np.full((4, 3), 1.0 / 3.0)
        with pytest.raises(UndefinedMetricError):
            auc_macro_ovr(probs, np.zeros(4, dtype=int))

    @settings(max_examples=100, deadline=None)
    @given(st.integers(4, 20), st.integers(2, 4), st.integers(0, 2 ** 31 - 1))
    def test_macro_average_matches_per_class_oracle(self, n, k, seed):
        rng = np.random.default_rng(seed)
        probs = rng.dirichlet(np.ones(k), size=n)
        true = rng.integers(0, k, size=n)
        if len(np.unique(true)) < 2:
            true[0] = (true[1] + 1) % k
        expected = [oracle_auc(probs[:, c], true == c)
                    for c in range(k) if 0 < (true == c).sum() < n]
        import warnings as _warnings
        with _warnings.catch_warnings():
            _warnings.simplefilter("ignore")
            got = auc_macro_ovr(probs, true)
        assert got == pytest.approx(np.mean(expected), abs=1e-12)
