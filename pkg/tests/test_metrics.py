"""Decoding, edit distance, and counting metrics."""

from functools import lru_cache

import numpy as np
import pytest

from aceseq.alphabet import make_alphabet
from aceseq.errors import InvalidInputError
from aceseq.grids import ProbGrid
from aceseq.metrics import (
    cer,
    count_match,
    greedy_decode,
    levenshtein,
    modal_count_baseline,
    predicted_counts,
    rmse_metrics,
    round_half_away,
    sequence_match,
)

ALPHABET = make_alphabet(["a", "b", "c"])


def one_hot_rows(indices, k=4):
    rows = np.zeros((len(indices), k))
    for t, idx in enumerate(indices):
        rows[t, idx] = 1.0
    return rows


class TestGreedyDecode:
    def test_collapse_rule(self):
        # argmax path: blank a a blank b
        probs = ProbGrid(one_hot_rows([0, 1, 1, 0, 2]))
        assert greedy_decode(probs, ALPHABET) == "ab"

    def test_duplicate_collapse(self):
        probs = ProbGrid(one_hot_rows([1, 1, 1]))
        assert greedy_decode(probs, ALPHABET) == "a"

    def test_all_blank(self):
        probs = ProbGrid(one_hot_rows([0, 0, 0]))
        assert greedy_decode(probs, ALPHABET) == ""

    def test_ties_break_to_lowest_index(self):
        probs = ProbGrid(np.full((2, 4), 0.25))
        assert greedy_decode(probs, ALPHABET) == ""  # blank wins the tie

    def test_2d_grid_decodes_in_column_order(self):
        # 2x2 grid, reading order rows: (0,0)=a (0,1)=b (1,0)=c (1,1)=blank
        probs = ProbGrid(one_hot_rows([1, 2, 3, 0]), shape2d=(2, 2))
        # column-major scan: (0,0) (1,0) (0,1) (1,1) -> a c b blank
        assert greedy_decode(probs, ALPHABET) == "acb"


class TestEditDistance:
    def test_identical(self):
        assert levenshtein("abc", "abc") == 0
        assert cer("abc", "abc") == 0.0

    def test_single_substitution(self):
        assert cer("ab", "ac") == 0.5

    def test_empty_reference(self):
        assert cer("ab", "") == 2.0  # denominator floors at 1

    def test_matches_recursive_oracle(self):
        @lru_cache(maxsize=None)
        def slow(a, b):
            if not a:
                return len(b)
            if not b:
                return len(a)
            return min(
                slow(a[1:], b) + 1,
                slow(a, b[1:]) + 1,
                slow(a[1:], b[1:]) + (a[0] != b[0]),
            )

        rng = np.random.default_rng(0)
        letters = "abcd"
        for _ in range(40):
            a = "".join(rng.choice(list(letters), size=rng.integers(0, 9)))
            b = "".join(rng.choice(list(letters), size=rng.integers(0, 9)))
            assert levenshtein(a, b) == slow(a, b)

    def test_match_predicates(self):
        assert sequence_match("ab", "ab")
        assert not sequence_match("ab", "ba")
        assert count_match("ab", "ba")
        assert not count_match("ab", "aa")


class TestRounding:
    def test_half_away_from_zero(self):
        got = round_half_away(np.array([2.5, 0.5, 1.49, -1.5, -0.49, 0.0]))
        np.testing.assert_array_equal(got, [3.0, 1.0, 1.0, -2.0, 0.0, 0.0])


class TestPredictedCounts:
    def test_aggregates_non_blank_probabilities(self):
        values = np.array(
            [
                [0.1, 0.8, 0.05, 0.05],
                [0.1, 0.8, 0.05, 0.05],
                [0.2, 0.1, 0.6, 0.1],
            ]
        )
        got = predicted_counts(ProbGrid(values), ALPHABET)
        # aggregates: a=1.7 b=0.7 c=0.2 -> rounded 2, 1, 0
        np.testing.assert_array_equal(got, [2, 1, 0])


class TestRmseMetrics:
    def test_perfect_predictions(self):
        true = np.array([[1, 2], [0, 3]])
        out = rmse_metrics(true, true)
        assert out.m_rmse == 0.0
        assert out.m_rel_rmse == 0.0

    def test_single_class_single_image(self):
        out = rmse_metrics(np.array([[2]]), np.array([[0]]))
        assert out.m_rmse == 2.0
        assert out.m_rel_rmse == 2.0

    def test_two_class_fixture(self):
        pred = np.array([[2, 0], [1, 1]])
        true = np.array([[1, 0], [1, 2]])
        out = rmse_metrics(pred, true)
        assert out.m_rmse == pytest.approx(np.sqrt(0.5), abs=0)
        want_rel = (0.5 + np.sqrt((0.0 + 1.0 / 3.0) / 2.0)) / 2.0
        assert out.m_rel_rmse == pytest.approx(want_rel, abs=1e-15)

    def test_empty_dataset_rejected(self):
        with pytest.raises(InvalidInputError):
            rmse_metrics(np.zeros((0, 3)), np.zeros((0, 3)))

    def test_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            rmse_metrics(np.zeros((2, 3)), np.zeros((2, 4)))


class TestModalBaseline:
    def test_predicts_most_frequent_count(self):
        true = np.array([[0, 2], [0, 2], [1, 3]])
        got = modal_count_baseline(true)
        np.testing.assert_array_equal(got, np.tile([0, 2], (3, 1)))
