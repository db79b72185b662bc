import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qkaf.quantizer import Codebook, build_codebook, quantize_insert, quantize_remove

errs = st.lists(st.floats(-10, 10, allow_nan=False), max_size=60)


class TestInsert:
    def test_empty_codebook(self):
        j, cb = quantize_insert(Codebook(0.1), 0.3)
        assert j == 0
        assert cb.codewords == [0.3] and cb.counts == [1]

    def test_gamma0_duplicates_collapse(self):
        cb = build_codebook([0.1, 0.2, 0.1], 0.0)
        assert cb.codewords == [0.1, 0.2] and cb.counts == [2, 1]

    def test_within_threshold(self):
        j, cb = quantize_insert(Codebook(0.15, [0.0], [1]), 0.1)
        assert j == 0 and cb.counts == [2] and cb.codewords == [0.0]

    def test_tie_goes_to_lower_index(self):
        cb = Codebook(0.5, [-0.25, 0.25], [1, 1])
        j, out = quantize_insert(cb, 0.0)
        assert j == 0 and out.counts == [2, 1]

    def test_value_semantics(self):
        cb = Codebook(0.1, [0.0], [1])
        quantize_insert(cb, 0.05)
        assert cb.counts == [1]

    def test_hand_trace(self):
        cb = build_codebook([-1, -0.9, 1], 0.2)
        assert cb.codewords == [-1.0, 1.0] and cb.counts == [2, 1]

    def test_large_gamma_single_codeword(self):
        e = [0.3, -2.0, 1.7, 0.0]
        cb = build_codebook(e, max(e) - min(e))
        assert cb.size == 1 and cb.counts == [4]


class TestRemove:
    def test_decrement(self):
        assert quantize_remove(Codebook(0, [0.1, 0.2], [2, 1]), 0).counts == [1, 1]

    def test_remove_last(self):
        cb = quantize_remove(Codebook(0, [0.1], [1]), 0)
        assert cb.size == 0 and cb.total == 0

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            quantize_remove(Codebook(0, [0.1], [1]), 1)

    @given(errs, st.floats(-10, 10), st.floats(0, 1))
    def test_insert_remove_inverse(self, e, x, gamma):
        cb = build_codebook(e, gamma)
        j, out = quantize_insert(cb, x)
        if out.size > cb.size:
            assert quantize_remove(out, j) == cb


class TestInvariants:
    def test_validation(self):
        with pytest.raises(ValueError):
            Codebook(-0.1)
        with pytest.raises(ValueError):
            Codebook(0.1, [0.0], [0])
        with pytest.raises(ValueError):
            Codebook(0.1, [0.0, 1.0], [1])

    @given(errs, st.floats(0, 2))
    def test_counts_sum_to_inserted(self, e, gamma):
        cb = build_codebook(e, gamma)
        assert cb.total == len(e)
        assert all(c >= 1 for c in cb.counts)
        assert len(cb.codewords) == len(cb.counts)

    @given(errs)
    def test_gamma0_distinct_keeps_all(self, e):
        cb = build_codebook(e, 0.0)
        assert sorted(cb.codewords) == sorted(set(float(x) for x in e))

    @given(errs, st.floats(0.01, 2))
    def test_new_codewords_farther_than_gamma(self, e, gamma):
        cb = build_codebook(e, gamma)
        c = np.asarray(cb.codewords)
        for i in range(1, c.size):
            # each codeword was created because every earlier one was out of reach
            assert np.min(np.abs(c[:i] - c[i])) > gamma

    @given(errs, st.floats(0, 1))
    def test_fold_equivalence_and_determinism(self, e, gamma):
        cb = Codebook(gamma)
        for x in e:
            _, cb = quantize_insert(cb, x)
        assert cb == build_codebook(e, gamma) == build_codebook(list(e), gamma)

    @settings(max_examples=50)
    @given(errs, st.floats(0, 0.5), st.integers(1, 10))
    def test_sliding_window_total(self, e, gamma, L):
        cb, window = Codebook(gamma), []
        for x in e:
            j = cb.insert(x)
            window.append(cb.codewords[j])
            if len(window) > L:
                old = window.pop(0)
                cb.remove(cb.codewords.index(old))
            assert cb.total == len(window) <= L
