import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from permlab.common.errors import DimensionTooLarge
from permlab.matrix_core import ComplexMatrix, EnsembleSpec, all_ones, sample
from permlab.permanent_exact import permanent_naive, permanent_ryser, permanent_ryser_batch


def relative(a, b):
    return abs(a - b) / abs(b)


@pytest.mark.parametrize("n", [1, 2, 3, 5, 7])
def test_identity_and_ones(n):
    identity = ComplexMatrix(n, np.eye(n))
    assert permanent_ryser(identity) == pytest.approx(1.0)
    assert permanent_naive(identity) == pytest.approx(1.0)
    assert permanent_ryser(all_ones(n)) == pytest.approx(math.factorial(n))
    assert permanent_naive(all_ones(n)) == pytest.approx(math.factorial(n))


def test_one_by_one():
    assert permanent_ryser(ComplexMatrix(1, [2 - 3j])) == pytest.approx(2 - 3j)


def test_two_by_two():
    a = ComplexMatrix.from_rows([[1, 2], [3, 4]])
    assert permanent_ryser(a) == pytest.approx(10)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 6), seed=st.integers(0, 2**32))
def test_ryser_matches_naive(n, seed):
    a = sample(EnsembleSpec(n=n, seed=seed), 0)
    assert relative(permanent_ryser(a), permanent_naive(a)) < 1e-10


@settings(max_examples=20, deadline=None)
@given(perm=st.permutations(list(range(5))), seed=st.integers(0, 1000))
def test_row_and_column_permutation_invariance(perm, seed):
    a = sample(EnsembleSpec(n=5, seed=seed), 0)
    rows = ComplexMatrix(5, a.entries[perm, :])
    cols = ComplexMatrix(5, a.entries[:, perm])
    assert relative(permanent_ryser(rows), permanent_ryser(a)) < 1e-10
    assert relative(permanent_ryser(cols), permanent_ryser(a)) < 1e-10


def test_multilinear_in_a_row(gaussian):
    a, b = gaussian(4, 0), gaussian(4, 1)
    mixed = a.entries.copy()
    mixed[2] = 2.0 * a.entries[2] - 3j * b.entries[2]
    other = a.entries.copy()
    other[2] = b.entries[2]
    expected = 2.0 * permanent_ryser(a) - 3j * permanent_ryser(ComplexMatrix(4, other))
    assert relative(permanent_ryser(ComplexMatrix(4, mixed)), expected) < 1e-10


def test_batch_matches_scalar(gaussian):
    stack = np.stack([gaussian(4, i).entries for i in range(6)])
    batch = permanent_ryser_batch(stack)
    for i in range(6):
        assert relative(batch[i], permanent_ryser(ComplexMatrix(4, stack[i]))) < 1e-12


def test_batch_of_empty_matrices():
    assert np.array_equal(permanent_ryser_batch(np.zeros((3, 0, 0))), np.ones(3))


def test_caps():
    with pytest.raises(DimensionTooLarge) as err:
        permanent_naive(all_ones(4), cap=3)
    assert err.value.code == "permanent_exact.DimensionTooLarge"
    assert err.value.details == {"n": 4, "cap": 3}
    with pytest.raises(DimensionTooLarge):
        permanent_ryser(all_ones(4), cap=3)


@pytest.mark.parametrize("chunk", [1, 3, 8, 64])
def test_block_size_does_not_change_result(gaussian, chunk):
    a = gaussian(6, 4)
    assert relative(permanent_ryser(a, chunk=chunk), permanent_naive(a)) < 1e-12


def test_ryser_handles_n_18_quickly(gaussian):
    a = ComplexMatrix(18, np.ones((18, 18)) + 0.01 * gaussian(18, 1).entries)
    # every entry near 1, so Per is close to 18!
    assert abs(permanent_ryser(a) / math.factorial(18) - 1) < 0.5
