import numpy as np
import pytest
from pydantic import ValidationError

from permlab.matrix_core import ComplexMatrix, EnsembleKind, EnsembleSpec, affine_combine, all_ones, sample


def test_sample_is_reproducible():
    spec = EnsembleSpec(n=5, seed=42)
    assert sample(spec, 3) == sample(spec, 3)
    assert sample(spec, 3) != sample(spec, 4)
    assert sample(spec, 3) != sample(EnsembleSpec(n=5, seed=43), 3)


def test_gaussian_moments():
    a = sample(EnsembleSpec(n=100, seed=7), 0).entries
    assert abs(a.mean()) < 0.05
    assert abs(np.mean(np.abs(a) ** 2) - 1.0) < 0.05
    assert abs(np.mean(a * a)) < 0.05


def test_gaussian_mean_shift():
    a = sample(EnsembleSpec(n=100, mu=0.5, seed=7), 0).entries
    assert abs(a.mean() - 0.5) < 0.05


def test_bernoulli_values():
    spec = EnsembleSpec(kind=EnsembleKind.BernoulliBiased, n=20, mu=0.25, seed=1)
    values = set(np.unique(sample(spec, 0).entries.real))
    assert values <= {-0.75, 1.0}
    assert np.all(sample(spec, 0).entries.imag == 0)


def test_spec_rejects_unknown_keys():
    with pytest.raises(ValidationError):
        EnsembleSpec(n=3, sigma=2.0)
    with pytest.raises(ValidationError):
        EnsembleSpec(n=0)


def test_matrix_validation():
    with pytest.raises(ValueError):
        ComplexMatrix(2, [1, 2, 3])
    with pytest.raises(ValueError):
        ComplexMatrix(1, [np.nan])
    with pytest.raises(ValueError):
        ComplexMatrix.from_rows([[1, 2, 3]])


def test_matrix_is_read_only():
    a = all_ones(3)
    with pytest.raises(ValueError):
        a.entries[0, 0] = 2.0


def test_affine_combine():
    a = ComplexMatrix.from_rows([[1, 2j], [0, -1]])
    combined = affine_combine(1.0, a, 2.0)
    assert np.array_equal(combined.entries, np.array([[3, 1 + 4j], [1, -1]]))


def test_bernoulli_mean_is_half_mu():
    mu = 0.25
    entries = sample(EnsembleSpec(kind=EnsembleKind.BernoulliBiased, n=200, mu=mu, seed=3), 0).entries.real
    standard_error = entries.std() / np.sqrt(entries.size)
    assert abs(entries.mean() - mu / 2) < 5 * standard_error
