import numpy as np
import pytest

from permlab.interp_poly import InterpPolynomial
from permlab.matrix_core import ComplexMatrix, EnsembleSpec, sample


@pytest.fixture
def gaussian():
    '''gaussian(n, index=0, seed=0, scale=1.0) -> ComplexMatrix'''
    def draw(n: int, index: int = 0, seed: int = 0, scale: float = 1.0) -> ComplexMatrix:
        a = sample(EnsembleSpec(n=n, seed=seed), index)
        return ComplexMatrix(n, scale * a.entries)
    return draw


@pytest.fixture
def far_roots():
    '''Polynomial with n roots on a circle of the given radius, scaled like g_A'''
    def build(n: int = 6, radius: float = 20.0) -> InterpPolynomial:
        angles = 2 * np.pi * (np.arange(n) + 0.3) / n
        return InterpPolynomial.from_roots(radius * np.exp(1j * angles), scale=720.0)
    return build
