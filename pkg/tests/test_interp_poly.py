import math

import numpy as np
import pytest

from permlab.common.errors import BudgetExceeded, DegenerateLeadingCoefficient, DimensionTooLarge, NoConvergence
from permlab.interp_poly import (
    InterpPolynomial,
    coeffs_via_ryser,
    coeffs_via_submatrices,
    count_roots_in_disk,
    evaluate,
    find_roots,
    submatrix_cost,
)
from permlab.matrix_core import ComplexMatrix, affine_combine
from permlab.permanent_exact import permanent_ryser


def test_constant_term_and_scale(gaussian):
    p = coeffs_via_ryser(gaussian(6))
    assert p.coeffs[0] == 1.0
    assert p.scale == math.factorial(6)
    assert evaluate(p, 0) == math.factorial(6)


def test_leading_coefficient_is_permanent(gaussian):
    a = gaussian(5, 2)
    p = coeffs_via_ryser(a)
    top = p.coeffs[-1] * p.scale
    assert abs(top - permanent_ryser(a)) / abs(permanent_ryser(a)) < 1e-10


@pytest.mark.parametrize("z", [0.7 + 0.3j, -1.5, 2j])
def test_evaluate_matches_ryser(gaussian, z):
    a = gaussian(6, 1)
    exact = permanent_ryser(affine_combine(1.0, a, z))
    assert abs(evaluate(coeffs_via_ryser(a), z) - exact) / abs(exact) < 1e-10


def test_evaluate_on_array(gaussian):
    p = coeffs_via_ryser(gaussian(4))
    points = np.array([0.1, 1j, -0.5 + 0.5j])
    values = evaluate(p, points)
    assert values.shape == (3,)
    assert values[1] == pytest.approx(evaluate(p, 1j))


@pytest.mark.parametrize("n", [3, 5])
def test_submatrix_path_matches(gaussian, n):
    a = gaussian(n, 3)
    full = coeffs_via_ryser(a).coeffs
    partial = coeffs_via_submatrices(a, n)
    assert np.max(np.abs(full - partial)) / np.max(np.abs(full)) < 1e-9


def test_submatrix_prefix_only(gaussian):
    a = gaussian(6, 4)
    partial = coeffs_via_submatrices(a, 2)
    assert partial.shape == (3,)
    assert np.allclose(partial, coeffs_via_ryser(a).coeffs[:3], rtol=1e-10)


def test_budget_exceeded(gaussian):
    a = gaussian(6)
    with pytest.raises(BudgetExceeded) as err:
        coeffs_via_submatrices(a, 6, budget=10.0)
    assert err.value.details["estimate"] == submatrix_cost(6, 6)


def test_coefficient_cap(gaussian):
    with pytest.raises(DimensionTooLarge):
        coeffs_via_ryser(gaussian(4), cap=3)


def test_from_roots_recovers_roots():
    roots = np.array([2.0, -3.0, 1 + 1j, -0.5j])
    found = find_roots(InterpPolynomial.from_roots(roots, scale=24.0))
    assert found.converged
    for root in roots:
        assert np.min(np.abs(found.roots - root)) < 1e-9


def test_vieta_product(gaussian):
    p = coeffs_via_ryser(gaussian(7, 5))
    rs = find_roots(p)
    # c_0 / c_n = (-1)^n prod z_j
    product = np.prod(rs.roots) * (-1) ** p.n
    expected = p.coeffs[0] / p.coeffs[-1]
    assert abs(product - expected) / abs(expected) < 1e-8


def test_roots_are_roots(gaussian):
    p = coeffs_via_ryser(gaussian(8, 6))
    rs = find_roots(p)
    assert len(rs.roots) == 8
    moduli = np.abs(rs.roots)[:, None] ** np.arange(9)[None, :]
    assert np.all(rs.residuals / (moduli @ np.abs(p.coeffs)) < 1e-9)


def test_count_in_disk():
    rs = find_roots(InterpPolynomial.from_roots([0.5, 2.0, -3.0]))
    assert count_roots_in_disk(rs, 0.1) == 0
    assert count_roots_in_disk(rs, 1.0) == 1
    assert count_roots_in_disk(rs, 10.0) == 3


def test_degenerate_leading_coefficient():
    with pytest.raises(DegenerateLeadingCoefficient):
        find_roots(InterpPolynomial(2, [1.0, 1.0, 0.0]))


def test_no_convergence_keeps_best_iterate(gaussian):
    p = coeffs_via_ryser(gaussian(8, 1))
    with pytest.raises(NoConvergence) as err:
        find_roots(p, max_sweeps=1)
    assert err.value.best is not None
    assert len(err.value.best.roots) == 8
    assert not err.value.best.converged


def test_wrong_coefficient_count():
    with pytest.raises(ValueError):
        InterpPolynomial(3, [1.0, 2.0])


def test_low_order_coefficients_accurate_at_n20(gaussian):
    a = gaussian(20, 2)
    full = coeffs_via_ryser(a).coeffs
    partial = coeffs_via_submatrices(a, 3)
    assert full[0] == 1.0
    for k in range(1, 4):
        assert abs(full[k] - partial[k]) / abs(partial[k]) < 1e-9


@pytest.mark.parametrize("n", [1, 2, 9, 13])
def test_constant_term_is_exact(gaussian, n):
    assert coeffs_via_ryser(gaussian(n, 1)).coeffs[0] == 1.0


def test_conjugation_symmetry(gaussian):
    a = gaussian(6, 8)
    p = coeffs_via_ryser(a)
    q = coeffs_via_ryser(ComplexMatrix(6, a.entries.conj()))
    assert np.allclose(q.coeffs, p.coeffs.conj(), rtol=1e-12, atol=1e-14)
    z = 0.8 - 1.1j
    assert evaluate(q, z.conjugate()) == pytest.approx(evaluate(p, z).conjugate(), rel=1e-11)


def test_diagonal_matrix_coefficients():
    diagonal = np.array([0.5, -1.0 + 2j, 3.0, 1j, -0.25])
    n = diagonal.size
    p = coeffs_via_ryser(ComplexMatrix(n, np.diag(diagonal)))
    elementary = np.array([1.0 + 0j])
    for value in diagonal:
        elementary = np.convolve(elementary, [1.0, value])
    # c_k = (n - k)! e_k(diagonal)
    expected = [math.factorial(n - k) * elementary[k] / math.factorial(n) for k in range(n + 1)]
    assert np.allclose(p.coeffs, expected, rtol=1e-12, atol=1e-15)


def test_vieta_sum(gaussian):
    p = coeffs_via_ryser(gaussian(7, 2))
    rs = find_roots(p)
    # sum z_j = -c_{n-1} / c_n
    expected = -p.coeffs[-2] / p.coeffs[-1]
    assert abs(rs.roots.sum() - expected) < 1e-8 * np.abs(rs.roots).sum()


def test_root_count_is_monotone_in_radius(gaussian):
    rs = find_roots(coeffs_via_ryser(gaussian(9, 4)))
    counts = [count_roots_in_disk(rs, r) for r in np.linspace(0.0, 10.0, 41)]
    assert counts == sorted(counts)
    assert counts[-1] <= 9
