'''
The interpolating polynomial g_A(z) = Per(J + zA).

Coefficients are stored normalised by n! (c_hat_k = c_k / n!) with the scale kept as a
separate scalar, so n up to 22 never overflows and c_hat_0 = 1 exactly.
'''

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations

import mpmath
import numpy as np
from scipy.special import comb

from permlab.common.errors import (
    BudgetExceeded,
    DegenerateLeadingCoefficient,
    DimensionTooLarge,
    NoConvergence,
)
from permlab.matrix_core import ComplexMatrix
from permlab.permanent_exact import permanent_ryser_batch

logger = logging.getLogger('permlab.interp_poly')

COEFF_CAP = 22
SUBSET_CHUNK = 1 << 14
SUBMATRIX_BUDGET = 1e9
WEIGHT_DPS = 40

ABERTH_MAX_SWEEPS = 500
ABERTH_TOLERANCE = 1e-13
ABERTH_OFFSET = 0.37
ABERTH_RADIUS_FACTOR = 1.1


@dataclass(frozen=True, eq=False)
class InterpPolynomial:
    '''
    g(z) = scale * sum_k coeffs[k] z^k, degree n.

    For g_A the scale is n! and coeffs[0] is exactly 1.
    '''
    n: int
    coeffs: np.ndarray
    scale: float = 1.0

    def __post_init__(self) -> None:
        coeffs = np.array(self.coeffs, dtype=np.complex128).reshape(-1)
        if coeffs.size != self.n + 1:
            raise ValueError(f"degree {self.n} needs {self.n + 1} coefficients, got {coeffs.size}")
        coeffs.flags.writeable = False
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def scale_hint(self) -> float:
        '''max |c_hat_k|, in normalised units'''
        return float(np.max(np.abs(self.coeffs)))

    @property
    def log_scale(self) -> float:
        return math.log(self.scale)

    @classmethod
    def from_roots(cls, roots, scale: float = 1.0) -> "InterpPolynomial":
        '''Polynomial scale * prod_j (1 - z / z_j), so c_hat_0 = 1'''
        roots = np.asarray(roots, dtype=np.complex128)
        if np.any(roots == 0):
            raise ValueError("roots must be nonzero for a normalised constant term")
        coeffs = np.array([1.0 + 0j])
        for root in roots:
            coeffs = np.convolve(coeffs, [1.0, -1.0 / root])
        return cls(len(roots), coeffs, scale)


@dataclass(frozen=True)
class RootSet:
    '''All n roots of a polynomial with their normalised residuals |g(z_j)| / scale'''
    roots: np.ndarray
    residuals: np.ndarray
    converged: bool = True
    sweeps: int = 0
    flagged: tuple[int, ...] = field(default_factory=tuple)

    @property
    def moduli(self) -> np.ndarray:
        return np.abs(self.roots)


def _glynn_weights(n: int) -> list[list]:
    '''w[q][k] = (-1)^q (n - 2q)^(n-k) / (2^(n-1) n!) at WEIGHT_DPS digits'''
    denominator = (1 << (n - 1)) * math.factorial(n)
    with mpmath.workdps(WEIGHT_DPS):
        return [[mpmath.mpf((-1) ** q * (n - 2 * q) ** (n - k)) / denominator for k in range(n + 1)]
                for q in range(n)]


def coeffs_via_ryser(a: ComplexMatrix, cap: int = COEFF_CAP, chunk: int = SUBSET_CHUNK) -> InterpPolynomial:
    '''
    All coefficients of Per(J + zA) by inclusion-exclusion with polynomial line sums.

    The sum runs over sign vectors delta with delta_1 = 1 (Glynn's form of Ryser's formula):
    column j then sums to d + z R_j with d = sum(delta) and R_j = sum_i delta_i a_ij, and the
    product over columns has z^k coefficient d^(n-k) e_k(R). Centred d keeps the signed
    terms close to the result in size. Sign vectors are grouped by their count q of -1
    entries; per-group sums accumulate with compensation and are combined with the
    q-dependent weights in mpmath.
    '''
    n = a.n
    if n > cap:
        raise DimensionTooLarge(f"coefficient construction limited to n <= {cap}", n=n, cap=cap)
    first, rest = a.entries[0], a.entries[1:]
    totals = np.zeros((n, n + 1), dtype=np.complex128)
    lost = np.zeros_like(totals)
    sign_vectors = 1 << (n - 1)
    bits = np.arange(n - 1)

    for start in range(0, sign_vectors, chunk):
        codes = np.arange(start, min(start + chunk, sign_vectors), dtype=np.int64)
        minus = (codes[:, None] >> bits) & 1
        colsums = first + (1.0 - 2.0 * minus) @ rest
        elementary = np.zeros((codes.size, n + 1), dtype=np.complex128)
        elementary[:, 0] = 1.0
        for j in range(n):
            elementary[:, 1:] = elementary[:, 1:] + colsums[:, j:j + 1] * elementary[:, :-1]
        groups = minus.sum(axis=1)
        for q in np.unique(groups):
            y = elementary[groups == q].sum(axis=0) - lost[q]
            t = totals[q] + y
            lost[q] = (t - totals[q]) - y
            totals[q] = t

    weights = _glynn_weights(n)
    with mpmath.workdps(WEIGHT_DPS):
        coeffs = np.array([
            complex(mpmath.fsum(weights[q][k] * (mpmath.mpc(complex(totals[q, k])) - mpmath.mpc(complex(lost[q, k])))
                                for q in range(n)))
            for k in range(n + 1)
        ])
    if abs(coeffs[0] - 1) > 1e-12:
        logger.warning(f"Constant coefficient drifted to {coeffs[0]:.16g} for n={n}")
    logger.debug(f"Built coefficients for n={n} from {sign_vectors} sign vectors")
    return InterpPolynomial(n, coeffs, float(math.factorial(n)))


def submatrix_cost(n: int, k_max: int) -> float:
    '''Estimated operation count of the submatrix-sum path up to k_max'''
    return float(sum(comb(n, k, exact=True) ** 2 * k * (1 << k) for k in range(1, k_max + 1)))


def coeffs_via_submatrices(a: ComplexMatrix, k_max: int, budget: float = SUBMATRIX_BUDGET) -> np.ndarray:
    '''
    Normalised coefficients c_hat_0..c_hat_kmax from c_k = (n-k)! sum_{|S|=|T|=k} Per(A[S,T]).

    Each row set S is handled as one batch over all column sets T.
    '''
    n = a.n
    if not 0 <= k_max <= n:
        raise ValueError(f"k_max must lie in [0, {n}], got {k_max}")
    cost = submatrix_cost(n, k_max)
    if cost > budget:
        raise BudgetExceeded(f"submatrix path needs ~{cost:.3g} operations", estimate=cost, budget=budget)

    entries = a.entries
    coeffs = np.zeros(k_max + 1, dtype=np.complex128)
    coeffs[0] = 1.0
    for k in range(1, k_max + 1):
        col_sets = np.array(list(combinations(range(n), k)), dtype=np.int64)
        total = 0j
        for rows in combinations(range(n), k):
            block = entries[np.array(rows)][:, col_sets]
            total += permanent_ryser_batch(np.transpose(block, (1, 0, 2))).sum()
        falling = math.perm(n, k)
        coeffs[k] = total / falling
    return coeffs


def evaluate(p: InterpPolynomial, z):
    '''g(z) by Horner's rule; z may be a scalar or an array'''
    z = np.asarray(z, dtype=np.complex128)
    acc = np.zeros_like(z)
    for c in p.coeffs[::-1]:
        acc = acc * z + c
    result = p.scale * acc
    return complex(result) if result.ndim == 0 else result


def _horner_with_derivative(coeffs: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    value = np.zeros_like(z)
    deriv = np.zeros_like(z)
    for c in coeffs[::-1]:
        deriv = deriv * z + value
        value = value * z + c
    return value, deriv


def find_roots(p: InterpPolynomial, max_sweeps: int = ABERTH_MAX_SWEEPS) -> RootSet:
    '''
    Aberth-Ehrlich simultaneous iteration on the normalised coefficients.

    Start points lie on the circle of radius 1.1 (|c_0|/|c_n|)^(1/n) with a fixed angular
    offset; a root is frozen once its correction drops below 1e-13 (1 + |z_j|).
    '''
    coeffs = p.coeffs
    n = p.n
    if abs(coeffs[n]) <= 1e-300 * p.scale_hint:
        raise DegenerateLeadingCoefficient("leading coefficient vanishes", leading=abs(coeffs[n]))
    if n == 0:
        return RootSet(np.zeros(0, dtype=np.complex128), np.zeros(0))

    radius = ABERTH_RADIUS_FACTOR * (abs(coeffs[0]) / abs(coeffs[n])) ** (1.0 / n)
    z = radius * np.exp(1j * (2 * np.pi * np.arange(n) / n + ABERTH_OFFSET))
    active = np.ones(n, dtype=bool)

    sweeps = 0
    while active.any() and sweeps < max_sweeps:
        sweeps += 1
        value, deriv = _horner_with_derivative(coeffs, z)
        with np.errstate(divide='ignore', invalid='ignore'):
            ratio = value / deriv
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, 1.0)
            repulsion = (1.0 / diff).sum(axis=1) - 1.0
            offset = ratio / (1.0 - ratio * repulsion)
        offset = np.where(np.isfinite(offset), offset, 0.0)
        offset[value == 0] = 0.0
        z = np.where(active, z - offset, z)
        active &= np.abs(offset) >= ABERTH_TOLERANCE * (1.0 + np.abs(z))
        logger.debug(f"Aberth sweep {sweeps}: {int(active.sum())} roots still moving")

    value, _ = _horner_with_derivative(coeffs, z)
    roots = RootSet(z, np.abs(value), converged=not active.any(), sweeps=sweeps,
                    flagged=tuple(int(j) for j in np.flatnonzero(active)))
    if not roots.converged:
        raise NoConvergence(f"Aberth iteration did not converge in {max_sweeps} sweeps",
                            best=roots, moving=len(roots.flagged))
    return roots


def count_roots_in_disk(rs: RootSet, r: float) -> int:
    '''N_r = number of roots with |z_j| <= r'''
    return int(np.count_nonzero(rs.moduli <= r))
