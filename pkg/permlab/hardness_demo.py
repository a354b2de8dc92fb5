'''
Exact recovery of Per(A) from a partly corrupted oracle for Per(A + mu J).

q(mu) = Per(A + mu J) is a degree-n polynomial whose constant term is Per(A). The
oracle is queried at mu = 1..m, some answers are corrupted, and Berlekamp-Welch
reconstruction over Gaussian rationals gives q back exactly.
'''

import logging
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from permlab.common import rng
from permlab.common.errors import DimensionTooLarge, SingularSystem, TooManyErrors
from permlab.matrix_core import ComplexMatrix

logger = logging.getLogger('permlab.hardness_demo')

RATIONAL_CAP = 8
POINTS_CAP = 64
CORRUPTION_SALT = 3
MATRIX_SALT = 5


@dataclass(frozen=True)
class GaussianRational:
    '''Exact re + im*i with Fraction parts'''
    re: Fraction = Fraction(0)
    im: Fraction = Fraction(0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "re", Fraction(self.re))
        object.__setattr__(self, "im", Fraction(self.im))

    @classmethod
    def coerce(cls, value) -> "GaussianRational":
        if isinstance(value, GaussianRational):
            return value
        if isinstance(value, complex):
            return cls(Fraction(value.real), Fraction(value.imag))
        return cls(Fraction(value))

    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    def __add__(self, other) -> "GaussianRational":
        other = GaussianRational.coerce(other)
        return GaussianRational(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __neg__(self) -> "GaussianRational":
        return GaussianRational(-self.re, -self.im)

    def __sub__(self, other) -> "GaussianRational":
        return self + (-GaussianRational.coerce(other))

    def __rsub__(self, other) -> "GaussianRational":
        return GaussianRational.coerce(other) - self

    def __mul__(self, other) -> "GaussianRational":
        other = GaussianRational.coerce(other)
        return GaussianRational(self.re * other.re - self.im * other.im,
                                self.re * other.im + self.im * other.re)

    __rmul__ = __mul__

    def conj(self) -> "GaussianRational":
        return GaussianRational(self.re, -self.im)

    def __truediv__(self, other) -> "GaussianRational":
        other = GaussianRational.coerce(other)
        norm = other.re * other.re + other.im * other.im
        if norm == 0:
            raise ZeroDivisionError("division by zero Gaussian rational")
        top = self * other.conj()
        return GaussianRational(top.re / norm, top.im / norm)

    def __pow__(self, k: int) -> "GaussianRational":
        result = GaussianRational(1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other) -> bool:
        try:
            other = GaussianRational.coerce(other)
        except (TypeError, ValueError):
            return NotImplemented
        return self.re == other.re and self.im == other.im

    def __hash__(self) -> int:
        return hash((self.re, self.im))

    def __complex__(self) -> complex:
        return complex(float(self.re), float(self.im))

    def __str__(self) -> str:
        return f"{self.re} + {self.im}i" if self.im >= 0 else f"{self.re} - {-self.im}i"


ZERO = GaussianRational(0)
ONE = GaussianRational(1)


@dataclass(frozen=True)
class RationalComplexMatrix:
    n: int
    entries: tuple[GaussianRational, ...]

    def __post_init__(self) -> None:
        entries = tuple(GaussianRational.coerce(x) for x in self.entries)
        if len(entries) != self.n * self.n:
            raise ValueError(f"expected {self.n * self.n} entries, got {len(entries)}")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def from_rows(cls, rows) -> "RationalComplexMatrix":
        n = len(rows)
        return cls(n, tuple(x for row in rows for x in row))

    @classmethod
    def identity(cls, n: int) -> "RationalComplexMatrix":
        return cls(n, tuple(ONE if i == j else ZERO for i in range(n) for j in range(n)))

    @classmethod
    def random(cls, n: int, seed: int, bound: int = 5, denominator: int = 4) -> "RationalComplexMatrix":
        '''Entries (p/q) + (r/s)i with |p|, |r| <= bound and 1 <= q, s <= denominator'''
        gen = rng.stream(seed, 0, salt=MATRIX_SALT)
        nums = gen.integers(-bound, bound + 1, size=(n * n, 2))
        dens = gen.integers(1, denominator + 1, size=(n * n, 2))
        return cls(n, tuple(GaussianRational(Fraction(int(a), int(b)), Fraction(int(c), int(d)))
                            for (a, c), (b, d) in zip(nums, dens)))

    def entry(self, i: int, j: int) -> GaussianRational:
        return self.entries[i * self.n + j]

    def shifted(self, mu) -> "RationalComplexMatrix":
        '''A + mu J'''
        return RationalComplexMatrix(self.n, tuple(x + mu for x in self.entries))

    def to_complex(self) -> ComplexMatrix:
        return ComplexMatrix(self.n, np.array([complex(x) for x in self.entries]))


@dataclass(frozen=True)
class OracleTranscript:
    points: tuple[tuple[Fraction, GaussianRational], ...]
    corrupted_indices: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        xs = [x for x, _ in self.points]
        if len(set(xs)) != len(xs):
            raise ValueError("query points must be pairwise distinct")


def permanent_exact_rational(a: RationalComplexMatrix) -> GaussianRational:
    '''Exact Ryser over Gaussian rationals'''
    n = a.n
    if n > RATIONAL_CAP:
        raise DimensionTooLarge(f"exact rational permanent limited to n <= {RATIONAL_CAP}", n=n, cap=RATIONAL_CAP)
    rowsums = [ZERO] * n
    total = ZERO
    gray = 0
    for k in range(1, 1 << n):
        j = (k & -k).bit_length() - 1
        gray ^= 1 << j
        adding = bool(gray >> j & 1)
        for i in range(n):
            rowsums[i] = rowsums[i] + a.entry(i, j) if adding else rowsums[i] - a.entry(i, j)
        term = ONE
        for value in rowsums:
            term = term * value
        total = total + term if gray.bit_count() % 2 == 0 else total - term
    return total if n % 2 == 0 else -total


def q_poly_eval(a: RationalComplexMatrix, mu) -> GaussianRational:
    '''q(mu) = Per(A + mu J)'''
    return permanent_exact_rational(a.shifted(GaussianRational.coerce(mu)))


def poly_eval(coeffs, x) -> GaussianRational:
    acc = ZERO
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def poly_divmod(num: list, den: list) -> tuple[list, list]:
    '''Exact long division, coefficients lowest degree first'''
    num = list(num)
    while len(den) > 1 and den[-1].is_zero():
        den = den[:-1]
    if den[-1].is_zero():
        raise ZeroDivisionError("division by the zero polynomial")
    quotient = [ZERO] * max(len(num) - len(den) + 1, 1)
    for shift in range(len(num) - len(den), -1, -1):
        factor = num[shift + len(den) - 1] / den[-1]
        quotient[shift] = factor
        for i, d in enumerate(den):
            num[shift + i] = num[shift + i] - factor * d
    remainder = num[:len(den) - 1] if len(den) > 1 else []
    return quotient, remainder


def _solve_exact(rows: list[list[GaussianRational]], rhs: list[GaussianRational]) -> list[GaussianRational] | None:
    '''
    Gauss-Jordan elimination. Returns None when inconsistent and raises SingularSystem
    with the nullity when the solution is not unique.
    '''
    size = len(rows[0])
    work = [list(row) + [b] for row, b in zip(rows, rhs)]
    pivots = []
    r = 0
    for c in range(size):
        pivot = next((i for i in range(r, len(work)) if not work[i][c].is_zero()), None)
        if pivot is None:
            continue
        work[r], work[pivot] = work[pivot], work[r]
        inv = ONE / work[r][c]
        work[r] = [x * inv for x in work[r]]
        for i in range(len(work)):
            if i != r and not work[i][c].is_zero():
                factor = work[i][c]
                work[i] = [x - factor * y for x, y in zip(work[i], work[r])]
        pivots.append(c)
        r += 1
        if r == len(work):
            break
    if any(not work[i][size].is_zero() for i in range(r, len(work))):
        return None
    if r < size:
        raise SingularSystem(f"system has {size - r} free unknowns", nullity=size - r)
    solution = [ZERO] * size
    for i, c in enumerate(pivots):
        solution[c] = work[i][size]
    return solution


def _bw_system(points, degree: int, e: int):
    rows, rhs = [], []
    for x, y in points:
        x = GaussianRational.coerce(x)
        powers = [ONE]
        for _ in range(degree + e):
            powers.append(powers[-1] * x)
        rows.append(powers[:degree + e + 1] + [-(y * powers[j]) for j in range(e)])
        rhs.append(y * powers[e])
    return rows, rhs


def bw_reconstruct(transcript: OracleTranscript, degree: int) -> list[GaussianRational]:
    '''
    Coefficients of the degree-``degree`` polynomial agreeing with more than
    (m + degree) / 2 of the transcript points.

    Solves N(x_i) = y_i E(x_i) with E monic of degree e. When more than the true
    number of errors is assumed the solution is not unique; e is then lowered by the
    nullity and the system solved again.
    '''
    points = transcript.points
    m = len(points)
    if m > POINTS_CAP:
        raise ValueError(f"at most {POINTS_CAP} points supported, got {m}")
    if m < degree + 1:
        raise ValueError(f"need at least {degree + 1} points, got {m}")
    e_max = (m - degree - 1) // 2
    e = e_max
    while True:
        rows, rhs = _bw_system(points, degree, e)
        try:
            solution = _solve_exact(rows, rhs)
            break
        except SingularSystem as err:
            logger.debug(f"BW system at e={e} singular, nullity {err.details['nullity']}")
            e -= err.details["nullity"]
            if e < 0:
                raise TooManyErrors("error locator cascade fell below zero") from err
    if solution is None:
        raise TooManyErrors(f"no consistent error locator of degree {e}", errors_assumed=e, points=m)

    numerator = solution[:degree + e + 1]
    locator = solution[degree + e + 1:] + [ONE]
    quotient, remainder = poly_divmod(numerator, locator)
    if any(not c.is_zero() for c in remainder):
        raise TooManyErrors("error locator does not divide the numerator", errors_assumed=e)
    quotient = (quotient + [ZERO] * (degree + 1))[:degree + 1]

    agreement = sum(1 for x, y in points if poly_eval(quotient, GaussianRational.coerce(x)) == y)
    if agreement < m - e_max:
        raise TooManyErrors(f"reconstruction agrees on {agreement} of {m} points", agreement=agreement,
                            required=m - e_max)
    logger.info(f"BW recovered degree {degree} polynomial from {m} points, {m - agreement} errors")
    return quotient


def _random_perturbation(gen: np.random.Generator) -> GaussianRational:
    while True:
        nums = gen.integers(-50, 51, size=2)
        dens = gen.integers(1, 10, size=2)
        rho = GaussianRational(Fraction(int(nums[0]), int(dens[0])), Fraction(int(nums[1]), int(dens[1])))
        if not rho.is_zero():
            return rho


def simulate_oracle(a: RationalComplexMatrix, m: int, corrupted: set[int], seed: int) -> OracleTranscript:
    '''Exact q(mu_i) at mu_i = 1..m, with y_i + rho_i at the corrupted indices'''
    gen = rng.stream(seed, 1, salt=CORRUPTION_SALT)
    points = []
    for i in range(m):
        mu = Fraction(i + 1)
        y = q_poly_eval(a, mu)
        if i in corrupted:
            y = y + _random_perturbation(gen)
        points.append((mu, y))
    return OracleTranscript(tuple(points), frozenset(corrupted))


@dataclass
class ReductionResult:
    per_recovered: GaussianRational
    expected: GaussianRational
    matches: bool
    corrupted: int

    def to_record(self) -> dict:
        return {"recovered": str(self.per_recovered), "expected": str(self.expected),
                "matches": self.matches, "corrupted": self.corrupted}


def choose_corruptions(m: int, corruption_rate: Fraction, seed: int, count: int | None = None) -> set[int]:
    '''Each index independently at the given rate, or exactly ``count`` distinct indices'''
    gen = rng.stream(seed, 0, salt=CORRUPTION_SALT)
    if count is not None:
        return {int(i) for i in gen.choice(m, size=count, replace=False)}
    return {i for i, u in enumerate(gen.random(m)) if u < float(corruption_rate)}


def reduction_demo(a: RationalComplexMatrix, m: int, corruption_rate=Fraction(0), seed: int = 0,
                   corruptions: int | None = None, indices=None) -> ReductionResult:
    '''
    Simulate the corrupted oracle for q, reconstruct it and compare its constant term
    with the exact permanent of A. ``corruptions`` fixes the count and ``indices`` the
    exact positions; otherwise each answer is corrupted at ``corruption_rate``.
    '''
    corruption_rate = Fraction(corruption_rate)
    n = a.n
    if corruption_rate >= Fraction(m - n, 2 * m):
        raise ValueError(f"corruption rate {corruption_rate} must be below (m-n)/(2m) = {Fraction(m - n, 2 * m)}")
    if indices is not None:
        corrupted = {int(i) for i in indices}
    else:
        corrupted = choose_corruptions(m, corruption_rate, seed, corruptions)
    transcript = simulate_oracle(a, m, corrupted, seed)
    coeffs = bw_reconstruct(transcript, n)
    expected = permanent_exact_rational(a)
    return ReductionResult(coeffs[0], expected, coeffs[0] == expected, len(corrupted))
