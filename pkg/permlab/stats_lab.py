'''
Monte Carlo checks of the moment, root-count, mean-shift and tail bounds, plus the
Jensen identity on single polynomials.

Each trial is a pure function of (spec, trial index). Trials may run in worker
processes, but results are always reduced in index order, so an aggregate is
bit-identical for any thread count.
'''

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial
from pathlib import Path

import numpy as np
from scipy.special import gammaln
from scipy.stats import norm

from permlab.common import rng
from permlab.common.errors import NoConvergence, ParameterViolation, RootOnContour
from permlab.interp_poly import InterpPolynomial, coeffs_via_ryser, evaluate, find_roots
from permlab.matrix_core import EnsembleSpec, affine_combine, sample
from permlab.permanent_exact import permanent_ryser

logger = logging.getLogger('permlab.stats_lab')

EQUALITY_SE = 5.0
INEQUALITY_SE = 3.0
THETA_ANGLES = 8
THETA_SALT = 1
CONTOUR_GUARD = 1e-6
JENSEN_REFINE_LIMIT = 1024
JENSEN_REFINE_TOL = 1e-13
TAIL_RELATIVE_CUTOFF = 1e-18
MEAN_SHIFT_CAP = 12


class Welford:
    '''Online mean and variance'''

    def __init__(self) -> None:
        self.count = 0
        self.mean = 0.0
        self.m2 = 0.0

    def add(self, x: float) -> None:
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (x - self.mean)

    @property
    def variance(self) -> float:
        return self.m2 / (self.count - 1) if self.count > 1 else 0.0

    @property
    def std_error(self) -> float:
        return math.sqrt(self.variance / self.count) if self.count else 0.0


@dataclass
class TrialAggregate:
    trials: int
    mean: float
    std_error: float
    seed: int
    quantiles: dict[str, float] = field(default_factory=dict)
    ci95: tuple[float, float] = (0.0, 0.0)
    per_trial_path: str | None = None
    excluded: int = 0

    def within(self, target: float, margin_se: float = EQUALITY_SE) -> bool:
        '''Equality verdict: |mean - target| <= margin_se standard errors'''
        return abs(self.mean - target) <= margin_se * self.std_error + 1e-12 * max(1.0, abs(target))

    def below(self, bound: float, slack_se: float = INEQUALITY_SE) -> bool:
        return self.mean <= bound + slack_se * self.std_error

    def above(self, bound: float, slack_se: float = INEQUALITY_SE) -> bool:
        return self.mean >= bound - slack_se * self.std_error

    def to_record(self) -> dict:
        return asdict(self)


def aggregate(values, seed: int, per_trial_path: str | None = None, excluded: int = 0) -> TrialAggregate:
    '''Reduce per-trial values in index order'''
    acc = Welford()
    for x in values:
        acc.add(float(x))
    values = np.asarray(values, dtype=float)
    quantiles = {}
    if values.size:
        median, p90, p99 = np.quantile(values, [0.5, 0.9, 0.99])
        quantiles = {"median": float(median), "p90": float(p90), "p99": float(p99)}
    half = float(norm.ppf(0.975)) * acc.std_error
    return TrialAggregate(acc.count, acc.mean, acc.std_error, seed, quantiles,
                          (acc.mean - half, acc.mean + half), per_trial_path, excluded)


def map_trials(fn, trials: int, threads: int = 1) -> list:
    '''fn(0), ..., fn(trials - 1) in index order, in worker processes when threads > 1'''
    if threads <= 1 or trials < 2:
        return [fn(i) for i in range(trials)]
    chunksize = max(trials // (threads * 4), 1)
    with ProcessPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(fn, range(trials), chunksize=chunksize))


def write_per_trial(path: str, header: list[str], rows) -> str:
    '''CSV with a header row and one row per trial'''
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)
    logger.info(f"Wrote per-trial table {path}")
    return path


def _require_zero_mean(spec: EnsembleSpec) -> None:
    if spec.mu != 0:
        raise ParameterViolation(f"ensemble must have mean 0, got mu={spec.mu}", mu=spec.mu)


def moment_closed_form(n: int, r: float) -> float:
    '''E|g(r)|^2 / (n!)^2 = sum_{k<=n} r^(2k) / k!'''
    return math.fsum(r ** (2 * k) / math.factorial(k) for k in range(n + 1))


def _moment_trial(spec: EnsembleSpec, r: float, angles: int, index: int) -> tuple[float, float]:
    p = coeffs_via_ryser(sample(spec, index))
    fixed = abs(evaluate(p, r) / p.scale) ** 2
    if angles <= 0:
        return fixed, fixed
    gen = rng.stream(spec.seed, index, salt=THETA_SALT)
    theta = 2 * np.pi * (np.arange(angles) + gen.random()) / angles
    values = np.abs(evaluate(p, r * np.exp(1j * theta)) / p.scale) ** 2
    return fixed, float(values.mean())


@dataclass
class MomentReport:
    n: int
    r: float
    fixed_angle: TrialAggregate
    theta_average: TrialAggregate
    closed_form: float
    bound: float
    matches_closed_form: bool
    theta_below_bound: bool
    fixed_below_bound: bool

    def to_record(self) -> dict:
        return asdict(self)


def second_moment(spec: EnsembleSpec, r: float, trials: int, threads: int = 1,
                  angles: int = THETA_ANGLES, per_trial: str | None = None) -> MomentReport:
    '''
    E |g_A(r)|^2 / (n!)^2 at the fixed point r, and its average over ``angles``
    stratified angles, against the closed form and the e^(r^2) bound.
    '''
    _require_zero_mean(spec)
    if r < 0:
        raise ValueError(f"radius must be non-negative, got {r}")
    rows = map_trials(partial(_moment_trial, spec, r, angles), trials, threads)
    fixed = [row[0] for row in rows]
    averaged = [row[1] for row in rows]
    if per_trial:
        write_per_trial(per_trial, ["trial", "fixed_angle", "theta_average"],
                        [(i, f, a) for i, (f, a) in enumerate(rows)])

    closed = moment_closed_form(spec.n, r)
    bound = math.exp(r * r)
    fixed_agg = aggregate(fixed, spec.seed, per_trial)
    theta_agg = aggregate(averaged, spec.seed, per_trial)
    report = MomentReport(spec.n, r, fixed_agg, theta_agg, closed, bound,
                          fixed_agg.within(closed), theta_agg.below(bound), fixed_agg.below(bound))
    if not report.fixed_below_bound:
        logger.warning(f"Fixed-angle moment {fixed_agg.mean:.4g} exceeds e^(r^2)={bound:.4g} (flagged only)")
    logger.info(f"second moment n={spec.n} r={r}: {fixed_agg.mean:.6g} +- {fixed_agg.std_error:.2g} "
                f"(closed form {closed:.6g})")
    return report


def sensitivity_theta(spec: EnsembleSpec, r: float, trials: int, angles: int = THETA_ANGLES,
                      threads: int = 1) -> TrialAggregate:
    '''Angle-averaged sensitivity E_A E_theta |g(r e^(i theta))|^2 / (n!)^2'''
    _require_zero_mean(spec)
    rows = map_trials(partial(_moment_trial, spec, r, angles), trials, threads)
    return aggregate([row[1] for row in rows], spec.seed)


def _roots_trial(spec: EnsembleSpec, index: int) -> np.ndarray | None:
    try:
        return find_roots(coeffs_via_ryser(sample(spec, index))).moduli
    except NoConvergence:
        return None


@dataclass
class RootCountReport:
    n: int
    radii: list[float]
    counts: list[TrialAggregate]
    any_root: list[TrialAggregate]
    bounds: list[float]
    mean_below_bound: list[bool]
    probability_below_bound: list[bool]
    excluded: int

    def to_record(self) -> dict:
        return asdict(self)


def _collect_moduli(spec: EnsembleSpec, trials: int, threads: int) -> tuple[list[np.ndarray], int]:
    results = map_trials(partial(_roots_trial, spec), trials, threads)
    kept = [moduli for moduli in results if moduli is not None]
    excluded = trials - len(kept)
    if excluded:
        logger.warning(f"Excluded {excluded} of {trials} trials: root finder did not converge")
    return kept, excluded


def root_count_stats(spec: EnsembleSpec, radii, trials: int, threads: int = 1,
                     per_trial: str | None = None) -> RootCountReport:
    '''Mean of N_r and the frequency of N_r >= 1 per radius, against the 4 r^2 bound'''
    _require_zero_mean(spec)
    radii = [float(r) for r in radii]
    kept, excluded = _collect_moduli(spec, trials, threads)
    table = np.array([[np.count_nonzero(moduli <= r) for r in radii] for moduli in kept], dtype=float)
    table = table.reshape(len(kept), len(radii))
    if per_trial:
        write_per_trial(per_trial, ["trial"] + [f"N_{r:g}" for r in radii],
                        [[i] + [int(x) for x in row] for i, row in enumerate(table)])

    counts = [aggregate(table[:, i], spec.seed, per_trial, excluded) for i in range(len(radii))]
    any_root = [aggregate(table[:, i] >= 1, spec.seed, per_trial, excluded) for i in range(len(radii))]
    bounds = [4 * r * r for r in radii]
    return RootCountReport(spec.n, radii, counts, any_root, bounds,
                           [c.below(b) for c, b in zip(counts, bounds)],
                           [a.below(b) for a, b in zip(any_root, bounds)],
                           excluded)


@dataclass
class SafeDiskReport:
    epsilon: float
    frequency: TrialAggregate
    bound: float
    holds: bool

    def to_record(self) -> dict:
        return asdict(self)


def safe_disk_stats(spec: EnsembleSpec, epsilon: float, trials: int, threads: int = 1) -> SafeDiskReport:
    '''
    Frequency of {no root in |z| <= e, at most 32/e^3 roots in |z| <= 2/e} against 1 - 3e.
    '''
    _require_zero_mean(spec)
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    kept, excluded = _collect_moduli(spec, trials, threads)
    cap = 32 / epsilon ** 3
    events = [float(np.count_nonzero(m <= epsilon) == 0 and np.count_nonzero(m <= 2 / epsilon) <= cap)
              for m in kept]
    freq = aggregate(events, spec.seed, excluded=excluded)
    bound = 1 - 3 * epsilon
    return SafeDiskReport(epsilon, freq, bound, freq.above(bound))


@dataclass
class JensenRecord:
    lhs: float
    rhs: float
    gap: float
    quad_points: int

    def to_record(self) -> dict:
        return asdict(self)


def _circle_mean_log(p: InterpPolynomial, r: float, points: int) -> float:
    theta = 2 * np.pi * np.arange(points) / points
    return float(np.mean(np.log(np.abs(evaluate(p, r * np.exp(1j * theta))))))


def jensen_check(p: InterpPolynomial, r: float, quad_points: int = 4096, refine: bool = True,
                 roots=None) -> JensenRecord:
    '''
    Compare the circle average of ln|g| minus ln|g(0)| with sum_{|z_j| <= r} ln(r / |z_j|).

    The periodic trapezoid rule converges geometrically here, so refinement doubles the
    point count until successive values agree to 1e-13 (at most 1024x quad_points).
    '''
    if p.coeffs[0] == 0:
        raise ValueError("g(0) must be nonzero")
    if roots is None:
        roots = find_roots(p)
    moduli = roots.moduli
    near = np.abs(moduli - r) < CONTOUR_GUARD
    if np.any(near):
        raise RootOnContour(f"root within {CONTOUR_GUARD} of |z| = {r}",
                            root=[float(roots.roots[near][0].real), float(roots.roots[near][0].imag)])

    base = math.log(abs(evaluate(p, 0)))
    points = quad_points
    lhs = _circle_mean_log(p, r, points) - base
    if refine:
        while points < JENSEN_REFINE_LIMIT * quad_points:
            points *= 2
            finer = _circle_mean_log(p, r, points) - base
            settled = abs(finer - lhs) < JENSEN_REFINE_TOL
            lhs = finer
            if settled:
                break
    inside = moduli[moduli <= r]
    rhs = math.fsum(np.log(r / inside)) if inside.size else 0.0
    return JensenRecord(lhs, rhs, abs(lhs - rhs), points)


def mean_shift_closed_form(n: int, mu: float) -> float:
    '''E|Per(A + mu J) - Per(A)|^2 = (n!)^2 sum_{k=1}^n mu^(2k) / (n-k)!'''
    if mu == 0:
        return 0.0
    log_terms = [2 * gammaln(n + 1) + 2 * k * math.log(abs(mu)) - gammaln(n - k + 1) for k in range(1, n + 1)]
    return math.fsum(math.exp(t) for t in log_terms)


def _mean_shift_trial(spec: EnsembleSpec, mu: float, index: int) -> float:
    a = sample(spec, index)
    shifted = affine_combine(mu, a, 1.0)
    return abs(permanent_ryser(shifted) - permanent_ryser(a)) ** 2


@dataclass
class MeanShiftReport:
    n: int
    mu: float
    delta_squared: TrialAggregate
    closed_form: float
    bound: float | None
    matches_closed_form: bool
    below_bound: bool | None

    def to_record(self) -> dict:
        return asdict(self)


def mean_shift_sensitivity(n: int, mu: float, trials: int, seed: int = 0, threads: int = 1,
                           per_trial: str | None = None) -> MeanShiftReport:
    '''
    Monte Carlo mean of |Per(A + mu J) - Per(A)|^2 over zero-mean complex Gaussian A.
    The n! n^2 mu^2 bound is only checked when mu < 1/sqrt(n-1).
    '''
    if n > MEAN_SHIFT_CAP:
        raise ValueError(f"mean-shift trials limited to n <= {MEAN_SHIFT_CAP}, got {n}")
    spec = EnsembleSpec(n=n, mu=0.0, seed=seed)
    values = map_trials(partial(_mean_shift_trial, spec, mu), trials, threads)
    if per_trial:
        write_per_trial(per_trial, ["trial", "delta_squared"], enumerate(values))

    agg = aggregate(values, seed, per_trial)
    closed = mean_shift_closed_form(n, mu)
    bound = None
    below = None
    if n == 1 or abs(mu) < 1 / math.sqrt(n - 1):
        bound = math.factorial(n) * n * n * mu * mu
        below = agg.mean <= bound + EQUALITY_SE * agg.std_error
    logger.info(f"mean shift n={n} mu={mu}: {agg.mean:.6g} +- {agg.std_error:.2g} (closed form {closed:.6g})")
    return MeanShiftReport(n, mu, agg, closed, bound, agg.within(closed), below)


@dataclass
class TailRecord:
    m: int
    l: int
    beta: float
    partial_sum: float
    bound: float
    holds: bool

    def to_record(self) -> dict:
        return asdict(self)


def tail_bound_check(m: int, l: int, beta: float) -> TailRecord:
    '''sum_{k>=m} beta^-k k^l against 3 beta^-m m^l'''
    if m < 2 * l or beta < math.e or m < 1:
        raise ParameterViolation(f"bound requires m >= 2l and beta >= e (m={m}, l={l}, beta={beta})",
                                 m=m, l=l, beta=beta)
    log_beta = math.log(beta)
    terms = []
    k = m
    partial_sum = 0.0
    while True:
        term = math.exp(l * math.log(k) - k * log_beta)
        terms.append(term)
        partial_sum += term
        nxt = math.exp(l * math.log(k + 1) - (k + 1) * log_beta)
        if nxt < TAIL_RELATIVE_CUTOFF * partial_sum:
            break
        k += 1
    total = math.fsum(terms)
    bound = 3 * math.exp(l * math.log(m) - m * log_beta)
    return TailRecord(m, l, beta, total, bound, total <= bound)
