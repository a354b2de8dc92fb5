'''
Computational analytic continuation of f = ln g along a discretised curve.

Tables hold Taylor coefficients phi_k = f^(k)(y_i) / k! rather than raw derivatives,
which keeps every entry bounded near the root-distance scale. The n! normalisation of
the polynomial is carried as log_scale and re-added only when results are reported.

Two continuation modes share the shift. "truncated" builds one table at 0 and shrinks it
along the derivative schedule at every step. "recentred" rebuilds an m-term table at each
base point from the polynomial re-expanded there and uses the shifted table only to carry
the branch of Im f across the step.
'''

import cmath
import logging
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import comb, logsumexp

from permlab.common.errors import InsufficientDerivatives, NonFiniteTable, ScheduleUnderflow, ZeroConstantTerm
from permlab.curve_planner import plan_to_endpoint
from permlab.interp_poly import (
    COEFF_CAP,
    SUBMATRIX_BUDGET,
    InterpPolynomial,
    RootSet,
    coeffs_via_ryser,
    coeffs_via_submatrices,
    find_roots,
)
from permlab.matrix_core import ComplexMatrix, affine_combine

logger = logging.getLogger('permlab.cac_engine')

M_SEARCH_LIMIT = 10_000_000
CONTINUATIONS = ("recentred", "truncated")


class CacConfig(BaseModel):
    '''
    Continuation parameters.

    The truncated schedule keeps s_{i+1} = floor((ln beta / 2) s_i / ln(2 s_i / delta_min))
    coefficients per step. At m = 60 and beta = e that allows a single step, so the default
    continuation is "recentred", which needs the full polynomial.
    '''
    model_config = ConfigDict(extra="forbid", frozen=True)

    beta: float = Field(default=math.e, gt=1.0)
    delta: float = Field(default=1e-3, gt=0.0)
    m: int = Field(default=60, ge=1)
    schedule_floor: int = Field(default=4, ge=1)
    continuation: Literal["recentred", "truncated"] = "recentred"
    allow_small_beta: bool = False

    @model_validator(mode="after")
    def check_invariants(self) -> "CacConfig":
        if self.beta < math.e and not self.allow_small_beta:
            raise ValueError(f"beta={self.beta} is below e; set allow_small_beta to override")
        if self.m < 2 * self.schedule_floor:
            raise ValueError(f"m={self.m} must be at least 2*schedule_floor={2 * self.schedule_floor}")
        return self


@dataclass(frozen=True)
class LogTaylorTable:
    '''phi_k = f^(k)(y_i)/k! for k = 0..s at base point y_i'''
    base_point: complex
    phis: np.ndarray
    step_index: int = 0
    log_scale: float = 0.0

    @property
    def s(self) -> int:
        return len(self.phis) - 1


@dataclass
class CacResult:
    f_hat: complex
    g_hat: complex
    s_trace: list[int]
    err_budget: float
    endpoint: complex
    step_ratios: list[float] = field(default_factory=list)
    continuation: str = "recentred"


@dataclass
class ShiftedEstimate:
    '''Estimates of Per(J + b A') and b^-n Per(J + b A')'''
    per_shifted: complex
    per_rescaled: complex | None
    cac: CacResult | None
    curve_id: str | None = None


def _log_series(coeffs: np.ndarray, m: int) -> np.ndarray:
    '''
    Power-series logarithm: phi_0 = ln c_0 and for k >= 1
    phi_k = u_k - (1/k) sum_{j=1}^{k-1} j phi_j u_{k-j},  u_k = c_k / c_0 (0 past the data).
    '''
    if abs(coeffs[0]) == 0:
        raise ZeroConstantTerm("g vanishes at the base point, ln g has no expansion there")
    u = np.zeros(m + 1, dtype=np.complex128)
    known = min(m, len(coeffs) - 1)
    u[1:known + 1] = coeffs[1:known + 1] / coeffs[0]

    phis = np.zeros(m + 1, dtype=np.complex128)
    phis[0] = cmath.log(coeffs[0])
    weighted = np.zeros(m + 1, dtype=np.complex128)
    for k in range(1, m + 1):
        acc = np.dot(weighted[1:k], u[k - 1:0:-1]) if k > 1 else 0j
        phis[k] = u[k] - acc / k
        weighted[k] = k * phis[k]
    return phis


def log_taylor_from_coeffs(p: InterpPolynomial, m: int) -> LogTaylorTable:
    '''Exact log-Taylor table of g at 0 from its coefficients'''
    return LogTaylorTable(0j, _log_series(p.coeffs, m), 0, p.log_scale)


def log_taylor_from_oracle(a: ComplexMatrix, m: int, budget: float = SUBMATRIX_BUDGET) -> LogTaylorTable:
    '''Log-Taylor table of g_A at 0 from the first m submatrix-sum coefficients only'''
    k_max = min(m, a.n)
    coeffs = coeffs_via_submatrices(a, k_max, budget)
    return LogTaylorTable(0j, _log_series(coeffs, m), 0, math.lgamma(a.n + 1))


def recentre(coeffs: np.ndarray, y: complex) -> np.ndarray:
    '''Coefficients of g(y + w) in w: d_k = sum_j C(j, k) c_j y^(j-k)'''
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    j = np.arange(coeffs.size)
    gaps = j[None, :] - j[:, None]
    powers = np.where(gaps >= 0, complex(y) ** np.clip(gaps, 0, None), 0)
    return (comb(j[None, :], j[:, None]) * powers) @ coeffs


def _next_count(cfg: CacConfig, s: int, delta_min: float) -> int:
    # ln(2 s / delta_min) is held at 1 or more; below that the formula would grow the table
    denominator = max(math.log(2 * s / delta_min), 1.0)
    return math.floor(math.log(cfg.beta) / 2 * s / denominator)


def _trace(cfg: CacConfig, m: int, delta_min: float, t: int) -> list[int]:
    counts = [m]
    for _ in range(t):
        nxt = _next_count(cfg, counts[-1], delta_min)
        counts.append(nxt)
        if nxt < cfg.schedule_floor:
            break
    return counts


def min_feasible_m(cfg: CacConfig, delta_min: float, t: int) -> int:
    '''Smallest m whose schedule keeps every s_i >= schedule_floor for t steps'''
    def feasible(m: int) -> bool:
        counts = _trace(cfg, m, delta_min, t)
        return len(counts) == t + 1 and counts[-1] >= cfg.schedule_floor

    low = max(cfg.schedule_floor, 1)
    if feasible(low):
        return low
    high = low
    while not feasible(high):
        high *= 2
        if high > M_SEARCH_LIMIT:
            raise ScheduleUnderflow(f"no m below {M_SEARCH_LIMIT} supports {t} steps", t=t, delta_min=delta_min)
    while high - low > 1:
        mid = (low + high) // 2
        if feasible(mid):
            high = mid
        else:
            low = mid
    return high


def schedule(cfg: CacConfig, delta_min: float, t: int) -> list[int]:
    '''
    Derivative counts s_0 = m, ..., s_t of the truncated continuation.

    When 2 s_i / delta_min < e the log term is taken as 1, so a step longer than 2 s_i / e
    still halves the table (times ln beta) instead of growing it.
    '''
    if delta_min <= 0:
        raise ValueError(f"delta_min must be positive, got {delta_min}")
    counts = _trace(cfg, cfg.m, delta_min, t)
    if counts[-1] < cfg.schedule_floor:
        largest_t = len(counts) - 2
        raise ScheduleUnderflow(
            f"schedule drops below {cfg.schedule_floor} at step {len(counts) - 1} of {t}",
            largest_feasible_t=largest_t,
            smallest_feasible_m=min_feasible_m(cfg, delta_min, t),
            trace=counts,
        )
    return counts


def taylor_shift(tab: LogTaylorTable, delta: complex, s_next: int) -> LogTaylorTable:
    '''
    Re-expand the table at base_point + delta, keeping s_next + 1 coefficients:
    phi'_k = sum_{p=0}^{s-k} C(k+p, p) phi_{k+p} delta^p.
    '''
    if s_next > tab.s:
        raise InsufficientDerivatives(f"need {s_next} coefficients, table has {tab.s}",
                                      requested=s_next, available=tab.s)
    s = tab.s
    shifted = np.zeros(s_next + 1, dtype=np.complex128)
    with np.errstate(over='ignore', invalid='ignore'):
        for k in range(s_next + 1):
            p = np.arange(1, s - k + 1)
            # running product of (k+p)/p * delta gives C(k+p, p) delta^p
            weights = np.concatenate(([1.0 + 0j], np.cumprod((k + p) / p * delta)))
            shifted[k] = np.dot(weights, tab.phis[k:])
    if not np.all(np.isfinite(shifted)):
        bad = int(np.flatnonzero(~np.isfinite(shifted))[0])
        raise NonFiniteTable(f"coefficient {bad} overflowed shifting to {tab.base_point + delta}",
                             step=tab.step_index + 1, coefficient=bad)
    return LogTaylorTable(tab.base_point + delta, shifted, tab.step_index + 1, tab.log_scale)


def error_budget(step_sizes, s_trace: list[int], n: int, betas) -> float:
    '''
    Accumulated truncation bound sum_i kappa_i exp(sigma_t - sigma_i) with
    kappa_i = 3 n (2 s_{i-1} / |Delta_i|)^{s_i} beta_i^{-s_{i-1}}.
    '''
    sizes = np.abs(np.asarray(step_sizes, dtype=np.complex128))
    if sizes.size == 0:
        return 0.0
    betas = np.asarray(betas, dtype=float)
    if np.any(betas <= 1.0):
        return math.inf
    prev = np.asarray(s_trace[:-1], dtype=float)
    curr = np.asarray(s_trace[1:], dtype=float)
    log_kappa = math.log(3 * n) + curr * np.log(2 * prev / sizes) - prev * np.log(betas)
    sigma = np.cumsum(sizes)
    return float(np.exp(logsumexp(log_kappa + sigma[-1] - sigma)))


def recentred_budget(ratios, m: int, n: int) -> float:
    '''
    Bound on the error in ln g carried across the steps of a recentred run. Each root at
    ratio r = dist / |Delta| adds at most sum_{k>m} r^-k / k <= x^(m+1) / ((m+1)(1-x)),
    x = 1/r, and the nearest root bounds all n of them.
    '''
    ratios = np.asarray(ratios, dtype=float)
    if ratios.size == 0:
        return 0.0
    if np.any(ratios <= 1.0):
        return math.inf
    x = 1.0 / ratios
    log_terms = math.log(n) + (m + 1) * np.log(x) - math.log(m + 1) - np.log1p(-x)
    return float(np.exp(logsumexp(log_terms)))


def root_distance(points, roots: RootSet) -> np.ndarray:
    points = np.atleast_1d(np.asarray(points, dtype=np.complex128))
    if roots.roots.size == 0:
        return np.full(points.shape, np.inf)
    return np.min(np.abs(points[:, None] - roots.roots[None, :]), axis=1)


def _on_branch(value: complex, reference: complex) -> complex:
    '''value + 2 pi i k with k chosen so the imaginary part lands nearest the reference'''
    turns = round((reference.imag - value.imag) / (2 * math.pi))
    return value + 2j * math.pi * turns


def _exponentiate(phi0: complex, scale: float) -> complex:
    try:
        value = cmath.exp(phi0) * scale
    except OverflowError:
        value = complex(math.inf, 0.0)
    if not cmath.isfinite(value):
        raise NonFiniteTable(f"exp(f_hat) leaves the floating range: Re f_hat = {phi0.real + math.log(scale):.6g}",
                             log_abs=phi0.real + math.log(scale))
    return value


def cac_run(p: InterpPolynomial | ComplexMatrix, steps, cfg: CacConfig, roots: RootSet | None = None,
            coeff_cap: int = COEFF_CAP) -> CacResult:
    '''
    Continue ln g from 0 along the given steps and return exp of the final value.

    ``p`` may be the matrix itself: up to coeff_cap its polynomial is built, above it the
    table at 0 comes from the submatrix-sum oracle and only the truncated continuation is
    possible. With ``roots`` the per-step ratio of root distance to step size is measured and
    used in the error budget; otherwise cfg.beta is assumed.
    '''
    steps = np.asarray(steps, dtype=np.complex128).reshape(-1)
    if isinstance(p, ComplexMatrix) and p.n > coeff_cap:
        if cfg.continuation == "recentred":
            raise InsufficientDerivatives(f"recentred continuation needs the polynomial; n={p.n} exceeds "
                                          f"the coefficient cap {coeff_cap}", n=p.n, cap=coeff_cap)
        logger.info(f"n={p.n} above the coefficient cap {coeff_cap}, querying {cfg.m} oracle coefficients")
        polynomial, tab, n, scale = None, log_taylor_from_oracle(p, cfg.m), p.n, float(math.factorial(p.n))
    else:
        polynomial = coeffs_via_ryser(p, coeff_cap) if isinstance(p, ComplexMatrix) else p
        tab, n, scale = log_taylor_from_coeffs(polynomial, cfg.m), polynomial.n, polynomial.scale

    t = steps.size
    if t == 0:
        return CacResult(tab.phis[0] + tab.log_scale, _exponentiate(tab.phis[0], scale), [cfg.m], 0.0, 0j,
                         continuation=cfg.continuation)

    if roots is not None:
        bases = np.concatenate(([0j], np.cumsum(steps)[:-1]))
        ratios = root_distance(bases, roots) / np.abs(steps)
        if np.any(ratios < cfg.beta):
            logger.warning(f"{int(np.sum(ratios < cfg.beta))} steps violate the beta={cfg.beta:.3f} root ratio "
                           f"(worst {float(ratios.min()):.3f})")
    else:
        ratios = np.full(t, cfg.beta)

    if cfg.continuation == "truncated":
        counts = schedule(cfg, float(np.min(np.abs(steps))), t)
        for i, delta in enumerate(steps):
            tab = taylor_shift(tab, complex(delta), counts[i + 1])
            logger.debug(f"step {i + 1}/{t}: y={tab.base_point:.6g} s={tab.s} phi0={tab.phis[0]:.12g}")
        budget = error_budget(steps, counts, n, ratios)
    else:
        counts = [cfg.m] * (t + 1)
        for i, delta in enumerate(steps):
            carried = complex(taylor_shift(tab, complex(delta), 0).phis[0])
            base = tab.base_point + complex(delta)
            phis = _log_series(recentre(polynomial.coeffs, base), cfg.m)
            phis[0] = _on_branch(complex(phis[0]), carried)
            tab = LogTaylorTable(base, phis, i + 1, tab.log_scale)
            logger.debug(f"step {i + 1}/{t}: y={base:.6g} phi0={phis[0]:.12g} carried drift {abs(phis[0] - carried):.3g}")
        budget = recentred_budget(ratios, cfg.m, n)

    f_hat = complex(tab.phis[0]) + tab.log_scale
    g_hat = _exponentiate(complex(tab.phis[0]), scale)
    logger.info(f"CAC finished ({cfg.continuation}): t={t} s_t={counts[-1]} f_hat={f_hat:.12g} budget={budget:.3g}")
    return CacResult(f_hat, g_hat, counts, budget, tab.base_point, [float(r) for r in ratios], cfg.continuation)


def approx_permanent_shifted(a_prime: ComplexMatrix, b: float, plan, cfg: CacConfig,
                             polynomial: InterpPolynomial | None = None,
                             roots: RootSet | None = None, coeff_cap: int = COEFF_CAP) -> ShiftedEstimate:
    '''
    Estimate Per(J + b A') by continuation along ``plan`` and the rescaled b^-n Per(J + b A'),
    which is the permanent of the matrix J/b + A'.
    '''
    n = a_prime.n
    if b == 0:
        return ShiftedEstimate(complex(math.factorial(n)), None, None)
    endpoint = complex(np.sum(plan.steps.deltas))
    if abs(endpoint - b) > 1e-9 * max(1.0, abs(b)):
        raise ValueError(f"plan ends at {endpoint}, expected {b}")
    source = polynomial if polynomial is not None else a_prime
    result = cac_run(source, plan.steps.deltas, cfg, roots, coeff_cap)
    return ShiftedEstimate(result.g_hat, result.g_hat * b ** (-n), result, plan.curve.curve_id)


def approx_permanent_biased(a: ComplexMatrix, mu: float, cfg: CacConfig,
                            strategy: str = "auto", coeff_cap: int = COEFF_CAP) -> ShiftedEstimate:
    '''
    Permanent of a matrix with entrywise mean mu: A = mu J + A', b = 1/mu, and
    Per(A) = b^-n Per(J + b A'). Above coeff_cap the path is planned without roots.
    '''
    if mu == 0:
        raise ValueError("mean must be nonzero for the shifted representation")
    b = 1.0 / mu
    a_prime = affine_combine(-mu, a, 1.0)
    p = coeffs_via_ryser(a_prime, coeff_cap) if a_prime.n <= coeff_cap else None
    roots = find_roots(p) if p is not None else None
    plan = plan_to_endpoint(p, roots, b, cfg.beta, strategy=strategy)
    return approx_permanent_shifted(a_prime, b, plan, cfg, polynomial=p, roots=roots, coeff_cap=coeff_cap)
