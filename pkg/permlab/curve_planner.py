'''
Root-avoiding piecewise-linear curves from 0 to an endpoint b, and their discretisation
into continuation steps.

The family is indexed by j: curve j climbs from 0 to a_j = 2e + i 2e tan(2 pi j / M) and
then descends to a real endpoint near 1/e, with M = 32 / e^5 (e is epsilon here).
Curves are built on demand from j; the family is never materialised.
'''

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from permlab.common import rng
from permlab.common.errors import EpsilonOutOfRange, NoClearCurve
from permlab.interp_poly import InterpPolynomial, RootSet, find_roots

logger = logging.getLogger('permlab.curve_planner')

EPSILON_MAX = 0.5
ANGLE_CAP = 7 * math.pi / 16
BEST_CLEARANCE_SAMPLES = 256
CURVE_SALT = 7

STRATEGIES = ("first_clear", "best_clearance", "paper_random")
ENDPOINT_MODES = ("clamp", "formula")
DETOUR_HEIGHTS = (0.25, 0.5, 1.0, 1.5, 2.0)
MAX_LOCAL_STEPS = 100_000


@dataclass(frozen=True, eq=False)
class PiecewiseCurve:
    '''
    Polyline through ``vertices`` starting at 0.

    family_index is -1 for custom curves and label names curves built outside the family.
    raw_endpoint holds the family formula's endpoint before clamping, or None when no
    clamping rule applied.
    '''
    vertices: np.ndarray
    family_index: int = -1
    epsilon: float = 0.0
    width: float = 0.0
    raw_endpoint: complex | None = None
    label: str = ""

    def __post_init__(self) -> None:
        vertices = np.array(self.vertices, dtype=np.complex128).reshape(-1)
        if vertices.size < 2:
            raise ValueError("a curve needs at least two vertices")
        if vertices[0] != 0:
            raise ValueError(f"curves start at 0, got {vertices[0]}")
        if np.any(np.diff(vertices) == 0):
            raise ValueError("consecutive vertices must be distinct")
        vertices.flags.writeable = False
        object.__setattr__(self, "vertices", vertices)

    @property
    def endpoint(self) -> complex:
        return complex(self.vertices[-1])

    @property
    def segment_lengths(self) -> np.ndarray:
        return np.abs(np.diff(self.vertices))

    @property
    def length(self) -> float:
        return float(self.segment_lengths.sum())

    @property
    def curve_id(self) -> str:
        if self.label:
            return self.label
        return f"family:{self.family_index}" if self.family_index >= 0 else "custom"

    def to_record(self) -> dict:
        return {
            "j": self.family_index,
            "curve_id": self.curve_id,
            "vertices": [[float(v.real), float(v.imag)] for v in self.vertices],
            "width": self.width,
            "epsilon": self.epsilon,
            "raw_endpoint": None if self.raw_endpoint is None
            else [self.raw_endpoint.real, self.raw_endpoint.imag],
        }


@dataclass(frozen=True)
class StepPlan:
    deltas: np.ndarray
    delta_min: float
    total_length: float

    @property
    def points(self) -> np.ndarray:
        '''Base points y_0 = 0, y_1, ..., y_t'''
        return np.concatenate(([0j], np.cumsum(self.deltas)))

    @property
    def t(self) -> int:
        return int(self.deltas.size)


@dataclass(frozen=True)
class TubeClearance:
    min_distance: float
    violating_root: complex | None
    width: float

    @property
    def root_free(self) -> bool:
        return self.min_distance > self.width


@dataclass(frozen=True)
class InterpolationPlan:
    '''A discretised curve whose every step keeps the root ratio beta'''
    curve: PiecewiseCurve
    steps: StepPlan
    clearance: float
    beta: float


def family_size_parameter(epsilon: float) -> float:
    return 32.0 / epsilon ** 5


class CurveFamily:
    '''
    The admissible curves for one epsilon, indexed lazily.

    Indices run over [ceil(M/8), floor(M/8 + e M)], cut off where the climb angle
    reaches 7 pi / 16.
    '''

    def __init__(self, epsilon: float, endpoint_mode: str = "clamp") -> None:
        if not 0 < epsilon < EPSILON_MAX:
            raise EpsilonOutOfRange(f"epsilon must lie in (0, {EPSILON_MAX}), got {epsilon}", epsilon=epsilon)
        if endpoint_mode not in ENDPOINT_MODES:
            raise ValueError(f"endpoint_mode must be one of {ENDPOINT_MODES}, got {endpoint_mode}")
        self.epsilon = epsilon
        self.endpoint_mode = endpoint_mode
        self.M = family_size_parameter(epsilon)
        self.width = math.pi * epsilon ** 6
        self.first = math.ceil(self.M / 8)
        last = math.floor(self.M / 8 + epsilon * self.M)
        angle_limit = math.ceil(ANGLE_CAP * self.M / (2 * math.pi)) - 1
        self.last = min(last, angle_limit)

    def __len__(self) -> int:
        return max(self.last - self.first + 1, 0)

    def __getitem__(self, position: int) -> PiecewiseCurve:
        if position < 0:
            position += len(self)
        if not 0 <= position < len(self):
            raise IndexError(f"family position {position} out of range")
        return self.curve(self.first + position)

    def __iter__(self):
        for j in self.indices():
            yield self.curve(j)

    def indices(self) -> range:
        return range(self.first, self.last + 1)

    def angle(self, j: int) -> float:
        return 2 * math.pi * j / self.M

    def curve(self, j: int) -> PiecewiseCurve:
        if not self.first <= j <= self.last:
            raise IndexError(f"index {j} outside [{self.first}, {self.last}]")
        eps = self.epsilon
        slope = math.tan(self.angle(j))
        apex = complex(2 * eps, 2 * eps * slope)
        raw = slope / eps
        if self.endpoint_mode == "clamp":
            endpoint = min(max(raw, 1 / eps), 1 / eps + 2 * eps)
        else:
            endpoint = raw
        return PiecewiseCurve(np.array([0j, apex, complex(endpoint)]), j, eps, self.width, complex(raw))


def build_family(epsilon: float, endpoint_mode: str = "clamp") -> CurveFamily:
    '''The lazily indexed curve family for ``epsilon``'''
    return CurveFamily(epsilon, endpoint_mode)


def discretize(curve: PiecewiseCurve, max_step: float) -> StepPlan:
    '''
    Split every segment into equal steps no longer than max_step.
    The final step absorbs rounding so the steps sum to the endpoint.
    '''
    if max_step <= 0:
        raise ValueError(f"max_step must be positive, got {max_step}")
    pieces = []
    for start, stop in zip(curve.vertices[:-1], curve.vertices[1:]):
        count = max(math.ceil(abs(stop - start) / max_step - 1e-12), 1)
        pieces.append(np.full(count, (stop - start) / count))
    deltas = np.concatenate(pieces)
    head = deltas[:-1]
    deltas[-1] = curve.endpoint - complex(math.fsum(head.real), math.fsum(head.imag))
    sizes = np.abs(deltas)
    return StepPlan(deltas, float(sizes.min()), float(sizes.sum()))


def point_polyline_distance(points, vertices: np.ndarray) -> np.ndarray:
    '''Distance from each point to the polyline through ``vertices``'''
    points = np.atleast_1d(np.asarray(points, dtype=np.complex128))
    starts = vertices[:-1][None, :]
    edges = np.diff(vertices)[None, :]
    rel = points[:, None] - starts
    t = np.clip((rel * edges.conj()).real / np.abs(edges) ** 2, 0.0, 1.0)
    return np.min(np.abs(rel - t * edges), axis=1)


def tube_clearance(curve: PiecewiseCurve, roots: RootSet) -> TubeClearance:
    '''Smallest root distance to the curve; the tube is root-free iff it exceeds the width'''
    if roots.roots.size == 0:
        return TubeClearance(math.inf, None, curve.width)
    distances = point_polyline_distance(roots.roots, curve.vertices)
    nearest = int(np.argmin(distances))
    min_distance = float(distances[nearest])
    violating = complex(roots.roots[nearest]) if min_distance <= curve.width else None
    return TubeClearance(min_distance, violating, curve.width)


def _clip_outside_ball(p0: complex, p1: complex, radius: float) -> list[tuple[complex, complex]]:
    '''Parts of segment [p0, p1] with |z| >= radius'''
    d = p1 - p0
    a = abs(d) ** 2
    b = 2 * (p0 * d.conjugate()).real
    c = abs(p0) ** 2 - radius ** 2
    disc = b * b - 4 * a * c
    if radius <= 0 or disc <= 0:
        return [(p0, p1)]
    root = math.sqrt(disc)
    t0, t1 = (-b - root) / (2 * a), (-b + root) / (2 * a)
    parts = []
    if t0 > 0:
        parts.append((p0, p0 + min(t0, 1.0) * d))
    if t1 < 1:
        parts.append((p0 + max(t1, 0.0) * d, p1))
    return [(s, e) for s, e in parts if s != e]


def _segments_cross(p0, p1, q0, q1) -> bool:
    def cross(u: complex, v: complex) -> float:
        return (u.conjugate() * v).imag

    d1, d2 = cross(p1 - p0, q0 - p0), cross(p1 - p0, q1 - p0)
    d3, d4 = cross(q1 - q0, p0 - q0), cross(q1 - q0, p1 - q0)
    return d1 * d2 < 0 and d3 * d4 < 0


def _segment_distance(p0, p1, q0, q1) -> float:
    if _segments_cross(p0, p1, q0, q1):
        return 0.0
    first = point_polyline_distance([q0, q1], np.array([p0, p1]))
    second = point_polyline_distance([p0, p1], np.array([q0, q1]))
    return float(min(first.min(), second.min()))


def curve_distance(c1: PiecewiseCurve, c2: PiecewiseCurve, exclude_radius: float = 0.0) -> float:
    '''Minimum distance between two polylines, ignoring the parts inside |z| < exclude_radius'''
    best = math.inf
    for s0, s1 in zip(c1.vertices[:-1], c1.vertices[1:]):
        for p0, p1 in _clip_outside_ball(complex(s0), complex(s1), exclude_radius):
            for t0, t1 in zip(c2.vertices[:-1], c2.vertices[1:]):
                for q0, q1 in _clip_outside_ball(complex(t0), complex(t1), exclude_radius):
                    best = min(best, _segment_distance(p0, p1, q0, q1))
    return best


def select_curve(polynomial: InterpPolynomial, epsilon: float, strategy: str = "first_clear",
                 roots: RootSet | None = None, endpoint_mode: str = "clamp", seed: int = 0) -> PiecewiseCurve:
    '''
    Choose a family curve whose tube is root-free.

    first_clear scans j upward, best_clearance takes the widest of 256 stratified indices,
    paper_random draws j uniformly without looking at the roots.
    '''
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of {STRATEGIES}, got {strategy}")
    family = build_family(epsilon, endpoint_mode)
    if len(family) == 0:
        raise NoClearCurve(f"no admissible indices for epsilon={epsilon}", best_clearance=0.0)

    if strategy == "paper_random":
        gen = rng.stream(seed, 0, salt=CURVE_SALT)
        j = int(gen.integers(family.first, family.last + 1))
        logger.info(f"Drew family index {j} of [{family.first}, {family.last}]")
        return family.curve(j)

    if roots is None:
        roots = find_roots(polynomial)

    best_j, best_clearance = None, -math.inf
    if strategy == "first_clear":
        candidates = family.indices()
    else:
        candidates = np.unique(np.linspace(family.first, family.last, BEST_CLEARANCE_SAMPLES).round().astype(int))

    for j in candidates:
        clearance = tube_clearance(family.curve(int(j)), roots)
        if clearance.min_distance > best_clearance:
            best_j, best_clearance = int(j), clearance.min_distance
        if strategy == "first_clear" and clearance.root_free:
            logger.info(f"First clear curve j={j} clearance={clearance.min_distance:.4g}")
            return family.curve(int(j))

    if best_clearance > family.width:
        logger.info(f"Best curve j={best_j} clearance={best_clearance:.4g}")
        return family.curve(best_j)
    raise NoClearCurve(f"no root-free tube of width {family.width:.3g}",
                       best_clearance=best_clearance, best_index=best_j)


def candidate_curves(endpoint: complex) -> list[PiecewiseCurve]:
    '''The straight segment to ``endpoint`` followed by two-segment detours through b/2 + i h'''
    endpoint = complex(endpoint)
    if endpoint == 0:
        raise ValueError("endpoint must be nonzero")
    curves = [PiecewiseCurve(np.array([0j, endpoint]), label="straight")]
    normal = 1j * endpoint
    for height in DETOUR_HEIGHTS:
        for sign in (1, -1):
            apex = endpoint / 2 + sign * height * normal
            curves.append(PiecewiseCurve(np.array([0j, apex, endpoint]), label=f"detour:{sign * height:+g}"))
    return curves


def discretize_local(curve: PiecewiseCurve, roots: RootSet, beta: float,
                     max_steps: int = MAX_LOCAL_STEPS) -> StepPlan:
    '''
    Walk each segment with steps no longer than dist(y, roots) / beta measured at the
    current base point y, so every step keeps the root ratio beta locally.

    When the rest of a segment is under two allowed steps it is halved instead of
    leaving a short remnant.
    '''
    if beta <= 1:
        raise ValueError(f"beta must exceed 1, got {beta}")
    pieces = []
    for start, stop in zip(curve.vertices[:-1], curve.vertices[1:]):
        start, stop = complex(start), complex(stop)
        direction = (stop - start) / abs(stop - start)
        position = start
        while True:
            remaining = abs(stop - position)
            allowed = float(np.min(np.abs(roots.roots - position))) / beta
            if allowed == 0:
                raise NoClearCurve(f"a root lies on the curve at {position}", best_clearance=0.0)
            if remaining <= allowed:
                pieces.append(stop - position)
                break
            step = remaining / 2 if remaining < 2 * allowed else allowed
            pieces.append(step * direction)
            position += step * direction
            if len(pieces) > max_steps:
                raise NoClearCurve(f"more than {max_steps} steps needed near {position}",
                                   best_clearance=allowed * beta)
    deltas = np.array(pieces, dtype=np.complex128)
    head = deltas[:-1]
    deltas[-1] = curve.endpoint - complex(math.fsum(head.real), math.fsum(head.imag))
    sizes = np.abs(deltas)
    return StepPlan(deltas, float(sizes.min()), float(sizes.sum()))


def plan_along(curve: PiecewiseCurve, roots: RootSet | None, beta: float) -> InterpolationPlan:
    '''
    Discretise ``curve`` with locally sized steps. Without roots every segment is one step.
    '''
    if roots is None or roots.roots.size == 0:
        steps = discretize(curve, float(curve.segment_lengths.max()))
        return InterpolationPlan(curve, steps, math.inf, beta)
    clearance = tube_clearance(curve, roots).min_distance
    if clearance <= 0:
        raise NoClearCurve("a root lies on the curve", best_clearance=clearance)
    steps = discretize_local(curve, roots, beta)
    logger.debug(f"Planned {steps.t} steps along {curve.curve_id}, clearance {clearance:.4g}")
    return InterpolationPlan(curve, steps, clearance, beta)


def plan_to_endpoint(p: InterpPolynomial | None, roots: RootSet | None, endpoint: complex, beta: float,
                     strategy: str = "auto") -> InterpolationPlan:
    '''
    Root-aware path from 0 to ``endpoint``.

    "straight" uses the segment [0, endpoint]; "auto" also tries the detours and keeps the
    one with the largest clearance, preferring fewer vertices on ties. With neither a
    polynomial nor roots only the straight segment is available.
    '''
    if strategy not in ("auto", "straight"):
        raise ValueError(f"path strategy must be 'auto' or 'straight', got {strategy}")
    if roots is None and p is not None:
        roots = find_roots(p)
    curves = candidate_curves(endpoint)
    if roots is None:
        logger.info("No roots available; planning the straight segment blind")
        return plan_along(curves[0], None, beta)
    if strategy == "straight":
        curves = curves[:1]

    scored = [(tube_clearance(c, roots).min_distance, -i, c) for i, c in enumerate(curves)]
    clearance, _, best = max(scored, key=lambda item: (item[0], item[1]))
    if clearance <= 0:
        raise NoClearCurve(f"every candidate path to {endpoint} meets a root", best_clearance=clearance)
    return plan_along(best, roots, beta)


def load_curve(path: str) -> PiecewiseCurve:
    '''
    Read a custom curve from JSON: either a list of [re, im] vertices or an object with a
    "vertices" key. A missing leading 0 vertex is inserted.
    '''
    with open(Path(path), 'r') as f:
        data = json.load(f)
    if isinstance(data, dict):
        width = float(data.get("width", 0.0))
        data = data["vertices"]
    else:
        width = 0.0
    vertices = [complex(re, im) for re, im in data]
    if not vertices or vertices[0] != 0:
        vertices.insert(0, 0j)
    return PiecewiseCurve(np.array(vertices), -1, 0.0, width, label=f"json:{Path(path).name}")
