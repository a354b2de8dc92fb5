import json
import math

import numpy as np
import pytest

from permlab.common.errors import EpsilonOutOfRange, NoClearCurve
from permlab.curve_planner import (
    PiecewiseCurve,
    build_family,
    candidate_curves,
    curve_distance,
    discretize,
    discretize_local,
    load_curve,
    plan_along,
    plan_to_endpoint,
    point_polyline_distance,
    select_curve,
    tube_clearance,
)
from permlab.interp_poly import InterpPolynomial, RootSet, find_roots


def root_set(points) -> RootSet:
    points = np.asarray(points, dtype=complex)
    return RootSet(points, np.zeros(points.size))


def sample_positions(family, count=50):
    return np.unique(np.linspace(0, len(family) - 1, count).round().astype(int))


def test_family_range():
    family = build_family(0.3)
    assert family.first == math.ceil(family.M / 8)
    assert len(family) == family.last - family.first + 1
    assert family[0].family_index == family.first
    assert family[-1].family_index == family.last
    assert family.angle(family.last) < 7 * math.pi / 16
    with pytest.raises(IndexError):
        family[len(family)]


def test_family_is_lazy():
    family = build_family(0.05)
    assert family.M == pytest.approx(32 / 0.05 ** 5)
    assert len(family) > 10 ** 6


@pytest.mark.parametrize("epsilon", [0.0, -0.1, 0.5, 1.0])
def test_epsilon_out_of_range(epsilon):
    with pytest.raises(EpsilonOutOfRange):
        build_family(epsilon)


def test_family_curve_shape():
    eps = 0.05
    family = build_family(eps)
    for position in sample_positions(family):
        curve = family[position]
        apex = curve.vertices[1]
        assert apex.real == pytest.approx(2 * eps)
        assert 1 / eps <= curve.endpoint.real <= 1 / eps + 2 * eps
        assert curve.endpoint.imag == 0
        assert curve.width == pytest.approx(math.pi * eps ** 6)
        assert curve.length <= 2 / eps
        assert np.all(np.abs(curve.vertices) <= 2 / eps + curve.width)


def test_formula_endpoint_records_raw_value():
    family = build_family(0.3, endpoint_mode="formula")
    curve = family[len(family) - 1]
    assert curve.endpoint == pytest.approx(math.tan(family.angle(curve.family_index)) / 0.3)
    assert curve.raw_endpoint == pytest.approx(curve.endpoint)
    clamped = build_family(0.3)[len(family) - 1]
    assert clamped.endpoint.real == pytest.approx(1 / 0.3 + 0.6)
    assert clamped.raw_endpoint == curve.raw_endpoint


def test_tubes_disjoint_outside_small_ball():
    eps = 0.3
    family = build_family(eps, endpoint_mode="formula")
    pairs = [(0, 64), (100, 200), (500, 1000), (0, len(family) - 1)]
    for i, j in pairs:
        assert curve_distance(family[i], family[j], exclude_radius=eps) > 2 * family.width


def test_curve_distance_basic():
    a = PiecewiseCurve(np.array([0, 1]))
    b = PiecewiseCurve(np.array([0, 1j, 1 + 1j]))
    assert curve_distance(a, b) == 0.0
    assert curve_distance(a, b, exclude_radius=0.5) == pytest.approx(math.sqrt(0.5), rel=1e-12)


def test_discretize_single_segment():
    plan = discretize(PiecewiseCurve(np.array([0, 1])), 0.3)
    assert plan.t == 4
    assert np.allclose(plan.deltas, 0.25)
    assert plan.delta_min == pytest.approx(0.25)
    assert plan.total_length == pytest.approx(1.0)


def test_discretize_reproduces_endpoint():
    curve = PiecewiseCurve(np.array([0, 0.3 + 1.7j, 3.1]))
    plan = discretize(curve, 0.07)
    total = complex(math.fsum(plan.deltas.real), math.fsum(plan.deltas.imag))
    assert abs(total - curve.endpoint) <= 1e-15 * abs(curve.endpoint)
    assert np.all(np.abs(plan.deltas) <= 0.07 * (1 + 1e-9))
    assert plan.points[-1] == pytest.approx(curve.endpoint)


def test_discretize_family_step_bound():
    family = build_family(0.3)
    curve = family[0]
    plan = discretize(curve, curve.width / math.e)
    assert np.all(np.abs(plan.deltas) <= curve.width / math.e * (1 + 1e-9))


def test_discretize_rejects_bad_step():
    with pytest.raises(ValueError):
        discretize(PiecewiseCurve(np.array([0, 1])), 0.0)


def test_curve_validation():
    with pytest.raises(ValueError):
        PiecewiseCurve(np.array([1, 2]))
    with pytest.raises(ValueError):
        PiecewiseCurve(np.array([0, 1, 1]))


def test_clearance_far_and_on_vertex():
    curve = PiecewiseCurve(np.array([0, 1 + 1j, 3]), width=1.0)
    far = tube_clearance(curve, root_set([20, -15j]))
    assert far.min_distance > 10
    assert far.root_free
    assert far.violating_root is None
    hit = tube_clearance(curve, root_set([1 + 1j, 50]))
    assert hit.min_distance == 0
    assert not hit.root_free
    assert hit.violating_root == 1 + 1j


def test_clearance_matches_dense_sampling(gaussian):
    from permlab.interp_poly import coeffs_via_ryser

    roots = find_roots(coeffs_via_ryser(gaussian(10, 4)))
    curve = PiecewiseCurve(np.array([0, 0.5 + 1j, 2.0]), width=0.01)
    t = np.linspace(0, 1, 5000)
    dense = np.concatenate([t * (0.5 + 1j), 0.5 + 1j + t * (1.5 - 1j)])
    sampled = np.min(np.abs(dense[:, None] - roots.roots[None, :]))
    exact = tube_clearance(curve, roots).min_distance
    assert exact <= sampled + 1e-12
    assert sampled - exact <= curve.length / 5000
    assert (exact > curve.width) == (sampled > curve.width) or abs(sampled - curve.width) < curve.length / 5000


def test_point_polyline_distance():
    d = point_polyline_distance([1j, 2 + 1j, -1], np.array([0, 2]))
    assert np.allclose(d, [1, 1, 1])


def far_polynomial(radius=100.0, n=4):
    return InterpPolynomial.from_roots(radius * np.exp(2j * np.pi * (np.arange(n) + 0.5) / n))


def test_first_clear_takes_first_index():
    curve = select_curve(far_polynomial(), 0.3, "first_clear")
    assert curve.family_index == build_family(0.3).first


def test_first_clear_skips_blocked_curve():
    family = build_family(0.3)
    blocked = family[0]
    t = np.linspace(0.1, 0.9, 12)
    on_curve = np.concatenate([t * blocked.vertices[1], blocked.vertices[1] + t * (blocked.endpoint - blocked.vertices[1])])
    p = InterpPolynomial.from_roots(on_curve)
    roots = root_set(on_curve)
    curve = select_curve(p, 0.3, "first_clear", roots=roots)
    assert curve.family_index != family.first
    assert tube_clearance(curve, roots).root_free


def test_best_clearance_is_root_free():
    roots = root_set([1 + 1j, 2 + 0.5j, 3.4])
    curve = select_curve(None, 0.3, "best_clearance", roots=roots)
    assert tube_clearance(curve, roots).root_free


def test_paper_random_is_seeded():
    family = build_family(0.3)
    first = select_curve(None, 0.3, "paper_random", seed=11)
    again = select_curve(None, 0.3, "paper_random", seed=11)
    assert first.family_index == again.family_index
    assert family.first <= first.family_index <= family.last


def test_unknown_strategy():
    with pytest.raises(ValueError):
        select_curve(far_polynomial(), 0.3, "greedy")


def test_candidates_end_at_endpoint():
    for curve in candidate_curves(2.0):
        assert curve.endpoint == 2.0
    assert len(candidate_curves(2.0)[0].vertices) == 2


def test_plan_keeps_root_ratio():
    roots = root_set([1.0 + 0.3j, 0.5 - 0.4j, 5.0])
    plan = plan_to_endpoint(None, roots, 2.0, math.e)
    bases = plan.steps.points[:-1]
    distances = np.min(np.abs(bases[:, None] - roots.roots[None, :]), axis=1)
    assert np.all(distances >= math.e * np.abs(plan.steps.deltas) * (1 - 1e-9))
    assert plan.steps.points[-1] == pytest.approx(2.0)
    assert plan.clearance == pytest.approx(tube_clearance(plan.curve, roots).min_distance)


def test_plan_blocked_straight_line():
    with pytest.raises(NoClearCurve):
        plan_to_endpoint(None, root_set([1.0]), 2.0, math.e, strategy="straight")


def test_plan_along_without_roots():
    plan = plan_along(PiecewiseCurve(np.array([0, 2])), root_set([]), math.e)
    assert plan.steps.t == 1


def test_load_curve(tmp_path):
    path = tmp_path / "curve.json"
    path.write_text(json.dumps({"vertices": [[1, 1], [2, 0]], "width": 0.1}))
    curve = load_curve(str(path))
    assert np.array_equal(curve.vertices, np.array([0, 1 + 1j, 2]))
    assert curve.family_index == -1
    assert curve.width == 0.1
    bare = tmp_path / "bare.json"
    bare.write_text(json.dumps([[0, 0], [3, 0]]))
    assert load_curve(str(bare)).endpoint == 3


def test_local_steps_grow_away_from_roots():
    roots = root_set([0.2 + 0.1j])
    curve = PiecewiseCurve(np.array([0j, 4.0]))
    steps = discretize_local(curve, roots, math.e)
    sizes = np.abs(steps.deltas)
    clearance = tube_clearance(curve, roots).min_distance
    # a uniform clearance/beta grid needs many more steps
    assert steps.t < math.ceil(4.0 * math.e / clearance) / 2
    assert sizes[-2] > sizes[0]
    assert steps.points[-1] == pytest.approx(4.0)


def test_local_steps_respect_ratio_on_detour():
    roots = root_set([1.0 + 0.05j, 1.5 - 0.2j, 0.3j])
    plan = plan_to_endpoint(None, roots, 2.0, math.e, strategy="auto")
    bases = plan.steps.points[:-1]
    distances = np.min(np.abs(bases[:, None] - roots.roots[None, :]), axis=1)
    assert np.all(distances / np.abs(plan.steps.deltas) >= math.e * (1 - 1e-9))


def test_local_steps_have_no_short_remnant():
    steps = discretize_local(PiecewiseCurve(np.array([0j, 1.0])), root_set([10.0]), math.e)
    # allowed 10/e > 1, so one step
    assert steps.t == 1
    steps = discretize_local(PiecewiseCurve(np.array([0j, 1.0])), root_set([-2.0]), 4.0)
    assert np.abs(steps.deltas).min() > 0.1


def test_local_step_limit():
    with pytest.raises(NoClearCurve):
        discretize_local(PiecewiseCurve(np.array([0j, 2.0])), root_set([1.0 + 1e-3j]), math.e, max_steps=20)


def test_blind_plan_is_single_straight_step():
    plan = plan_to_endpoint(None, None, 2.0, math.e, strategy="auto")
    assert plan.steps.t == 1
    assert plan.curve.curve_id == "straight"
    assert math.isinf(plan.clearance)


def test_curve_ids(tmp_path):
    curves = candidate_curves(2.0)
    assert curves[0].curve_id == "straight"
    assert curves[1].curve_id == "detour:+0.25"
    assert curves[2].curve_id == "detour:-0.25"
    assert build_family(0.3)[0].curve_id == f"family:{build_family(0.3).first}"
    path = tmp_path / "mine.json"
    path.write_text(json.dumps([[1, 1], [2, 0]]))
    assert load_curve(str(path)).curve_id == "json:mine.json"
    assert load_curve(str(path)).to_record()["curve_id"] == "json:mine.json"
