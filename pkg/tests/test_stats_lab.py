import csv
import math

import numpy as np
import pytest

from permlab.common.errors import ParameterViolation, RootOnContour
from permlab.interp_poly import InterpPolynomial, coeffs_via_ryser
from permlab.matrix_core import EnsembleSpec, sample
from permlab.stats_lab import (
    Welford,
    aggregate,
    jensen_check,
    mean_shift_closed_form,
    mean_shift_sensitivity,
    moment_closed_form,
    root_count_stats,
    safe_disk_stats,
    second_moment,
    sensitivity_theta,
    tail_bound_check,
)


def test_welford_matches_numpy():
    values = np.random.default_rng(1).exponential(size=500)
    acc = Welford()
    for x in values:
        acc.add(x)
    assert acc.mean == pytest.approx(values.mean())
    assert acc.variance == pytest.approx(values.var(ddof=1))
    assert acc.std_error == pytest.approx(values.std(ddof=1) / math.sqrt(500))


def test_aggregate_quantiles():
    agg = aggregate(list(range(101)), seed=3)
    assert agg.trials == 101
    assert agg.quantiles["median"] == 50
    assert agg.quantiles["p90"] == 90
    assert agg.ci95[0] < agg.mean < agg.ci95[1]
    assert agg.seed == 3


def test_moment_at_zero_is_exactly_one():
    report = second_moment(EnsembleSpec(n=6, seed=2), 0.0, 20)
    assert report.fixed_angle.mean == 1.0
    assert report.fixed_angle.std_error == 0.0
    assert report.theta_average.mean == 1.0


def test_moment_closed_form_values():
    assert moment_closed_form(10, 1.0) == pytest.approx(sum(1 / math.factorial(k) for k in range(11)))
    assert moment_closed_form(3, 0.0) == 1.0


def test_moment_matches_closed_form():
    report = second_moment(EnsembleSpec(n=6, seed=5), 1.0, 2000)
    assert report.matches_closed_form
    assert report.theta_below_bound
    assert report.closed_form <= report.bound


def test_moment_needs_zero_mean():
    with pytest.raises(ParameterViolation):
        second_moment(EnsembleSpec(n=4, mu=0.3), 1.0, 10)


def test_theta_average_reported_separately():
    spec = EnsembleSpec(n=5, seed=1)
    theta = sensitivity_theta(spec, 0.8, 50)
    assert theta.trials == 50
    assert theta.mean == pytest.approx(second_moment(spec, 0.8, 50).theta_average.mean)


def test_aggregates_independent_of_threads():
    spec = EnsembleSpec(n=5, seed=9)
    serial = second_moment(spec, 1.0, 16, threads=1)
    parallel = second_moment(spec, 1.0, 16, threads=2)
    assert serial.fixed_angle == parallel.fixed_angle
    assert serial.theta_average == parallel.theta_average


def test_per_trial_csv(tmp_path):
    path = tmp_path / "trials.csv"
    second_moment(EnsembleSpec(n=4, seed=1), 0.5, 12, per_trial=str(path))
    with open(path) as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["trial", "fixed_angle", "theta_average"]
    assert len(rows) == 13
    assert [int(r[0]) for r in rows[1:]] == list(range(12))


def test_large_radius_counts_every_root():
    report = root_count_stats(EnsembleSpec(n=5, seed=2), [1e6], 20)
    assert report.counts[0].mean == 5
    assert report.counts[0].std_error == 0
    assert report.excluded == 0


def test_root_count_bound():
    report = root_count_stats(EnsembleSpec(n=8, seed=4), [0.5, 1.0], 300)
    assert all(report.mean_below_bound)
    assert report.bounds == [1.0, 4.0]


def test_safe_disk_frequency():
    report = safe_disk_stats(EnsembleSpec(n=6, seed=3), 0.3, 100)
    assert report.bound == pytest.approx(0.1)
    assert report.holds


def test_jensen_no_roots_inside():
    record = jensen_check(InterpPolynomial.from_roots([5.0, 6j, -4 - 4j]), 1.0, 1024)
    assert record.rhs == 0.0
    assert abs(record.lhs) < 1e-12


def test_jensen_single_root():
    a = 0.5 + 0.5j
    record = jensen_check(InterpPolynomial(1, [1.0, a]), 2 / abs(a), 4096)
    assert record.rhs == pytest.approx(math.log(2))
    assert record.gap < 1e-8


def test_jensen_random_instances():
    spec = EnsembleSpec(n=8, seed=12)
    checked, index = 0, 0
    while checked < 5:
        p = coeffs_via_ryser(sample(spec, index))
        index += 1
        try:
            record = jensen_check(p, 1.0, 4096)
        except RootOnContour:
            continue
        assert record.gap <= 1e-6
        checked += 1


def test_jensen_gap_decays_with_points():
    p = InterpPolynomial.from_roots([0.5, 1.8j, -2.0])
    coarse = jensen_check(p, 1.0, 16, refine=False).gap
    fine = jensen_check(p, 1.0, 64, refine=False).gap
    assert fine <= coarse / 16 or fine < 1e-12


def test_root_on_contour():
    with pytest.raises(RootOnContour):
        jensen_check(InterpPolynomial.from_roots([1.0, 3.0]), 1.0, 256)


def test_mean_shift_zero_mu():
    report = mean_shift_sensitivity(4, 0.0, 10, seed=1)
    assert report.delta_squared.mean == 0.0
    assert report.delta_squared.std_error == 0.0
    assert report.closed_form == 0.0


def test_mean_shift_one_by_one():
    report = mean_shift_sensitivity(1, 0.3, 20, seed=2)
    assert report.delta_squared.mean == pytest.approx(0.09)
    assert report.closed_form == pytest.approx(0.09)


def test_mean_shift_closed_form():
    n, mu = 5, 0.2
    expected = math.factorial(n) ** 2 * sum(mu ** (2 * k) / math.factorial(n - k) for k in range(1, n + 1))
    assert mean_shift_closed_form(n, mu) == pytest.approx(expected, rel=1e-12)


def test_mean_shift_statistics():
    report = mean_shift_sensitivity(5, 0.2, 2000, seed=3)
    assert report.matches_closed_form
    assert report.below_bound


def test_tail_geometric_case():
    record = tail_bound_check(10, 0, math.e)
    expected = math.e ** -10 / (1 - 1 / math.e)
    assert record.partial_sum == pytest.approx(expected, rel=1e-12)
    assert record.holds


def test_tail_example_point():
    assert tail_bound_check(20, 5, math.e).holds


@pytest.mark.parametrize("beta", [math.e, 3.0, 5.0])
def test_tail_grid(beta):
    for l in range(1, 11):
        for m in range(2 * l, 51):
            assert tail_bound_check(m, l, beta).holds


@pytest.mark.parametrize("m, l, beta", [(5, 3, math.e), (20, 5, 2.0)])
def test_tail_preconditions(m, l, beta):
    with pytest.raises(ParameterViolation):
        tail_bound_check(m, l, beta)
