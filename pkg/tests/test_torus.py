from fractions import Fraction
from math import log, sqrt

import numpy as np
import pytest

from flattrace.errors import Degenerate, NotHyperbolic, NotUnimodular, PeriodTooLarge
from flattrace.torus import (
    amplitude_from_counts, birkhoff_sum, birkhoff_sums, enumerate_periodic_points, make_automorphism,
    min_periodic_distance, periodic_point_count, primitive_counts, primitive_period, separation_constant,
)
from flattrace.types import RationalPoint

from conftest import CAT_COUNTS, GOLDEN, LOG_GOLDEN, trace_recursion

CUBIC = ((0, 0, 1), (1, 0, 1), (0, 1, 0))


def test_cat_map_constants(cat):
    assert cat.dimension == 2
    assert cat.Lambda == pytest.approx(GOLDEN)
    assert cat.h_top == pytest.approx(LOG_GOLDEN)
    assert cat.unstable_log_jacobian == pytest.approx(LOG_GOLDEN)
    assert cat.h_top <= cat.entropy_bound + 1e-12
    assert str(cat) == "T=[[2,1],[1,1]]"


@pytest.mark.parametrize("matrix", [((1, 1), (0, 1)), ((0, 1), (1, 0)), ((0, -1), (1, 0))])
def test_not_hyperbolic(matrix):
    with pytest.raises(NotHyperbolic):
        make_automorphism(matrix)


@pytest.mark.parametrize("matrix", [((2, 0), (0, 1)), ((3, 1), (1, 1)), ((1, 2), (2, 4))])
def test_not_unimodular(matrix):
    with pytest.raises(NotUnimodular):
        make_automorphism(matrix)


def test_counts_match_trace_recursion(tables):
    for n in range(1, 13):
        assert trace_recursion(n) - 2 == CAT_COUNTS[n]
        assert tables(n).total_points == CAT_COUNTS[n]
        assert tables(n).determinant == CAT_COUNTS[n]


def test_amplitude_normalization(tables):
    for n in range(1, 13):
        assert tables(n).normalization() == pytest.approx(1.0, abs=1e-12)


def test_small_tables(tables):
    fixed = tables(1)
    assert len(fixed) == 1 and fixed.amplitude == 1.0
    assert fixed.orbits[0].representative == RationalPoint.of((0, 0), 1)

    two = tables(2)
    assert two.total_points == 5
    assert sorted(two.periods.tolist()) == [1, 2, 2]
    assert two.amplitude == pytest.approx(5 / 3, abs=1e-15)


def test_points_are_periodic_with_their_orbit_period(cat, tables):
    table = tables(6)
    power = cat.power(6)
    for orbit in table.orbits:
        for point in orbit.points:
            assert point.apply(power) == point
            assert primitive_period(cat, point, 6) == orbit.period
        assert orbit.weight == 320


def test_orbits_follow_the_map_from_the_smallest_point(cat, tables):
    table = tables(5)
    seen = set()
    for orbit in table.orbits:
        assert orbit.representative.sort_key == min(p.sort_key for p in orbit.points)
        for a, b in zip(orbit.points, orbit.points[1:] + orbit.points[:1]):
            assert cat.apply(a) == b
        seen.update(orbit.points)
    assert len(seen) == table.total_points
    keys = [orbit.representative.sort_key for orbit in table.orbits]
    assert keys == sorted(keys)


def test_orbit_count_identities(cat, tables):
    for n in (4, 6, 8, 12):
        counts = primitive_counts(cat, n)
        table = tables(n)
        assert sum(counts.values()) == table.total_points
        assert sum(p // m for m, p in counts.items()) == len(table)
        for m, p in counts.items():
            assert int(np.sum(table.periods == m)) * m == p


def test_amplitude_from_counts(cat, tables):
    for n in range(1, 13):
        assert amplitude_from_counts(cat, n) == pytest.approx(tables(n).amplitude, rel=1e-12)
    assert periodic_point_count(cat, 40) == trace_recursion(40) - 2


def test_birkhoff_sums_agree_with_orbit_sums(tables):
    table = tables(6)
    rng = np.random.default_rng(3)
    values = rng.standard_normal(table.total_points)
    pointwise = birkhoff_sums(table, values)
    for start, stop, m in zip(table.starts[:-1], table.starts[1:], table.periods):
        expected = birkhoff_sum(values[start:stop], 6, int(m))
        assert np.allclose(pointwise[start:stop], expected, atol=1e-12)


def test_birkhoff_sum_rejects_wrong_period():
    with pytest.raises(ValueError):
        birkhoff_sum([1.0, 2.0], 5, 2)


@pytest.mark.parametrize("n,expected", [
    (2, sqrt(5) / 5),
    (4, sqrt(5) / 15),
    (5, 1 / 11),
    (6, sqrt(5) / 40),
])
def test_min_periodic_distance(tables, n, expected):
    assert min_periodic_distance(tables(n)) == pytest.approx(expected, rel=1e-12)


def test_min_distance_methods_agree(tables):
    for n in range(2, 9):
        table = tables(n)
        assert min_periodic_distance(table) == pytest.approx(min_periodic_distance(table, method="pairs"), rel=1e-12)


def test_min_distance_needs_two_points(tables):
    with pytest.raises(Degenerate):
        min_periodic_distance(tables(1))


def test_separation_slope(cat, tables):
    for n in range(4, 13):
        distance = min_periodic_distance(tables(n))
        assert -2 / n * log(distance) <= log(1.05 * cat.Lambda) + 0.1
    assert separation_constant(cat, range(4, 9)) > 0


def test_budget(cat):
    with pytest.raises(PeriodTooLarge):
        enumerate_periodic_points(cat, 10, budget=10_000)


def test_three_dimensional_map():
    cubic = make_automorphism(CUBIC)
    assert cubic.dimension == 3
    for n in (3, 5, 7):
        table = enumerate_periodic_points(cubic, n)
        assert table.total_points == periodic_point_count(cubic, n)
        assert table.normalization() == pytest.approx(1.0, abs=1e-12)
        power = cubic.power(n)
        assert all(table.point(i).apply(power) == table.point(i) for i in range(table.total_points))
        if table.total_points > 1:
            assert min_periodic_distance(table) == pytest.approx(min_periodic_distance(table, method="pairs"), rel=1e-12)


def test_rational_point_canonical_form():
    assert RationalPoint.of((3, 7), 5) == RationalPoint((3, 2), 5)
    assert RationalPoint.of((2, 4), 6) == RationalPoint((1, 2), 3)
    assert RationalPoint.from_fractions([Fraction(1, 2), Fraction(3, 4)]) == RationalPoint((2, 3), 4)
    with pytest.raises(ValueError):
        RationalPoint((2, 4), 6)
    assert str(RationalPoint((1, 2), 3)) == "(1/3, 2/3)"
