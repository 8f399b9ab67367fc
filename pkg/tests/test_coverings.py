import math
from collections import Counter

import numpy as np
import pytest
from scipy import stats

from symfield import limit_engine as le
from symfield.coverings import (
    EDGE_EPS,
    Polygon,
    _product,
    monodromy,
    monodromy_samples,
    sample_covering,
    unit_square,
    wilson_statistics,
)
from symfield.diagrams import perm_cycle_type
from symfield.errors import GeometryError, ValidationError
from symfield.master_field import LassoWord, mc_wilson
from symfield.walk_sim import expected_fixed_fraction, sample_observables, transposition_class


def ct0(perm):
    return perm_cycle_type([int(x) + 1 for x in perm])


# -- geometry --------------------------------------------------------------------------


def test_polygon_validation():
    assert math.isclose(unit_square().area, 1.0)
    assert np.array_equal(Polygon.from_json(unit_square().to_json()).vertices, unit_square().vertices)
    with pytest.raises(GeometryError):
        Polygon(np.array([[0, 0], [0.5, 0.5], [0.5, 0], [0, 0.5]]))  # bow tie
    with pytest.raises(GeometryError):
        Polygon(np.array([[0, 0], [1.0, 0], [0, 0.5]]))  # vertex on the circle
    with pytest.raises(GeometryError):
        Polygon(np.array([[0, 0], [0.1, 0]]))
    with pytest.raises(ValidationError):
        Polygon.from_json({"points": []})


def test_winding_and_contains():
    sq = unit_square()
    pts = np.array([[0, 0], [0.49, -0.49], [0.6, 0], [0, 0.8]])
    assert sq.contains(pts).tolist() == [True, True, False, False]
    rev = Polygon(sq.vertices[::-1])
    assert np.array_equal(np.abs(rev.winding(pts)), np.abs(sq.winding(pts)))
    assert np.allclose(sq.edge_distance(np.array([[0, 0], [0.5, 0.2]])), [0.5, 0])


def test_contains_agrees_with_area_by_sampling():
    tri = Polygon(np.array([[-0.5, -0.3], [0.6, -0.2], [0.1, 0.7]]))
    rng = np.random.default_rng(0)
    pts = rng.uniform(-1, 1, size=(200000, 2))
    frac = tri.contains(pts).mean() * 4
    assert abs(frac - tri.area) < 0.01


# -- sampling ---------------------------------------------------------------------------


def test_zero_area_face_has_no_points():
    s = sample_covering(50, {"a": 0.0, "b": 0.3}, np.random.default_rng(1))
    assert len(s.per_face_index["a"]) == 0


def test_face_point_count_mean():
    N, a, n = 100, 0.8, 10000
    rng = np.random.default_rng(2)
    counts = np.array([len(sample_covering(N, {"f": a}, rng).per_face_index["f"]) for _ in range(n)])
    sigma = math.sqrt(N * a / 2 / n)
    assert abs(counts.mean() - N * a / 2) <= 4 * sigma


def test_transpositions_are_valid_and_points_in_disk():
    s = sample_covering(20, None, np.random.default_rng(3), avoid=unit_square())
    assert np.all(s.transpositions[:, 0] != s.transpositions[:, 1])
    assert np.all((s.transpositions >= 0) & (s.transpositions < 20))
    assert np.all(np.hypot(*s.positions.T) < 1)
    assert np.all(unit_square().edge_distance(s.positions) >= EDGE_EPS)


def test_sample_covering_needs_N_at_least_2():
    with pytest.raises(ValidationError):
        sample_covering(1)


# -- monodromy ---------------------------------------------------------------------------


def test_empty_loop_region_gives_identity():
    tiny = Polygon(np.array([[0, 0], [1e-6, 0], [0, 1e-6]]))
    s = sample_covering(30, None, np.random.default_rng(4))
    assert np.array_equal(monodromy(tiny, s), np.arange(30))
    assert np.array_equal(monodromy_samples(None, 7, 3)[0], np.arange(7))


def test_product_applies_later_transpositions_last():
    taus = np.array([[0, 1], [1, 2]])
    perm = _product(3, taus)
    # tau2 tau1 sends 0 -> 1 -> 2
    assert perm.tolist() == [2, 0, 1]


def test_lasso_multiplicativity():
    rng = np.random.default_rng(5)
    areas = {"a": 0.5, "b": 0.9}
    for _ in range(20):
        s = sample_covering(25, areas, rng)
        c1 = LassoWord((("a", 1), ("b", -1)), areas)
        c2 = LassoWord((("b", 1), ("a", 1), ("a", 1)), areas)
        both = LassoWord(c1.letters + c2.letters, areas)
        m1, m2 = monodromy(c1, s), monodromy(c2, s)
        assert np.array_equal(monodromy(both, s), m2[m1])


def test_order_invariance_in_law():
    rng = np.random.default_rng(6)
    N, n = 30, 3000
    plain, shuffled = Counter(), Counter()
    for _ in range(n):
        s = sample_covering(N, {"f": 0.6}, rng)
        taus = s.transpositions
        plain[ct0(_product(N, taus))] += 1
        shuffled[ct0(_product(N, taus[rng.permutation(len(taus))]))] += 1
    keys = [k for k in set(plain) | set(shuffled) if plain[k] + shuffled[k] >= 10]
    table = np.array([[plain[k] for k in keys], [shuffled[k] for k in keys]])
    assert stats.chi2_contingency(table).pvalue > 1e-4


# -- statistics ------------------------------------------------------------------------------


def test_constant_loop_fixed_fraction_is_one():
    ws = wilson_statistics(None, 12, 10)
    assert ws.fixed_fraction.mean == 1 and ws.fixed_fraction.stderr == 0


def test_simple_loop_fixed_fraction_law():
    N, a = 100, 0.7
    loop = LassoWord((("f", 1),), {"f": a})
    ws = wilson_statistics(loop, N, 20000, rng=7)
    assert abs(ws.fixed_fraction.mean - expected_fixed_fraction(N, a)) <= 4 * ws.fixed_fraction.stderr


def test_polygon_matches_walk_in_law():
    N = 60
    cov = wilson_statistics(unit_square(), N, 3000, rng=8, n_max=1).raw_fixed_fraction
    walk = sample_observables(transposition_class(N), 1.0, 3000, ["trace"], rng=9)["trace"]
    assert stats.ks_2samp(cov, walk).pvalue > 1e-4


def test_cycle_moments_vs_limit():
    N, a = 2000, 0.9
    loop = LassoWord((("f", 1),), {"f": a})
    ws = wilson_statistics(loop, N, 1500, rng=10, n_max=4)
    lc = le.transposition_limit()
    for n in range(1, 5):
        e = ws.cycle_moments[n]
        assert abs(e.mean - le.mnc(n, a, lc)) <= 4 * e.stderr + 5 / N
    js = ws.to_json()
    assert set(js["cycle_moments"]) == {"1", "2", "3", "4"}


def test_composite_lasso_matches_master_field_sampler():
    N = 40
    w = LassoWord((("a", 1), ("b", 1), ("a", -1), ("b", 1), ("c", 1)), {"a": 0.3, "b": 0.5, "c": 0.2})
    cov = wilson_statistics(w, N, 4000, rng=11)
    mc = mc_wilson(w, N, 4000, rng=12)
    assert abs(cov.fixed_fraction.mean - mc.mean) <= 4 * math.hypot(cov.fixed_fraction.stderr, mc.stderr)


def test_polygon_monodromy_requires_positions():
    s = sample_covering(10, {"a": 0.5}, np.random.default_rng(0))
    with pytest.raises(ValidationError):
        monodromy(unit_square(), s)
