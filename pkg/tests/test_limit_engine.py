import math

import numpy as np
import pytest
from scipy.linalg import expm

from symfield import diagrams as dg
from symfield import limit_engine as le
from symfield.errors import CapacityError, ValidationError
from symfield.walk_sim import estimate, transposition_class

TR = le.transposition_limit()
MIX = le.LimitClass(0.0, {2: 0.5, 3: 0.5})
SUB = le.LimitClass(0.0, {2: 0.5})
WIDE = le.LimitClass(0.0, {2: 0.2, 3: 0.3, 5: 0.1})
CLASSES = [TR, MIX, SUB, WIDE]


def test_limit_class_validation_and_json():
    assert le.LimitClass.from_json({"alpha": 0.0, "lambda": {"2": 1.0}}) == TR
    assert le.LimitClass.from_json(MIX.to_json()) == MIX
    for bad in ({"alpha": 1.5}, {"lambda": {"1": 0.5}}, {"lambda": {"2": 0.7, "3": 0.7}}, {"lambda": {"2": -1}}, []):
        with pytest.raises(ValidationError):
            le.LimitClass.from_json(bad)
    assert TR.evanescent and not le.LimitClass(0.3, {2: 1}).evanescent


# -- explicit moments --------------------------------------------------------------------


@pytest.mark.parametrize("lc", CLASSES)
@pytest.mark.parametrize("t", [0.0, 0.4, 1.0, 2.5])
def test_first_moment_is_exponential(lc, t):
    assert math.isclose(le.mnc(1, t, lc), math.exp(-t), rel_tol=1e-13)


@pytest.mark.parametrize("lc", CLASSES)
def test_time_zero_is_delta(lc):
    m = le.exclusive_moments(0.0, lc, 8)
    assert m[0] == 1 and np.all(m[1:] == 0)


@pytest.mark.parametrize("t", [0.3, 1.0, 1.7])
def test_transposition_closed_form(t):
    for n in range(1, 30):
        exact = math.exp(-n * t) * t ** (n - 1) * n ** (n - 2) / math.factorial(n - 1)
        assert math.isclose(le.mnc(n, t, TR), exact, rel_tol=1e-11)
    assert math.isclose(le.mnc(3, t, TR), 1.5 * t * t * math.exp(-3 * t), rel_tol=1e-12)


@pytest.mark.parametrize("k", [2, 3, 4])
def test_generic_path_matches_k_cycle_closed_form(k):
    lc = le.LimitClass(0.0, {k: 1.0})
    for t in (0.2, 0.9):
        m = le.exclusive_moments(t, lc, 25)
        for n in range(1, 26):
            assert math.isclose(m[n - 1], le.kcycle_mnc(n, t, k), rel_tol=1e-10, abs_tol=1e-300)


@pytest.mark.parametrize("lc", CLASSES)
def test_moments_form_a_subprobability(lc):
    for t in (0.2, 0.8, 1.5, 3.0):
        m = le.exclusive_moments(t, lc, 200)
        assert np.all(m >= 0) and m.sum() <= 1 + 1e-12


def test_macroscopic_class_is_rejected():
    with pytest.raises(ValidationError):
        le.mnc(2, 1.0, le.LimitClass(0.5, {2: 0.5}))


# -- phase transition ---------------------------------------------------------------------


def test_critical_time_examples():
    assert le.critical_time(TR) == 1.0
    assert math.isclose(le.critical_time(MIX), 2 / 3)
    assert le.critical_time(SUB) == 0.0


@pytest.mark.parametrize("lc,t", [(TR, 0.5), (TR, 1.2), (TR, 2.0), (MIX, 0.4), (MIX, 1.0), (SUB, 0.7), (WIDE, 1.0), (WIDE, 3.0)])
def test_atomic_mass_equals_certified_series(lc, t):
    a = le.atomic_mass(t, lc)
    s = le.certified_sum(t, lc, tol=1e-9)
    assert abs(a - s.value) <= 1e-6 * a + s.error
    below = t <= le.critical_time(lc) and abs(lc.total - 1) < 1e-12
    assert (abs(a - 1) < 1e-9) == below


def test_borel_mass_at_criticality():
    s = le.certified_sum(1.0, TR, tol=1e-7)
    assert abs(s.value - 1) <= 1e-6 and s.error <= 1e-7


def test_tail_bracket_is_a_bracket():
    K = 40
    for t in (0.5, 0.8, 1.4):
        lo, hi = le.tail_bracket(t, TR, K)
        tail = le.exclusive_moments(t, TR, 20000)[K:].sum()
        assert lo <= tail <= hi
    lo, hi = le.tail_bracket(1.0, TR, K)
    assert 0 < lo <= 1 - le.exclusive_moments(1.0, TR, K).sum() <= hi


def test_generic_near_critical_tail_raises():
    with pytest.raises(CapacityError):
        le.certified_sum(le.critical_time(MIX), MIX, tol=1e-9)


# -- spectral measure and distance ----------------------------------------------------------


def test_measure_at_time_zero_is_unit_atom():
    sm = le.spectral_measure(0.0, TR)
    assert sm.atom_weights[1] == 1 and sm.lebesgue_weight == 0 and math.isclose(sm.total_mass, 1)


@pytest.mark.parametrize("lc,t", [(TR, 0.6), (TR, 1.0), (TR, 1.8), (MIX, 1.5), (WIDE, 0.9)])
def test_measure_mass_and_moments(lc, t):
    sm = le.spectral_measure(t, lc)
    assert abs(sm.total_mass - 1) <= 1e-9 + 10 * sm.tail_error
    assert all(w >= 0 for w in sm.atom_weights.values()) and sm.lebesgue_weight >= 0
    for n in range(1, 13):
        divisor_sum = math.fsum(le.mnc(d, t, lc) for d in range(1, n + 1) if n % d == 0)
        assert abs(sm.moment(n) - divisor_sum) <= 1e-9


def test_no_lebesgue_part_before_criticality():
    for t in (0.2, 0.7, 1.0):
        assert le.spectral_measure(t, TR).lebesgue_weight <= 1e-9
    assert le.spectral_measure(1.3, TR).lebesgue_weight > 0.05


def test_measure_json():
    js = le.spectral_measure(0.5, TR).to_json()
    assert js["t"] == 0.5 and "1" in js["atoms"]


def test_mean_distance_profile():
    assert le.mean_distance(0.0, TR) == 0
    for t in (0.25, 0.5, 0.9):
        assert abs(le.mean_distance(t, TR) - t / 2) <= 1e-6
    grid = [le.mean_distance(t, TR) for t in np.linspace(0.1, 4, 25)]
    assert all(b > a for a, b in zip(grid, grid[1:]))
    assert grid[-1] < 1


def test_mean_distance_against_simulation():
    N, t = 2000, 1.6
    est = estimate(transposition_class(N), t, 3000, "normalized_distance", rng=31)
    assert abs(est.mean - le.mean_distance(t, TR)) <= 4 * est.stderr + 5 / N


@pytest.mark.parametrize("n", [1, 2, 3])
def test_mnc_against_simulation_for_three_cycles(n):
    from symfield.walk_sim import FiniteClass

    N, t = 2000, 0.8
    lc = le.LimitClass(0.0, {3: 1.0})
    est = estimate(FiniteClass(N, {3: 3}), t, 3000, f"m:{n}", rng=40 + n)
    assert abs(est.mean - le.mnc(n, t, lc)) <= 4 * est.stderr + 5 / N


# -- ODE system ------------------------------------------------------------------------------


def test_integer_partitions():
    assert [len(le.integer_partitions(k)) for k in range(1, 9)] == [1, 2, 3, 5, 7, 11, 15, 22]


@pytest.mark.parametrize("lc", [TR, MIX])
@pytest.mark.parametrize("t", [0.3, 1.0, 2.0])
def test_ode_reproduces_closed_form(lc, t):
    table = le.ode_evolve(lc, 6, t)
    cyc = {n: le.mnc(n, t, lc) for n in range(1, 7)}
    for mu, v in table.rows():
        assert abs(v - math.prod(cyc[c] for c in mu)) <= 1e-8


def test_ode_at_time_zero_and_empty_type():
    table = le.ode_evolve(MIX, 4, 0.0)
    for mu, v in table.rows():
        assert v == (1.0 if set(mu) <= {1} else 0.0)
    assert table[()] == 1.0


@pytest.mark.parametrize("alpha", [0.0, 0.3, 0.8])
def test_ode_first_level_is_exponential(alpha):
    lc = le.LimitClass(alpha, {2: 0.6, 3: 0.2})
    for t in (0.5, 1.5):
        assert math.isclose(le.ode_evolve(lc, 3, t)[(1,)], math.exp(-t), rel_tol=1e-9)


@pytest.mark.parametrize("alpha", [0.0, 0.4])
def test_ode_matches_matrix_exponential(alpha):
    lc = le.LimitClass(alpha, {2: 0.7, 4: 0.3})
    k, t = 4, 0.9
    types, A = le.ode_matrix(lc, k)
    y0 = np.zeros(len(types))
    y0[types.index((1,) * k)] = 1
    y = expm(A * t) @ y0
    table = le.ode_evolve(lc, k, t)
    for mu, v in zip(types, y):
        assert abs(table[mu] - v) <= 1e-9


def test_ode_values_are_class_functions():
    table = le.ode_evolve(TR, 4, 1.0)
    assert table[(1, 2, 1)] == table[(2, 1, 1)]


def test_ode_capacity():
    with pytest.raises(CapacityError):
        le.ode_evolve(TR, 9, 1.0)


# -- generator limits and log-cumulants -----------------------------------------------------------


def test_generator_limit_values():
    assert le.generator_limit(dg.identity(1), TR) == -1
    assert le.generator_limit(dg.from_permutation([2, 1]), TR) == 1
    assert le.generator_limit(dg.cycle(3), MIX) == 0.5
    assert le.generator_limit(dg.e1(), MIX) == 1
    assert le.generator_limit(dg.Partition.from_blocks([[1, -2], [2], [-1]]), MIX) == 0.5
    assert le.generator_limit(dg.Partition.from_blocks([[1, 2], [-1], [-2]]), TR) == 0


def test_log_cumulant_examples():
    for k in range(1, 6):
        assert le.log_cumulant(dg.identity(k), TR) == -k
    assert le.log_cumulant(dg.zero(2), TR) == 1
    assert le.log_cumulant(dg.from_permutation([2, 1]), MIX) == 0.5
    with pytest.raises(ValidationError):
        le.log_cumulant(dg.identity(2), le.LimitClass(0.5, {2: 0.5}))


@pytest.mark.parametrize("lc", [TR, MIX, WIDE])
@pytest.mark.parametrize("k", [2, 3])
def test_mobius_consistency_on_irreducible_partitions(lc, k):
    for p in dg.enumerate_partitions(k, "irreducible"):
        s = math.fsum(le.log_cumulant(q, lc) for q in dg.finer_compatible(p))
        assert abs(s - le.generator_limit(p, lc)) <= 1e-12


def test_zero_cumulant_derivative_matches_walk_limit():
    # d/dt (e^{-t} - e^{-2t}) at 0 is 1
    h = 1e-6
    deriv = ((math.exp(-h) - math.exp(-2 * h)) - 0) / h
    assert math.isclose(deriv, le.log_cumulant(dg.zero(2), TR), rel_tol=1e-5)
