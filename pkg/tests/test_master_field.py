import math

import numpy as np
import pytest

from symfield import limit_engine as le
from symfield.errors import NotReducible, ValidationError
from symfield.master_field import (
    LassoWord,
    analytic_eval,
    arbitrate,
    evaluate_word,
    figure_value_alt,
    figure_value_rules,
    figure_word,
    free_reduce,
    mc_wilson,
)
from symfield.walk_sim import expected_fixed_fraction


def word(areas, letters):
    return LassoWord.from_json({"areas": areas, "word": [list(x) for x in letters]})


LIBRARY = {
    "single": word({"a": 0.6}, [("a", 1)]),
    "square": word({"a": 0.4}, [("a", 1), ("a", 1)]),
    "split": word({"a": 0.3, "b": 0.5}, [("a", 1), ("b", -1)]),
    "commutator-like": word({"a": 0.4, "b": 0.7}, [("a", 1), ("b", 1), ("a", 1), ("b", -1)]),
    "figure": figure_word(0.3, 0.5, 0.2),
}


def test_lasso_json_round_trip_and_validation():
    w = LIBRARY["figure"]
    assert LassoWord.from_json(w.to_json()) == w
    for bad in ({"areas": {}, "word": [["a", 1]]}, {"areas": {"a": 1}, "word": [["a", 2]]},
                {"areas": {"a": -1}, "word": [["a", 1]]}, {"areas": {"a": 1}}, {"areas": {"a": 1}, "word": [[1, 1]]}):
        with pytest.raises(ValidationError):
            LassoWord.from_json(bad)


def test_empty_word_is_one():
    w = word({}, [])
    assert analytic_eval(w) == 1.0
    e = mc_wilson(w, 10, 50, rng=0)
    assert e.mean == 1.0 and e.stderr == 0.0


def test_single_letter_analytic():
    for u in (0.1, 0.8, 2.0):
        assert math.isclose(analytic_eval(word({"a": u}, [("a", 1)])), math.exp(-u))
        assert math.isclose(analytic_eval(word({"a": u}, [("a", -1)])), math.exp(-u))


def test_power_of_a_letter_is_divisor_sum():
    u = 0.7
    lc = le.transposition_limit()
    expected = le.mnc(1, u, lc) + le.mnc(3, u, lc)
    assert math.isclose(analytic_eval(word({"a": u}, [("a", 1)] * 3)), expected)


def test_free_reduction():
    assert free_reduce([("a", 1), ("a", -1)]) == []
    assert free_reduce([("a", 1), ("b", 1), ("b", -1), ("c", 1), ("a", -1)]) == [("c", 1)]


def test_figure_formula_via_rules():
    for s, t, u in ((0.3, 0.5, 0.2), (0.1, 1.2, 0.0), (1.0, 0.2, 0.7)):
        assert math.isclose(analytic_eval(figure_word(s, t, u)), figure_value_rules(s, t, u), rel_tol=1e-13)
    # the two closed forms coincide exactly when t = 1/2
    assert abs(figure_value_rules(0.3, 0.5, 0.2) - figure_value_alt(0.3, 0.5, 0.2)) < 1e-15
    assert abs(figure_value_rules(0.3, 1.0, 0.2) - figure_value_alt(0.3, 1.0, 0.2)) > 0.01


def test_not_reducible_boundary():
    with pytest.raises(NotReducible):
        analytic_eval(word({"a": 0.3, "b": 0.4}, [("a", 1), ("b", 1), ("a", 1), ("b", 1)]))
    with pytest.raises(ValidationError):
        analytic_eval(LIBRARY["single"], lc=le.LimitClass(0.5, {2: 0.5}))


def test_analytic_values_are_normalized_traces():
    rng = np.random.default_rng(0)
    for _ in range(50):
        s, t, u = rng.uniform(0, 3, size=3)
        assert -1 <= analytic_eval(figure_word(s, t, u)) <= 1
    for w in LIBRARY.values():
        assert -1 <= analytic_eval(w) <= 1


def test_relabeling_invariance():
    w = LIBRARY["figure"]
    r = w.relabel({"a": "x", "b": "y", "c": "z"})
    assert analytic_eval(r) == analytic_eval(w)
    assert mc_wilson(r, 60, 400, rng=5).mean == mc_wilson(w, 60, 400, rng=5).mean


def test_word_evaluation_order_is_right_to_left():
    # h(w1 w2) = h(w2) h(w1); faces given as inverse permutations
    a = np.array([[1, 2, 0]])  # images of h(a)
    b = np.array([[0, 2, 1]])
    inv = {"a": np.argsort(a, axis=1), "b": np.argsort(b, axis=1)}
    got = evaluate_word([("a", 1), ("b", 1)], inv)
    assert got.tolist() == [b[0][a[0]].tolist()]


@pytest.mark.parametrize("N", [10, 100])
def test_single_letter_mc_matches_finite_law(N):
    u = 0.8
    e = mc_wilson(word({"a": u}, [("a", 1)]), N, 20000, rng=N)
    assert abs(e.mean - expected_fixed_fraction(N, u)) <= 4 * e.stderr


@pytest.mark.parametrize("name", list(LIBRARY))
def test_analytic_agrees_with_monte_carlo(name):
    w = LIBRARY[name]
    e = mc_wilson(w, 500, 100_000, rng=list(LIBRARY).index(name) + 200)
    assert abs(analytic_eval(w) - e.mean) <= 4 * e.stderr + 0.02


def test_mc_with_workers():
    e = mc_wilson(LIBRARY["split"], 50, 2000, rng=3, workers=2)
    assert e.samples == 2000 and 0 < e.mean < 1


def test_arbitration_reports_both_values():
    w = figure_word(0.3, 1.0, 0.2)
    ref = figure_value_alt(0.3, 1.0, 0.2)
    arb = arbitrate(w, 200, 20000, rng=9, slack=0.005, reference=ref)
    js = arb.to_json()
    assert arb.flagged and js["flagged"]
    assert js["analytic"] == analytic_eval(w) and js["reference"] == ref
    assert abs(arb.mc.mean - arb.analytic) < abs(arb.mc.mean - ref)
