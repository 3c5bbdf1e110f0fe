import json
from fractions import Fraction as F

import pytest

from bieberbach.action import CutoffFunction
from bieberbach.spectra import CircleDirac, Manifold, SpinStructure, admissible_spin_structures
from bieberbach.verify import (check_bismut_freed, check_divisibility, check_eta_table,
                               check_even_invariance, check_odd_eta_term,
                               check_scaling_identity, check_torus_leading_term, run_suite)

H = F(1, 2)


@pytest.mark.parametrize("m, spin, lm, divisor", [
    (Manifold.G2, SpinStructure(H, 0, 0, 1), 20, 2),
    (Manifold.G6, SpinStructure(H, H, H, 1, 1), 20, 4),
    (Manifold.G3, SpinStructure(H, 0, 0, 1), 15, 3),
    (Manifold.G5, SpinStructure(H, 0, 0, -1), 20, 6),
])
def test_divisibility_examples(m, spin, lm, divisor):
    r = check_divisibility(m, spin, lm)
    assert r.status == "pass"
    assert r.metrics["divisor"] == divisor


def test_divisibility_rejects_torus():
    with pytest.raises(ValueError):
        check_divisibility(Manifold.T3, SpinStructure(0, 0, 0), 5)


@pytest.mark.parametrize("kind, lam", [("gaussian", 10), ("gaussian", 2), ("exp_even", 10)])
def test_even_invariance(kind, lam):
    r = check_even_invariance(CutoffFunction.from_name(kind), lam)
    assert r.status == "pass"
    if kind == "gaussian" and lam == 10:
        assert r.metrics["max_abs_difference"] < 1e-8
    if kind == "exp_even":
        # the first-order Abel prediction accounts for the difference
        assert r.metrics["max_deviation_from_first_order_prediction"] < 0.05 * r.metrics["max_abs_difference"]


def test_even_invariance_rejects_odd_cutoff():
    with pytest.raises(ValueError):
        check_even_invariance(CutoffFunction.exp_odd(), 10)


def test_odd_eta_term_converges_at_second_order():
    r = check_odd_eta_term((10, 25, 50))
    assert r.metrics["monotone"]
    for case, row in r.metrics["cases"].items():
        assert row["error_times_lambda_sq"] == pytest.approx(row["expected_lambda_sq_coefficient"], rel=0.02), case
    assert r.metrics["cases"]["G4(1/2,0,0;delta=+1)"]["eta"] == "3/2"
    assert r.metrics["cases"]["G3(0,0,0;delta=-1)"]["eta"] == "-2/3"
    # with a tolerance matched to the Lambda^-2 rate the check passes
    assert check_odd_eta_term((10, 25, 50), tol=1e-3).status == "pass"


def test_odd_eta_term_schedule_validation():
    with pytest.raises(ValueError):
        check_odd_eta_term((10, 5, 50))


@pytest.mark.parametrize("pair", [
    (CircleDirac(2, H), F(0)), (CircleDirac(6, F(7, 2)), H), (CircleDirac(1, 0), F(0)),
])
def test_scaling_examples(pair):
    r = check_scaling_identity([pair], lam=10)
    assert r.status == "pass"
    assert r.metrics["max_abs_difference"] < 1e-8
    if pair[0] == CircleDirac(1, 0):
        assert r.metrics["max_abs_difference"] == 0.0


def test_eta_table_flags_g2():
    r = check_eta_table()
    assert r.status == "flagged"
    flagged = [row["case"] for row in r.metrics["rows"] if row["status"] == "flagged"]
    assert flagged == ["G2(1/2,0,0;delta=+1)"]


def test_bismut_freed_check():
    assert check_bismut_freed().status == "pass"


def test_torus_leading_term_check():
    r = check_torus_leading_term(lam=3, lambda_max=36)
    assert r.status == "pass"
    assert len(r.metrics["cases"]) == 24


def test_run_suite_reports_serializable():
    reps = run_suite("divisibility", lambda_max=8)
    assert len(reps) == sum(len(admissible_spin_structures(m)) for m in Manifold if m is not Manifold.T3)
    for r in reps:
        json.dumps(r.to_json(), sort_keys=True)
    with pytest.raises(ValueError):
        run_suite("nope")
