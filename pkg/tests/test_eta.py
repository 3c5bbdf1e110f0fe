import math
from fractions import Fraction as F

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from bieberbach.errors import IllConditionedFit, NonpositiveP, TruncationTooTight
from bieberbach.eta import (DEFAULT_T_GRID, canonical_beta, eta_bieberbach, eta_circle,
                            eta_hurwitz_oracle, fit_bismut_freed, fit_lambda_max,
                            heat_trace_circle, sign_heat_trace_circle, sign_trace,
                            small_p_coefficients)
from bieberbach.spectra import (CircleDirac, Manifold, SpinStructure, TorusDirac,
                                asymmetric_part, circle_eigenvalues, scale_multiplicity,
                                torus_eigenvalues)
from bieberbach.verify import CASE_TABLE_CIRCLES

H = F(1, 2)


def series(alpha, beta, p, signed):
    """Direct summation of the (signed) heat trace, fsum over a wide k range."""
    kmax = int(60 / (p * alpha)) + 10
    terms = []
    for k in range(-kmax, kmax + 1):
        lam = alpha * k + beta
        w = math.exp(-p * abs(lam))
        terms.append((lam > 0) - (lam < 0) if signed else 1)
        terms[-1] *= w
    return math.fsum(terms)


@pytest.mark.parametrize("alpha, beta", CASE_TABLE_CIRCLES)
@pytest.mark.parametrize("p", [0.1, 0.5, 1, 2, 5])
def test_closed_forms_match_series(alpha, beta, p):
    d = CircleDirac(alpha, beta)
    ref = series(alpha, float(beta), p, False)
    assert abs(heat_trace_circle(d, p) - ref) <= 1e-12 * abs(ref)
    ref = series(alpha, float(beta), p, True)
    assert abs(sign_heat_trace_circle(d, p) - ref) <= 1e-12 * max(abs(ref), heat_trace_circle(d, p) * 1e-3)


def test_heat_trace_examples():
    assert heat_trace_circle(CircleDirac(1, H), 1) == pytest.approx(1 / math.sinh(0.5), rel=1e-14)
    assert heat_trace_circle(CircleDirac(2, 0), 1) == pytest.approx(1 + 2 * math.exp(-2) / (1 - math.exp(-2)), rel=1e-14)
    assert abs(sign_heat_trace_circle(CircleDirac(1, H), 0.3)) < 1e-15
    assert sign_heat_trace_circle(CircleDirac(2, F(-1, 2)), 1e-7) == pytest.approx(-0.5, abs=1e-9)
    assert sign_heat_trace_circle(CircleDirac(4, H), 0.01) == pytest.approx(0.75, abs=1e-3)


def test_nonpositive_p():
    with pytest.raises(NonpositiveP):
        heat_trace_circle(CircleDirac(1, H), 0)
    with pytest.raises(NonpositiveP):
        sign_heat_trace_circle(CircleDirac(1, H), -1)


def _symbolic_coefficients(alpha, beta_hat):
    """Laurent coefficients of the closed forms, computed symbolically."""
    p = sp.symbols("p", positive=True)
    a, b = sp.Rational(alpha), sp.Rational(beta_hat)
    g = sp.exp(-p * a) / (1 - sp.exp(-p * a))
    heat = sp.exp(-p * abs(b)) + 2 * sp.cosh(p * b) * g
    sign = sp.sign(b) * sp.exp(-p * abs(b)) - 2 * sp.sinh(p * b) * g
    hs = sp.series(heat, p, 0, 3).removeO()
    ss = sp.series(sign, p, 0, 3).removeO()
    return hs.coeff(p, 1), ss.coeff(p, 2), ss.coeff(p, 0), hs.coeff(p, -1)


@pytest.mark.parametrize("alpha, beta", CASE_TABLE_CIRCLES + [(5, F(2, 5)), (3, F(-4, 3))])
def test_small_p_coefficients_symbolic(alpha, beta):
    d = CircleDirac(alpha, beta)
    lin, quad, const, lead = _symbolic_coefficients(alpha, canonical_beta(d))
    c = small_p_coefficients(d)
    assert sp.Rational(c["linear"]) == sp.nsimplify(lin)
    assert sp.Rational(c["quadratic"]) == sp.nsimplify(quad)
    assert sp.Rational(eta_circle(d)) == sp.nsimplify(const)
    assert lead == sp.Rational(2, alpha)


@pytest.mark.parametrize("alpha, beta", CASE_TABLE_CIRCLES)
def test_small_p_convergence_rate(alpha, beta):
    d = CircleDirac(alpha, beta)
    ps = np.array([0.08, 0.04, 0.02, 0.01])
    err = np.array([abs(sign_heat_trace_circle(d, p) - float(eta_circle(d))) for p in ps])
    if err.max() < 1e-13:
        return
    slope = np.polyfit(np.log(ps), np.log(err), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.05)


@pytest.mark.parametrize("alpha, beta, eta", [
    (1, H, 0), (3, H, F(2, 3)), (6, F(7, 2), F(-1, 6)), (2, F(-1, 2), F(-1, 2)), (4, F(5, 2), F(-1, 4)),
])
def test_eta_circle_examples(alpha, beta, eta):
    d = CircleDirac(alpha, beta)
    assert eta_circle(d) == eta
    assert eta_hurwitz_oracle(d) == eta


@settings(max_examples=300, deadline=None)
@given(st.fractions(F(1, 10), 12, max_denominator=20), st.fractions(-30, 30, max_denominator=30))
def test_oracle_equivalence(alpha, beta):
    d = CircleDirac(alpha, beta)
    assert eta_circle(d) == eta_hurwitz_oracle(d)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 12), st.fractions(-6, 6, max_denominator=12), st.integers(-20, 20))
def test_eta_invariant_under_shift_by_alpha(alpha, beta, k):
    assert eta_circle(CircleDirac(alpha, beta + k * alpha)) == eta_circle(CircleDirac(alpha, beta))
    b = canonical_beta(CircleDirac(alpha, beta))
    assert -F(alpha, 2) < b <= F(alpha, 2)


@pytest.mark.parametrize("m, spin, eta", [
    (Manifold.G3, SpinStructure(H, 0, 0, 1), F(4, 3)),
    (Manifold.G3, SpinStructure(0, 0, 0, -1), F(-2, 3)),
    (Manifold.G4, SpinStructure(H, 0, 0, 1), F(3, 2)),
    (Manifold.G4, SpinStructure(H, 0, 0, -1), F(-1, 2)),
    (Manifold.G5, SpinStructure(H, 0, 0, 1), F(5, 3)),
    (Manifold.G5, SpinStructure(H, 0, 0, -1), F(-1, 3)),
    (Manifold.G2, SpinStructure(H, 0, 0, 1), F(-1)),
    (Manifold.G2, SpinStructure(H, 0, 0, -1), F(-1)),
])
def test_eta_bieberbach(m, spin, eta):
    r = eta_bieberbach(m, spin)
    assert r.formula_value == eta and r.oracle_value == eta
    assert abs(r.extrapolated_value - float(eta)) < 1e-3
    assert r.consistent
    assert r.discrepancy == (m is Manifold.G2 and spin.delta == 1)


def test_symmetric_quotients_have_zero_eta():
    r = eta_bieberbach(Manifold.G6, SpinStructure(H, H, H, 1, 1))
    assert r.formula_value == 0 and r.column is None


def test_fit_on_doubled_circle():
    s = scale_multiplicity(circle_eigenvalues(CircleDirac(3, H), fit_lambda_max(DEFAULT_T_GRID)), 2)
    fit = fit_bismut_freed(s)
    assert abs(fit.eta - 4 / 3) < 1e-3
    assert abs(fit.eta - 4 / 3) <= fit.error_estimate


def test_symmetric_spectra_have_zero_sign_trace():
    s = torus_eigenvalues(TorusDirac(0, SpinStructure(H, H, H), token="pi/2"), 12)
    assert sign_trace(s, 0.3) == 0.0
    s = scale_multiplicity(circle_eigenvalues(CircleDirac(1, H), fit_lambda_max(DEFAULT_T_GRID)), 2)
    assert abs(fit_bismut_freed(s).eta) < 1e-6


def test_fit_needs_enough_radius():
    s = asymmetric_part(Manifold.G4, SpinStructure(H, 0, 0, 1), 50)
    with pytest.raises(TruncationTooTight):
        fit_bismut_freed(s)


def test_fit_rejects_degenerate_grids():
    s = asymmetric_part(Manifold.G4, SpinStructure(H, 0, 0, 1), 900)
    with pytest.raises(ValueError):
        fit_bismut_freed(s, [0.5, 0.4, 0.3])
    with pytest.raises(ValueError):
        fit_bismut_freed(s, [0.05, 0.1, 0.2, 0.3, 0.4, 0.5])
    with pytest.raises(IllConditionedFit):
        fit_bismut_freed(s, np.linspace(0.30001, 0.3, 8))
