import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.interpolate import CubicSpline

from bieberbach.action import (CutoffFunction, action_difference, circle_leading_term,
                               half_line_moment, line_integral, radial_moment,
                               torus_leading_term, truncated_action)
from bieberbach.errors import DivergentMoment, TruncationTooTight
from bieberbach.spectra import (CircleDirac, Manifold, SpinStructure, TorusDirac,
                                admissible_spin_structures, circle_eigenvalues,
                                torus_eigenvalues)

H = F(1, 2)
G = CutoffFunction.gaussian()


def poisson_gaussian_circle(alpha, beta, lam, terms=60):
    """sum_k exp(-((alpha k + beta)/lam)^2) via Poisson summation."""
    c = lam * math.sqrt(math.pi) / alpha
    tot = 1.0
    for j in range(1, terms):
        tot += 2 * math.exp(-(math.pi * lam * j / alpha) ** 2) * math.cos(2 * math.pi * j * beta / alpha)
    return c * tot


@pytest.mark.parametrize("alpha, beta", [(1, H), (2, F(-1, 2)), (3, F(1, 2)), (6, F(7, 2)), (4, F(5, 2))])
@pytest.mark.parametrize("lam", [0.7, 2.0, 5.0])
def test_circle_gaussian_matches_poisson(alpha, beta, lam):
    d = CircleDirac(alpha, beta)
    v = truncated_action(circle_eigenvalues(d, math.ceil(12 * lam)), G, lam).value
    assert v == pytest.approx(poisson_gaussian_circle(alpha, float(beta), lam), rel=1e-13)


def test_standard_circle_example():
    v = truncated_action(circle_eigenvalues(CircleDirac(1, H), 60), G, 5).value
    assert abs(v - 5 * math.sqrt(math.pi)) < 1e-10


def test_zero_cutoff_gives_zero():
    f = CutoffFunction.tabulated([0.0, 1.0, 2.0], [0.0, 0.0, 0.0])
    assert truncated_action(circle_eigenvalues(CircleDirac(1, H), 3), f, 1).value == 0.0


@pytest.mark.parametrize("phi", ["pi/2", "2pi/3", "pi/4"])
def test_torus_action_close_to_leading_term(phi):
    s = torus_eigenvalues(TorusDirac(0, SpinStructure(H, H, H), token=phi), 60)
    v = truncated_action(s, G, 5).value
    assert v / torus_leading_term(phi, G, 5).value == pytest.approx(1, abs=1e-10)


def test_torus_leading_coefficient():
    # 8 pi / sin(phi) * M2 with M2 = sqrt(pi)/4
    assert torus_leading_term("pi/2", G, 1).value == pytest.approx(2 * math.pi ** 1.5, rel=1e-15)
    assert torus_leading_term("pi/2", CutoffFunction.exp_odd(), 1).value == 0.0


def test_circle_leading_examples():
    assert circle_leading_term(CircleDirac(1, H), G, 5).value == pytest.approx(5 * math.sqrt(math.pi))
    for b in (0, H, F(3, 7)):
        assert circle_leading_term(CircleDirac(2, b), G, 5).value == pytest.approx(2.5 * math.sqrt(math.pi))
    assert circle_leading_term(CircleDirac(3, 1), CutoffFunction.exp_odd(), 5).value == 0.0


@pytest.mark.parametrize("name, radial, line", [
    ("gaussian", math.sqrt(math.pi) / 4, math.sqrt(math.pi)),
    ("exp_even", 2.0, 2.0),
])
def test_declared_moments_match_quadrature(name, radial, line):
    f = CutoffFunction.from_name(name)
    assert radial_moment(f) == radial
    assert line_integral(f) == radial if name == "exp_even" else line_integral(f) == line
    q = half_line_moment(lambda r: f(np.array([r]))[0], 2, 60.0)
    assert q == pytest.approx(radial, rel=1e-12)


def test_tabulated_moments_by_quadrature():
    xs = np.linspace(-4, 4, 161)
    f = CutoffFunction.tabulated(xs, np.exp(-xs ** 2), rule="cubic")
    assert radial_moment(f) == pytest.approx(math.sqrt(math.pi) / 4, rel=1e-5)
    ref = CubicSpline(xs, np.exp(-xs ** 2)).integrate(-4, 4)
    assert line_integral(f) == pytest.approx(ref, rel=1e-10)


def test_divergent_moment():
    with pytest.raises(DivergentMoment):
        half_line_moment(lambda r: 1.0 / r, 0, 1.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.5, 4))
def test_action_linear_in_cutoff(a, b, lam):
    xs = np.linspace(-6, 6, 121)
    f1 = CutoffFunction.tabulated(xs, np.exp(-xs ** 2))
    f2 = CutoffFunction.tabulated(xs, np.exp(-np.abs(xs)) * np.cos(xs))
    mix = CutoffFunction.tabulated(xs, a * np.exp(-xs ** 2) + b * np.exp(-np.abs(xs)) * np.cos(xs))
    s = circle_eigenvalues(CircleDirac(1, F(1, 3)), math.ceil(6 * lam) + 1)
    lhs = truncated_action(s, mix, lam).value
    rhs = a * truncated_action(s, f1, lam).value + b * truncated_action(s, f2, lam).value
    assert lhs == pytest.approx(rhs, abs=1e-11 * (1 + abs(a) + abs(b)) * len(s))


def test_truncation_too_tight():
    s = circle_eigenvalues(CircleDirac(1, H), 10)
    with pytest.raises(TruncationTooTight):
        truncated_action(s, G, 5)
    with pytest.raises(TruncationTooTight):
        truncated_action(circle_eigenvalues(CircleDirac(1, H), 100), G, 5, tail_factor=30)
    with pytest.raises(TruncationTooTight):
        truncated_action(circle_eigenvalues(CircleDirac(1, H), 60), CutoffFunction.exp_even(), 5)


def test_nonpositive_lambda():
    with pytest.raises(ValueError):
        truncated_action(circle_eigenvalues(CircleDirac(1, H), 10), G, 0)


def test_symmetric_cases_exactly_zero():
    for s in admissible_spin_structures(Manifold.G2):
        if s.eps[1] == H or s.eps[2] == H:
            for f in (G, CutoffFunction.exp_odd()):
                assert action_difference(Manifold.G2, s, f, 7).value == 0.0


def test_g3_even_difference_small():
    s = SpinStructure(H, 0, 0, 1)
    assert abs(action_difference(Manifold.G3, s, G, 10).value) < 1e-8


def test_g4_odd_difference_tends_to_eta():
    s = SpinStructure(H, 0, 0, 1)
    f = CutoffFunction.exp_odd()
    errs = [abs(action_difference(Manifold.G4, s, f, lam).value - 1.5) for lam in (10, 25, 50)]
    assert errs[0] > errs[1] > errs[2]
    # second-order Abel correction: error * Lambda^2 approaches a constant
    assert errs[2] * 2500 == pytest.approx(errs[1] * 625, rel=0.05)
