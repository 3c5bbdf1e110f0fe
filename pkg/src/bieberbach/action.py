"""Truncated spectral-action sums and their Poisson leading terms."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
from scipy import integrate, special
from scipy.interpolate import CubicSpline

from . import kernels
from .errors import DivergentMoment, TruncationTooTight
from .spectra import (CircleDirac, WeightedSpectrum, as_fraction, case_decomposition,
                      circle_eigenvalues, parse_angle)

# relative size of the neglected tail allowed by ``truncated_action``
TAIL_TOLERANCE = 1e-14

# default lambda_max / Lambda per envelope; e^{-144} and e^{-40} respectively
DEFAULT_TAIL_FACTOR = {"gauss": 12, "exp": 40}

_QUAD_UPPER = {"gauss": 40.0, "exp": 80.0}


@dataclass(frozen=True)
class CutoffFunction:
    """Test function ``f`` applied to ``D / Lambda``.

    Built-in kinds carry their analytic moments; ``tabulated`` functions are
    interpolated from samples and vanish outside the sample grid.
    """

    kind: str
    grid: Optional[tuple] = None
    samples: Optional[tuple] = None
    rule: str = "linear"
    declared_moments: Optional[dict] = None
    phi0: Optional[float] = None

    KINDS = ("gaussian", "exp_even", "exp_odd", "tabulated")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown cutoff kind {self.kind!r}")
        if self.kind == "tabulated":
            if self.grid is None or self.samples is None:
                raise ValueError("tabulated cutoff needs grid and samples")
            g = np.asarray(self.grid, dtype=float)
            if len(g) < 2 or np.any(np.diff(g) <= 0):
                raise ValueError("tabulated grid must be strictly increasing")
            if len(self.samples) != len(g):
                raise ValueError("grid and samples differ in length")
            if self.rule not in ("linear", "cubic"):
                raise ValueError(f"unknown interpolation rule {self.rule!r}")

    @classmethod
    def gaussian(cls):
        return cls("gaussian", declared_moments={"integral": math.sqrt(math.pi),
                                                 "radial2": math.sqrt(math.pi) / 4})

    @classmethod
    def exp_even(cls):
        return cls("exp_even", declared_moments={"integral": 2.0, "radial2": 2.0})

    @classmethod
    def exp_odd(cls):
        return cls("exp_odd", declared_moments={"integral": 0.0, "radial2": 0.0}, phi0=1.0)

    @classmethod
    def tabulated(cls, grid, samples, rule="linear", phi0=None):
        return cls("tabulated", tuple(float(x) for x in grid),
                   tuple(float(y) for y in samples), rule, phi0=phi0)

    @classmethod
    def from_name(cls, name: str) -> "CutoffFunction":
        if name not in ("gaussian", "exp_even", "exp_odd"):
            raise ValueError(f"no built-in cutoff named {name!r}")
        return getattr(cls, name)()

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "gaussian":
            return np.exp(-x * x)
        if self.kind == "exp_even":
            return np.exp(-np.abs(x))
        if self.kind == "exp_odd":
            return np.sign(x) * np.exp(-np.abs(x))
        g = np.asarray(self.grid)
        y = np.asarray(self.samples)
        if self.rule == "linear":
            return np.interp(x, g, y, left=0.0, right=0.0)
        out = CubicSpline(g, y, extrapolate=False)(x)
        return np.nan_to_num(out, nan=0.0)

    def even_part(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return 0.5 * (self(x) + self(-x))

    def odd_part(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return 0.5 * (self(x) - self(-x))

    @property
    def parity(self) -> str:
        if self.kind in ("gaussian", "exp_even"):
            return "even"
        if self.kind == "exp_odd":
            return "odd"
        g = np.asarray(self.grid)
        probe = np.concatenate([g, -g])
        if np.allclose(self.odd_part(probe), 0.0, atol=0.0):
            return "even"
        if np.allclose(self.even_part(probe), 0.0, atol=0.0):
            return "odd"
        return "mixed"

    @property
    def envelope(self) -> str:
        if self.kind == "gaussian":
            return "gauss"
        if self.kind in ("exp_even", "exp_odd"):
            return "exp"
        return "compact"

    @property
    def support_radius(self) -> float:
        if self.kind != "tabulated":
            return math.inf
        return max(abs(self.grid[0]), abs(self.grid[-1]))

    def default_tail_factor(self) -> float:
        if self.envelope == "compact":
            return self.support_radius
        return DEFAULT_TAIL_FACTOR[self.envelope]

    def odd_profile_at_zero(self) -> float:
        """``phi(0)`` for ``f(x) = sign(x) phi(|x|)``; 0 when the odd part is continuous."""
        if self.phi0 is not None:
            return self.phi0
        return float(self.odd_part(np.array([1e-12]))[0])


@dataclass(frozen=True)
class ActionValue:
    value: float
    lam: float
    spectrum_descriptor: str


def _check_lambda(lam) -> float:
    lam = float(lam)
    if not lam > 0:
        raise ValueError(f"Lambda must be positive, got {lam}")
    return lam


def tail_bound(s: WeightedSpectrum, f: CutoffFunction, lam: float) -> float:
    """Upper bound on ``sum |f(lambda/Lambda)|`` over eigenvalues beyond ``s.lambda_max``.

    Assumes the counting function grows no faster than ``(lambda/lambda_max)^d``
    past the truncation radius, with ``d = s.growth_degree``; a factor 2 covers
    the lattice-point fluctuation at small radii.
    """
    r = float(s.lambda_max) / lam
    if f.envelope == "compact":
        return 0.0 if r >= f.support_radius else math.inf
    d = s.growth_degree
    n_tot = float(s.total_multiplicity()) + 1.0
    if f.envelope == "gauss":
        integral = 0.5 * special.gamma(d / 2) * special.gammaincc(d / 2, r * r)
    else:
        integral = special.gamma(d) * special.gammaincc(d, r)
    return 2.0 * n_tot * d * integral / r**d


def _canonical_order(s: WeightedSpectrum) -> np.ndarray:
    return np.lexsort((s.sign, np.abs(s.values)))


def truncated_action(s: WeightedSpectrum, f: CutoffFunction, lam,
                     tail_factor: Optional[float] = None) -> ActionValue:
    """``sum mult * f(lambda / Lambda)`` with a fixed order and compensated accumulation.

    Terms are added in ascending ``|lambda|`` (negative before positive on ties).
    Raises ``TruncationTooTight`` if the analytic tail bound exceeds
    ``TAIL_TOLERANCE`` times the absolute sum, or if ``tail_factor`` is given and
    ``lambda_max < tail_factor * Lambda``.
    """
    lam = _check_lambda(lam)
    if tail_factor is not None and float(s.lambda_max) < tail_factor * lam:
        raise TruncationTooTight(
            f"lambda_max={float(s.lambda_max)} is below {tail_factor} * Lambda = {tail_factor * lam}")
    order = _canonical_order(s)
    terms = s.multiplicities[order] * f(s.values[order] / lam)
    abs_sum = float(np.abs(terms).sum())
    tail = tail_bound(s, f, lam)
    if tail > TAIL_TOLERANCE * abs_sum and tail > 0:
        raise TruncationTooTight(
            f"tail bound {tail:.3e} exceeds {TAIL_TOLERANCE:g} of the sum {abs_sum:.3e} "
            f"(lambda_max/Lambda = {float(s.lambda_max) / lam:.3g}, kind={f.kind})")
    return ActionValue(kernels.neumaier_sum(np.ascontiguousarray(terms)), lam, s.descriptor)


def _quad(fn: Callable, upper: float, points=None) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(fn, 0.0, upper, epsabs=1e-300, epsrel=1e-12,
                                      limit=1000, points=points)
        except (integrate.IntegrationWarning, ZeroDivisionError, OverflowError) as exc:
            raise DivergentMoment(f"quadrature did not converge: {exc}") from None
    if not math.isfinite(val) or err > 1e-10 * abs(val) + 1e-300:
        raise DivergentMoment(f"quadrature error {err:.3e} too large for value {val:.3e}")
    return val


def half_line_moment(profile: Callable, power: int, upper: float, points=None) -> float:
    """``int_0^upper profile(rho) rho^power d rho`` by adaptive Gauss-Kronrod quadrature."""
    return _quad(lambda r: float(profile(r)) * r**power, upper, points)


def _moment(f: CutoffFunction, name: str, power: int) -> float:
    if f.declared_moments and name in f.declared_moments:
        return f.declared_moments[name]
    if f.envelope == "compact":
        upper = f.support_radius
        pts = sorted({abs(x) for x in f.grid if 0 < abs(x) < upper})
    else:
        upper = _QUAD_UPPER[f.envelope]
        pts = None
    if pts is not None and len(pts) > 400:
        pts = None
    m = half_line_moment(lambda r: f.even_part(np.array([r]))[0], power, upper, pts)
    return 2.0 * m if name == "integral" else m


def radial_moment(f: CutoffFunction) -> float:
    """``int_0^inf f_e(rho) rho^2 d rho``."""
    return _moment(f, "radial2", 2)


def line_integral(f: CutoffFunction) -> float:
    """``int_R f_e(x) dx``."""
    return _moment(f, "integral", 0)


def torus_leading_term(phi, f: CutoffFunction, lam) -> ActionValue:
    """Poisson leading term ``(8 pi / sin phi) Lambda^3 int_0^inf f_e(rho) rho^2 d rho``.

    This is twice (one eigenvalue of each sign per lattice point) the
    integral of ``f(|v|/Lambda)`` over R^3 divided by the covolume ``sin phi``
    of the lattice ``Z + tau Z``.
    """
    lam = _check_lambda(lam)
    angle, token = parse_angle(phi)
    coeff = 8.0 * math.pi / math.sin(angle)
    return ActionValue(coeff * lam**3 * radial_moment(f), lam,
                       f"leading[Sp3 phi={token or angle}]")


def circle_leading_term(d: CircleDirac, f: CutoffFunction, lam) -> ActionValue:
    """``(Lambda / alpha) int_R f_e``; the odd part has no term growing with Lambda."""
    lam = _check_lambda(lam)
    return ActionValue(lam * line_integral(f) / float(d.alpha), lam, f"leading[{d.label()}]")


def action_difference(m, s, f: CutoffFunction, lam, lambda_max=None) -> ActionValue:
    """``S(G, Lambda) - S(T3, Lambda) / n`` from the circle pieces of the decomposition.

    Equals ``2 S(added) - (2/n) S(removed)``; returns an exact 0 for cases whose
    spectrum is a pure rescaling of the torus spectrum.
    """
    lam = _check_lambda(lam)
    case = case_decomposition(m, s)
    label = f"{case.manifold.value}{s.label()} - T3/{case.order}"
    if case.added is None:
        return ActionValue(0.0, lam, label)
    if lambda_max is None:
        lambda_max = Fraction(math.ceil(f.default_tail_factor() * lam))
    lm = as_fraction(lambda_max)
    added = truncated_action(circle_eigenvalues(case.added, lm), f, lam).value
    removed = truncated_action(circle_eigenvalues(case.removed, lm), f, lam).value
    value = kernels.neumaier_sum(np.array([2.0 * added, -2.0 * float(case.prefactor) * removed]))
    return ActionValue(value, lam, label)
