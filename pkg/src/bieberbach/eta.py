"""Heat traces and eta invariants of circle Dirac operators and Bieberbach quotients."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .errors import IllConditionedFit, NonpositiveP, TruncationTooTight
from .spectra import (CircleDirac, Manifold, SpinStructure, WeightedSpectrum,
                      asymmetric_part, case_decomposition)

# printed eta values, columns in case-table order
PRINTED_ETA_TABLE = {
    Manifold.G2: {"A": Fraction(1), "B": Fraction(-1)},
    Manifold.G3: {"A": Fraction(4, 3), "B": Fraction(-2, 3)},
    Manifold.G4: {"A": Fraction(3, 2), "B": Fraction(-1, 2)},
    Manifold.G5: {"A": Fraction(5, 3), "B": Fraction(-1, 3)},
}

DEFAULT_T_GRID = tuple(np.linspace(0.5, 0.05, 10).tolist())

# bound on the condition number of the column-scaled design matrix
MAX_CONDITION = 1e8

TRACE_TOLERANCE = 1e-12


def canonical_beta(d: CircleDirac) -> Fraction:
    """``beta`` shifted by a multiple of ``alpha`` into ``(-alpha/2, alpha/2]``."""
    a, b = d.alpha, d.beta
    r = b - a * math.floor(b / a)  # in [0, alpha)
    return r - a if r > a / 2 else r


def _check_p(p) -> float:
    p = float(p)
    if not p > 0:
        raise NonpositiveP(f"p must be positive, got {p}")
    return p


def _geometric_weights(p: float, alpha: float, beta: float):
    """``e^{-p alpha} / (1 - e^{-p alpha})`` times ``2 cosh(p beta)`` and ``2 sinh(p beta)``.

    Requires ``|beta| <= alpha / 2`` so every exponent below is nonpositive.
    """
    denom = -math.expm1(-p * alpha)
    if p * abs(beta) < 30.0:
        g = math.exp(-p * alpha) / denom
        return 2.0 * math.cosh(p * beta) * g, 2.0 * math.sinh(p * beta) * g
    up = math.exp(-p * (alpha - beta)) / denom
    down = math.exp(-p * (alpha + beta)) / denom
    return up + down, up - down


def heat_trace_circle(d: CircleDirac, p) -> float:
    """``sum_k exp(-p |alpha k + beta|)`` in closed form."""
    p = _check_p(p)
    alpha = float(d.alpha)
    beta = float(canonical_beta(d))
    even, _ = _geometric_weights(p, alpha, beta)
    return math.exp(-p * abs(beta)) + even


def sign_heat_trace_circle(d: CircleDirac, p) -> float:
    """``sum_k sign(alpha k + beta) exp(-p |alpha k + beta|)`` in closed form; sign(0) = 0."""
    p = _check_p(p)
    alpha = float(d.alpha)
    bq = canonical_beta(d)
    beta = float(bq)
    _, odd = _geometric_weights(p, alpha, beta)
    s = (bq > 0) - (bq < 0)
    return s * math.exp(-p * abs(beta)) - odd


def small_p_coefficients(d: CircleDirac) -> dict:
    """Low-order small-p coefficients of the circle traces.

    ``heat_trace = 2/(alpha p) + linear * p + O(p^3)`` and
    ``sign_heat_trace = eta + quadratic * p^2 + O(p^4)``.
    """
    a = d.alpha
    b = canonical_beta(d)
    ab = abs(b)
    return {
        "linear": a / 6 - ab + ab * ab / a,
        "quadratic": -b * (a - ab) * (a - 2 * ab) / (6 * a),
    }


def eta_circle(d: CircleDirac) -> Fraction:
    """``sign(b)(alpha - 2|b|)/alpha`` with ``b`` the canonical offset; 0 with a zero mode."""
    b = canonical_beta(d)
    if b == 0:
        return Fraction(0)
    s = 1 if b > 0 else -1
    return s * (d.alpha - 2 * abs(b)) / d.alpha


def eta_hurwitz_oracle(d: CircleDirac) -> Fraction:
    """Eta invariant from Hurwitz zeta special values.

    The positive eigenvalues are ``alpha (j + a_plus)`` and the negative ones
    ``-alpha (j + a_minus)`` for ``j >= 0`` with offsets in ``(0, 1]``, so
    ``eta(s) = alpha^{-s} (zeta(s, a_plus) - zeta(s, a_minus))`` and
    ``zeta(0, a) = 1/2 - a`` gives ``eta(0) = a_minus - a_plus``.
    """
    x = d.beta / d.alpha
    if x.denominator == 1:
        return Fraction(0)
    k_pos = math.floor(-x) + 1          # first k with alpha k + beta > 0
    k_neg = math.ceil(-x) - 1           # last k with alpha k + beta < 0
    a_plus = k_pos + x
    a_minus = -(k_neg + x)
    zeta0 = lambda a: Fraction(1, 2) - a
    return zeta0(a_plus) - zeta0(a_minus)


def sign_trace(s: WeightedSpectrum, t: float) -> float:
    """``sum mult * sign(lambda) exp(-t |lambda|)`` accumulated in ascending ``|lambda|``."""
    order = np.lexsort((s.sign, np.abs(s.values)))
    terms = s.multiplicities[order] * s.sign[order] * np.exp(-t * np.abs(s.values[order]))
    return kernels.neumaier_sum(np.ascontiguousarray(terms, dtype=np.float64))


def sign_trace_tail_bound(s: WeightedSpectrum, t: float) -> float:
    from scipy import special

    r = float(s.lambda_max) * t
    d = s.growth_degree
    n_tot = float(s.total_multiplicity()) + 1.0
    return 2.0 * n_tot * d * special.gamma(d) * special.gammaincc(d, r) / r**d


@dataclass(frozen=True)
class HeatTraceExpansion:
    """Fit of ``eta + A0 t^2 + B0 t^2 log t`` to the sign-weighted heat trace."""

    eta: float
    a0: float
    b0: float
    t_grid: tuple
    traces: tuple
    residuals: tuple
    condition: float
    error_estimate: float

    @property
    def max_residual(self) -> float:
        return max(abs(r) for r in self.residuals)


def _lstsq(design: np.ndarray, y: np.ndarray, weights: np.ndarray):
    design = design * weights[:, None]
    y = y * weights
    scale = np.linalg.norm(design, axis=0)
    scaled = design / scale
    cond = float(np.linalg.cond(scaled))
    coef, *_ = np.linalg.lstsq(scaled, y, rcond=None)
    return coef / scale, cond


def fit_bismut_freed(s: WeightedSpectrum, t_grid: Sequence[float] = DEFAULT_T_GRID) -> HeatTraceExpansion:
    """Least-squares small-time fit of the sign-weighted heat trace of ``s``.

    Residuals are weighted by ``t^-2`` (the size of the leading correction) so
    the fit is dominated by the small-time end where higher orders are small.
    The error estimate is twice the shift in the constant term when a ``t^4``
    column is added to the model, plus the largest residual.
    """
    t = np.asarray(t_grid, dtype=float)
    if len(t) < 6:
        raise ValueError("t_grid needs at least 6 points")
    if np.any(np.diff(t) >= 0) or t[-1] <= 0 or t[0] > 1:
        raise ValueError("t_grid must be strictly decreasing inside (0, 1]")
    tail = sign_trace_tail_bound(s, float(t[-1]))
    if tail >= TRACE_TOLERANCE:
        raise TruncationTooTight(
            f"trace tail bound {tail:.3e} at t={t[-1]} needs a larger lambda_max than {float(s.lambda_max)}")
    y = np.array([sign_trace(s, ti) for ti in t])
    design = np.column_stack([np.ones_like(t), t**2, t**2 * np.log(t)])
    w = t**-2
    coef, cond = _lstsq(design, y, w)
    if cond > MAX_CONDITION:
        raise IllConditionedFit(f"design condition {cond:.3e} exceeds {MAX_CONDITION:g}")
    resid = y - design @ coef
    wider, _ = _lstsq(np.column_stack([design, t**4]), y, w)
    err = 2.0 * abs(wider[0] - coef[0]) + float(np.abs(resid).max())
    return HeatTraceExpansion(float(coef[0]), float(coef[1]), float(coef[2]), tuple(t.tolist()),
                              tuple(y.tolist()), tuple(resid.tolist()), cond, err)


def fit_lambda_max(t_grid: Sequence[float]) -> Fraction:
    """Truncation radius making the sign-trace tail negligible at the smallest t."""
    return Fraction(math.ceil(45.0 / min(t_grid)))


@dataclass(frozen=True)
class EtaReport:
    manifold: Manifold
    spin: SpinStructure
    formula_value: Fraction
    oracle_value: Fraction
    extrapolated_value: float
    error_estimate: float
    column: Optional[str] = None
    printed_value: Optional[Fraction] = None
    agreement: dict = field(default_factory=dict)

    @property
    def discrepancy(self) -> bool:
        return self.printed_value is not None and self.printed_value != self.formula_value

    @property
    def consistent(self) -> bool:
        """Formula, oracle and extrapolation agree among themselves."""
        return self.agreement.get("formula_oracle", False) and \
            self.agreement.get("extrapolated_oracle", False)

    def to_json(self) -> dict:
        return {
            "manifold": self.manifold.value,
            "spin": self.spin.to_json(),
            "column": self.column,
            "formula": str(self.formula_value),
            "oracle": str(self.oracle_value),
            "extrapolated": self.extrapolated_value,
            "error_estimate": self.error_estimate,
            "printed_table": None if self.printed_value is None else str(self.printed_value),
            "discrepancy_flag": self.discrepancy,
            "agreement": dict(sorted(self.agreement.items())),
        }


def eta_bieberbach(m, s: SpinStructure, t_grid: Sequence[float] = DEFAULT_T_GRID) -> EtaReport:
    """Eta invariant of a quotient by formula, Hurwitz oracle and small-time extrapolation.

    Only the doubled circle spectrum added by the decomposition is asymmetric;
    the rescaled torus remainder contributes nothing.
    """
    case = case_decomposition(m, s)
    if case.added is None:
        zero = Fraction(0)
        return EtaReport(case.manifold, s, zero, zero, 0.0, 0.0,
                         agreement={"formula_oracle": True, "extrapolated_oracle": True})
    formula = 2 * eta_circle(case.added) - 2 * case.prefactor * eta_circle(case.removed)
    oracle = 2 * eta_hurwitz_oracle(case.added) - 2 * case.prefactor * eta_hurwitz_oracle(case.removed)
    fit = fit_bismut_freed(asymmetric_part(m, s, fit_lambda_max(t_grid)), t_grid)
    printed = PRINTED_ETA_TABLE.get(case.manifold, {}).get(case.column)
    agreement = {
        "formula_oracle": formula == oracle,
        "extrapolated_oracle": bool(abs(fit.eta - float(oracle)) <= fit.error_estimate),
        "printed": printed == formula,
    }
    return EtaReport(case.manifold, s, formula, oracle, fit.eta, fit.error_estimate,
                     case.column, printed, agreement)
