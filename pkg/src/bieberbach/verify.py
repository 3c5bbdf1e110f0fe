"""Named numerical checks with machine-readable pass/fail reports.

Every tolerance used by a check lives in ``TOLERANCES`` or one of the
``*_tolerance`` functions next to it, together with the bound it comes from.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from .action import (CutoffFunction, action_difference, torus_leading_term,
                     truncated_action)
from .eta import (DEFAULT_T_GRID, eta_bieberbach, eta_circle, fit_bismut_freed,
                  fit_lambda_max, small_p_coefficients)
from .spectra import (CircleDirac, Manifold, SpinStructure, admissible_spin_structures,
                      asymmetric_part, case_decomposition, circle_eigenvalues,
                      scale_multiplicity, subtract_spectrum, torus_eigenvalues,
                      TorusDirac, STANDARD_ANGLES)

PASS, FAIL, FLAGGED = "pass", "fail", "flagged"

TOLERANCES = {
    # floor for exponentially small Poisson corrections with a gaussian cutoff
    "gaussian_floor": 1e-8,
    # odd cutoff: distance of the difference from eta at the last scale
    "odd_eta": 1e-6,
    # small-time extrapolation of eta
    "bismut_freed": 1e-3,
    # ratio of the truncated torus action to its Poisson leading term
    "torus_leading": 1e-6,
}

# circle operators of the case tables, paired with the standard offsets
CASE_TABLE_CIRCLES = [
    (1, Fraction(1, 2)), (1, Fraction(0)), (2, Fraction(-1, 2)), (2, Fraction(3, 2)),
    (3, Fraction(1, 2)), (3, Fraction(-1)), (4, Fraction(1, 2)), (4, Fraction(5, 2)),
    (6, Fraction(1, 2)), (6, Fraction(7, 2)),
]


def _poisson_excess(lam: float, alpha: float) -> float:
    """Bound on ``|S(Sp1_{alpha,beta}) - Lambda sqrt(pi)/alpha|`` for the gaussian cutoff.

    Poisson summation gives ``(Lambda sqrt(pi)/alpha) sum_{j != 0} exp(-(pi Lambda j/alpha)^2) e^{...}``.
    """
    q = math.exp(-(math.pi * lam / alpha) ** 2)
    return lam * math.sqrt(math.pi) / alpha * 2.0 * q / (1.0 - q) if q < 1 else math.inf


def even_invariance_tolerance(kind: str, lam: float) -> float:
    """Allowed ``|S(G) - S(T3)/n|`` for an even cutoff at scale ``lam``.

    gaussian: twice the Poisson bound for ``2 S(n) + (2/n) S(1)`` at the worst
    group order n = 6, floored at ``TOLERANCES['gaussian_floor']``.
    exp_even: the difference is ``2p (c(n, b') - c(1, g)/n) + O(p^3)`` with
    ``p = 1/lam`` and ``|c(alpha, beta)| <= alpha/6 <= 1``, hence ``2.5/lam``.
    """
    if kind == "gaussian":
        bound = 2 * _poisson_excess(lam, 6) + (2 / 6) * _poisson_excess(lam, 1)
        return max(TOLERANCES["gaussian_floor"], 2.0 * bound)
    if kind == "exp_even":
        return 2.5 / lam
    raise ValueError(f"no even-invariance tolerance for cutoff kind {kind!r}")


def scaling_tolerance(kind: str, lam: float, alpha: float) -> float:
    """Allowed ``|S(Sp1_{1,g}) - alpha S(Sp1_{alpha,b})|``.

    gaussian: twice the Poisson bounds of both sides, floored.
    exp_even: ``p |alpha c(alpha, b) - c(1, g)| <= p (alpha^2/6 + 1/6)``, with 50% margin.
    """
    if kind == "gaussian":
        bound = _poisson_excess(lam, 1) + alpha * _poisson_excess(lam, alpha)
        return max(TOLERANCES["gaussian_floor"], 2.0 * bound)
    if kind == "exp_even":
        return 1.5 * (alpha * alpha / 6 + 1 / 6) / lam
    raise ValueError(f"no scaling tolerance for cutoff kind {kind!r}")


@dataclass
class CheckReport:
    check_name: str
    inputs: dict
    status: str
    metrics: dict = field(default_factory=dict)
    notes: str = ""

    @property
    def failed(self) -> bool:
        return self.status == FAIL

    def to_json(self) -> dict:
        return {"check_name": self.check_name, "inputs": self.inputs, "status": self.status,
                "metrics": self.metrics, "notes": self.notes}


def _case_label(m: Manifold, s: SpinStructure) -> str:
    return f"{m.value}{s.label()}"


def _all_cases(include_torus: bool = False):
    for m in Manifold:
        if m is Manifold.T3 and not include_torus:
            continue
        for s in admissible_spin_structures(m):
            yield m, s


def _asymmetric_cases():
    for m, s in _all_cases():
        if case_decomposition(m, s).asymmetric:
            yield m, s


def check_divisibility(m, s: SpinStructure, lambda_max=20) -> CheckReport:
    """Torus multiplicities (after removing the circle part) are divisible by n."""
    case = case_decomposition(m, s)
    if case.manifold is Manifold.T3:
        raise ValueError("divisibility is only defined for proper quotients")
    torus = torus_eigenvalues(case.torus, lambda_max)
    if case.removed is not None:
        torus = subtract_spectrum(torus, scale_multiplicity(
            circle_eigenvalues(case.removed, torus.lambda_max), 2))
    n = case.prefactor.denominator
    bad = np.flatnonzero(np.asarray(torus.mult_num) % n != 0) if torus.mult_den == 1 \
        else np.arange(len(torus))
    return CheckReport(
        "divisibility",
        {"manifold": case.manifold.value, "spin": s.label(), "lambda_max": str(torus.lambda_max)},
        PASS if len(bad) == 0 else FAIL,
        {"divisor": n, "entries": len(torus), "violations": int(len(bad)),
         "first_violations": [float(torus.values[i]) for i in bad[:5]]})


def check_even_invariance(f: CutoffFunction, lam: float, lambda_max=None) -> CheckReport:
    """``|S(G) - S(T3)/n|`` stays within the even-cutoff tolerance for every quotient."""
    if f.parity != "even":
        raise ValueError("even invariance needs an even cutoff")
    tol = even_invariance_tolerance(f.kind, lam)
    worst, worst_case, predicted_gap = 0.0, None, 0.0
    for m, s in _all_cases():
        diff = action_difference(m, s, f, lam, lambda_max).value
        if abs(diff) > worst or worst_case is None:
            worst, worst_case = abs(diff), _case_label(m, s)
        case = case_decomposition(m, s)
        if f.kind == "exp_even" and case.asymmetric:
            pred = 2 / lam * float(small_p_coefficients(case.added)["linear"]
                                   - case.prefactor * small_p_coefficients(case.removed)["linear"])
            predicted_gap = max(predicted_gap, abs(diff - pred))
    metrics = {"max_abs_difference": worst, "worst_case": worst_case, "tolerance": tol}
    if f.kind == "exp_even":
        metrics["max_deviation_from_first_order_prediction"] = predicted_gap
    return CheckReport("even_invariance", {"kind": f.kind, "lambda": lam},
                       PASS if worst <= tol else FAIL, metrics)


def check_odd_eta_term(lambda_schedule: Sequence[float] = (10, 25, 50),
                       f: Optional[CutoffFunction] = None,
                       tol: Optional[float] = None) -> CheckReport:
    """The odd-cutoff difference approaches ``eta * phi(0)`` along the schedule.

    Passes when the error is monotonically decreasing in every case and the
    final error is below ``tol``. The error of an exponential odd cutoff decays
    like ``Lambda^-2``; the expected coefficient is reported next to the
    observed ``error * Lambda^2``.
    """
    f = f or CutoffFunction.exp_odd()
    tol = TOLERANCES["odd_eta"] if tol is None else tol
    sched = [float(x) for x in lambda_schedule]
    if len(sched) < 3 or any(b <= a for a, b in zip(sched, sched[1:])):
        raise ValueError("lambda_schedule must be increasing with at least 3 values")
    phi0 = f.odd_profile_at_zero()
    cases, final_errors, monotone = {}, [], True
    for m, s in _all_cases():
        case = case_decomposition(m, s)
        diffs = [action_difference(m, s, f, lam).value for lam in sched]
        if not case.asymmetric:
            if any(d != 0.0 for d in diffs):
                monotone = False
                final_errors.append(max(abs(d) for d in diffs))
            continue
        eta = eta_bieberbach(m, s).formula_value
        errs = [abs(d - float(eta) * phi0) for d in diffs]
        mono = all(b < a for a, b in zip(errs, errs[1:]))
        monotone &= mono
        final_errors.append(errs[-1])
        entry = {"eta": str(eta), "errors": errs, "monotone": mono,
                 "error_times_lambda_sq": errs[-1] * sched[-1] ** 2}
        if f.kind == "exp_odd":
            entry["expected_lambda_sq_coefficient"] = abs(float(
                2 * small_p_coefficients(case.added)["quadratic"]))
        cases[_case_label(m, s)] = entry
    worst = max(final_errors)
    status = PASS if (monotone and worst < tol) else FAIL
    return CheckReport(
        "odd_eta_term", {"kind": f.kind, "lambda_schedule": sched, "tolerance": tol}, status,
        {"max_final_error": worst, "monotone": monotone, "cases": cases},
        "symmetric cases are exactly 0 at every scale")


def default_scaling_pairs():
    return [(CircleDirac(a, b), g) for a, b in CASE_TABLE_CIRCLES
            for g in (Fraction(0), Fraction(1, 2))]


def check_scaling_identity(pairs: Optional[Iterable] = None, f: Optional[CutoffFunction] = None,
                           lam: float = 10.0) -> CheckReport:
    """``S(Sp1_{1,gamma}) = alpha S(Sp1_{alpha,beta})`` up to the kind's tolerance."""
    f = f or CutoffFunction.gaussian()
    if f.parity != "even":
        raise ValueError("the scaling identity concerns even cutoffs")
    pairs = list(pairs) if pairs is not None else default_scaling_pairs()
    lm = Fraction(math.ceil(f.default_tail_factor() * lam))
    rows, ok = [], True
    for d, gamma in pairs:
        ref = CircleDirac(1, gamma)
        lhs = truncated_action(circle_eigenvalues(ref, lm), f, lam).value
        rhs = truncated_action(circle_eigenvalues(d, lm), f, lam).value
        diff = 0.0 if (d == ref) else abs(lhs - float(d.alpha) * rhs)
        tol = scaling_tolerance(f.kind, lam, float(d.alpha))
        ok &= diff <= tol
        rows.append({"alpha": str(d.alpha), "beta": str(d.beta), "gamma": str(gamma),
                     "abs_difference": diff, "tolerance": tol})
    return CheckReport("scaling_identity", {"kind": f.kind, "lambda": lam},
                       PASS if ok else FAIL,
                       {"max_abs_difference": max(r["abs_difference"] for r in rows), "pairs": rows})


def check_eta_table() -> CheckReport:
    """Formula, oracle and extrapolation against the printed eta table.

    ``flagged`` when formula and oracle agree with each other but not with the
    printed value.
    """
    rows, statuses = [], []
    for m, s in _asymmetric_cases():
        r = eta_bieberbach(m, s)
        if not r.consistent:
            st = FAIL
        elif r.discrepancy:
            st = FLAGGED
        else:
            st = PASS
        statuses.append(st)
        rows.append({"case": _case_label(m, s), "status": st, **r.to_json()})
    status = FAIL if FAIL in statuses else FLAGGED if FLAGGED in statuses else PASS
    return CheckReport("eta_table", {}, status, {"rows": rows},
                       "G2 column A: both delta give 2*eta = -1; printed value +1")


def check_bismut_freed(t_grid: Sequence[float] = DEFAULT_T_GRID) -> CheckReport:
    """Small-time extrapolation recovers eta for every asymmetric case."""
    tol = TOLERANCES["bismut_freed"]
    rows, worst = [], 0.0
    for m, s in _asymmetric_cases():
        spec = asymmetric_part(m, s, fit_lambda_max(t_grid))
        fit = fit_bismut_freed(spec, t_grid)
        eta = float(eta_bieberbach(m, s).formula_value)
        err = abs(fit.eta - eta)
        worst = max(worst, err)
        rows.append({"case": _case_label(m, s), "eta": eta, "fit": fit.eta, "error": err,
                     "error_estimate": fit.error_estimate, "condition": fit.condition})
    return CheckReport("bismut_freed", {"t_grid": list(t_grid), "tolerance": tol},
                       PASS if worst < tol else FAIL, {"max_error": worst, "cases": rows})


def check_torus_leading_term(lam: float = 5.0, lambda_max=60) -> CheckReport:
    """Truncated gaussian torus action against its Poisson leading term."""
    f = CutoffFunction.gaussian()
    tol = TOLERANCES["torus_leading"]
    rows, worst = [], 0.0
    for tok in STANDARD_ANGLES:
        lead = torus_leading_term(tok, f, lam).value
        for s in admissible_spin_structures(Manifold.T3):
            val = truncated_action(torus_eigenvalues(TorusDirac(0, s, token=tok), lambda_max),
                                   f, lam).value
            rel = abs(val / lead - 1.0)
            worst = max(worst, rel)
            rows.append({"phi": tok, "spin": s.label(), "value": val, "leading_term": lead,
                         "relative_error": rel})
    return CheckReport("torus_leading_term", {"lambda": lam, "lambda_max": str(lambda_max)},
                       PASS if worst < tol else FAIL, {"max_relative_error": worst, "cases": rows})


SUITES = ("all", "eta-table", "divisibility", "even", "odd", "scaling", "torus", "bismut-freed")


def run_suite(name: str = "all", lam: float = 10.0, lambda_max=20,
              lambda_schedule: Sequence[float] = (10, 25, 50)) -> list:
    """Run a named suite; reports come back ordered by check name."""
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    want = set(SUITES[1:]) if name == "all" else {name}
    reports = []
    if "eta-table" in want:
        reports.append(check_eta_table())
    if "divisibility" in want:
        reports.extend(check_divisibility(m, s, lambda_max) for m, s in _all_cases())
    if "even" in want:
        reports.append(check_even_invariance(CutoffFunction.gaussian(), lam))
        reports.append(check_even_invariance(CutoffFunction.exp_even(), lam))
    if "odd" in want:
        reports.append(check_odd_eta_term(lambda_schedule))
    if "scaling" in want:
        reports.append(check_scaling_identity(lam=lam))
        reports.append(check_scaling_identity(f=CutoffFunction.exp_even(), lam=lam))
    if "torus" in want:
        reports.append(check_torus_leading_term())
    if "bismut-freed" in want:
        reports.append(check_bismut_freed())
    return sorted(reports, key=lambda r: (r.check_name, str(sorted(r.inputs.items()))))
