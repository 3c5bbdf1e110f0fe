"""Command-line interface: ``python -m bieberbach <subcommand> ...``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from fractions import Fraction
from typing import Optional

from . import __version__
from .action import (CutoffFunction, circle_leading_term, torus_leading_term,
                     truncated_action)
from .errors import BieberbachError
from .eta import eta_bieberbach, eta_circle, eta_hurwitz_oracle
from .spectra import (CircleDirac, Manifold, SpinStructure, TorusDirac, admissible_spin_structures,
                      bieberbach_spectrum, case_decomposition, circle_eigenvalues, dumps,
                      parse_angle, spectrum_to_csv, spectrum_to_json, torus_eigenvalues)
from .verify import SUITES, run_suite

KINDS = ("gaussian", "exp_even", "exp_odd")


class UsageError(Exception):
    pass


def _spin_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("target operator")
    g.add_argument("--manifold", choices=[m.value for m in Manifold],
                   help="torus T3 or one of the quotients G2..G6")
    g.add_argument("--eps1", choices=["0", "0.5"], help="lattice shift along the first circle")
    g.add_argument("--eps2", choices=["0", "0.5"])
    g.add_argument("--eps3", choices=["0", "0.5"])
    g.add_argument("--delta", choices=["+1", "1", "-1"], help="spinor representation sign")
    g.add_argument("--delta2", choices=["+1", "1", "-1"], help="second sign, only used by G6")
    g.add_argument("--phi", help="torus angle for T3: pi/2, 2pi/3, pi/4 or radians (default pi/2)")
    g.add_argument("--alpha", help="circle operator slope (selects a circle instead of a manifold)")
    g.add_argument("--beta", help="circle operator offset")


def _output_flags(p: argparse.ArgumentParser, default: str = "json") -> None:
    p.add_argument("--format", choices=["csv", "json"], default=default)
    p.add_argument("--output", "-o", help="write to this file instead of standard output")


def _resolve_spin(m: Manifold, args) -> SpinStructure:
    want = {}
    for name in ("eps1", "eps2", "eps3"):
        v = getattr(args, name)
        if v is not None:
            want[name] = Fraction(v)
    for name in ("delta", "delta2"):
        v = getattr(args, name)
        if v is not None:
            want[name] = int(v)
    matches = [s for s in admissible_spin_structures(m)
               if all(getattr(s, k) == v for k, v in want.items())]
    if not matches:
        raise UsageError(f"no admissible spin structure on {m.value} matches the given flags")
    if len(matches) > 1:
        # isospectral G6 labels: default to the first when no sign is given
        if m is Manifold.G6 and not ({"delta", "delta2"} & want.keys()):
            return matches[0]
        raise UsageError(f"spin flags are ambiguous on {m.value}; candidates: "
                         + ", ".join(s.label() for s in matches))
    return matches[0]


def _target(args):
    """Return ``("circle", CircleDirac)`` or ``("manifold", Manifold, SpinStructure, phi_token)``."""
    if args.alpha is not None or args.beta is not None:
        if args.manifold is not None:
            raise UsageError("--manifold and --alpha/--beta are mutually exclusive")
        if args.alpha is None or args.beta is None:
            raise UsageError("a circle operator needs both --alpha and --beta")
        try:
            return ("circle", CircleDirac(Fraction(args.alpha), Fraction(args.beta)))
        except (ValueError, ZeroDivisionError) as exc:
            raise UsageError(str(exc)) from None
    if args.manifold is None:
        raise UsageError("choose --manifold or --alpha/--beta")
    m = Manifold.parse(args.manifold)
    spin = _resolve_spin(m, args)
    if args.phi is not None:
        if m is not Manifold.T3:
            raise UsageError("--phi only applies to T3; quotients fix their own angle")
        try:
            _, token = parse_angle(args.phi)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        phi = token or args.phi
    else:
        phi = case_decomposition(m, spin).phi
    return ("manifold", m, spin, phi)


def _emit(text: str, args) -> None:
    if args.output:
        with open(args.output, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv_rows(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(r.get(h)) for h in header])
    return buf.getvalue()


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (dict, list)):
        return json.dumps(v, sort_keys=True, separators=(",", ":"))
    return "" if v is None else v


def _lambda_max(args, f: CutoffFunction) -> Fraction:
    if args.lambda_max is not None:
        return Fraction(args.lambda_max)
    return Fraction(math.ceil(f.default_tail_factor() * args.lam))


def _spectrum_for(target, lambda_max):
    if target[0] == "circle":
        return circle_eigenvalues(target[1], lambda_max)
    _, m, spin, phi = target
    if m is Manifold.T3:
        return torus_eigenvalues(TorusDirac(0, spin, token=phi), lambda_max)
    return bieberbach_spectrum(m, spin, lambda_max)


def cmd_spectrum(args) -> int:
    target = _target(args)
    if args.lambda_max is None:
        raise UsageError("--lambda-max is required")
    s = _spectrum_for(target, Fraction(args.lambda_max))
    text = spectrum_to_csv(s) if args.format == "csv" else dumps(spectrum_to_json(s)) + "\n"
    _emit(text, args)
    return 0


def _leading(target, f: CutoffFunction, lam: float) -> float:
    odd = f.odd_profile_at_zero() if f.parity != "even" else 0.0
    if target[0] == "circle":
        d = target[1]
        return circle_leading_term(d, f, lam).value + odd * float(eta_circle(d))
    _, m, spin, phi = target
    case = case_decomposition(m, spin)
    lead = float(case.prefactor) * torus_leading_term(phi, f, lam).value
    if case.asymmetric:
        lead += 2 * circle_leading_term(case.added, f, lam).value
        lead -= 2 * float(case.prefactor) * circle_leading_term(case.removed, f, lam).value
        lead += odd * float(eta_bieberbach(m, spin).formula_value)
    return lead


def cmd_action(args) -> int:
    target = _target(args)
    f = CutoffFunction.from_name(args.kind)
    lm = _lambda_max(args, f)
    s = _spectrum_for(target, lm)
    value = truncated_action(s, f, args.lam).value
    lead = _leading(target, f, args.lam)
    rec = {"kind": args.kind, "lambda": args.lam, "lambda_max": str(lm), "value": value,
           "leading_term": lead, "residual": value - lead, "spectrum": s.descriptor}
    if target[0] == "circle":
        rec.update(manifold=None, spin=None, alpha=str(target[1].alpha), beta=str(target[1].beta))
    else:
        rec.update(manifold=target[1].value, spin=target[2].label(), phi=target[3])
    if args.format == "csv":
        text = _csv_rows(["manifold", "spin", "kind", "lambda", "value", "leading_term", "residual"], [rec])
    else:
        text = dumps(rec) + "\n"
    _emit(text, args)
    return 0


def cmd_eta(args) -> int:
    target = _target(args)
    if target[0] == "circle":
        d = target[1]
        rec = {"alpha": str(d.alpha), "beta": str(d.beta), "formula": str(eta_circle(d)),
               "oracle": str(eta_hurwitz_oracle(d))}
        rec["discrepancy_flag"] = rec["formula"] != rec["oracle"]
        header = ["alpha", "beta", "formula", "oracle", "discrepancy_flag"]
    else:
        rec = eta_bieberbach(target[1], target[2]).to_json()
        header = ["manifold", "spin", "formula", "oracle", "extrapolated", "printed_table",
                  "discrepancy_flag"]
    text = _csv_rows(header, [rec]) if args.format == "csv" else dumps(rec) + "\n"
    _emit(text, args)
    return 0


def cmd_verify(args) -> int:
    schedule = [float(x) for x in args.schedule.split(",")]
    reports = run_suite(args.suite, lam=args.lam, lambda_max=Fraction(args.lambda_max),
                        lambda_schedule=schedule)
    rows = [r.to_json() for r in reports]
    if args.format == "csv":
        text = _csv_rows(["check_name", "status", "inputs", "metrics", "notes"], rows)
    else:
        text = "".join(dumps(r) + "\n" for r in rows)
    _emit(text, args)
    return 1 if any(r.failed for r in reports) else 0


def eta_table_rows() -> list:
    rows = []
    for m in Manifold:
        for s in admissible_spin_structures(m):
            r = eta_bieberbach(m, s)
            if r.column is None:
                continue
            j = r.to_json()
            rows.append({"manifold": m.value, "column": r.column, "spin": s.label(),
                         "formula": j["formula"], "oracle": j["oracle"],
                         "extrapolated": j["extrapolated"], "printed_table": j["printed_table"],
                         "discrepancy_flag": j["discrepancy_flag"]})
    return rows


def leading_term_rows(kind: str, lam: float) -> list:
    """Per quotient: n times its predicted leading action against the torus term."""
    f = CutoffFunction.from_name(kind)
    rows = []
    for m in Manifold:
        for s in admissible_spin_structures(m):
            case = case_decomposition(m, s)
            torus = torus_leading_term(case.phi, f, lam).value
            lead = _leading(("manifold", m, s, case.phi), f, lam)
            rows.append({"manifold": m.value, "spin": s.label(), "group_order": case.order,
                         "phi": case.phi, "torus_leading": torus, "quotient_leading": lead,
                         "scaled_difference": case.order * lead - torus})
    return rows


def cmd_table(args) -> int:
    if args.format == "csv":
        if args.which == "leading":
            rows = leading_term_rows(args.kind, args.lam)
            header = ["manifold", "spin", "group_order", "phi", "torus_leading",
                      "quotient_leading", "scaled_difference"]
        else:
            rows = eta_table_rows()
            header = ["manifold", "column", "spin", "formula", "oracle", "extrapolated",
                      "printed_table", "discrepancy_flag"]
        text = _csv_rows(header, rows)
    else:
        out = {}
        if args.which in ("eta", "both"):
            out["eta_table"] = eta_table_rows()
        if args.which in ("leading", "both"):
            out["leading"] = {"kind": args.kind, "lambda": args.lam,
                               "rows": leading_term_rows(args.kind, args.lam)}
        text = dumps(out) + "\n"
    _emit(text, args)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="bieberbach",
        description="Dirac spectra, spectral action and eta invariants of flat "
                    "orientable Bieberbach three-manifolds.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("spectrum", help="enumerate a Dirac spectrum up to a radius",
                        description="Enumerate the Dirac spectrum of the torus, a quotient "
                                    "(via its torus/circle decomposition) or a circle operator, "
                                    "with exact rational multiplicities.")
    _spin_flags(sp)
    sp.add_argument("--lambda-max", required=False, help="truncation radius")
    _output_flags(sp, default="csv")
    sp.set_defaults(func=cmd_spectrum)

    ap = sub.add_parser("action", help="truncated spectral action and its leading term",
                        description="Evaluate sum f(lambda/Lambda) over the spectrum and compare "
                                    "with the Poisson leading term (plus the eta term for odd "
                                    "cutoffs).")
    _spin_flags(ap)
    ap.add_argument("--lambda", dest="lam", type=float, required=True, help="cutoff scale")
    ap.add_argument("--lambda-max", help="truncation radius (default: tail factor * Lambda)")
    ap.add_argument("--kind", choices=KINDS, default="gaussian")
    _output_flags(ap)
    ap.set_defaults(func=cmd_action)

    ep = sub.add_parser("eta", help="eta invariant by formula, oracle and extrapolation",
                        description="Eta invariant of a quotient or circle operator: closed "
                                    "formula, Hurwitz-zeta oracle and small-time fit, with the "
                                    "printed table value where one exists.")
    _spin_flags(ep)
    _output_flags(ep)
    ep.set_defaults(func=cmd_eta)

    vp = sub.add_parser("verify", help="run the verification checks",
                        description="Run the named check suite; one report per line. Exit "
                                    "status 1 if any check fails (flagged checks do not count).")
    vp.add_argument("--suite", choices=SUITES, default="all")
    vp.add_argument("--lambda", dest="lam", type=float, default=10.0)
    vp.add_argument("--lambda-max", default="20", help="radius for the divisibility checks")
    vp.add_argument("--schedule", default="10,25,50", help="scales for the odd-cutoff check")
    _output_flags(vp)
    vp.set_defaults(func=cmd_verify)

    tp = sub.add_parser("table", help="eta table and leading-term comparison",
                        description="Reproduce the eta table of the asymmetric quotients "
                                    "(marking disagreements with the printed values) and "
                                    "compare rescaled leading action terms across quotients.")
    tp.add_argument("--which", choices=["eta", "leading", "both"], default="both")
    tp.add_argument("--lambda", dest="lam", type=float, default=10.0)
    tp.add_argument("--kind", choices=("gaussian", "exp_even"), default="gaussian")
    _output_flags(tp)
    tp.set_defaults(func=cmd_table)
    return p


_VALUE_FLAGS = ("--alpha", "--beta", "--phi", "--lambda-max")


def _join_negative_values(argv: list) -> list:
    """Rewrite ``--beta -1/2`` as ``--beta=-1/2``; argparse takes ``-1/2`` for an option."""
    out = []
    i = 0
    while i < len(argv):
        a = argv[i]
        if a in _VALUE_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{a}={argv[i + 1]}")
            i += 2
            continue
        out.append(a)
        i += 1
    return out


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(_join_negative_values(argv))
    if args.command == "table" and args.format == "csv" and args.which == "both":
        args.which = "eta"
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except BieberbachError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
