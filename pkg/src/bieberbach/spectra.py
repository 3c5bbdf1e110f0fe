"""Exact Dirac spectra of the flat three-torus and its orientable quotients.

Squared eigenvalues are kept as exact keys ``(a + b*sqrt(2)) / den`` with
integer ``a``, ``b`` and a common positive denominator per spectrum, so that
degenerate eigenvalues are merged without any floating-point tolerance. The
``sqrt(2)`` component is only ever nonzero for the ``tau = exp(i*pi/4)`` torus.

Multiplicities are exact rationals stored as integer numerators over a common
denominator.
"""
from __future__ import annotations

import csv
import enum
import functools
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from . import kernels
from .errors import InadmissibleSpin, NegativeMultiplicity

SQRT2 = math.sqrt(2.0)
HALF = Fraction(1, 2)

# precision of the rational stand-in for 2*cos(phi) at nonstandard angles
NONSTANDARD_BITS = 200

_INT64_SAFE = 2**62


def as_fraction(x) -> Fraction:
    """Exact rational from an int, Fraction, decimal string or float."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x.strip())
    return Fraction(x)


def surd_sign(x, y) -> int:
    """Exact sign of ``x + y*sqrt(2)`` for rational ``x``, ``y``."""
    sx = (x > 0) - (x < 0)
    sy = (y > 0) - (y < 0)
    if sy == 0:
        return sx
    if sx == 0 or sx == sy:
        return sy if sx == 0 else sx
    return sx if x * x > 2 * y * y else sy


@functools.total_ordering
@dataclass(frozen=True)
class ExactEigenvalueSq:
    """A squared eigenvalue ``a + b*sqrt(2)`` with rational ``a`` and ``b``."""

    a: Fraction
    b: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "a", as_fraction(self.a))
        object.__setattr__(self, "b", as_fraction(self.b))
        if surd_sign(self.a, self.b) < 0:
            raise ValueError(f"negative squared eigenvalue {self.a} + {self.b}*sqrt(2)")

    def __lt__(self, other):
        if not isinstance(other, ExactEigenvalueSq):
            return NotImplemented
        return surd_sign(self.a - other.a, self.b - other.b) < 0

    def __float__(self):
        return float(self.a) + float(self.b) * SQRT2

    def is_zero(self) -> bool:
        return self.a == 0 and self.b == 0


@functools.total_ordering
@dataclass(frozen=True)
class Eigenvalue:
    """Signed eigenvalue ``sign * sqrt(sq)``; ``sign`` is 0 only for the zero mode."""

    sign: int
    sq: ExactEigenvalueSq

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError("sign must be -1, 0 or 1")
        if (self.sign == 0) != self.sq.is_zero():
            raise ValueError("sign 0 is reserved for the zero eigenvalue")

    @classmethod
    def rational(cls, value) -> "Eigenvalue":
        q = as_fraction(value)
        return cls((q > 0) - (q < 0), ExactEigenvalueSq(q * q))

    def __lt__(self, other):
        if not isinstance(other, Eigenvalue):
            return NotImplemented
        if self.sign != other.sign:
            return self.sign < other.sign
        if self.sign > 0:
            return self.sq < other.sq
        if self.sign < 0:
            return other.sq < self.sq
        return False

    def __neg__(self):
        return Eigenvalue(-self.sign, self.sq)

    def __float__(self):
        return self.sign * math.sqrt(float(self.sq))


class Manifold(enum.Enum):
    """The flat three-torus and the five orientable Bieberbach quotients."""

    T3 = "T3"
    G2 = "G2"
    G3 = "G3"
    G4 = "G4"
    G5 = "G5"
    G6 = "G6"

    @property
    def group_order(self) -> int:
        return _GROUP_ORDER[self]

    @property
    def group(self) -> str:
        return _GROUP_NAME[self]

    @classmethod
    def parse(cls, name) -> "Manifold":
        if isinstance(name, Manifold):
            return name
        try:
            return cls(str(name).upper())
        except ValueError:
            raise ValueError(f"unknown manifold {name!r}; expected one of "
                             f"{', '.join(m.value for m in cls)}") from None


_GROUP_ORDER = {Manifold.T3: 1, Manifold.G2: 2, Manifold.G3: 3,
                Manifold.G4: 4, Manifold.G5: 6, Manifold.G6: 4}
_GROUP_NAME = {Manifold.T3: "1", Manifold.G2: "Z2", Manifold.G3: "Z3",
               Manifold.G4: "Z4", Manifold.G5: "Z6", Manifold.G6: "Z2xZ2"}


def _fmt(q: Fraction) -> str:
    return str(q)


@dataclass(frozen=True)
class SpinStructure:
    """Lattice shifts ``eps1..eps3`` (each 0 or 1/2) plus representation signs.

    ``delta`` is the sign label used by the case tables; ``delta2`` is only
    used to tell apart the four (isospectral) structures on G6.
    """

    eps1: Fraction
    eps2: Fraction
    eps3: Fraction
    delta: Optional[int] = None
    delta2: Optional[int] = None

    def __post_init__(self):
        for name in ("eps1", "eps2", "eps3"):
            v = as_fraction(getattr(self, name))
            if v not in (0, HALF):
                raise ValueError(f"{name} must be exactly 0 or 1/2, got {v}")
            object.__setattr__(self, name, v)
        for name in ("delta", "delta2"):
            v = getattr(self, name)
            if v is not None and v not in (1, -1):
                raise ValueError(f"{name} must be +1, -1 or unset, got {v!r}")

    @property
    def eps(self) -> tuple:
        return (self.eps1, self.eps2, self.eps3)

    def shifts_only(self) -> "SpinStructure":
        return SpinStructure(self.eps1, self.eps2, self.eps3)

    def label(self) -> str:
        out = "(" + ",".join(_fmt(e) for e in self.eps)
        if self.delta is not None:
            out += f";delta={self.delta:+d}"
        if self.delta2 is not None:
            out += f";delta2={self.delta2:+d}"
        return out + ")"

    def to_json(self) -> dict:
        return {"eps": [_fmt(e) for e in self.eps], "delta": self.delta,
                "delta2": self.delta2}


# -- angles -----------------------------------------------------------------

STANDARD_ANGLES = {
    "pi/2": math.pi / 2,
    "2pi/3": 2 * math.pi / 3,
    "pi/4": math.pi / 4,
}


def parse_angle(phi) -> tuple:
    """Return ``(radians, token)``; ``token`` is None for nonstandard angles.

    Accepts the tokens ``pi/2``, ``2pi/3``, ``pi/4`` or a number. A float that
    equals the double nearest to one of the standard angles is identified with it.
    """
    if isinstance(phi, str):
        tok = phi.strip().lower().replace(" ", "").replace("*", "")
        if tok in STANDARD_ANGLES:
            return STANDARD_ANGLES[tok], tok
        phi = float(tok)
    phi = float(phi)
    for tok, val in STANDARD_ANGLES.items():
        if phi == val:
            return val, tok
    if not (0.0 < phi < math.pi):
        raise ValueError(f"phi must lie in (0, pi) so that tau is not real, got {phi}")
    return phi, None


@dataclass(frozen=True)
class TorusDirac:
    """Dirac operator on the equilateral torus with ``tau = exp(i*phi)``."""

    phi: float
    spin: SpinStructure
    token: Optional[str] = field(default=None)

    def __post_init__(self):
        val, tok = parse_angle(self.token if self.token is not None else self.phi)
        object.__setattr__(self, "phi", val)
        object.__setattr__(self, "token", tok)
        if math.sin(val) <= 0:
            raise ValueError("sin(phi) must be positive")

    @property
    def nonstandard(self) -> bool:
        return self.token is None

    @property
    def angle_label(self) -> str:
        return self.token or repr(self.phi)


@dataclass(frozen=True)
class CircleDirac:
    """Generalised circle Dirac operator with eigenvalues ``alpha*k + beta``."""

    alpha: Fraction
    beta: Fraction

    def __post_init__(self):
        object.__setattr__(self, "alpha", as_fraction(self.alpha))
        object.__setattr__(self, "beta", as_fraction(self.beta))
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    def label(self) -> str:
        return f"Sp1[{_fmt(self.alpha)},{_fmt(self.beta)}]"


# -- the spectrum container -------------------------------------------------

@dataclass(frozen=True)
class SpectrumEntry:
    value: float
    eigenvalue: Eigenvalue
    multiplicity: Fraction


def _to_object(arr: np.ndarray) -> np.ndarray:
    out = np.empty(len(arr), dtype=object)
    out[:] = [int(v) for v in arr]
    return out


def _scaled(arr: np.ndarray, factor: int) -> np.ndarray:
    if factor == 1:
        return arr
    if arr.dtype != object:
        peak = int(np.abs(arr).max()) if len(arr) else 0
        if peak * factor < _INT64_SAFE:
            return arr * np.int64(factor)
        arr = _to_object(arr)
    return arr * factor


def _fits_int64(arr: np.ndarray) -> np.ndarray:
    if arr.dtype != object or not len(arr):
        return arr if arr.dtype != object else np.empty(0, dtype=np.int64)
    if max(abs(int(v)) for v in arr) < _INT64_SAFE:
        return arr.astype(np.int64)
    return arr


class WeightedSpectrum:
    """Sorted multiset of eigenvalues with exact keys and rational multiplicities.

    Instances are immutable; all arrays are read-only. ``values`` holds the
    float eigenvalues in strictly ascending order.
    """

    __slots__ = ("sign", "key_a", "key_b", "key_den", "mult_num", "mult_den",
                 "lambda_max", "descriptor", "surd", "growth_degree", "values")

    def __init__(self, sign, key_a, key_b, key_den, mult_num, mult_den,
                 lambda_max, descriptor, surd=False, growth_degree=1):
        self.sign = sign
        self.key_a = key_a
        self.key_b = key_b
        self.key_den = int(key_den)
        self.mult_num = mult_num
        self.mult_den = int(mult_den)
        self.lambda_max = as_fraction(lambda_max)
        self.descriptor = descriptor
        self.surd = bool(surd)
        self.growth_degree = int(growth_degree)
        self.values = _float_values(sign, key_a, key_b, self.key_den)
        for arr in (self.sign, self.key_a, self.key_b, self.mult_num, self.values):
            arr.flags.writeable = False

    @classmethod
    def build(cls, sign, key_a, key_b, key_den, mult_num, mult_den, lambda_max,
              descriptor, surd=False, growth_degree=1, allow_negative=False):
        """Group equal keys, drop zero multiplicities and sort exactly."""
        sign = np.asarray(sign, dtype=np.int8)
        key_a = np.asarray(key_a)
        key_b = np.asarray(key_b)
        mult_num = np.asarray(mult_num)
        if key_a.dtype != object:
            key_a = key_a.astype(np.int64)
        if key_b.dtype != object:
            key_b = key_b.astype(np.int64)
        if mult_num.dtype != object:
            mult_num = mult_num.astype(np.int64)
        sign, key_a, key_b, mult_num = _group(sign, key_a, key_b, mult_num)
        keep = mult_num != 0
        sign, key_a, key_b, mult_num = sign[keep], key_a[keep], key_b[keep], mult_num[keep]
        if not allow_negative and np.any(mult_num < 0):
            i = int(np.flatnonzero(mult_num < 0)[0])
            ev = _eigenvalue(int(sign[i]), key_a[i], key_b[i], key_den)
            raise NegativeMultiplicity(
                f"multiplicity {Fraction(int(mult_num[i]), int(mult_den))} at "
                f"eigenvalue {float(ev)!r} in {descriptor}")
        mult_num, mult_den = _reduce(mult_num, int(mult_den))
        key_a, key_b, key_den = _reduce_keys(key_a, key_b, int(key_den))
        if not np.any(key_b != 0):
            surd = False
        order = _exact_order(sign, key_a, key_b, key_den)
        return cls(sign[order], key_a[order], key_b[order], key_den,
                   mult_num[order], mult_den, lambda_max, descriptor, surd,
                   growth_degree)

    def __len__(self):
        return len(self.values)

    def __repr__(self):
        return (f"WeightedSpectrum({self.descriptor!r}, entries={len(self)}, "
                f"lambda_max={self.lambda_max})")

    def eigenvalue(self, i: int) -> Eigenvalue:
        return _eigenvalue(int(self.sign[i]), self.key_a[i], self.key_b[i], self.key_den)

    def multiplicity(self, i: int) -> Fraction:
        return Fraction(int(self.mult_num[i]), self.mult_den)

    def entries(self) -> list:
        return [SpectrumEntry(float(self.values[i]), self.eigenvalue(i), self.multiplicity(i))
                for i in range(len(self))]

    def to_dict(self) -> dict:
        """``{Eigenvalue: Fraction}`` view, convenient for exact comparisons."""
        return {self.eigenvalue(i): self.multiplicity(i) for i in range(len(self))}

    @property
    def multiplicities(self) -> np.ndarray:
        """Multiplicities as floats (exact for the magnitudes that occur)."""
        if self.mult_num.dtype == object:
            return np.array([float(Fraction(int(m), self.mult_den)) for m in self.mult_num])
        return self.mult_num.astype(np.float64) / self.mult_den

    def total_multiplicity(self) -> Fraction:
        return Fraction(int(sum(int(m) for m in self.mult_num)), self.mult_den)

    def is_integral(self) -> bool:
        return self.mult_den == 1

    def is_symmetric(self) -> bool:
        """True if ``mult(-lambda) == mult(lambda)`` for every entry."""
        pos = self.sign > 0
        neg = self.sign < 0
        if pos.sum() != neg.sum():
            return False
        # ascending order puts negatives in reverse magnitude order
        ia = np.flatnonzero(pos)
        ib = np.flatnonzero(neg)[::-1]
        return bool(np.array_equal(self.key_a[ia], self.key_a[ib])
                    and np.array_equal(self.key_b[ia], self.key_b[ib])
                    and np.array_equal(self.mult_num[ia], self.mult_num[ib]))

    def same_entries(self, other: "WeightedSpectrum") -> bool:
        return self.to_dict() == other.to_dict()


def _float_values(sign, key_a, key_b, key_den) -> np.ndarray:
    if key_a.dtype == object or key_b.dtype == object:
        sq = np.array([float(Fraction(int(a), key_den)) + float(Fraction(int(b), key_den)) * SQRT2
                       for a, b in zip(key_a, key_b)], dtype=np.float64)
    else:
        sq = (key_a.astype(np.float64) + key_b.astype(np.float64) * SQRT2) / key_den
    out = np.sqrt(np.maximum(sq, 0.0))
    if key_a.dtype != object and key_b.dtype != object and key_den < 2**20:
        # rational eigenvalues: sqrt(a*den)/den is one correctly rounded division
        prod = key_a * key_den
        ok = (key_b == 0) & (prod >= 0) & (prod < 2**52)
        root = np.rint(np.sqrt(np.where(ok, prod, 0).astype(np.float64))).astype(np.int64)
        ok &= root * root == prod
        out = np.where(ok, root / float(key_den), out)
    return sign.astype(np.float64) * out


def _eigenvalue(sign, a, b, den) -> Eigenvalue:
    return Eigenvalue(sign, ExactEigenvalueSq(Fraction(int(a), den), Fraction(int(b), den)))


def _group(sign, key_a, key_b, mult):
    n = len(sign)
    if n == 0:
        return sign, key_a, key_b, mult
    if key_a.dtype == object or key_b.dtype == object or mult.dtype == object:
        acc = {}
        for s, a, b, m in zip(sign.tolist(), key_a.tolist(), key_b.tolist(), mult.tolist()):
            k = (s, int(a), int(b))
            acc[k] = acc.get(k, 0) + int(m)
        keys = sorted(acc)
        s = np.array([k[0] for k in keys], dtype=np.int8)
        a = _fits_int64(np.array([k[1] for k in keys], dtype=object))
        b = _fits_int64(np.array([k[2] for k in keys], dtype=object))
        m = _fits_int64(np.array([acc[k] for k in keys], dtype=object))
        return s, a, b, m
    order = np.lexsort((key_b, key_a, sign))
    sign, key_a, key_b, mult = sign[order], key_a[order], key_b[order], mult[order]
    new = np.ones(n, dtype=bool)
    new[1:] = (sign[1:] != sign[:-1]) | (key_a[1:] != key_a[:-1]) | (key_b[1:] != key_b[:-1])
    idx = np.flatnonzero(new)
    return sign[idx], key_a[idx], key_b[idx], np.add.reduceat(mult, idx)


def _gcd_all(arr) -> int:
    if not len(arr):
        return 0
    if arr.dtype == object:
        return functools.reduce(math.gcd, (int(v) for v in arr), 0)
    return int(np.gcd.reduce(np.abs(arr)))


def _reduce(num, den):
    g = math.gcd(_gcd_all(num), den) if len(num) else den
    if g > 1:
        num = num // g
        den //= g
    return num, den


def _reduce_keys(a, b, den):
    g = math.gcd(math.gcd(_gcd_all(a), _gcd_all(b)), den)
    if g > 1:
        a, b, den = a // g, b // g, den // g
    return a, b, den


def _exact_order(sign, key_a, key_b, key_den) -> np.ndarray:
    """Ascending order of the signed values, verified with exact comparisons.

    Floats give the order; any adjacent pair closer than a relative 1e-12 is
    re-sorted with exact arithmetic so near-ties never decide the order.
    """
    vals = _float_values(sign, key_a, key_b, key_den)
    order = np.argsort(vals, kind="stable")
    if len(order) < 2:
        return order
    v = vals[order]
    close = np.abs(np.diff(v)) <= 1e-12 * np.maximum(np.abs(v[1:]), 1.0)
    if not close.any():
        return order
    order = order.copy()
    i = 0
    n = len(order)
    while i < n - 1:
        if not close[i]:
            i += 1
            continue
        j = i
        while j < n - 1 and close[j]:
            j += 1
        block = order[i:j + 1]
        block = sorted(block, key=lambda k: _eigenvalue(int(sign[k]), key_a[k], key_b[k], key_den))
        order[i:j + 1] = block
        i = j + 1
    return order


def _aligned(a: WeightedSpectrum, b: WeightedSpectrum):
    if a.lambda_max != b.lambda_max:
        raise ValueError(f"truncation radii differ: {a.lambda_max} vs {b.lambda_max}")
    kden = math.lcm(a.key_den, b.key_den)
    mden = math.lcm(a.mult_den, b.mult_den)
    parts = []
    for s in (a, b):
        fk = kden // s.key_den
        fm = mden // s.mult_den
        parts.append((s.sign, _scaled(s.key_a, fk), _scaled(s.key_b, fk),
                      _scaled(s.mult_num, fm)))
    return parts, kden, mden


def _concat(x, y):
    if x.dtype == object or y.dtype == object:
        return np.concatenate([x.astype(object), y.astype(object)])
    return np.concatenate([x, y])


# -- elementary spectra -----------------------------------------------------

def _check_lambda_max(lambda_max) -> Fraction:
    lm = as_fraction(lambda_max)
    if lm <= 0:
        raise ValueError(f"lambda_max must be positive, got {lambda_max}")
    return lm


def circle_eigenvalues(d: CircleDirac, lambda_max) -> WeightedSpectrum:
    """All ``alpha*k + beta`` with ``|alpha*k + beta| <= lambda_max``, multiplicity 1."""
    lm = _check_lambda_max(lambda_max)
    lo = math.ceil((-lm - d.beta) / d.alpha)
    hi = math.floor((lm - d.beta) / d.alpha)
    den = math.lcm(d.alpha.denominator, d.beta.denominator)
    step = int(d.alpha * den)
    offset = int(d.beta * den)
    k = np.arange(lo, hi + 1, dtype=np.int64)
    nums = k * step + offset
    sign = np.sign(nums).astype(np.int8)
    return WeightedSpectrum.build(
        sign, nums * nums, np.zeros_like(nums), den * den, np.ones_like(nums), 1,
        lm, d.label(), growth_degree=1)


def nonstandard_coupling(phi: float) -> Fraction:
    """Rational approximation of ``2*cos(phi)`` to within ``2**-NONSTANDARD_BITS``."""
    import mpmath

    with mpmath.workprec(NONSTANDARD_BITS + 64):
        exact_phi = Fraction(phi)
        c = 2 * mpmath.cos(mpmath.mpf(exact_phi.numerator) / exact_phi.denominator)
        scaled = mpmath.nint(c * mpmath.mpf(2) ** NONSTANDARD_BITS)
    return Fraction(int(scaled), 2**NONSTANDARD_BITS)


def _within_radius(a, b, bound: Fraction, mode: str, coupling: Optional[Fraction]) -> bool:
    if mode == "square":
        return a <= bound
    if mode == "hex":
        return a - b <= bound
    if mode == "sqrt2":
        return surd_sign(a - bound, b) <= 0
    return a + coupling * b <= bound


def torus_eigenvalues(d: TorusDirac, lambda_max) -> WeightedSpectrum:
    """Spectrum of the torus Dirac operator, one ``+lambda`` and one ``-lambda`` per lattice point.

    With ``X = 2(k+eps1)``, ``Y = 2(l+eps2)``, ``Z = 2(m+eps3)`` the squared
    eigenvalue is ``(X^2 + Y^2 + Z^2 + 2cos(phi) Y Z) / 4``. Zero modes (only
    possible when every shift is 0) get multiplicity 2 per lattice point.
    """
    lm = _check_lambda_max(lambda_max)
    return _torus_cached(d.token, d.phi, d.spin.shifts_only(), lm)


@functools.lru_cache(maxsize=64)
def _torus_cached(token, phi, spin, lm) -> WeightedSpectrum:
    px, py, pz = (int(2 * e) for e in spin.eps)
    bound = 4 * lm * lm
    if token == "pi/2":
        mode, cfloat, exact_c = "square", 0.0, None
    elif token == "2pi/3":
        mode, cfloat, exact_c = "hex", -1.0, None
    elif token == "pi/4":
        mode, cfloat, exact_c = "sqrt2", SQRT2, None
    else:
        exact_c = nonstandard_coupling(phi)
        mode, cfloat = "general", float(exact_c)
    xmax = math.floor(2 * lm)
    start = -xmax if (xmax - px) % 2 == 0 else -xmax + 1
    xs = np.arange(start, xmax + 1, 2, dtype=np.int64)
    fbound = float(bound)
    slack = 1e-9 * max(fbound, 1.0)
    a, b = kernels.lattice_keys(xs, py, pz, cfloat, fbound, slack)

    # exact decision for points within the float slack of the boundary
    fv = a.astype(np.float64) + cfloat * b.astype(np.float64)
    edge = np.flatnonzero(fv > fbound - slack)
    if len(edge):
        drop = [i for i in edge if not _within_radius(int(a[i]), int(b[i]), bound, mode, exact_c)]
        if drop:
            keep = np.ones(len(a), dtype=bool)
            keep[drop] = False
            a, b = a[keep], b[keep]

    key_den = 4
    surd = False
    if mode == "square":
        ka, kb = a, np.zeros_like(a)
    elif mode == "hex":
        ka, kb = a - b, np.zeros_like(a)
    elif mode == "sqrt2":
        ka, kb, surd = a, b, True
    else:
        ka = _to_object(a) * exact_c.denominator + _to_object(b) * exact_c.numerator
        kb = np.zeros(len(a), dtype=np.int64)
        key_den = 4 * exact_c.denominator

    # group lattice points first, then emit the +/- pair per point
    zero = np.zeros(len(ka), dtype=np.int8)
    s0, ka, kb, counts = _group(zero, ka, kb, np.ones(len(ka), dtype=np.int64))
    is_zero = (ka == 0) & (kb == 0)
    nz = ~is_zero
    sign = np.concatenate([np.ones(nz.sum(), np.int8), -np.ones(nz.sum(), np.int8),
                           np.zeros(is_zero.sum(), np.int8)])
    mult = _concat(_concat(counts[nz], counts[nz]), counts[is_zero] * 2)
    out = WeightedSpectrum.build(
        sign, _concat(_concat(ka[nz], ka[nz]), ka[is_zero]),
        _concat(_concat(kb[nz], kb[nz]), kb[is_zero]), key_den, mult, 1, lm,
        f"Sp3[phi={token or repr(phi)};eps=({','.join(_fmt(e) for e in spin.eps)})]",
        surd=surd, growth_degree=3)
    if mode == "general":
        _gap_guard(out)
    return out


def _gap_guard(s: WeightedSpectrum) -> None:
    pos = s.values[s.sign > 0]
    if len(pos) > 1:
        gaps = np.diff(pos)
        if np.any(gaps <= 2.0 ** -150 * pos[1:] + 4 * np.finfo(float).eps * pos[1:]):
            warnings.warn(
                "nonstandard phi: distinct approximate keys are closer than the "
                "float resolution; degenerate eigenvalues may have been split",
                RuntimeWarning, stacklevel=3)


# -- multiset algebra -------------------------------------------------------

def scale_multiplicity(s: WeightedSpectrum, c) -> WeightedSpectrum:
    """Multiply every multiplicity by the positive rational ``c``."""
    c = as_fraction(c)
    if c <= 0:
        raise ValueError(f"scale factor must be positive, got {c}")
    num, den = _reduce(_scaled(s.mult_num, c.numerator), s.mult_den * c.denominator)
    return WeightedSpectrum(s.sign, s.key_a, s.key_b, s.key_den, num, den,
                            s.lambda_max, f"{_fmt(c)}*{s.descriptor}", s.surd,
                            s.growth_degree)


def subtract_spectrum(a: WeightedSpectrum, b: WeightedSpectrum) -> WeightedSpectrum:
    """Multiplicity-wise difference; entries that reach zero are removed."""
    (pa, pb), kden, mden = _aligned(a, b)
    return WeightedSpectrum.build(
        _concat(pa[0], pb[0]).astype(np.int8), _concat(pa[1], pb[1]), _concat(pa[2], pb[2]),
        kden, _concat(pa[3], -pb[3]), mden, a.lambda_max,
        f"({a.descriptor} \\ {b.descriptor})", a.surd or b.surd,
        max(a.growth_degree, b.growth_degree))


def union_spectrum(a: WeightedSpectrum, b: WeightedSpectrum) -> WeightedSpectrum:
    """Multiset union, i.e. multiplicity-wise addition."""
    (pa, pb), kden, mden = _aligned(a, b)
    return WeightedSpectrum.build(
        _concat(pa[0], pb[0]).astype(np.int8), _concat(pa[1], pb[1]), _concat(pa[2], pb[2]),
        kden, _concat(pa[3], pb[3]), mden, a.lambda_max,
        f"({a.descriptor} u {b.descriptor})", a.surd or b.surd,
        max(a.growth_degree, b.growth_degree))


# -- Bieberbach case table --------------------------------------------------

def admissible_spin_structures(m) -> list:
    """Spin structures that project to the quotient, in case-table order."""
    m = Manifold.parse(m)
    h, z = HALF, Fraction(0)
    if m is Manifold.T3:
        return [SpinStructure(e1, e2, e3) for e1 in (z, h) for e2 in (z, h) for e3 in (z, h)]
    if m is Manifold.G2:
        return [SpinStructure(h, e2, e3, d)
                for e2, e3 in ((z, z), (z, h), (h, z), (h, h)) for d in (1, -1)]
    if m is Manifold.G3:
        return [SpinStructure(h, z, z, 1), SpinStructure(z, z, z, -1)]
    if m is Manifold.G4:
        return [SpinStructure(h, z, z, d) for d in (1, -1)] + \
               [SpinStructure(h, h, h, d) for d in (1, -1)]
    if m is Manifold.G5:
        return [SpinStructure(h, z, z, d) for d in (1, -1)]
    return [SpinStructure(h, h, h, d1, d2) for d1 in (1, -1) for d2 in (1, -1)]


@dataclass(frozen=True)
class CaseDecomposition:
    """``prefactor * (Sp3 \\ 2 removed) u 2 added`` for one manifold and spin structure.

    ``column`` names the eta-table column (``A``/``B``) for asymmetric cases.
    """

    manifold: Manifold
    spin: SpinStructure
    phi: str
    prefactor: Fraction
    removed: Optional[CircleDirac] = None
    added: Optional[CircleDirac] = None
    column: Optional[str] = None

    @property
    def torus(self) -> TorusDirac:
        return TorusDirac(STANDARD_ANGLES[self.phi], self.spin.shifts_only(), token=self.phi)

    @property
    def asymmetric(self) -> bool:
        return self.added is not None

    @property
    def order(self) -> int:
        return self.manifold.group_order


def case_decomposition(m, s: SpinStructure) -> CaseDecomposition:
    m = Manifold.parse(m)
    if s not in admissible_spin_structures(m):
        raise InadmissibleSpin(f"spin structure {s.label()} does not project to {m.value}")
    h = HALF
    one = Fraction(1)
    if m is Manifold.T3:
        return CaseDecomposition(m, s, "pi/2", one)
    if m is Manifold.G2:
        if s.eps2 == h or s.eps3 == h:
            return CaseDecomposition(m, s, "pi/2", Fraction(1, 2))
        return CaseDecomposition(m, s, "pi/2", Fraction(1, 2), CircleDirac(1, h),
                                 CircleDirac(2, h - s.delta), "A" if s.delta == 1 else "B")
    if m is Manifold.G3:
        if s.eps1 == h:
            return CaseDecomposition(m, s, "2pi/3", Fraction(1, 3), CircleDirac(1, h),
                                     CircleDirac(3, h), "A")
        return CaseDecomposition(m, s, "2pi/3", Fraction(1, 3), CircleDirac(1, 0),
                                 CircleDirac(3, -1), "B")
    if m is Manifold.G4:
        if s.eps2 == h:
            return CaseDecomposition(m, s, "pi/4", Fraction(1, 4))
        return CaseDecomposition(m, s, "pi/4", Fraction(1, 4), CircleDirac(1, h),
                                 CircleDirac(4, Fraction(3, 2) - s.delta),
                                 "A" if s.delta == 1 else "B")
    if m is Manifold.G5:
        beta = h if s.delta == 1 else Fraction(7, 2)
        return CaseDecomposition(m, s, "2pi/3", Fraction(1, 6), CircleDirac(1, h),
                                 CircleDirac(6, beta), "A" if s.delta == 1 else "B")
    return CaseDecomposition(m, s, "pi/2", Fraction(1, 4))


def bieberbach_spectrum(m, s: SpinStructure, lambda_max) -> WeightedSpectrum:
    """Dirac spectrum of the quotient built from its case-table decomposition."""
    case = case_decomposition(m, s)
    torus = torus_eigenvalues(case.torus, lambda_max)
    lm = torus.lambda_max
    if case.removed is not None:
        torus = subtract_spectrum(torus, scale_multiplicity(circle_eigenvalues(case.removed, lm), 2))
    out = scale_multiplicity(torus, case.prefactor)
    if case.added is not None:
        out = union_spectrum(out, scale_multiplicity(circle_eigenvalues(case.added, lm), 2))
    return out


def asymmetric_part(m, s: SpinStructure, lambda_max) -> Optional[WeightedSpectrum]:
    """The doubled circle spectrum carrying all spectral asymmetry, or None."""
    case = case_decomposition(m, s)
    if case.added is None:
        return None
    return scale_multiplicity(circle_eigenvalues(case.added, lambda_max), 2)


# -- serialization ----------------------------------------------------------

def _pair(q: Fraction) -> list:
    return [q.numerator, q.denominator]


def spectrum_to_csv(s: WeightedSpectrum, out: Optional[io.TextIOBase] = None) -> str:
    """``eigenvalue,multiplicity_num,multiplicity_den`` rows, ascending."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["eigenvalue", "multiplicity_num", "multiplicity_den"])
    for v, m in zip(s.values.tolist(), s.mult_num.tolist()):
        w.writerow([repr(float(v)), int(m), s.mult_den])
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text


def spectrum_to_json(s: WeightedSpectrum) -> dict:
    entries = []
    for i in range(len(s)):
        ev = s.eigenvalue(i)
        entries.append({
            "eigenvalue": float(s.values[i]),
            "sign": ev.sign,
            "a": _pair(ev.sq.a),
            "b": _pair(ev.sq.b),
            "multiplicity": _pair(s.multiplicity(i)),
        })
    return {"descriptor": s.descriptor, "lambda_max": str(s.lambda_max),
            "growth_degree": s.growth_degree, "entries": entries}


def spectrum_from_json(data) -> WeightedSpectrum:
    if isinstance(data, str):
        data = json.loads(data)
    entries = data["entries"]
    a = [Fraction(*e["a"]) for e in entries]
    b = [Fraction(*e["b"]) for e in entries]
    m = [Fraction(*e["multiplicity"]) for e in entries]
    kden = math.lcm(1, *(q.denominator for q in a + b))
    mden = math.lcm(1, *(q.denominator for q in m))
    ka = _fits_int64(np.array([int(q * kden) for q in a], dtype=object))
    kb = _fits_int64(np.array([int(q * kden) for q in b], dtype=object))
    mn = _fits_int64(np.array([int(q * mden) for q in m], dtype=object))
    return WeightedSpectrum.build(
        np.array([e["sign"] for e in entries], dtype=np.int8), ka, kb, kden, mn, mden,
        Fraction(data["lambda_max"]), data["descriptor"],
        surd=any(q != 0 for q in b), growth_degree=data.get("growth_degree", 1))


def dumps(obj) -> str:
    """Deterministic JSON text (sorted keys, shortest round-trip floats)."""
    return json.dumps(obj, sort_keys=True, separators=(",", ": "), indent=None)
