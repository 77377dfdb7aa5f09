"""Outward-rounded interval arithmetic on IEEE doubles.

Every upper endpoint is the exact result rounded up to the next representable
number; every lower endpoint is obtained by negating an upper bound of the
negated operation. Round-up is emulated bit-exactly from round-to-nearest with
error-free transformations: the nearest result is moved one ulp up only when the
exact rounding error is positive.

The scalar primitives (``up_add``, ``up_mul``, ...) are numba-compiled so the
same code serves Python-level intervals and the compiled dynamics kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numba
import numpy as np

__all__ = [
    "IntervalError",
    "DivisorStraddlesZero",
    "NegativeBase",
    "Overflow",
    "IInterval",
    "up_add",
    "up_sub",
    "up_mul",
    "up_div",
    "up_sqrt",
    "dn_add",
    "dn_sub",
    "dn_mul",
    "dn_div",
    "dn_sqrt",
    "up_pow",
    "dn_pow",
    "pow_real",
    "root_real",
    "hull",
    "intersect",
    "interval_to_hex",
    "interval_from_hex",
]


class IntervalError(ArithmeticError):
    """Base class for failures of rigorous arithmetic."""


class DivisorStraddlesZero(IntervalError):
    pass


class NegativeBase(IntervalError):
    pass


class Overflow(IntervalError):
    pass


_INF = math.inf
_SPLITTER = 134217729.0  # 2**27 + 1
_BIG = 2.0**995
_SMALL = 2.0**-900
_POW_ULPS = 4

# ---------------------------------------------------------------------------
# scalar directed rounding
# ---------------------------------------------------------------------------


@numba.njit(cache=True)
def _two_prod_err(a, b, p):
    c = _SPLITTER * a
    ah = c - (c - a)
    al = a - ah
    c = _SPLITTER * b
    bh = c - (c - b)
    bl = b - bh
    return ((ah * bh - p) + ah * bl + al * bh) + al * bl


@numba.njit(cache=True)
def _unsafe(x):
    ax = abs(x)
    return ax > _BIG or (ax < _SMALL and ax != 0.0)


@numba.njit(cache=True)
def up_add(a, b):
    """Smallest double that is >= a + b."""
    s = a + b
    if not math.isfinite(s):
        return s
    bb = s - a
    e = (a - (s - bb)) + (b - bb)
    if e > 0.0:
        return math.nextafter(s, _INF)
    return s


@numba.njit(cache=True)
def up_sub(a, b):
    return up_add(a, -b)


@numba.njit(cache=True)
def up_mul(a, b):
    """Smallest double that is >= a * b (one ulp looser near over/underflow)."""
    p = a * b
    if not math.isfinite(p):
        return p
    if a == 0.0 or b == 0.0:
        return 0.0
    if p == 0.0 or _unsafe(a) or _unsafe(b) or _unsafe(p):
        return math.nextafter(p, _INF)
    if _two_prod_err(a, b, p) > 0.0:
        return math.nextafter(p, _INF)
    return p


@numba.njit(cache=True)
def up_div(a, b):
    """Smallest double that is >= a / b (one ulp looser near over/underflow)."""
    q = a / b
    if not math.isfinite(q):
        return q
    if a == 0.0:
        return 0.0
    if q == 0.0 or _unsafe(a) or _unsafe(b) or _unsafe(q):
        return math.nextafter(q, _INF)
    p = q * b
    r = (a - p) - _two_prod_err(q, b, p)
    if (r > 0.0 and b > 0.0) or (r < 0.0 and b < 0.0):
        return math.nextafter(q, _INF)
    return q


@numba.njit(cache=True)
def up_sqrt(a):
    s = math.sqrt(a)
    if s == 0.0 or not math.isfinite(s):
        return s
    if _unsafe(s) or _unsafe(a):
        return math.nextafter(s, _INF)
    p = s * s
    if (p - a) + _two_prod_err(s, s, p) < 0.0:
        return math.nextafter(s, _INF)
    return s


@numba.njit(cache=True)
def dn_add(a, b):
    return -up_add(-a, -b)


@numba.njit(cache=True)
def dn_sub(a, b):
    return -up_add(-a, b)


@numba.njit(cache=True)
def dn_mul(a, b):
    return -up_mul(-a, b)


@numba.njit(cache=True)
def dn_div(a, b):
    return -up_div(-a, b)


@numba.njit(cache=True)
def dn_sqrt(a):
    s = math.sqrt(a)
    if s == 0.0 or not math.isfinite(s):
        return s
    if _unsafe(s) or _unsafe(a):
        return math.nextafter(s, -_INF)
    p = s * s
    if (p - a) + _two_prod_err(s, s, p) > 0.0:
        return math.nextafter(s, -_INF)
    return s


@numba.njit(cache=True)
def up_pow(x, d):
    """Upper bound of x**d for x >= 0, d > 0, assuming libm pow errs by <= 1 ulp."""
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    y = math.pow(x, d)
    for _ in range(_POW_ULPS):
        y = math.nextafter(y, _INF)
    return y


@numba.njit(cache=True)
def dn_pow(x, d):
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    y = math.pow(x, d)
    for _ in range(_POW_ULPS):
        y = math.nextafter(y, -_INF)
    return max(y, 0.0)


@numba.njit(cache=True)
def up_root(x, d):
    """Upper bound of x**(1/d), certified by the forward power bound."""
    if x == 0.0 or x == 1.0:
        return x
    y = math.pow(x, 1.0 / d)
    # need dn_pow(y, d) >= x
    while dn_pow(y, d) < x:
        y = math.nextafter(y, _INF)
    return y


@numba.njit(cache=True)
def dn_root(x, d):
    if x == 0.0 or x == 1.0:
        return x
    y = math.pow(x, 1.0 / d)
    while up_pow(y, d) > x:
        y = math.nextafter(y, -_INF)
    return max(y, 0.0)


# interval kernels on endpoint pairs (usable from other compiled code)


@numba.njit(cache=True)
def imul(alo, ahi, blo, bhi):
    hi = max(
        max(up_mul(alo, blo), up_mul(alo, bhi)), max(up_mul(ahi, blo), up_mul(ahi, bhi))
    )
    lo = min(
        min(dn_mul(alo, blo), dn_mul(alo, bhi)), min(dn_mul(ahi, blo), dn_mul(ahi, bhi))
    )
    return lo, hi


@numba.njit(cache=True)
def iadd(alo, ahi, blo, bhi):
    return dn_add(alo, blo), up_add(ahi, bhi)


@numba.njit(cache=True)
def isub(alo, ahi, blo, bhi):
    return dn_sub(alo, bhi), up_sub(ahi, blo)


@numba.njit(cache=True)
def idiv(alo, ahi, blo, bhi):
    """Caller guarantees blo * bhi > 0."""
    hi = max(
        max(up_div(alo, blo), up_div(alo, bhi)), max(up_div(ahi, blo), up_div(ahi, bhi))
    )
    lo = min(
        min(dn_div(alo, blo), dn_div(alo, bhi)), min(dn_div(ahi, blo), dn_div(ahi, bhi))
    )
    return lo, hi


@numba.njit(cache=True)
def iabs(lo, hi):
    return max(0.0, max(lo, -hi)), -min(0.0, min(lo, -hi))


@numba.njit(cache=True)
def ipow(lo, hi, d):
    """Enclosure of |x|**d over [lo, hi] for real d > 0."""
    alo, ahi = iabs(lo, hi)
    return dn_pow(alo, d), up_pow(ahi, d)


# ---------------------------------------------------------------------------
# the interval type
# ---------------------------------------------------------------------------


def _check(lo: float, hi: float) -> None:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise Overflow(f"non-finite endpoint [{lo}, {hi}]")


@dataclass(frozen=True, slots=True)
class IInterval:
    """Closed interval [lo, hi] with representable endpoints."""

    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        _check(lo, hi)
        if lo > hi:
            raise ValueError(f"empty interval [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def point(cls, x: float) -> "IInterval":
        return cls(x, x)

    @classmethod
    def coerce(cls, x) -> "IInterval":
        if isinstance(x, IInterval):
            return x
        if isinstance(x, (int, float, np.floating, np.integer)):
            xf = float(x)
            if isinstance(x, int) and int(xf) != x:
                return cls(math.nextafter(xf, -_INF), math.nextafter(xf, _INF))
            return cls(xf, xf)
        raise TypeError(f"cannot convert {type(x).__name__} to IInterval")

    # --- set-like helpers ---------------------------------------------------
    @property
    def mid(self) -> float:
        m = 0.5 * (self.lo + self.hi)
        return min(max(m, self.lo), self.hi)

    @property
    def width(self) -> float:
        """Upper bound on hi - lo."""
        return up_sub(self.hi, self.lo)

    @property
    def mag(self) -> float:
        return max(abs(self.lo), abs(self.hi))

    @property
    def mig(self) -> float:
        if self.lo <= 0.0 <= self.hi:
            return 0.0
        return min(abs(self.lo), abs(self.hi))

    def rad(self) -> float:
        """Upper bound on the distance from ``mid`` to either endpoint."""
        m = self.mid
        return max(up_sub(self.hi, m), up_sub(m, self.lo))

    def contains(self, x) -> bool:
        if isinstance(x, IInterval):
            return self.lo <= x.lo and x.hi <= self.hi
        return self.lo <= x <= self.hi

    def __contains__(self, x) -> bool:
        return self.contains(x)

    def interior_contains(self, x: "IInterval") -> bool:
        return self.lo < x.lo and x.hi < self.hi

    def overlaps(self, other: "IInterval") -> bool:
        return self.lo <= other.hi and other.lo <= self.hi

    def split(self) -> tuple["IInterval", "IInterval"]:
        m = self.mid
        return IInterval(self.lo, m), IInterval(m, self.hi)

    def inflate(self, r: float) -> "IInterval":
        return IInterval(dn_sub(self.lo, r), up_add(self.hi, r))

    def is_positive(self) -> bool:
        return self.lo > 0.0

    def is_negative(self) -> bool:
        return self.hi < 0.0

    # --- arithmetic -----------------------------------------------------------
    def __neg__(self) -> "IInterval":
        return IInterval(-self.hi, -self.lo)

    def __pos__(self) -> "IInterval":
        return self

    def __abs__(self) -> "IInterval":
        return IInterval(*iabs(self.lo, self.hi))

    def __add__(self, other) -> "IInterval":
        o = _as_interval(other)
        if o is None:
            return NotImplemented
        return IInterval(dn_add(self.lo, o.lo), up_add(self.hi, o.hi))

    __radd__ = __add__

    def __sub__(self, other) -> "IInterval":
        o = _as_interval(other)
        if o is None:
            return NotImplemented
        return IInterval(dn_sub(self.lo, o.hi), up_sub(self.hi, o.lo))

    def __rsub__(self, other) -> "IInterval":
        o = _as_interval(other)
        if o is None:
            return NotImplemented
        return o - self

    def __mul__(self, other) -> "IInterval":
        o = _as_interval(other)
        if o is None:
            return NotImplemented
        return IInterval(*imul(self.lo, self.hi, o.lo, o.hi))

    __rmul__ = __mul__

    def inv(self) -> "IInterval":
        if not (self.lo * self.hi > 0.0):
            raise DivisorStraddlesZero(f"inverse of {self}")
        return IInterval(dn_div(1.0, self.hi), up_div(1.0, self.lo))

    def __truediv__(self, other) -> "IInterval":
        o = _as_interval(other)
        if o is None:
            return NotImplemented
        if not (o.lo * o.hi > 0.0):
            raise DivisorStraddlesZero(f"division by {o}")
        return IInterval(*idiv(self.lo, self.hi, o.lo, o.hi))

    def __rtruediv__(self, other) -> "IInterval":
        o = _as_interval(other)
        if o is None:
            return NotImplemented
        return o / self

    def __pow__(self, k: int) -> "IInterval":
        """Integer power by repeated multiplication (even powers are nonnegative)."""
        if not isinstance(k, (int, np.integer)) or k < 0:
            raise TypeError("integer exponent >= 0 expected; use pow_real")
        if k == 0:
            return IInterval(1.0, 1.0)
        base = abs(self) if k % 2 == 0 else self
        out = base
        for _ in range(k - 1):
            out = out * base
        return out

    def sqrt(self) -> "IInterval":
        if self.lo < 0.0:
            raise NegativeBase(f"sqrt of {self}")
        return IInterval(dn_sqrt(self.lo), up_sqrt(self.hi))

    def sqr(self) -> "IInterval":
        a = abs(self)
        return IInterval(dn_mul(a.lo, a.lo), up_mul(a.hi, a.hi))

    # --- comparisons (certified) ----------------------------------------------
    def certainly_lt(self, other) -> bool:
        o = IInterval.coerce(other)
        return self.hi < o.lo

    def certainly_gt(self, other) -> bool:
        o = IInterval.coerce(other)
        return self.lo > o.hi

    def __repr__(self) -> str:
        return f"IInterval({self.lo!r}, {self.hi!r})"

    def to_hex(self) -> str:
        return interval_to_hex(self)


def _as_interval(x):
    if isinstance(x, IInterval):
        return x
    if isinstance(x, (int, float, np.floating, np.integer)):
        return IInterval.coerce(x)
    return None


def hull(*items: IInterval | Iterable[IInterval]) -> IInterval:
    flat: list[IInterval] = []
    for it in items:
        if isinstance(it, IInterval):
            flat.append(it)
        else:
            flat.extend(it)
    return IInterval(min(a.lo for a in flat), max(a.hi for a in flat))


def intersect(a: IInterval, b: IInterval) -> IInterval | None:
    lo, hi = max(a.lo, b.lo), min(a.hi, b.hi)
    if lo > hi:
        return None
    return IInterval(lo, hi)


def pow_real(a: IInterval, d: float) -> IInterval:
    """Enclosure of {x**d : x in a} for a >= 0 and real d > 0."""
    if a.lo < 0.0:
        raise NegativeBase(f"pow_real of {a}")
    if not d > 0.0:
        raise ValueError("exponent must be positive")
    return IInterval(dn_pow(a.lo, d), up_pow(a.hi, d))


def root_real(a: IInterval, d: float) -> IInterval:
    """Enclosure of {x**(1/d) : x in a} for a >= 0 and real d > 0."""
    if a.lo < 0.0:
        raise NegativeBase(f"root_real of {a}")
    if not d > 0.0:
        raise ValueError("exponent must be positive")
    return IInterval(dn_root(a.lo, d), up_root(a.hi, d))


def interval_to_hex(a: IInterval) -> str:
    return f"{a.lo.hex()} {a.hi.hex()}"


def interval_from_hex(line: str) -> IInterval:
    lo, hi = line.split()[:2]
    return IInterval(float.fromhex(lo), float.fromhex(hi))
