"""The Fibonacci map of a renormalization element and its rescaled first-return maps.

An element (v, i, j, t, psi, phi) defines two maps on J_1 u T_1 with
J_1 = [i, j] and T_1 = [-t, t]:

    F(x) = phi(p_v(x / t))         on T_1,
    F(x) = sigma psi(s_J^{-1} x)   on J_1,

with sigma = +1 for F and sigma = -1 for G = (f, -g). At the fixed point the
two form the period-two cycle, and the first-return maps satisfy
F_n(x) = s_n lam^n H_n(s_n x / lam^n) with lam = t, H_n = F for even n and G for
odd n, s_n = +1 for n mod 4 in {0, 1} and -1 otherwise. Starting from G the
roles of F and G swap and the sign pattern shifts by one.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .funcspace import FuncEnclosure, derivative_enclosure, eval_enclosure
from .renorm import RenormElement, power_map_eval
from .rigor import IInterval, IntervalError, intersect

__all__ = [
    "BranchAmbiguous",
    "FibonacciMap",
    "level_transform",
]

_UNIT = IInterval(-1.0, 1.0)


class BranchAmbiguous(IntervalError):
    pass


def level_transform(orientation: int, m: int) -> tuple[int, int]:
    """(s, orientation of H) with F_m(x) = s lam^m H(s x / lam^m) for the map of the given orientation.

    For F (orientation +1): F_1 = lam G(x/lam), F_2 = -lam^2 F(-x/lam^2), ...
    For G (orientation -1): G_1 = -lam F(-x/lam), G_2 = -lam^2 G(-x/lam^2), ...
    """
    if m < 0:
        raise ValueError("level must be nonnegative")
    if orientation == 1:
        s = 1 if m % 4 in (0, 1) else -1
    elif orientation == -1:
        s = 1 if m % 4 in (0, 3) else -1
    else:
        raise ValueError("orientation must be +1 or -1")
    h = orientation if m % 2 == 0 else -orientation
    return s, h


@dataclass(frozen=True, eq=False)
class FibonacciMap:
    """Interval evaluation of the map defined by an element, with branch certification."""

    element: RenormElement
    orientation: int = -1

    def __post_init__(self):
        if self.orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")

    # --- geometry ---------------------------------------------------------------
    @property
    def d(self) -> float:
        return self.element.d

    @property
    def lam(self) -> IInterval:
        return self.element.t

    @property
    def T(self) -> IInterval:
        """Hull of T_1 over the uncertainty of t."""
        return IInterval(-self.element.t.hi, self.element.t.hi)

    @property
    def J(self) -> IInterval:
        return IInterval(self.element.i.lo, self.element.j.hi)

    @cached_property
    def cJ(self) -> IInterval:
        return (self.element.i + self.element.j) * IInterval(0.5, 0.5)

    @cached_property
    def lamJ(self) -> IInterval:
        return (self.element.j - self.element.i) * IInterval(0.5, 0.5)

    def in_T(self, x: IInterval) -> bool:
        return x.mag <= self.element.t.lo

    def in_J(self, x: IInterval) -> bool:
        return self.element.i.hi <= x.lo and x.hi <= self.element.j.lo

    def outside(self, x: IInterval) -> bool:
        """Certified disjoint from J_1 u T_1."""
        e = self.element
        off_T = x.lo > e.t.hi or x.hi < -e.t.hi
        off_J = x.lo > e.j.hi or x.hi < e.i.lo
        return off_T and off_J

    # --- evaluation -------------------------------------------------------------
    def branch(self, x: IInterval) -> str:
        if self.in_T(x):
            return "T"
        if self.in_J(x):
            return "J"
        raise BranchAmbiguous(f"{x} is not certified inside a single branch domain")

    def __call__(self, x) -> IInterval:
        x = IInterval.coerce(x)
        e = self.element
        if self.branch(x) == "T":
            y = _clip_unit(x / e.t)
            return eval_enclosure(e.phi, _clip_unit(power_map_eval(e.v, e.d, y)))
        y = _clip_unit((x - self.cJ) / self.lamJ)
        val = eval_enclosure(e.psi, y)
        return val if self.orientation == 1 else -val

    def orbit(self, x, steps: int) -> list[IInterval]:
        out = [IInterval.coerce(x)]
        for _ in range(steps):
            out.append(self(out[-1]))
        return out

    def midpoint_map(self):
        """Non-rigorous float map at the midpoint element (for predictors)."""
        e = self.element
        v, i, j, t, d = e.v.mid, e.i.mid, e.j.mid, e.t.mid, e.d
        psi, phi = e.psi.mid, e.phi.mid
        sig = float(self.orientation)
        poly = np.polynomial.polynomial.polyval

        def f(x: float) -> float:
            if abs(x) <= t:
                return float(poly(v + (1 - v) * abs(x / t) ** d, phi))
            if i <= x <= j:
                return float(sig * poly((x - (i + j) / 2) / ((j - i) / 2), psi))
            return float("nan")

        return f

    # --- derivatives -------------------------------------------------------------
    @cached_property
    def psi_derivatives(self) -> tuple[FuncEnclosure, FuncEnclosure, FuncEnclosure]:
        d1 = derivative_enclosure(self.element.psi)
        d2 = derivative_enclosure(d1)
        return d1, d2, derivative_enclosure(d2)

    @cached_property
    def phi_derivatives(self) -> tuple[FuncEnclosure, FuncEnclosure, FuncEnclosure]:
        d1 = derivative_enclosure(self.element.phi)
        d2 = derivative_enclosure(d1)
        return d1, d2, derivative_enclosure(d2)

    @classmethod
    def of(cls, F: "RenormElement | FibonacciMap", orientation: int = -1) -> "FibonacciMap":
        return F if isinstance(F, FibonacciMap) else cls(F, orientation)


def _clip_unit(x: IInterval) -> IInterval:
    """Intersect with [-1, 1]; callers guarantee the exact value lies there."""
    r = intersect(x, _UNIT)
    if r is None:
        raise BranchAmbiguous(f"{x} does not meet [-1, 1]")
    return r
