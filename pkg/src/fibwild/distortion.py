"""Schwarzian sign, postcritical orbit and the Koebe distortion constant."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .maps import BranchAmbiguous, FibonacciMap
from .renorm import RenormElement
from .rigor import IInterval, IntervalError, intersect, pow_real

__all__ = [
    "SchwarzianInconclusive",
    "NoSpace",
    "OrderingViolated",
    "PostcriticalData",
    "DistortionBound",
    "schwarzian_numerator_T",
    "schwarzian_numerator_J",
    "schwarzian_nonpositive",
    "schwarzian_check",
    "SchwarzianReport",
    "postcritical_orbit",
    "koebe_bound_from_space",
    "koebe_constant",
    "BranchAmbiguous",
]

ONE = IInterval(1.0, 1.0)
HALF = IInterval(0.5, 0.5)
THREE_HALVES = IInterval(1.5, 1.5)

# order of the postcritical points of the unimodal-type map (orientation -1)
UNIMODAL_ORDER = (1, 6, 12, 4, 5, 13, 11, 3, 7, 2)


class SchwarzianInconclusive(IntervalError):
    pass


class NoSpace(IntervalError):
    pass


class OrderingViolated(IntervalError):
    pass


# ---------------------------------------------------------------------------
# Schwarzian
# ---------------------------------------------------------------------------


def schwarzian_numerator_J(Fm: FibonacciMap, y: IInterval) -> IInterval:
    """psi''' psi' - 3/2 psi''^2 at y in [-1, 1]; a positive multiple of the numerator of S F on J_1."""
    d1, d2, d3 = Fm.psi_derivatives
    a, b, c = d1(y), d2(y), d3(y)
    return c * a - THREE_HALVES * b.sqr()


def schwarzian_numerator_T(Fm: FibonacciMap, y: IInterval) -> IInterval:
    """(F''' F' - 3/2 F''^2) / |y|^(2d-4) on T_1 at y = x/t, up to the positive factor A^2 t^(2d-4).

    With A = d(1 - v)/t and u = p_v(y) this equals
    A^2 |y|^(2d) (phi''' phi' - 3/2 phi''^2)(u) - phi'(u)^2 (d^2 - 1) / (2 t^2),
    which is finite at y = 0.
    """
    e = Fm.element
    d = IInterval.point(e.d)
    yabs = abs(y)
    u = _clip(e.v + (ONE - e.v) * pow_real(yabs, e.d))
    d1, d2, d3 = Fm.phi_derivatives
    p1, p2, p3 = d1(u), d2(u), d3(u)
    A = d * (ONE - e.v) / e.t
    S_phi = p3 * p1 - THREE_HALVES * p2.sqr()
    lead = A.sqr() * pow_real(yabs, 2.0 * e.d) * S_phi
    power = p1.sqr() * (d.sqr() - ONE) / (IInterval(2.0, 2.0) * e.t.sqr())
    return lead - power


def _clip(x: IInterval) -> IInterval:
    r = intersect(x, IInterval(-1.0, 1.0))
    if r is None:
        raise IntervalError(f"{x} leaves [-1, 1]")
    return r


@dataclass
class SchwarzianReport:
    nonpositive: bool
    cells_checked: int
    max_upper: float
    positive_cells: list = field(default_factory=list)


def _sweep(evaluate, cells: list[IInterval], max_depth: int) -> tuple[int, float, list, list]:
    checked = 0
    worst = -np.inf
    positive = []
    pending = [(c, 0) for c in cells]
    stuck = []
    while pending:
        cell, depth = pending.pop()
        val = evaluate(cell)
        checked += 1
        if val.hi <= 0.0:
            worst = max(worst, val.hi)
        elif val.lo > 0.0:
            positive.append(cell)
        elif depth < max_depth:
            a, b = cell.split()
            pending += [(a, depth + 1), (b, depth + 1)]
        else:
            stuck.append(cell)
    return checked, worst, positive, stuck


def schwarzian_check(F: RenormElement | FibonacciMap, mesh: int = 400, max_depth: int = 12) -> SchwarzianReport:
    """Certify the sign of the Schwarzian numerator on J_1 u T_1 cell by cell."""
    if mesh < 2:
        raise ValueError("mesh must be at least 2")
    Fm = FibonacciMap.of(F)
    grid = np.linspace(-1.0, 1.0, mesh + 1)
    cells = [IInterval(grid[k], grid[k + 1]) for k in range(mesh)]
    nJ, wJ, posJ, stuckJ = _sweep(lambda y: schwarzian_numerator_J(Fm, y), cells, max_depth)
    nT, wT, posT, stuckT = _sweep(lambda y: schwarzian_numerator_T(Fm, y), cells, max_depth)
    if stuckJ or stuckT:
        raise SchwarzianInconclusive(
            f"sign undecided on {len(stuckJ)} J-cells and {len(stuckT)} T-cells after {max_depth} bisections"
        )
    positive = [("J", c) for c in posJ] + [("T", c) for c in posT]
    return SchwarzianReport(not positive, nJ + nT, float(max(wJ, wT)), positive)


def schwarzian_nonpositive(F: RenormElement | FibonacciMap, mesh: int = 400, max_depth: int = 12) -> bool:
    """True when the Schwarzian numerator is certified <= 0 on every cell of J_1 u T_1.

    Cells are uniform in the unit coordinates of each branch (s_J^{-1} x on J_1
    and x/t on T_1). Undecided cells are bisected up to ``max_depth`` times;
    SchwarzianInconclusive is raised if any remain.
    """
    return schwarzian_check(F, mesh, max_depth).nonpositive


# ---------------------------------------------------------------------------
# postcritical orbit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PostcriticalData:
    x: tuple[IInterval, ...]
    lam: IInterval
    orientation: int
    relations: dict = field(default_factory=dict, compare=False)

    def __getitem__(self, n: int) -> IInterval:
        return self.x[n]


def _overlaps(a: IInterval, b: IInterval) -> bool:
    return intersect(a, b) is not None


def postcritical_orbit(F: RenormElement | FibonacciMap, upto: int = 18) -> PostcriticalData:
    """Interval orbit x_n = F^n(0) with the self-similarity relations of the cycle checked.

    Checked relations (each as a nonempty intersection of enclosures):
    x_7 = sigma lam x_4 and x_11 = -lam^2 x_4 for both maps, x_18 = -lam^3 x_4 for
    F (sigma = +1) and x_29 = lam^4 x_4 for G (sigma = -1) when available. For G
    the postcritical order x_1 < x_6 < x_12 < x_4 < x_5 < x_13 < x_11 < x_3 < x_7 < x_2
    is certified with strict inequalities.
    """
    if upto < 18:
        raise ValueError("the relations need the orbit up to x_18")
    Fm = FibonacciMap.of(F)
    x = Fm.orbit(IInterval(0.0, 0.0), upto)
    lam = Fm.lam
    sig = IInterval.point(float(Fm.orientation))
    rel = {
        "x7 = sigma lam x4": _overlaps(x[7], sig * lam * x[4]),
        "x11 = -lam^2 x4": _overlaps(x[11], -(lam.sqr() * x[4])),
    }
    if Fm.orientation == 1:
        rel["x18 = -lam^3 x4"] = _overlaps(x[18], -(lam**3 * x[4]))
    elif upto >= 29:
        rel["x29 = lam^4 x4"] = _overlaps(x[29], lam**4 * x[4])
    if Fm.orientation == -1:
        rel["unimodal order"] = all(x[a].certainly_lt(x[b]) for a, b in zip(UNIMODAL_ORDER, UNIMODAL_ORDER[1:]))
    failed = [k for k, ok in rel.items() if not ok]
    if failed:
        raise OrderingViolated(f"postcritical relations fail: {failed}")
    return PostcriticalData(tuple(x), lam, Fm.orientation, rel)


# ---------------------------------------------------------------------------
# Koebe constant
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DistortionBound:
    tau: IInterval
    C: float
    bracket: tuple[IInterval, IInterval] | None = None


def koebe_bound_from_space(tau: IInterval | float) -> float:
    """Upper bound on (1 + tau)^2 / tau^2 over the enclosure of tau."""
    tau = IInterval.coerce(tau)
    if not tau.lo > 0.0:
        raise NoSpace(f"Koebe space {tau} is not positive")
    lo = IInterval.point(tau.lo)  # the bound decreases in tau
    return (((ONE + lo) / lo).sqr()).hi


def koebe_constant(F: RenormElement | FibonacciMap, orbit: PostcriticalData | None = None) -> DistortionBound:
    """tau = min(gap)/|T_1| for T_1 inside [x_4, -x_4/lam], and C = (1 + tau)^2 / tau^2."""
    Fm = FibonacciMap.of(F)
    if orbit is None:
        orbit = postcritical_orbit(Fm)
    t = Fm.element.t
    x4 = orbit[4]
    left = x4
    right = -(x4 / orbit.lam)
    gap_left = -t - left
    gap_right = right - t
    if not (gap_left.lo > 0.0 and gap_right.lo > 0.0):
        raise NoSpace(f"T_1 is not inside [{left}, {right}]")
    gap = IInterval(min(gap_left.lo, gap_right.lo), min(gap_left.hi, gap_right.hi))
    tau = gap / (IInterval(2.0, 2.0) * t)
    return DistortionBound(tau, koebe_bound_from_space(tau), (left, right))
