"""Certified bounds on the escape statistics eta_n, zeta_n and the trichotomy verdict.

eta_n is the relative measure of the points of T_1 whose orbit enters T_n and
zeta_n the relative measure of the points of T_n that leave T_n for good
after finitely many first returns. Lower bounds come from sets certified to
belong to the target set, upper bounds from certifying the complement; every
undecided piece is assigned in the direction that keeps the bound valid.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _dynamics as dyn
from .funcspace import FuncEnclosure, _mid_rad, derivative_enclosure, _horner
from .maps import BranchAmbiguous, FibonacciMap, level_transform
from .renorm import RenormElement
from .rigor import IInterval, IntervalError, dn_div, dn_sub, up_add, up_div, up_mul, up_sub

__all__ = [
    "SegmentSet",
    "BoundReport",
    "TrichotomyVerdict",
    "Orbit",
    "OrbitStatus",
    "level_scale",
    "preimage_set",
    "exit_targets",
    "MapKernel",
    "NotMonotone",
    "map_kernel",
    "iterate_map",
    "first_return_iterate",
    "partition_edges",
    "shard_range",
    "eta_segments",
    "eta_upper",
    "eta_lower",
    "zeta_segments",
    "zeta_lower",
    "returning_levels",
    "return_pullback",
    "zeta_upper",
    "trichotomy",
    "recursive_inequality_check",
    "theorem_window",
]

_ONE = IInterval(1.0, 1.0)


class NotMonotone(IntervalError):
    pass


# ---------------------------------------------------------------------------
# segment sets
# ---------------------------------------------------------------------------


def _measure(lo: np.ndarray, hi: np.ndarray) -> tuple[float, float]:
    """Bounds on the exact sum of hi - lo, independent of summation order."""
    if lo.size == 0:
        return 0.0, 0.0
    s = math.fsum(np.concatenate([hi, -lo]).tolist())
    return max(math.nextafter(s, -math.inf), 0.0), math.nextafter(s, math.inf)


@dataclass(frozen=True, eq=False)
class SegmentSet:
    """A finite union of closed float intervals, kept sorted and disjoint."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.ascontiguousarray(self.lo, dtype=float).reshape(-1)
        hi = np.ascontiguousarray(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise ValueError("endpoint arrays differ in length")
        if np.any(~np.isfinite(lo)) or np.any(~np.isfinite(hi)):
            raise ValueError("non-finite endpoint")
        if np.any(lo > hi):
            raise ValueError("segment with lo > hi")
        lo, hi = _union(lo, hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def empty(cls) -> "SegmentSet":
        return cls(np.empty(0), np.empty(0))

    @classmethod
    def from_pairs(cls, pairs) -> "SegmentSet":
        arr = np.asarray(pairs, dtype=float).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1])

    def __len__(self) -> int:
        return self.lo.size

    @property
    def segments(self) -> list[IInterval]:
        return [IInterval(a, b) for a, b in zip(self.lo.tolist(), self.hi.tolist())]

    def pairs(self) -> np.ndarray:
        return np.column_stack([self.lo, self.hi])

    @property
    def measure_lo(self) -> float:
        return _measure(self.lo, self.hi)[0]

    @property
    def measure_hi(self) -> float:
        return _measure(self.lo, self.hi)[1]

    def union(self, *others: "SegmentSet") -> "SegmentSet":
        return SegmentSet(
            np.concatenate([self.lo] + [o.lo for o in others]),
            np.concatenate([self.hi] + [o.hi for o in others]),
        )

    def clip(self, a: float, b: float) -> "SegmentSet":
        """Intersection with [a, b]."""
        lo = np.maximum(self.lo, a)
        hi = np.minimum(self.hi, b)
        keep = lo <= hi
        return SegmentSet(lo[keep], hi[keep])

    def remove(self, a: float, b: float) -> "SegmentSet":
        """Largest float segments of the set difference with the closed interval [a, b]."""
        left_hi = np.minimum(self.hi, np.nextafter(a, -math.inf))
        right_lo = np.maximum(self.lo, np.nextafter(b, math.inf))
        kl = self.lo <= left_hi
        kr = right_lo <= self.hi
        return SegmentSet(
            np.concatenate([self.lo[kl], right_lo[kr]]),
            np.concatenate([left_hi[kl], self.hi[kr]]),
        )

    def inner_scale(self, c: IInterval) -> "SegmentSet":
        """Largest float segments inside {c x : x in S} for every c in the enclosure (0 not in c)."""
        if c.lo <= 0.0 <= c.hi:
            raise IntervalError("scale factor straddles zero")
        lo, hi = self.lo, self.hi
        if c.hi < 0.0:
            c = -c
            lo, hi = -hi, -lo
        a = np.array([max(_up_mul(x, c.lo), _up_mul(x, c.hi)) for x in lo.tolist()])
        b = np.array([min(_dn_mul(x, c.lo), _dn_mul(x, c.hi)) for x in hi.tolist()])
        keep = a < b
        return SegmentSet(a[keep], b[keep])

    def inner_divide(self, c: IInterval) -> "SegmentSet":
        """Largest float segments inside {x / c : x in S} for every c in the enclosure."""
        return self.inner_scale(_ONE / c)

    def __eq__(self, other) -> bool:
        return isinstance(other, SegmentSet) and np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)

    def __repr__(self) -> str:
        return f"SegmentSet({len(self)} segments, measure in [{self.measure_lo!r}, {self.measure_hi!r}])"


def _up_mul(a: float, b: float) -> float:
    return up_mul(a, b)


def _dn_mul(a: float, b: float) -> float:
    return -up_mul(-a, b)


def _union(lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if lo.size == 0:
        return lo.copy(), hi.copy()
    order = np.lexsort((hi, lo))
    lo, hi = lo[order], hi[order]
    run_hi = np.maximum.accumulate(hi)
    start = np.empty(lo.size, dtype=bool)
    start[0] = True
    start[1:] = lo[1:] > run_hi[:-1]
    idx = np.flatnonzero(start)
    ends = np.append(idx[1:] - 1, lo.size - 1)
    return lo[idx].copy(), run_hi[ends].copy()


# ---------------------------------------------------------------------------
# reports and verdicts
# ---------------------------------------------------------------------------


@dataclass
class BoundReport:
    """Certified bounds eta_lo <= eta_n <= eta_hi and zeta_lo <= zeta_n <= zeta_hi."""

    n: int
    eta_lo: float = 0.0
    eta_hi: float = 1.0
    zeta_lo: float = 0.0
    zeta_hi: float = 1.0
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        for a, b, name in ((self.eta_lo, self.eta_hi, "eta"), (self.zeta_lo, self.zeta_hi, "zeta")):
            if not (0.0 <= a <= b <= 1.0):
                raise ValueError(f"inconsistent {name} bounds [{a}, {b}]")

    def combine(self, other: "BoundReport") -> "BoundReport":
        """Intersection of the bounds of two reports on the same level."""
        if other.n != self.n:
            raise ValueError("reports are for different levels")
        params = {**self.parameters, **other.parameters}
        return BoundReport(
            self.n,
            max(self.eta_lo, other.eta_lo),
            min(self.eta_hi, other.eta_hi),
            max(self.zeta_lo, other.zeta_lo),
            min(self.zeta_hi, other.zeta_hi),
            params,
        )

    def to_text(self) -> str:
        lines = [f"n = {self.n}"]
        for k in ("eta_lo", "eta_hi", "zeta_lo", "zeta_hi"):
            x = getattr(self, k)
            lines.append(f"{k} = {x.hex()}  # {x!r}")
        for k, v in self.parameters.items():
            lines.append(f"param.{k} = {v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "BoundReport":
        vals: dict = {}
        params: dict = {}
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, val = (s.strip() for s in line.partition("="))
            if key.startswith("param."):
                params[key[6:]] = val
            elif key == "n":
                vals["n"] = int(val)
            else:
                vals[key] = float.fromhex(val)
        return cls(parameters=params, **vals)


class TrichotomyVerdict(enum.Enum):
    NoWildAttractor_Case1 = "no wild attractor (eta/zeta < 1/C)"
    Indeterminate_Case2Band = "indeterminate (1/C <= eta/zeta <= C not excluded)"
    WildAttractor_Case3 = "wild attractor (eta/zeta > C)"


def trichotomy(report: BoundReport, C: float) -> TrichotomyVerdict:
    """Verdict from certified bounds, using the unfavourable end of every bound."""
    if not C > 1.0:
        raise ValueError("the distortion constant must exceed 1")
    if report.zeta_lo > 0.0 and up_mul(report.eta_hi, C) < report.zeta_lo:
        return TrichotomyVerdict.NoWildAttractor_Case1
    if report.eta_lo > up_mul(C, report.zeta_hi):
        return TrichotomyVerdict.WildAttractor_Case3
    return TrichotomyVerdict.Indeterminate_Case2Band


# ---------------------------------------------------------------------------
# kernel data
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MapKernel:
    """Arrays consumed by the compiled dynamics kernels for one map."""

    pm: np.ndarray
    pb: np.ndarray
    sm: np.ndarray
    sb: np.ndarray
    geo: np.ndarray
    fmap: FibonacciMap

    @property
    def sigma(self) -> float:
        return float(self.fmap.orientation)

    @property
    def t(self) -> IInterval:
        return self.fmap.element.t

    def with_orientation(self, orientation: int) -> "MapKernel":
        geo = self.geo.copy()
        geo[13] = float(orientation)
        return MapKernel(self.pm, self.pb, self.sm, self.sb, geo, FibonacciMap(self.fmap.element, orientation))


def _effective_degree(f: FuncEnclosure, tol: float = 1e-19) -> int:
    a = f.abs_coeffs()
    tail = np.cumsum(a[::-1])[::-1]
    for D in range(4, f.N):
        if tail[D + 1] <= tol:
            return D
    return f.N


def _point_form(f: FuncEnclosure) -> tuple[np.ndarray, np.ndarray]:
    """(mid, bound) arrays: f(x) in Horner(mid, x) +- Horner(bound, |x|) up to Horner rounding."""
    g = f.reduce_degree(_effective_degree(f))
    n = _effective_degree(f) + 1
    mid, rad = _mid_rad(g.lo[:n].copy(), g.hi[:n].copy())
    gam = (2 * n + 4) * 2.0**-53
    bound = np.array(
        [up_add(up_add(up_mul(gam, abs(m)), r), t) for m, r, t in zip(mid.tolist(), rad.tolist(), g.tail[:n].tolist())]
    )
    # tail slots above n are zero after the reduction
    return mid, bound


def _certify_increasing(f: FuncEnclosure, name: str, cells: int = 256, depth: int = 12) -> None:
    df = derivative_enclosure(f)
    pending = [(a, b, 0) for a, b in zip(np.linspace(-1, 1, cells + 1)[:-1], np.linspace(-1, 1, cells + 1)[1:])]
    while pending:
        a, b, k = pending.pop()
        lo, _ = _horner(df.lo, df.hi, df.tail, np.array([a]), np.array([b]))
        if lo[0] > 0.0:
            continue
        if k >= depth:
            raise NotMonotone(f"{name}' is not certified positive on [{a}, {b}]")
        m = 0.5 * (a + b)
        pending += [(a, m, k + 1), (m, b, k + 1)]


@lru_cache(maxsize=16)
def _kernel_cached(element: RenormElement, orientation: int) -> MapKernel:
    e = element
    _certify_increasing(e.phi, "phi")
    _certify_increasing(e.psi, "psi")
    Fm = FibonacciMap(e, orientation)
    pm, pb = _point_form(e.phi)
    sm, sb = _point_form(e.psi)
    cJ, lJ = Fm.cJ, Fm.lamJ
    if not lJ.lo > 0.0:
        raise IntervalError("J_1 has no certified positive length")
    geo = np.array(
        [e.v.lo, e.v.hi, e.t.lo, e.t.hi, e.i.lo, e.i.hi, e.j.lo, e.j.hi, cJ.lo, cJ.hi, lJ.lo, lJ.hi, e.d, float(orientation)]
    )
    return MapKernel(pm, pb, sm, sb, geo, Fm)


def map_kernel(F: RenormElement | FibonacciMap, orientation: int = -1) -> MapKernel:
    """Kernel arrays for F, after certifying that phi and psi are increasing on [-1, 1]."""
    Fm = FibonacciMap.of(F, orientation)
    return _kernel_cached(Fm.element, Fm.orientation)


# ---------------------------------------------------------------------------
# orbits
# ---------------------------------------------------------------------------


class OrbitStatus(enum.Enum):
    Escaped = "escaped"
    Ambiguous = "ambiguous"
    Exhausted = "exhausted"


@dataclass
class Orbit:
    points: list[IInterval]
    branches: list[str]
    status: OrbitStatus

    @property
    def steps(self) -> int:
        return len(self.points) - 1

    def __getitem__(self, k: int) -> IInterval:
        return self.points[k]



def _run_orbit(Fm: FibonacciMap, x: IInterval, steps: int) -> Orbit:
    pts = [x]
    log: list[str] = []
    for _ in range(steps):
        cur = pts[-1]
        if Fm.outside(cur):
            return Orbit(pts, log, OrbitStatus.Escaped)
        try:
            b = Fm.branch(cur)
        except BranchAmbiguous:
            return Orbit(pts, log, OrbitStatus.Ambiguous)
        log.append(b)
        pts.append(Fm(cur))
    if Fm.outside(pts[-1]):
        return Orbit(pts, log, OrbitStatus.Escaped)
    return Orbit(pts, log, OrbitStatus.Exhausted)


def iterate_map(F: RenormElement | FibonacciMap, x, steps: int, orientation: int = -1) -> Orbit:
    """Interval orbit of x under F with the branch used at each step.

    Stops early with status Escaped once an image is certified outside
    T_1 u J_1, or Ambiguous once an image is in neither branch domain.
    """
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    return _run_orbit(FibonacciMap.of(F, orientation), IInterval.coerce(x), steps)


def level_scale(F: RenormElement | FibonacciMap, n: int, orientation: int = -1) -> tuple[IInterval, FibonacciMap]:
    """(s lam^(n-1), H) with F_{n-1}(x) = c H(x / c) for c = s lam^(n-1)."""
    Fm = FibonacciMap.of(F, orientation)
    if n < 1:
        raise ValueError("levels start at 1")
    s, h = level_transform(Fm.orientation, n - 1)
    c = Fm.lam ** (n - 1) if n > 1 else _ONE
    return (c if s > 0 else -c), FibonacciMap(Fm.element, h)


def first_return_iterate(F: RenormElement | FibonacciMap, n: int, x, steps: int, orientation: int = -1) -> Orbit:
    """Orbit of x in T_n u J_n under F_{n-1} = c H(. / c), with statuses relative to T_n u J_n."""
    c, H = level_scale(F, n, orientation)
    y = IInterval.coerce(x) / c
    if steps > 0 and not (H.in_T(y) or H.in_J(y)):
        raise BranchAmbiguous(f"{x} is not certified inside T_{n} or J_{n}")
    orb = _run_orbit(H, y, steps)
    return Orbit([c * p for p in orb.points], orb.branches, orb.status)


# ---------------------------------------------------------------------------
# partitions and shards
# ---------------------------------------------------------------------------


def partition_edges(a: float, b: float, M: int) -> np.ndarray:
    """M + 1 increasing floats from a to b (both exact)."""
    if M < 1:
        raise ValueError("partition needs at least one piece")
    e = a + (b - a) * (np.arange(M + 1) / M)
    e[0], e[-1] = a, b
    e = np.maximum.accumulate(e)
    if np.any(np.diff(e) <= 0.0):
        raise ValueError("partition too fine for double precision")
    return e


def shard_range(p: int, m: int, i: int) -> tuple[int, int]:
    """0-based half-open range of the i-th of m shards over p pieces; the last shard takes the remainder."""
    if m < 1 or not 1 <= i <= m:
        raise ValueError(f"shard {i} out of range for {m} shards")
    q = p // m
    j0 = (i - 1) * q
    j1 = p if i == m else i * q
    return j0, j1


def _tn(t: IInterval, n: int) -> IInterval:
    return t**n


def _depth(cutoff: float) -> int:
    """Bisection count allowed by a refinement size cutoff (pieces no smaller than cutoff * |I|)."""
    if cutoff >= 1.0:
        return 0
    if cutoff <= 0.0:
        raise ValueError("cutoff must be positive")
    return int(math.ceil(math.log2(1.0 / cutoff)))


# ---------------------------------------------------------------------------
# eta
# ---------------------------------------------------------------------------


@dataclass
class ScanResult:
    segments: SegmentSet
    stats: dict


def eta_segments(
    F, n: int, M: int, N: int, cutoff: float = 1e-3, upper: bool = True, shard: tuple[int, int] = (1, 1), orientation: int = -1
) -> ScanResult:
    """Counted segments of the partition of T_1 for the eta bound of the given direction.

    Upper: everything except pieces certified to escape T_1 u J_1 before
    meeting T_n. Lower: pieces certified to land inside T_n within N steps.
    """
    K = map_kernel(F, orientation)
    t = K.t
    tn = _tn(t, n)
    a = t.hi if upper else t.lo
    edges = partition_edges(-a, a, M)
    j0, j1 = shard_range(M, *shard)
    depth = _depth(cutoff)
    segs, stats = dyn.eta_scan(
        edges, j0, j1, K.pm, K.pb, K.sm, K.sb, K.geo, K.sigma, tn.lo, tn.hi, int(N), depth, bool(upper)
    )
    names = ("counted", "dropped", "split", "unresolved")
    return ScanResult(SegmentSet(segs[:, 0], segs[:, 1]), dict(zip(names, map(int, stats))))


def eta_from_segments(S: SegmentSet, t: IInterval, upper: bool) -> tuple[float, float]:
    if upper:
        return 0.0, min(up_div(S.measure_hi, 2.0 * t.lo), 1.0)
    return min(max(dn_div(S.measure_lo, 2.0 * t.hi), 0.0), 1.0), 1.0


def eta_upper(F, n: int, M: int, N: int, cutoff: float = 1e-3, orientation: int = -1) -> BoundReport:
    """Rigorous upper bound on eta_n = |X_n| / |T_1|."""
    if n <= 1:
        return BoundReport(max(n, 1), 1.0, 1.0, parameters={"kind": "eta_upper"})
    r = eta_segments(F, n, M, N, cutoff, True, orientation=orientation)
    lo, hi = eta_from_segments(r.segments, map_kernel(F, orientation).t, True)
    return BoundReport(n, lo, hi, parameters={"kind": "eta_upper", "M": M, "N": N, "cutoff": cutoff, **r.stats})


def eta_lower(F, n: int, M: int, N: int, cutoff: float = 1e-3, orientation: int = -1) -> BoundReport:
    """Rigorous lower bound on eta_n from pieces certified to land inside T_n."""
    if n <= 1:
        return BoundReport(max(n, 1), 1.0, 1.0, parameters={"kind": "eta_lower"})
    r = eta_segments(F, n, M, N, cutoff, False, orientation=orientation)
    lo, hi = eta_from_segments(r.segments, map_kernel(F, orientation).t, False)
    return BoundReport(n, lo, hi, parameters={"kind": "eta_lower", "M": M, "N": N, "cutoff": cutoff, **r.stats})


# ---------------------------------------------------------------------------
# zeta from below: the two-stage escape test
# ---------------------------------------------------------------------------


def zeta_segments(
    F,
    n: int,
    M: int,
    Z: int,
    X: int,
    F1: float = 1e-3,
    F2: float = 1e-3,
    avoid: int | None = None,
    shard: tuple[int, int] = (1, 1),
    orientation: int = -1,
) -> ScanResult:
    """Pieces I of T_1 (coordinates of H) whose copy at level n is certified inside Z_n.

    With ``avoid = m`` the first-return iterates must also stay clear of
    T_{n+m}, which certifies membership in the smaller set Z_{n,m}.
    """
    K = map_kernel(F, orientation)
    c, H = level_scale(K.fmap, n)
    t = K.t
    tn = _tn(t, n)
    if avoid is None:
        av = (0.0, 0.0)
    else:
        if avoid < 1:
            raise ValueError("avoid level must be at least 1")
        tm = _tn(t, avoid + 1)
        av = (tm.lo, tm.hi)
    edges = partition_edges(-t.lo, t.lo, M)
    j0, j1 = shard_range(M, *shard)
    segs, stats = dyn.zeta_scan(
        edges, j0, j1, K.pm, K.pb, K.sm, K.sb, K.geo,
        float(H.orientation), K.sigma, c.lo, c.hi, tn.lo, tn.hi, av[0], av[1],
        int(Z), int(X), _depth(F1), _depth(F2),
    )
    names = ("counted", "dropped", "split", "unresolved")
    return ScanResult(SegmentSet(segs[:, 0], segs[:, 1]), dict(zip(names, map(int, stats))))


def zeta_from_lower_segments(S: SegmentSet, t: IInterval) -> float:
    return min(max(dn_div(S.measure_lo, 2.0 * t.hi), 0.0), 1.0)


def zeta_lower(
    F, n: int, M: int, Z: int, X: int, F1: float = 1e-3, F2: float = 1e-3, avoid: int | None = None, orientation: int = -1
) -> BoundReport:
    """Rigorous lower bound on zeta_n (or on zeta_{n,m} with avoid = m)."""
    r = zeta_segments(F, n, M, Z, X, F1, F2, avoid, orientation=orientation)
    lo = zeta_from_lower_segments(r.segments, map_kernel(F, orientation).t)
    params = {"kind": "zeta_lower", "M": M, "Z": Z, "X": X, "F1": F1, "F2": F2, **r.stats}
    if avoid is not None:
        params["avoid"] = avoid
    return BoundReport(n, zeta_lo=lo, zeta_hi=1.0, parameters=params)


# ---------------------------------------------------------------------------
# zeta from above: returning set and its pullback
# ---------------------------------------------------------------------------


def preimage_set(K: MapKernel, S: SegmentSet) -> SegmentSet:
    """Inner enclosure of F^{-1}(S)."""
    if len(S) == 0:
        return SegmentSet.empty()
    out = dyn.preimages(S.pairs(), K.pm, K.pb, K.sm, K.sb, K.geo, K.sigma)
    return SegmentSet(out[:, 0], out[:, 1])


def returning_levels(F, n: int, depth: int, orientation: int = -1) -> list[SegmentSet]:
    """Inner enclosures of F^{-l}(T_n) for l = 0..depth, each reduced to disjoint segments."""
    K = map_kernel(F, orientation)
    tn = _tn(K.t, n)
    levels = [SegmentSet(np.array([-tn.lo]), np.array([tn.lo]))]
    for _ in range(depth):
        levels.append(preimage_set(K, levels[-1]))
    return levels


def exit_targets(F, n: int, W: SegmentSet, orientation: int = -1) -> SegmentSet:
    """Points of W outside T_n u J_n, in the coordinates of H and clipped to [-1, 1]."""
    K = map_kernel(F, orientation)
    c, _ = level_scale(K.fmap, n)
    tn = _tn(K.t, n)
    Jn = c * IInterval(K.geo[4], K.geo[7])
    V = W.remove(-tn.hi, tn.hi).remove(Jn.lo, Jn.hi)
    return V.inner_divide(c).clip(-1.0, 1.0)


def return_pullback(F, n: int, V: SegmentSet, depth: int, orientation: int = -1) -> SegmentSet:
    """Union over k = 1..depth of H^{-k}(V), intersected with T_1 (coordinates of H)."""
    K = map_kernel(F, orientation)
    _, H = level_scale(K.fmap, n)
    KH = K.with_orientation(H.orientation) if H.orientation != K.fmap.orientation else K
    t_lo = K.t.lo
    acc = SegmentSet.empty()
    cur = V
    for _ in range(depth):
        cur = preimage_set(KH, cur)
        acc = acc.union(cur.clip(-t_lo, t_lo))
    return acc


def zeta_upper(F, n: int, N: int, K: int, orientation: int = -1) -> BoundReport:
    """Rigorous upper bound on zeta_n from a certified part of T_n minus Z_n."""
    levels = returning_levels(F, n, N, orientation)
    W = SegmentSet.empty().union(*levels[1:]) if N > 0 else SegmentSet.empty()
    V = exit_targets(F, n, W, orientation)
    B = return_pullback(F, n, V, K, orientation)
    t = map_kernel(F, orientation).t
    frac = dn_div(B.measure_lo, 2.0 * t.hi)
    hi = min(max(up_sub(1.0, frac), 0.0), 1.0)
    return BoundReport(n, zeta_lo=0.0, zeta_hi=hi, parameters={"kind": "zeta_upper", "N": N, "K": K, "segments": len(B)})


def zeta_from_complement(B: SegmentSet, t: IInterval) -> float:
    frac = dn_div(B.measure_lo, 2.0 * t.hi)
    return min(max(up_sub(1.0, frac), 0.0), 1.0)


# ---------------------------------------------------------------------------
# recursive consistency audit
# ---------------------------------------------------------------------------


def _lohi(x) -> tuple[float, float]:
    if isinstance(x, BoundReport):
        raise TypeError("pass the eta or zeta bounds, not a whole report")
    if isinstance(x, IInterval):
        return x.lo, x.hi
    if isinstance(x, (tuple, list)):
        return float(x[0]), float(x[1])
    return float(x), float(x)


def theorem_window(eta_n, eta_m1, zeta_nm, C: float) -> IInterval:
    """Enclosure of [e_n e_m1 / (e_m1 + C z), e_n e_m1 / (e_m1 + z / C)] over the given bounds."""
    en, em, z = (IInterval(*_lohi(v)) for v in (eta_n, eta_m1, zeta_nm))
    Ci = IInterval.point(C)
    # both ends increase in e_n and e_m1 and decrease in z
    low = (IInterval.point(en.lo) * IInterval.point(em.lo)) / (IInterval.point(em.lo) + Ci * IInterval.point(z.hi))
    high = (IInterval.point(en.hi) * IInterval.point(em.hi)) / (IInterval.point(em.hi) + IInterval.point(z.lo) / Ci)
    return IInterval(low.lo, high.hi)


def recursive_inequality_check(F, n: int, m: int, reports: dict) -> bool:
    """True when the certified eta_{n+m} bounds meet the window predicted from eta_n, eta_{m+1}, zeta_{n,m}.

    ``F`` is the distortion constant C or anything koebe_constant accepts.
    ``reports`` maps "eta_n", "eta_m1", "eta_nm" and "zeta_nm" to (lo, hi)
    pairs or BoundReports (eta or zeta fields are read accordingly).
    """
    if isinstance(F, (int, float)):
        C = float(F)
    else:
        from .distortion import koebe_constant

        C = koebe_constant(F).C

    def eta(k):
        r = reports[k]
        return (r.eta_lo, r.eta_hi) if isinstance(r, BoundReport) else _lohi(r)

    z = reports["zeta_nm"]
    z = (z.zeta_lo, z.zeta_hi) if isinstance(z, BoundReport) else _lohi(z)
    win = theorem_window(eta("eta_n"), eta("eta_m1"), z, C)
    lo, hi = eta("eta_nm")
    return not (hi < win.lo or win.hi < lo)
