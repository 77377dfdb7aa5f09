"""Rigorous enclosures of analytic functions on [-1, 1].

A ``FuncEnclosure`` of degree N stores, for k = 0..N, an interval coefficient
[lo_k, hi_k] and a tail radius r_k. It represents every function

    sum_k a_k x^k + sum_k g_k(x),   a_k in [lo_k, hi_k],

where g_k = O(x^k) is analytic with coefficient-l1 norm ||g_k||_1 <= r_k.
The coefficient-l1 norm dominates the sup norm on the closed unit disc, so a
composition f(g) is controlled as soon as ||g||_1 <= 1.

Products keep per-order tails (a tail of order k times anything is still
O(x^k)); composition with an inner function that does not vanish at 0 moves the
outer tails into slot 0. Mass beyond degree N is folded into slot N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol

import numba
import numpy as np

from .rigor import (
    _two_prod_err,
    IInterval,
    IntervalError,
    dn_add,
    dn_mul,
    dn_sub,
    iadd,
    imul,
    up_add,
    up_mul,
    up_sub,
)

__all__ = [
    "DomainViolation",
    "RangeViolation",
    "DegenerateAffine",
    "NoCertificate",
    "DerivativeVanishes",
    "FuncEnclosure",
    "AffineMap",
    "eval_enclosure",
    "compose",
    "compose_with_table",
    "power_table",
    "multiply",
    "EnclosureMap",
    "CallableMap",
    "compose_affine_pre",
    "compose_affine_post",
    "derivative_enclosure",
    "norm_l1",
    "abs_power_affine",
    "newton_solve",
    "Evaluable",
    "write_enclosure",
    "read_enclosure",
]

_U = 2.0**-53
_ETA = 2.0**-1074
_INF = math.inf


class DomainViolation(IntervalError):
    pass


class RangeViolation(IntervalError):
    pass


class DegenerateAffine(IntervalError):
    pass


class NoCertificate(IntervalError):
    pass


class DerivativeVanishes(IntervalError):
    pass


# ---------------------------------------------------------------------------
# compiled array kernels
# ---------------------------------------------------------------------------


@numba.njit(cache=True)
def _vadd(alo, ahi, blo, bhi):
    n = alo.shape[0]
    lo = np.empty(n)
    hi = np.empty(n)
    for k in range(n):
        lo[k] = dn_add(alo[k], blo[k])
        hi[k] = up_add(ahi[k], bhi[k])
    return lo, hi


@numba.njit(cache=True)
def _vup_add(a, b):
    out = np.empty(a.shape[0])
    for k in range(a.shape[0]):
        out[k] = up_add(a[k], b[k])
    return out


@numba.njit(cache=True)
def _vscale(alo, ahi, slo, shi):
    n = alo.shape[0]
    lo = np.empty(n)
    hi = np.empty(n)
    for k in range(n):
        lo[k], hi[k] = imul(alo[k], ahi[k], slo, shi)
    return lo, hi


@numba.njit(cache=True)
def _vup_scale(a, s):
    out = np.empty(a.shape[0])
    for k in range(a.shape[0]):
        out[k] = up_mul(a[k], s)
    return out


@numba.njit(cache=True)
def _mid_rad(lo, hi):
    n = lo.shape[0]
    mid = np.empty(n)
    rad = np.empty(n)
    for k in range(n):
        m = 0.5 * (lo[k] + hi[k])
        if m < lo[k]:
            m = lo[k]
        if m > hi[k]:
            m = hi[k]
        mid[k] = m
        rad[k] = max(up_sub(hi[k], m), up_sub(m, lo[k]))
    return mid, rad


@numba.njit(cache=True)
def _from_mid_rad(mid, rad):
    n = mid.shape[0]
    lo = np.empty(n)
    hi = np.empty(n)
    for k in range(n):
        lo[k] = dn_sub(mid[k], rad[k])
        hi[k] = up_add(mid[k], rad[k])
    return lo, hi


@numba.njit(cache=True)
def _up_sum(a):
    s = 0.0
    for k in range(a.shape[0]):
        s = up_add(s, a[k])
    return s


@numba.njit(cache=True)
def _fold_upper(a, n):
    """Fold entries beyond index n into index n (upper-rounded), return length n+1."""
    out = a[: n + 1].copy()
    s = 0.0
    for k in range(n + 1, a.shape[0]):
        s = up_add(s, a[k])
    out[n] = up_add(out[n], s)
    return out


@numba.njit(cache=True)
def _horner(clo, chi, tail, xlo, xhi):
    """Interval Horner evaluation with tail bound sum r_k |x|^k, vectorized over x."""
    m = xlo.shape[0]
    n = clo.shape[0]
    outlo = np.empty(m)
    outhi = np.empty(m)
    for p in range(m):
        a, b = xlo[p], xhi[p]
        lo, hi = clo[n - 1], chi[n - 1]
        for k in range(n - 2, -1, -1):
            lo, hi = imul(lo, hi, a, b)
            lo, hi = iadd(lo, hi, clo[k], chi[k])
        ax = max(abs(a), abs(b))
        t = tail[n - 1]
        for k in range(n - 2, -1, -1):
            t = up_add(up_mul(t, ax), tail[k])
        outlo[p] = dn_sub(lo, t)
        outhi[p] = up_add(hi, t)
    return outlo, outhi


@numba.njit(cache=True)
def _dot2_finish(s, c, E, nterms):
    """Rounded s + c and an upper bound on its distance from the exact dot product.

    The exact value is s + sum(e) for the error-free transforms e; c = fl(sum e)
    is off by at most gamma_{2n} sum|e| and the final addition by u|s + c|.
    Inexact product errors under underflow add at most one subnormal per term.
    """
    m = s + c
    gam = up_mul(2.0 * (2.0 * nterms + 4.0), _U)
    err = up_mul(up_mul(E, gam), 1.0 + 4.0 * (2.0 * nterms + 4.0) * _U)
    err = up_add(err, up_mul(abs(m), _U))
    err = up_add(err, (2.0 * nterms + 2.0) * _ETA)
    return m, err


@numba.njit(cache=True)
def _conv_dot2(f, g, L):
    """Compensated convolution of f and g, first L coefficients: (mid, error bound)."""
    nf, ng = f.shape[0], g.shape[0]
    mid = np.zeros(L)
    err = np.zeros(L)
    for j in range(L):
        s = 0.0
        c = 0.0
        E = 0.0
        lo_i = max(0, j - ng + 1)
        hi_i = min(j, nf - 1)
        for i in range(lo_i, hi_i + 1):
            x = f[i]
            y = g[j - i]
            p = x * y
            ep = _two_prod_err(x, y, p)
            t = s + p
            bb = t - s
            es = (s - (t - bb)) + (p - bb)
            s = t
            c += ep + es
            E += abs(ep) + abs(es)
        mid[j], err[j] = _dot2_finish(s, c, E, max(hi_i - lo_i + 1, 0))
    return mid, err


@numba.njit(cache=True)
def _lincomb_dot2(a, T):
    """Compensated sum_k a[k] T[k, :] with an error bound per column."""
    n, L = T.shape
    mid = np.zeros(L)
    err = np.zeros(L)
    for j in range(L):
        s = 0.0
        c = 0.0
        E = 0.0
        for k in range(n - 1, -1, -1):
            x = a[k]
            y = T[k, j]
            p = x * y
            ep = _two_prod_err(x, y, p)
            t = s + p
            bb = t - s
            es = (s - (t - bb)) + (p - bb)
            s = t
            c += ep + es
            E += abs(ep) + abs(es)
        mid[j], err[j] = _dot2_finish(s, c, E, n)
    return mid, err


def _bound_nonneg(x: np.ndarray, nterms) -> np.ndarray:
    """Rigorous upper bound for exact sums of nonnegative products computed as ``x``.

    ``x`` is a float evaluation (any summation order) of sums with at most
    ``nterms`` nonnegative products (a scalar or one count per entry); underflow
    adds at most one subnormal per term.
    """
    fac = 1.0 + 2.0 * (nterms + 4) * _U
    return np.nextafter(x * fac + (nterms + 1) * _ETA, _INF)


def _trim(lo, hi, tail):
    """Index one past the last slot that is not exactly zero."""
    nz = np.nonzero((lo != 0.0) | (hi != 0.0) | (tail != 0.0))[0]
    return int(nz[-1]) + 1 if nz.size else 1


# ---------------------------------------------------------------------------
# the enclosure type
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FuncEnclosure:
    """Degree-N polynomial with interval coefficients and per-order tail radii."""

    lo: np.ndarray
    hi: np.ndarray
    tail: np.ndarray

    def __post_init__(self):
        lo = np.ascontiguousarray(self.lo, dtype=np.float64)
        hi = np.ascontiguousarray(self.hi, dtype=np.float64)
        tail = np.ascontiguousarray(self.tail, dtype=np.float64)
        if not (lo.shape == hi.shape == tail.shape and lo.ndim == 1 and lo.size >= 1):
            raise ValueError("lo, hi, tail must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)) and np.all(np.isfinite(tail))):
            raise IntervalError("non-finite enclosure data")
        if np.any(lo > hi) or np.any(tail < 0.0):
            raise ValueError("invalid enclosure: lo > hi or negative tail")
        for a in (lo, hi, tail):
            a.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "tail", tail)

    # --- constructors -------------------------------------------------------
    @classmethod
    def zero(cls, N: int) -> "FuncEnclosure":
        z = np.zeros(N + 1)
        return cls(z, z, z)

    @classmethod
    def from_coeffs(cls, coeffs, N: int | None = None) -> "FuncEnclosure":
        c = np.asarray(coeffs, dtype=np.float64)
        if N is None:
            N = c.size - 1
        out = np.zeros(N + 1)
        m = min(N + 1, c.size)
        out[:m] = c[:m]
        f = cls(out, out, np.zeros(N + 1))
        if c.size > N + 1:
            extra = math.fsum(np.abs(c[N + 1 :]))
            t = f.tail.copy()
            t[N] = math.nextafter(extra, _INF) if extra > 0 else 0.0
            f = cls(f.lo, f.hi, t)
        return f

    @classmethod
    def identity(cls, N: int) -> "FuncEnclosure":
        return cls.monomial(1, N)

    @classmethod
    def monomial(cls, k: int, N: int, scale: float = 1.0) -> "FuncEnclosure":
        c = np.zeros(N + 1)
        if k <= N:
            c[k] = scale
            return cls(c, c, np.zeros(N + 1))
        t = np.zeros(N + 1)
        t[N] = abs(scale)
        return cls(c, c, t)

    @classmethod
    def constant(cls, a: IInterval, N: int) -> "FuncEnclosure":
        lo = np.zeros(N + 1)
        hi = np.zeros(N + 1)
        lo[0], hi[0] = a.lo, a.hi
        return cls(lo, hi, np.zeros(N + 1))

    @classmethod
    def unit_tail(cls, order: int, N: int, radius: float = 1.0) -> "FuncEnclosure":
        """All functions O(x^order) of l1 norm <= radius, with zero polynomial part."""
        t = np.zeros(N + 1)
        t[min(order, N)] = radius
        z = np.zeros(N + 1)
        return cls(z, z, t)

    @classmethod
    def from_mid_rad(cls, mid, rad, tail) -> "FuncEnclosure":
        lo, hi = _from_mid_rad(np.asarray(mid, float), np.asarray(rad, float))
        return cls(lo, hi, tail)

    # --- accessors -------------------------------------------------------------
    @property
    def N(self) -> int:
        return self.lo.size - 1

    def coeff(self, k: int) -> IInterval:
        return IInterval(self.lo[k], self.hi[k])

    @property
    def slots(self) -> list[tuple[IInterval, float]]:
        return [(self.coeff(k), float(self.tail[k])) for k in range(self.N + 1)]

    @property
    def mid(self) -> np.ndarray:
        return _mid_rad(self.lo, self.hi)[0]

    def mid_rad(self) -> tuple[np.ndarray, np.ndarray]:
        return _mid_rad(self.lo, self.hi)

    def abs_coeffs(self) -> np.ndarray:
        return np.maximum(np.abs(self.lo), np.abs(self.hi))

    def contains(self, other: "FuncEnclosure") -> bool:
        """Slotwise containment (sufficient, not necessary, for set inclusion)."""
        return bool(
            np.all(self.lo <= other.lo) and np.all(other.hi <= self.hi) and np.all(other.tail <= self.tail)
        )

    def contains_coeffs(self, coeffs) -> bool:
        """Whether the polynomial with these exact coefficients is a member."""
        c = np.zeros(self.N + 1)
        cc = np.asarray(coeffs, float)
        c[: min(cc.size, self.N + 1)] = cc[: self.N + 1]
        excess = np.maximum(self.lo - c, 0.0) + np.maximum(c - self.hi, 0.0)
        if cc.size > self.N + 1:
            excess = excess.copy()
            excess[self.N] += np.abs(cc[self.N + 1 :]).sum()
        # excess at slot k may be absorbed by tails of order <= k
        budget = 0.0
        for k in range(self.N + 1):
            budget += self.tail[k]
            budget -= excess[k]
            if budget < -1e-300:
                return False
        return True

    def is_point(self) -> bool:
        return bool(np.all(self.lo == self.hi) and np.all(self.tail == 0.0))

    def tail_total(self) -> float:
        return math.nextafter(math.fsum(self.tail), _INF) if np.any(self.tail) else 0.0

    def max_width(self) -> float:
        return float(np.max(self.hi - self.lo))

    def resize(self, N: int) -> "FuncEnclosure":
        """Change the truncation degree (folding excess into slot N when shrinking)."""
        if N == self.N:
            return self
        if N > self.N:
            pad = N - self.N
            z = np.zeros(pad)
            return FuncEnclosure(
                np.concatenate([self.lo, z]), np.concatenate([self.hi, z]), np.concatenate([self.tail, z])
            )
        lo, hi, tail = self.lo[: N + 1].copy(), self.hi[: N + 1].copy(), self.tail.copy()
        extra = np.concatenate([[0.0] * (N + 1), self.abs_coeffs()[N + 1 :]]) + tail
        tail = _fold_upper(extra, N)
        return FuncEnclosure(lo, hi, tail)

    def reduce_degree(self, D: int) -> "FuncEnclosure":
        """Same degree-N container, but coefficients above D moved into tail slot D."""
        if D >= self.N:
            return self
        absx = self.abs_coeffs()
        lo = self.lo.copy()
        hi = self.hi.copy()
        lo[D + 1 :] = 0.0
        hi[D + 1 :] = 0.0
        tail = self.tail.copy()
        moved = np.concatenate([tail[: D + 1], absx[D + 1 :] + tail[D + 1 :]])
        tail = np.zeros(self.N + 1)
        tail[: D + 1] = _fold_upper(np.ascontiguousarray(_bound_nonneg(moved, 2)), D)
        return FuncEnclosure(lo, hi, tail)

    # --- linear algebra ---------------------------------------------------------
    def __add__(self, other: "FuncEnclosure") -> "FuncEnclosure":
        if isinstance(other, FuncEnclosure):
            a, b = _same_degree(self, other)
            lo, hi = _vadd(a.lo, a.hi, b.lo, b.hi)
            return FuncEnclosure(lo, hi, _vup_add(a.tail, b.tail))
        o = IInterval.coerce(other)
        return self.add_constant(o)

    __radd__ = __add__

    def __neg__(self) -> "FuncEnclosure":
        return FuncEnclosure(-self.hi, -self.lo, self.tail)

    def __sub__(self, other) -> "FuncEnclosure":
        if isinstance(other, FuncEnclosure):
            return self + (-other)
        return self.add_constant(-IInterval.coerce(other))

    def add_constant(self, c: IInterval) -> "FuncEnclosure":
        lo = self.lo.copy()
        hi = self.hi.copy()
        lo[0] = dn_add(lo[0], c.lo)
        hi[0] = up_add(hi[0], c.hi)
        return FuncEnclosure(lo, hi, self.tail)

    def scale(self, s) -> "FuncEnclosure":
        s = IInterval.coerce(s)
        lo, hi = _vscale(self.lo, self.hi, s.lo, s.hi)
        return FuncEnclosure(lo, hi, _vup_scale(self.tail, s.mag))

    def __mul__(self, other) -> "FuncEnclosure":
        if isinstance(other, FuncEnclosure):
            return multiply(self, other)
        return self.scale(other)

    def __rmul__(self, other) -> "FuncEnclosure":
        return self.scale(other)

    def __truediv__(self, s) -> "FuncEnclosure":
        return self.scale(IInterval(1.0, 1.0) / IInterval.coerce(s))

    def shift_up(self, m: int = 1) -> "FuncEnclosure":
        """Multiply by x^m (truncated at degree N)."""
        N = self.N
        lo = np.zeros(N + 1)
        hi = np.zeros(N + 1)
        tail = np.zeros(N + 1)
        lo[m:] = self.lo[: N + 1 - m]
        hi[m:] = self.hi[: N + 1 - m]
        tail[m:] = self.tail[: N + 1 - m]
        over = np.concatenate([self.abs_coeffs()[N + 1 - m :], self.tail[N + 1 - m :]])
        if over.size and np.any(over):
            tail[N] = up_add(tail[N], _up_sum(over))
        return FuncEnclosure(lo, hi, tail)

    # --- evaluation --------------------------------------------------------------
    def __call__(self, x) -> IInterval:
        return eval_enclosure(self, IInterval.coerce(x))

    def eval_many(self, xlo: np.ndarray, xhi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        xlo = np.ascontiguousarray(xlo, float)
        xhi = np.ascontiguousarray(xhi, float)
        if np.any(xlo < -1.0) or np.any(xhi > 1.0):
            raise DomainViolation("evaluation points outside [-1, 1]")
        return _horner(self.lo, self.hi, self.tail, xlo, xhi)

    def derivative(self) -> "FuncEnclosure":
        return derivative_enclosure(self)

    def eval_mid(self, x):
        """Non-rigorous float evaluation of the midpoint polynomial."""
        return np.polynomial.polynomial.polyval(x, self.mid)

    def __repr__(self) -> str:
        return f"FuncEnclosure(N={self.N}, c0={self.coeff(0)}, tail_total={self.tail_total():.3g})"


def _same_degree(a: FuncEnclosure, b: FuncEnclosure):
    if a.N == b.N:
        return a, b
    N = max(a.N, b.N)
    return a.resize(N), b.resize(N)


def multiply(f: FuncEnclosure, g: FuncEnclosure, N: int | None = None) -> FuncEnclosure:
    """Rigorous product truncated at degree N (default: the larger degree)."""
    if N is None:
        N = max(f.N, g.N)
    nf = _trim(f.lo, f.hi, f.tail)
    ng = _trim(g.lo, g.hi, g.tail)
    fm, fr = _mid_rad(f.lo[:nf], f.hi[:nf])
    gm, gr = _mid_rad(g.lo[:ng], g.hi[:ng])
    fa, ga = np.abs(fm), np.abs(gm)
    L = nf + ng - 1
    c, err = _conv_dot2(fm, gm, L)
    kk = np.arange(L)
    nterms = np.minimum(np.minimum(kk + 1, L - kk), min(nf, ng)).astype(np.float64)
    R = np.convolve(fa, gr) + np.convolve(fr, ga + gr)
    rad = _vup_add(err, _bound_nonneg(R, nterms))
    # tails: f.tail * (|g| + g.tail) + |f| * g.tail, per order
    ft, gt = f.tail[:nf], g.tail[:ng]
    tails = np.zeros(c.size)
    if np.any(ft):
        tails += np.convolve(ft, ga + gr + gt)
    if np.any(gt):
        tails += np.convolve(fa + fr, gt)
    tails = _bound_nonneg(tails, nterms) if np.any(tails) else tails
    lo, hi = _from_mid_rad(c, rad)
    L = np.zeros(N + 1)
    H = np.zeros(N + 1)
    m = min(N + 1, c.size)
    L[:m], H[:m] = lo[:m], hi[:m]
    T = np.zeros(max(N + 1, c.size))
    T[: tails.size] = tails
    if c.size > N + 1:
        T[N + 1 : c.size] = _vup_add(T[N + 1 : c.size], np.maximum(np.abs(lo[N + 1 :]), np.abs(hi[N + 1 :])))
    T = _fold_upper(np.ascontiguousarray(T), N)
    return FuncEnclosure(L, H, T)


def norm_l1(f: FuncEnclosure) -> float:
    """Upper bound on sum_k (max|coeff_k| + tail_k)."""
    s = math.fsum(f.abs_coeffs()) + math.fsum(f.tail)
    return math.nextafter(s, _INF) if s > 0 else 0.0


def eval_enclosure(f: FuncEnclosure, x: IInterval) -> IInterval:
    if x.lo < -1.0 or x.hi > 1.0:
        raise DomainViolation(f"evaluation at {x} outside [-1, 1]")
    lo, hi = _horner(f.lo, f.hi, f.tail, np.array([x.lo]), np.array([x.hi]))
    return IInterval(lo[0], hi[0])


def derivative_enclosure(f: FuncEnclosure) -> FuncEnclosure:
    """Enclosure of f'. Tail of order k contributes N*r_k at order k-1."""
    N = f.N
    lo = np.zeros(N + 1)
    hi = np.zeros(N + 1)
    for j in range(1, N + 1):
        lo[j - 1], hi[j - 1] = imul(f.lo[j], f.hi[j], float(j), float(j))
    tail = np.zeros(N + 1)
    if np.any(f.tail):
        t = _vup_scale(np.ascontiguousarray(f.tail), float(N))
        tail[: N] = t[1:]
        tail[0] = up_add(tail[0], t[0])
    return FuncEnclosure(lo, hi, tail)


def _order(f: FuncEnclosure) -> int:
    nz = np.nonzero((f.lo != 0.0) | (f.hi != 0.0) | (f.tail != 0.0))[0]
    return int(nz[0]) if nz.size else f.N


def power_table(inner: FuncEnclosure, kmax: int, N: int | None = None) -> list[FuncEnclosure]:
    """Rigorous enclosures of inner^0, ..., inner^kmax (truncated at degree N)."""
    if N is None:
        N = inner.N
    inner = inner.resize(N)
    table = [FuncEnclosure.constant(IInterval(1.0, 1.0), N)]
    if kmax >= 1:
        table.append(inner)
    for _ in range(2, kmax + 1):
        table.append(multiply(table[-1], inner, N))
    return table


def compose_with_table(outer: FuncEnclosure, table: list[FuncEnclosure], ordr: int = 0) -> FuncEnclosure:
    """sum_k a_k inner^k plus outer tails, given a power table of an inner function with l1 norm <= 1.

    The outer tail of order k contributes r_k ||inner^k||_1 (valid because
    ||inner^m|| <= ||inner^k|| for m >= k) at order k*ordr.
    """
    N = table[0].N
    n_out = _trim(outer.lo, outer.hi, outer.tail)
    if n_out > len(table):
        raise ValueError("power table too short for the outer function")
    am, ar = _mid_rad(outer.lo[:n_out], outer.hi[:n_out])
    Tm = np.empty((n_out, N + 1))
    Tr = np.empty((n_out, N + 1))
    Tt = np.empty((n_out, N + 1))
    for k in range(n_out):
        Tm[k], Tr[k] = _mid_rad(table[k].lo, table[k].hi)
        Tt[k] = table[k].tail
    mid, err = _lincomb_dot2(am, Tm)
    aa = np.abs(am)
    R = aa @ Tr + ar @ (np.abs(Tm) + Tr)
    rad = _vup_add(err, _bound_nonneg(R, n_out))
    tail = _bound_nonneg((aa + ar) @ Tt, n_out) if np.any(Tt) else np.zeros(N + 1)
    for k in np.nonzero(outer.tail[:n_out])[0]:
        slot = min(int(k) * ordr, N)
        power_norm = min(norm_l1(table[k]), 1.0) if k > 0 else 1.0
        tail[slot] = up_add(tail[slot], up_mul(outer.tail[k], power_norm))
    lo, hi = _from_mid_rad(mid, rad)
    return FuncEnclosure(lo, hi, tail)


def compose(outer: FuncEnclosure, inner: FuncEnclosure, N: int | None = None) -> FuncEnclosure:
    """Enclosure of outer(inner(x)); requires ||inner||_1 <= 1.

    Computed as sum_k a_k inner^k so every power is a rigorous product.
    """
    if N is None:
        N = max(outer.N, inner.N)
    nrm = norm_l1(inner)
    if nrm > 1.0:
        raise RangeViolation(f"inner function has l1 norm {nrm} > 1")
    n_out = _trim(outer.lo, outer.hi, outer.tail)
    table = power_table(inner, n_out - 1, N)
    return compose_with_table(outer.resize(max(outer.N, N)), table, _order(inner))


# ---------------------------------------------------------------------------
# affine maps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AffineMap:
    """The affine bijection between [-1, 1] and I = [left, right].

    ``from_unit`` sends [-1, 1] onto I (orientation-preserving sends -1 to left,
    reversing sends -1 to right) and ``to_unit`` is its inverse. Endpoints may
    themselves be intervals, in which case the map is a family.
    """

    left: IInterval
    right: IInterval
    preserving: bool = True

    def __post_init__(self):
        object.__setattr__(self, "left", IInterval.coerce(self.left))
        object.__setattr__(self, "right", IInterval.coerce(self.right))
        if not self.half_width.lo > 0.0:
            raise DegenerateAffine(f"affine map on [{self.left}, {self.right}]")

    @classmethod
    def onto(cls, domain: IInterval, preserving: bool = True) -> "AffineMap":
        return cls(IInterval.point(domain.lo), IInterval.point(domain.hi), preserving)

    @property
    def center(self) -> IInterval:
        return (self.left + self.right) * 0.5

    @property
    def half_width(self) -> IInterval:
        return (self.right - self.left) * 0.5

    @property
    def slope(self) -> IInterval:
        return self.half_width if self.preserving else -self.half_width

    def from_unit(self, x) -> IInterval:
        return self.center + self.slope * IInterval.coerce(x)

    def to_unit(self, y) -> IInterval:
        return (IInterval.coerce(y) - self.center) / self.slope

    def as_enclosure(self, N: int) -> FuncEnclosure:
        lo = np.zeros(N + 1)
        hi = np.zeros(N + 1)
        c, s = self.center, self.slope
        lo[0], hi[0] = c.lo, c.hi
        lo[1], hi[1] = s.lo, s.hi
        return FuncEnclosure(lo, hi, np.zeros(N + 1))


def compose_affine_pre(f: FuncEnclosure, a: AffineMap) -> FuncEnclosure:
    """Enclosure of f(a.from_unit(x)) by binomial re-expansion (degree preserved)."""
    return compose(f, a.as_enclosure(f.N), f.N)


def compose_affine_post(a: AffineMap, f: FuncEnclosure) -> FuncEnclosure:
    """Enclosure of a.to_unit(f(x)) = (f(x) - center)/slope."""
    inv = IInterval(1.0, 1.0) / a.slope
    return (f - a.center).scale(inv)


# ---------------------------------------------------------------------------
# |c + m x|^d as a power series
# ---------------------------------------------------------------------------


def abs_power_affine(c: IInterval, m: IInterval, d: float, N: int) -> FuncEnclosure:
    """Enclosure of |c + m x|^d on [-1, 1] when |m| < |c| (no zero crossing).

    Uses |c|^d (1 + r x)^d with r = m/c and the binomial series; the remainder
    beyond degree N is bounded by |C(d,N+1)| |r|^(N+1) / (1 - |r|) (the binomial
    coefficients are nonincreasing in modulus once k >= d).
    """
    from .rigor import pow_real

    if not (c.lo > 0.0 or c.hi < 0.0):
        raise DomainViolation("affine argument may vanish")
    r = m / c
    rm = r.mag
    if not rm < 1.0:
        raise DomainViolation("affine argument changes sign on [-1, 1]")
    if N + 1 < d:
        raise ValueError("degree must exceed the exponent")
    scale = pow_real(abs(c), d)
    binom = IInterval(1.0, 1.0)
    rk = IInterval(1.0, 1.0)
    lo = np.empty(N + 1)
    hi = np.empty(N + 1)
    dd = IInterval.point(d)
    for k in range(N + 1):
        term = binom * rk
        lo[k], hi[k] = term.lo, term.hi
        binom = binom * (dd - k) / (k + 1)
        rk = rk * r
    # binom now holds C(d, N+1), rk holds r^(N+1)
    one = IInterval(1.0, 1.0)
    rem = (abs(binom) * IInterval(0.0, rm) ** (N + 1)) / (one - IInterval(rm, rm))
    tail = np.zeros(N + 1)
    tail[N] = rem.hi
    return FuncEnclosure(lo, hi, tail).scale(scale)


# ---------------------------------------------------------------------------
# certified point solver
# ---------------------------------------------------------------------------


class Evaluable(Protocol):
    def value(self, x: IInterval) -> IInterval: ...

    def slope(self, x: IInterval) -> IInterval: ...


@dataclass(frozen=True)
class EnclosureMap:
    """A FuncEnclosure bundled with its derivative enclosure, for newton_solve."""

    f: FuncEnclosure
    df: FuncEnclosure

    @classmethod
    def of(cls, f: FuncEnclosure) -> "EnclosureMap":
        return cls(f, derivative_enclosure(f))

    def value(self, x: IInterval) -> IInterval:
        return eval_enclosure(self.f, x)

    def slope(self, x: IInterval) -> IInterval:
        return eval_enclosure(self.df, x)

    def value_mid(self, x: float) -> float:
        return float(np.polynomial.polynomial.polyval(x, self.f.mid))

    def slope_mid(self, x: float) -> float:
        return float(np.polynomial.polynomial.polyval(x, self.df.mid))


@dataclass(frozen=True)
class CallableMap:
    """Adapter for a pair of interval callables (value, derivative)."""

    value_fn: Callable[[IInterval], IInterval]
    slope_fn: Callable[[IInterval], IInterval]

    def value(self, x: IInterval) -> IInterval:
        return self.value_fn(x)

    def slope(self, x: IInterval) -> IInterval:
        return self.slope_fn(x)


def _certify_root(f, a: IInterval, x0: float, delta: float) -> IInterval:
    c = f.slope(IInterval.point(x0)).mid
    if c == 0.0 or not math.isfinite(c):
        raise DerivativeVanishes(f"zero slope at {x0}")
    ball = IInterval(dn_sub(x0, delta), up_add(x0, delta))
    cc = IInterval.point(c)
    D = abs(IInterval(1.0, 1.0) - f.slope(ball) / cc).hi
    eps = abs((f.value(IInterval.point(x0)) - a) / cc).hi
    if not D < 1.0:
        raise NoCertificate(f"contraction constant {D} >= 1 on radius {delta}")
    room = dn_mul(dn_sub(1.0, D), delta)
    if not eps < room:
        raise NoCertificate(f"residual {eps} not below (1-D)*delta = {room}")
    rho = (IInterval.point(eps) / (IInterval(1.0, 1.0) - IInterval.point(D))).hi
    return IInterval(dn_sub(x0, rho), up_add(x0, rho))


def newton_solve(f, a, x0: float, delta: float | None = None, refine: int = 8) -> IInterval:
    """Certified enclosure of the unique solution of f(x) = a near x0.

    ``f`` provides interval ``value`` and ``slope``; for every function and
    target in the enclosures the Newton-like map x - (f(x) - a)/c, with c a float
    approximation of f'(x0), is checked to contract the ball B_delta(x0).
    Without ``delta`` the radius starts at 64 times the predictor residual and
    grows on failure.
    """
    a = IInterval.coerce(a)
    x = float(x0)
    for _ in range(refine):
        v = f.value(IInterval.point(x))
        s = f.slope(IInterval.point(x)).mid
        if s == 0.0:
            raise DerivativeVanishes(f"zero slope at {x}")
        step = (v.mid - a.mid) / s
        x_new = x - step
        if x_new == x:
            break
        x = x_new
    if delta is not None:
        return _certify_root(f, a, x, delta)
    v = f.value(IInterval.point(x))
    s = abs(f.slope(IInterval.point(x)).mid)
    resid = max(abs(v - a).hi / s, abs(x) * 2.0**-52, 2.0**-1000)
    delta = 64.0 * resid
    last: Exception | None = None
    for _ in range(40):
        try:
            return _certify_root(f, a, x, delta)
        except NoCertificate as exc:
            last = exc
            delta *= 4.0
    raise NoCertificate(str(last))


# ---------------------------------------------------------------------------
# file format
# ---------------------------------------------------------------------------


def write_enclosure(f: FuncEnclosure, path: str | Path) -> None:
    lines = [str(f.N)]
    for k in range(f.N + 1):
        lines.append(f"{float(f.lo[k]).hex()} {float(f.hi[k]).hex()} {float(f.tail[k]).hex()}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_enclosure(path: str | Path) -> FuncEnclosure:
    rows = Path(path).read_text().split("\n")
    N = int(rows[0].strip())
    lo = np.empty(N + 1)
    hi = np.empty(N + 1)
    tail = np.empty(N + 1)
    for k in range(N + 1):
        parts = rows[1 + k].split()
        if len(parts) != 3:
            raise ValueError(f"{path}: malformed slot line {k + 1}")
        lo[k], hi[k], tail[k] = (float.fromhex(p) for p in parts)
    return FuncEnclosure(lo, hi, tail)
