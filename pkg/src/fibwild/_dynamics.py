"""Compiled interval kernels for iterating a Fibonacci map and pulling intervals back.

A map is passed to the kernels as five arrays:

    pm, pb   phi in point form: mid coefficients and a per-coefficient bound
    sm, sb   psi in the same form
    geo      [v_lo, v_hi, t_lo, t_hi, i_lo, i_hi, j_lo, j_hi,
              cJ_lo, cJ_hi, lJ_lo, lJ_hi, d, sigma]

so that for a float x in [-1, 1] the enclosure of f(x) is
Horner(pm, x) -/+ Horner(pb, |x|) widened by the Horner rounding bound.
Both phi and psi must be certified increasing before the kernels are used;
images of intervals are then taken from the endpoints.
"""

from __future__ import annotations

import math

import numba
import numpy as np

from .rigor import dn_add, dn_div, dn_mul, dn_pow, dn_sub, up_add, up_div, up_mul, up_pow, up_sub

_INF = math.inf
_U = 2.0**-53
_TINY = 1e-300

# classification codes
IN_T = 0
IN_J = 1
ESCAPED = 2
AMBIGUOUS = 3

# piece outcomes
DROP = 0
COUNT = 1
SPLIT = 2
SPLIT_RETURN = 3


@numba.njit(cache=True)
def peval(m, b, x):
    """Enclosure of the represented function at the float x, |x| <= 1."""
    n = m.shape[0]
    p = m[n - 1]
    q = b[n - 1]
    ax = abs(x)
    for k in range(n - 2, -1, -1):
        p = p * x + m[k]
        q = q * ax + b[k]
    q = math.nextafter(q * (1.0 + 4.0 * (n + 2) * _U) + _TINY, _INF)
    return math.nextafter(p - q, -_INF), math.nextafter(p + q, _INF)


@numba.njit(cache=True)
def classify(lo, hi, geo):
    """Where [lo, hi] sits relative to T_1 = [-t, t] and J_1 = [i, j]."""
    t_lo, t_hi = geo[2], geo[3]
    if max(abs(lo), abs(hi)) <= t_lo:
        return IN_T
    if geo[5] <= lo and hi <= geo[6]:
        return IN_J
    off_T = lo > t_hi or hi < -t_hi
    off_J = lo > geo[7] or hi < geo[4]
    if off_T and off_J:
        return ESCAPED
    return AMBIGUOUS


@numba.njit(cache=True)
def _unit_arg_T(x, geo, up):
    """Bound on p_v(|x|/t) for x >= 0, upper if up else lower."""
    d = geo[12]
    if up:
        y = min(up_div(x, geo[2]), 1.0)
        w = up_pow(y, d)
        v = geo[1]
        u = up_add(v, up_mul(up_sub(1.0, v), w))
    else:
        y = min(dn_div(x, geo[3]), 1.0)
        w = dn_pow(y, d)
        v = geo[0]
        u = dn_add(v, dn_mul(dn_sub(1.0, v), w))
    return min(max(u, -1.0), 1.0)


@numba.njit(cache=True)
def _unit_arg_J(x, geo, up):
    """Bound on s_J^{-1}(x) = (x - cJ) / lamJ."""
    if up:
        num = up_sub(x, geo[8])
        y = up_div(num, geo[10] if num >= 0.0 else geo[11])
    else:
        num = dn_sub(x, geo[9])
        y = dn_div(num, geo[11] if num >= 0.0 else geo[10])
    return min(max(y, -1.0), 1.0)


@numba.njit(cache=True)
def apply_T(lo, hi, pm, pb, geo):
    alo = 0.0 if lo <= 0.0 <= hi else min(abs(lo), abs(hi))
    ahi = max(abs(lo), abs(hi))
    u_lo = _unit_arg_T(alo, geo, False)
    u_hi = _unit_arg_T(ahi, geo, True)
    a, _ = peval(pm, pb, u_lo)
    _, b = peval(pm, pb, u_hi)
    return a, b


@numba.njit(cache=True)
def apply_J(lo, hi, sm, sb, geo, sigma):
    y_lo = _unit_arg_J(lo, geo, False)
    y_hi = _unit_arg_J(hi, geo, True)
    a, _ = peval(sm, sb, y_lo)
    _, b = peval(sm, sb, y_hi)
    if sigma > 0:
        return a, b
    return -b, -a


@numba.njit(cache=True)
def step(lo, hi, code, pm, pb, sm, sb, geo, sigma):
    if code == IN_T:
        return apply_T(lo, hi, pm, pb, geo)
    return apply_J(lo, hi, sm, sb, geo, sigma)


# ---------------------------------------------------------------------------
# escape statistics of single pieces
# ---------------------------------------------------------------------------


@numba.njit(cache=True)
def eta_piece(a, b, pm, pb, sm, sb, geo, sigma, tn_lo, tn_hi, N, upper):
    """Fate of F^k([a, b]), k <= N, with respect to T_n and escape from T_1 u J_1."""
    lo, hi = a, b
    width_cap = 2.0 * geo[3]
    for k in range(N + 1):
        if max(abs(lo), abs(hi)) <= tn_lo:
            return COUNT
        if not (lo > tn_hi or hi < -tn_hi):
            return SPLIT
        code = classify(lo, hi, geo)
        if code == ESCAPED:
            return DROP
        if code == AMBIGUOUS or hi - lo > width_cap:
            return SPLIT
        if k == N:
            break
        lo, hi = step(lo, hi, code, pm, pb, sm, sb, geo, sigma)
    return COUNT if upper else DROP


@numba.njit(cache=True)
def zeta_piece(a, b, pm, pb, sm, sb, geo, sig_h, sig_f, sc_lo, sc_hi, tn_lo, tn_hi, av_lo, av_hi, Z, X):
    """Two-stage escape test of the piece [a, b] of T_1 in the coordinates of H.

    Stage 1 iterates H until the image leaves T_1 u J_1, keeping clear of
    [-av, av] when av_hi > 0. The exit interval is moved to level n by the
    factor [sc_lo, sc_hi] and iterated by F until it leaves T_1 u J_1 while
    staying disjoint from T_n.
    """
    lo, hi = a, b
    width_cap = 2.0 * geo[3]
    escaped = False
    for k in range(Z + 1):
        if av_hi > 0.0 and not (lo > av_hi or hi < -av_hi):
            return SPLIT if max(abs(lo), abs(hi)) > av_lo else DROP
        code = classify(lo, hi, geo)
        if code == ESCAPED:
            escaped = True
            break
        if code == AMBIGUOUS or hi - lo > width_cap:
            return SPLIT
        if k == Z:
            break
        lo, hi = step(lo, hi, code, pm, pb, sm, sb, geo, sig_h)
    if not escaped:
        return DROP
    p1, p2 = dn_mul(lo, sc_lo), dn_mul(lo, sc_hi)
    q1, q2 = up_mul(lo, sc_lo), up_mul(lo, sc_hi)
    r1, r2 = dn_mul(hi, sc_lo), dn_mul(hi, sc_hi)
    s1, s2 = up_mul(hi, sc_lo), up_mul(hi, sc_hi)
    lo, hi = min(min(p1, p2), min(r1, r2)), max(max(q1, q2), max(s1, s2))
    for l in range(X + 1):
        if not (lo > tn_hi or hi < -tn_hi):
            return SPLIT_RETURN if max(abs(lo), abs(hi)) > tn_lo else DROP
        code = classify(lo, hi, geo)
        if code == ESCAPED:
            return COUNT
        if code == AMBIGUOUS or hi - lo > width_cap:
            return SPLIT_RETURN
        if l == X:
            break
        lo, hi = step(lo, hi, code, pm, pb, sm, sb, geo, sig_f)
    return DROP


# ---------------------------------------------------------------------------
# scans over partitions with bisection
# ---------------------------------------------------------------------------


@numba.njit(cache=True)
def _push_segment(out, n, a, b):
    """Append [a, b] to the segment buffer, merging with the previous one when adjacent."""
    if n > 0 and out[n - 1, 1] == a:
        out[n - 1, 1] = b
        return out, n
    if n == out.shape[0]:
        grown = np.empty((2 * n + 16, 2))
        grown[:n] = out[:n]
        out = grown
    out[n, 0] = a
    out[n, 1] = b
    return out, n + 1


@numba.njit(cache=True)
def eta_scan(edges, j0, j1, pm, pb, sm, sb, geo, sigma, tn_lo, tn_hi, N, depth, upper):
    """Counted segments for partition pieces j0 <= j < j1 and outcome statistics.

    stats = [counted, dropped, split, unresolved at the depth cap]
    """
    out = np.empty((64, 2))
    n = 0
    stats = np.zeros(4, dtype=np.int64)
    st_a = np.empty(depth + 2)
    st_b = np.empty(depth + 2)
    st_d = np.empty(depth + 2, dtype=np.int64)
    for j in range(j0, j1):
        top = 0
        st_a[0], st_b[0], st_d[0] = edges[j], edges[j + 1], 0
        top = 1
        while top > 0:
            top -= 1
            a, b, dep = st_a[top], st_b[top], st_d[top]
            r = eta_piece(a, b, pm, pb, sm, sb, geo, sigma, tn_lo, tn_hi, N, upper)
            if r == SPLIT:
                m = 0.5 * (a + b)
                if dep < depth and a < m < b:
                    stats[2] += 1
                    st_a[top], st_b[top], st_d[top] = m, b, dep + 1
                    st_a[top + 1], st_b[top + 1], st_d[top + 1] = a, m, dep + 1
                    top += 2
                    continue
                stats[3] += 1
                r = COUNT if upper else DROP
            if r == COUNT:
                stats[0] += 1
                out, n = _push_segment(out, n, a, b)
            else:
                stats[1] += 1
    return out[:n].copy(), stats


@numba.njit(cache=True)
def zeta_scan(edges, j0, j1, pm, pb, sm, sb, geo, sig_h, sig_f, sc_lo, sc_hi, tn_lo, tn_hi, av_lo, av_hi, Z, X, depth1, depth2):
    """Counted segments of the two-stage test; stats as in eta_scan.

    A piece may be halved for a stage-1 ambiguity while its depth is below
    depth1 and for a stage-2 ambiguity while it is below depth2.
    """
    out = np.empty((64, 2))
    n = 0
    stats = np.zeros(4, dtype=np.int64)
    cap = max(depth1, depth2) + 2
    st_a = np.empty(cap)
    st_b = np.empty(cap)
    st_d = np.empty(cap, dtype=np.int64)
    for j in range(j0, j1):
        st_a[0], st_b[0], st_d[0] = edges[j], edges[j + 1], 0
        top = 1
        while top > 0:
            top -= 1
            a, b, dep = st_a[top], st_b[top], st_d[top]
            r = zeta_piece(a, b, pm, pb, sm, sb, geo, sig_h, sig_f, sc_lo, sc_hi, tn_lo, tn_hi, av_lo, av_hi, Z, X)
            if r == SPLIT or r == SPLIT_RETURN:
                m = 0.5 * (a + b)
                limit = depth1 if r == SPLIT else depth2
                if dep < limit and a < m < b:
                    stats[2] += 1
                    st_a[top], st_b[top], st_d[top] = m, b, dep + 1
                    st_a[top + 1], st_b[top + 1], st_d[top + 1] = a, m, dep + 1
                    top += 2
                    continue
                stats[3] += 1
                r = DROP
            if r == COUNT:
                stats[0] += 1
                out, n = _push_segment(out, n, a, b)
            else:
                stats[1] += 1
    return out[:n].copy(), stats


# ---------------------------------------------------------------------------
# inner preimages
# ---------------------------------------------------------------------------


@numba.njit(cache=True)
def _branch_T(x, pm, pb, geo):
    """Enclosure of the T-branch at the float x in [0, t_lo]."""
    a, _ = peval(pm, pb, _unit_arg_T(x, geo, False))
    _, b = peval(pm, pb, _unit_arg_T(x, geo, True))
    return a, b


@numba.njit(cache=True)
def _lowest_above(x0, x1, target, pm, pb, geo, which):
    """Smallest float x in [x0, x1] found with f(x).lo >= target, or nan.

    ``which`` selects f: 0 for the T-branch on [0, t_lo], 1 for psi on [-1, 1].
    """
    if which == 0:
        f0 = _branch_T(x0, pm, pb, geo)[0]
        f1 = _branch_T(x1, pm, pb, geo)[0]
    else:
        f0 = peval(pm, pb, x0)[0]
        f1 = peval(pm, pb, x1)[0]
    if f0 >= target:
        return x0
    if f1 < target:
        return math.nan
    lo, hi = x0, x1
    for _ in range(200):
        m = 0.5 * (lo + hi)
        if not (lo < m < hi):
            break
        fm = _branch_T(m, pm, pb, geo)[0] if which == 0 else peval(pm, pb, m)[0]
        if fm >= target:
            hi = m
        else:
            lo = m
    return hi


@numba.njit(cache=True)
def _highest_below(x0, x1, target, pm, pb, geo, which):
    """Largest float x in [x0, x1] found with f(x).hi <= target, or nan."""
    if which == 0:
        f0 = _branch_T(x0, pm, pb, geo)[1]
        f1 = _branch_T(x1, pm, pb, geo)[1]
    else:
        f0 = peval(pm, pb, x0)[1]
        f1 = peval(pm, pb, x1)[1]
    if f1 <= target:
        return x1
    if f0 > target:
        return math.nan
    lo, hi = x0, x1
    for _ in range(200):
        m = 0.5 * (lo + hi)
        if not (lo < m < hi):
            break
        fm = _branch_T(m, pm, pb, geo)[1] if which == 0 else peval(pm, pb, m)[1]
        if fm <= target:
            lo = m
        else:
            hi = m
    return lo


@numba.njit(cache=True)
def preimages(segs, pm, pb, sm, sb, geo, sigma):
    """Inner enclosures of the preimage components of each segment.

    Every returned [x, y] satisfies F([x, y]) in the segment it came from for
    every map in the enclosure. Components are listed unsorted.
    """
    out = np.empty((3 * segs.shape[0] + 1, 2))
    n = 0
    t_lo = geo[2]
    for k in range(segs.shape[0]):
        a, b = segs[k, 0], segs[k, 1]
        # T-branch: even, increasing on [0, t]
        L = _lowest_above(0.0, t_lo, a, pm, pb, geo, 0)
        R = _highest_below(0.0, t_lo, b, pm, pb, geo, 0)
        if L == L and R == R and L < R:
            out[n, 0], out[n, 1] = L, R
            out[n + 1, 0], out[n + 1, 1] = -R, -L
            n += 2
        # J-branch: sigma psi(s_J^{-1} x)
        ta, tb = (a, b) if sigma > 0 else (-b, -a)
        yL = _lowest_above(-1.0, 1.0, ta, sm, sb, geo, 1)
        yR = _highest_below(-1.0, 1.0, tb, sm, sb, geo, 1)
        if yL == yL and yR == yR and yL < yR:
            # inner image of [yL, yR] under every admissible affine map cJ + lamJ y
            xl = up_add(geo[9], max(up_mul(geo[10], yL), up_mul(geo[11], yL)))
            xr = dn_add(geo[8], min(dn_mul(geo[10], yR), dn_mul(geo[11], yR)))
            if xl < xr:
                out[n, 0], out[n, 1] = xl, xr
                n += 1
    return out[:n].copy()
