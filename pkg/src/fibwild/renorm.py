"""The Fibonacci renormalization operator on (v, i, j, t, psi, phi) and its derivative.

A map F in the cycle {F, G} acts on J = [i, j] by x -> +-psi(s_J^{-1}(x)) and on
T = [-t, t] by x -> phi(p_v(x/t)) with p_v(x) = v + (1 - v)|x|^d. Here s_I sends
[-1, 1] onto I. One renormalization step produces

    psi~ = -phi(p_v(s_J~(x))) / t,          J~ = left component of (phi o p_v)^{-1}(T),
    phi~ = psi(s_J^{-1}(phi(s_K(x)))) / t,  K  = preimage of T under psi o s_J^{-1} o phi,
    v~   = s_K^{-1}(v),                      t~ = p_v^{-1}(k_2).

The sign of the J-branch does not matter: T is symmetric, so both cycle
elements renormalize to the same sextuple.

Derivatives are assembled from the chain rule. Every inverse value is a
certified Newton solve; (f^{-1})' is 1/f' at the solved point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np

from .funcspace import (
    AffineMap,
    EnclosureMap,
    FuncEnclosure,
    RangeViolation,
    abs_power_affine,
    compose_with_table,
    derivative_enclosure,
    eval_enclosure,
    multiply,
    newton_solve,
    norm_l1,
    power_table,
    read_enclosure,
    write_enclosure,
)
from .rigor import IInterval, IntervalError, interval_from_hex, interval_to_hex, pow_real, root_real

__all__ = [
    "CombinatoricsBroken",
    "RenormElement",
    "RenormStep",
    "TangentVector",
    "DerivativeMatrix",
    "power_map_eval",
    "renormalize",
    "apply_derivative",
    "basis_direction",
    "derivative_matrix",
    "write_element",
    "read_element",
]

ONE = IInterval(1.0, 1.0)
TWO = IInterval(2.0, 2.0)
HALF = IInterval(0.5, 0.5)


class CombinatoricsBroken(IntervalError):
    """A preimage required by the renormalization does not exist where expected."""


# ---------------------------------------------------------------------------
# elements and tangent vectors
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RenormElement:
    """A map of the cycle: critical degree d and the sextuple (v, i, j, t, psi, phi)."""

    d: float
    v: IInterval
    i: IInterval
    j: IInterval
    t: IInterval
    psi: FuncEnclosure
    phi: FuncEnclosure

    def __post_init__(self):
        for name in ("v", "i", "j", "t"):
            object.__setattr__(self, name, IInterval.coerce(getattr(self, name)))
        object.__setattr__(self, "d", float(self.d))
        if self.psi.N != self.phi.N:
            raise ValueError("psi and phi must share the truncation degree")
        if not self.d > 2.0:
            raise ValueError("critical degree must exceed 2")

    @property
    def N(self) -> int:
        return self.psi.N

    @property
    def T(self) -> IInterval:
        return IInterval(-self.t.hi, self.t.hi)

    def check_configuration(self) -> None:
        """Certify -1 <= i < j < -t < 0 < t <= 1 and -1 <= v <= 1."""
        ok = (
            self.i.lo >= -1.0
            and self.i.hi < self.j.lo
            and self.j.hi < -self.t.hi
            and self.t.lo > 0.0
            and self.t.hi <= 1.0
            and -1.0 <= self.v.lo
            and self.v.hi <= 1.0
        )
        if not ok:
            raise CombinatoricsBroken(f"configuration violated: v={self.v} i={self.i} j={self.j} t={self.t}")

    def critical_value(self) -> IInterval:
        """F(0) = phi(p_v(0)) = phi(v)."""
        return eval_enclosure(self.phi, self.v)

    def with_degree(self, N: int) -> "RenormElement":
        return replace(self, psi=self.psi.resize(N), phi=self.phi.resize(N))

    def midpoint(self) -> "RenormElement":
        """Point element at the midpoints (tails dropped)."""
        return RenormElement.from_vector(self.d, self.mid_vector(), self.N)

    def mid_vector(self) -> np.ndarray:
        return np.concatenate([[self.v.mid, self.i.mid, self.j.mid, self.t.mid], self.psi.mid, self.phi.mid])

    @classmethod
    def from_vector(cls, d: float, z: np.ndarray, N: int) -> "RenormElement":
        z = np.asarray(z, float)
        return cls(
            d,
            IInterval.point(z[0]),
            IInterval.point(z[1]),
            IInterval.point(z[2]),
            IInterval.point(z[3]),
            FuncEnclosure.from_coeffs(z[4 : 5 + N], N),
            FuncEnclosure.from_coeffs(z[5 + N : 6 + 2 * N], N),
        )

    def plus(self, h: "TangentVector") -> "RenormElement":
        return RenormElement(
            self.d,
            self.v + h.dv,
            self.i + h.di,
            self.j + h.dj,
            self.t + h.dt,
            self.psi + h.dpsi,
            self.phi + h.dphi,
        )


@dataclass(frozen=True, eq=False)
class TangentVector:
    """A perturbation (dv, di, dj, dt, dpsi, dphi) of a RenormElement."""

    dv: IInterval
    di: IInterval
    dj: IInterval
    dt: IInterval
    dpsi: FuncEnclosure
    dphi: FuncEnclosure

    @classmethod
    def zero(cls, N: int) -> "TangentVector":
        z = IInterval(0.0, 0.0)
        return cls(z, z, z, z, FuncEnclosure.zero(N), FuncEnclosure.zero(N))

    @property
    def N(self) -> int:
        return self.dpsi.N

    def __add__(self, o: "TangentVector") -> "TangentVector":
        return TangentVector(
            self.dv + o.dv, self.di + o.di, self.dj + o.dj, self.dt + o.dt, self.dpsi + o.dpsi, self.dphi + o.dphi
        )

    def __sub__(self, o: "TangentVector") -> "TangentVector":
        return self + o.scale(-1.0)

    def scale(self, s) -> "TangentVector":
        s = IInterval.coerce(s)
        return TangentVector(self.dv * s, self.di * s, self.dj * s, self.dt * s, self.dpsi.scale(s), self.dphi.scale(s))

    def norm(self) -> float:
        """Upper bound on |dv| + |di| + |dj| + |dt| + ||dpsi||_1 + ||dphi||_1."""
        parts = [self.dv.mag, self.di.mag, self.dj.mag, self.dt.mag, norm_l1(self.dpsi), norm_l1(self.dphi)]
        s = math.fsum(parts)
        return math.nextafter(s, math.inf) if s > 0 else 0.0

    def flatten(self) -> tuple[np.ndarray, np.ndarray]:
        """Interval vector in the row layout of ``DerivativeMatrix`` (tails as [-r, r])."""
        lo = np.concatenate(
            [
                [self.dv.lo, self.di.lo, self.dj.lo, self.dt.lo],
                self.dpsi.lo,
                self.dphi.lo,
                -self.dpsi.tail,
                -self.dphi.tail,
            ]
        )
        hi = np.concatenate(
            [[self.dv.hi, self.di.hi, self.dj.hi, self.dt.hi], self.dpsi.hi, self.dphi.hi, self.dpsi.tail, self.dphi.tail]
        )
        return lo, hi


def element_difference(a: RenormElement, b: RenormElement) -> TangentVector:
    return TangentVector(a.v - b.v, a.i - b.i, a.j - b.j, a.t - b.t, a.psi - b.psi, a.phi - b.phi)


def basis_direction(kind: str, k: int, N: int) -> TangentVector:
    """h1..h4 (kind 'v','i','j','t'), eta_k (kind 'psi') or phi_k (kind 'phi')."""
    z = TangentVector.zero(N)
    one = IInterval(1.0, 1.0)
    if kind in ("v", "i", "j", "t"):
        return replace(z, **{"d" + kind: one})
    if kind == "psi":
        return replace(z, dpsi=FuncEnclosure.monomial(k, N))
    if kind == "phi":
        return replace(z, dphi=FuncEnclosure.monomial(k, N))
    raise ValueError(kind)


# ---------------------------------------------------------------------------
# the operator
# ---------------------------------------------------------------------------


def power_map_eval(v, d: float, x) -> IInterval:
    """Enclosure of p_v(x) = v + (1 - v)|x|^d."""
    v = IInterval.coerce(v)
    x = IInterval.coerce(x)
    return v + (ONE - v) * pow_real(abs(x), d)


def _root_w(c: IInterval, v: IInterval, d: float) -> IInterval:
    """W(c) = ((c - v)/(1 - v))^(1/d), the positive p_v-preimage of c."""
    q = (c - v) / (ONE - v)
    if not q.lo > 0.0:
        raise CombinatoricsBroken(f"p_v has no preimage of {c}")
    return root_real(q, d)


def _solve(fmap: EnclosureMap, target: IInterval, guess: float, what: str) -> IInterval:
    try:
        x = newton_solve(fmap, target, guess)
    except IntervalError as exc:
        raise CombinatoricsBroken(f"{what}: {exc}") from exc
    if not (-1.0 < x.lo and x.hi < 1.0):
        raise CombinatoricsBroken(f"{what}: solution {x} leaves (-1, 1)")
    return x


@dataclass(eq=False)
class RenormStep:
    """One application of the operator, with every intermediate kept for derivatives."""

    F: RenormElement
    a_plus: IInterval
    a_minus: IInterval
    k1: IInterval
    k2: IInterval
    c_plus: IInterval
    c_minus: IInterval
    jtilde: tuple[IInterval, IInterval]
    result: RenormElement
    P: FuncEnclosure  # p_v o s_J~
    U: FuncEnclosure  # s_J^{-1} o phi o s_K
    S_d: FuncEnclosure  # |s_J~(x)|^d
    P_table: list[FuncEnclosure] = field(repr=False)
    U_table: list[FuncEnclosure] = field(repr=False)

    # --- shorthand --------------------------------------------------------------
    @property
    def N(self) -> int:
        return self.F.N

    @property
    def dd(self) -> IInterval:
        return IInterval.point(self.F.d)

    @property
    def cJ(self) -> IInterval:
        return (self.F.i + self.F.j) * HALF

    @property
    def lamJ(self) -> IInterval:
        return (self.F.j - self.F.i) * HALF

    @property
    def sK(self) -> AffineMap:
        return AffineMap(self.k1, self.k2)

    @property
    def sJt(self) -> AffineMap:
        return AffineMap(*self.jtilde)

    @cached_property
    def sK_table(self) -> list[FuncEnclosure]:
        return power_table(self.sK.as_enclosure(self.N), self.N)

    @cached_property
    def dpsi(self) -> FuncEnclosure:
        return derivative_enclosure(self.F.psi)

    @cached_property
    def dphi(self) -> FuncEnclosure:
        return derivative_enclosure(self.F.phi)

    @cached_property
    def dphi_P(self) -> FuncEnclosure:
        """phi' o P."""
        return compose_with_table(self.dphi, self.P_table)

    @cached_property
    def dpsi_U(self) -> FuncEnclosure:
        """psi' o U."""
        return compose_with_table(self.dpsi, self.U_table)

    @cached_property
    def dphi_sK(self) -> FuncEnclosure:
        """phi' o s_K."""
        return compose_with_table(self.dphi, self.sK_table)

    @cached_property
    def S_dm1(self) -> FuncEnclosure:
        """|s_J~(x)|^(d-1)."""
        c, m = self.sJt.center, self.sJt.half_width
        return abs_power_affine(c, m, self.F.d - 1.0, self.N)

    @cached_property
    def H(self) -> FuncEnclosure:
        """phi'(P) p_v'(s_J~), with p_v'(s) = -d(1 - v)|s|^(d-1) for s < 0."""
        fac = -(self.dd * (ONE - self.F.v))
        return multiply(self.dphi_P, self.S_dm1).scale(fac)

    @cached_property
    def Hx(self) -> FuncEnclosure:
        return self.H.shift_up(1)

    @cached_property
    def Q1(self) -> FuncEnclosure:
        """phi'(P) (1 - |s_J~|^d), the v-derivative of phi(P) at fixed J~."""
        return multiply(self.dphi_P, (-self.S_d).add_constant(ONE))

    @cached_property
    def G(self) -> FuncEnclosure:
        """psi'(U) phi'(s_K)."""
        return multiply(self.dpsi_U, self.dphi_sK)

    @cached_property
    def Gx(self) -> FuncEnclosure:
        return self.G.shift_up(1)

    @cached_property
    def dpsi_U_times_U(self) -> FuncEnclosure:
        return multiply(self.dpsi_U, self.U)

    # slopes at solved points
    @cached_property
    def slopes(self) -> dict[str, IInterval]:
        return {
            "a+": eval_enclosure(self.dpsi, self.a_plus),
            "a-": eval_enclosure(self.dpsi, self.a_minus),
            "k1": eval_enclosure(self.dphi, self.k1),
            "k2": eval_enclosure(self.dphi, self.k2),
            "c+": eval_enclosure(self.dphi, self.c_plus),
            "c-": eval_enclosure(self.dphi, self.c_minus),
        }

    def w_partials(self, c: IInterval, W: IInterval) -> tuple[IInterval, IInterval]:
        """(dW/dc, dW/dv) for W(c) = ((c - v)/(1 - v))^(1/d)."""
        v, d = self.F.v, self.dd
        cv = c - v
        Wc = W / (d * cv)
        Wv = W * (c - ONE) / (d * cv * (ONE - v))
        return Wc, Wv


def renormalize(F: RenormElement) -> RenormStep:
    """One step of the renormalization operator with certified intermediates."""
    F.check_configuration()
    N, d = F.N, F.d
    v, t = F.v, F.t
    psi_m = EnclosureMap.of(F.psi)
    phi_m = EnclosureMap.of(F.phi)

    a_plus = _solve(psi_m, t, t.mid, "psi^{-1}(t)")
    a_minus = _solve(psi_m, -t, -t.mid, "psi^{-1}(-t)")
    cJ = (F.i + F.j) * HALF
    lamJ = (F.j - F.i) * HALF
    b_plus = cJ + lamJ * a_plus
    b_minus = cJ + lamJ * a_minus
    k2 = _solve(phi_m, b_plus, b_plus.mid, "phi^{-1}(b+)")
    k1 = _solve(phi_m, b_minus, b_minus.mid, "phi^{-1}(b-)")
    if not k1.hi < k2.lo:
        raise CombinatoricsBroken("K is not a nondegenerate interval")
    c_plus = _solve(phi_m, t, t.mid, "phi^{-1}(t)")
    c_minus = _solve(phi_m, -t, -t.mid, "phi^{-1}(-t)")

    itil = -_root_w(c_plus, v, d)
    jtil = -_root_w(c_minus, v, d)
    ttil = _root_w(k2, v, d)
    vtil = (TWO * v - k1 - k2) / (k2 - k1)

    sJt = AffineMap(itil, jtil)
    S_d = abs_power_affine(sJt.center, sJt.half_width, d, N)
    P = S_d.scale(ONE - v).add_constant(v)
    sK = AffineMap(k1, k2)
    phi_sK = compose_with_table(F.phi, power_table(sK.as_enclosure(N), N))
    U = (phi_sK - cJ).scale(ONE / lamJ)
    for name, g in (("p_v o s_J~", P), ("s_J^{-1} o phi o s_K", U)):
        if norm_l1(g) > 1.0:
            raise CombinatoricsBroken(f"{name} has l1 norm {norm_l1(g)} > 1")
    try:
        P_table = power_table(P, N)
        U_table = power_table(U, N)
        psit = compose_with_table(F.phi, P_table).scale(-(ONE / t))
        phit = compose_with_table(F.psi, U_table).scale(ONE / t)
    except RangeViolation as exc:
        raise CombinatoricsBroken(str(exc)) from exc

    result = RenormElement(d, vtil, itil, jtil, ttil, psit, phit)
    return RenormStep(
        F=F,
        a_plus=a_plus,
        a_minus=a_minus,
        k1=k1,
        k2=k2,
        c_plus=c_plus,
        c_minus=c_minus,
        jtilde=(itil, jtil),
        result=result,
        P=P,
        U=U,
        S_d=S_d,
        P_table=P_table,
        U_table=U_table,
    )


# ---------------------------------------------------------------------------
# derivative
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Scalars:
    dk1: IInterval
    dk2: IInterval
    di: IInterval
    dj: IInterval
    dt: IInterval
    dv: IInterval


def _scalar_derivatives(
    st: RenormStep,
    dv: IInterval,
    di: IInterval,
    dj: IInterval,
    dt: IInterval,
    dpsi_at: tuple[IInterval, IInterval],
    dphi_at: dict[str, IInterval],
) -> _Scalars:
    """Derivatives of k1, k2, i~, j~, t~, v~ along a direction.

    ``dpsi_at`` holds dpsi(a+), dpsi(a-); ``dphi_at`` holds dphi at k1, k2, c+, c-.
    """
    F = st.F
    sl = st.slopes
    zero = IInterval(0.0, 0.0)
    # a+- = psi^{-1}(+-t)
    da_p = (dt - dpsi_at[0]) / sl["a+"]
    da_m = (-dt - dpsi_at[1]) / sl["a-"]
    dcJ = (di + dj) * HALF
    dlamJ = (dj - di) * HALF
    db_p = dcJ + dlamJ * st.a_plus + st.lamJ * da_p
    db_m = dcJ + dlamJ * st.a_minus + st.lamJ * da_m
    # k = phi^{-1}(b)
    dk2 = (db_p - dphi_at["k2"]) / sl["k2"]
    dk1 = (db_m - dphi_at["k1"]) / sl["k1"]
    # c+- = phi^{-1}(+-t)
    dc_p = (dt - dphi_at["c+"]) / sl["c+"]
    dc_m = (-dt - dphi_at["c-"]) / sl["c-"]
    itil, jtil = st.jtilde
    Wc, Wv = st.w_partials(st.c_plus, -itil)
    d_itil = -(Wc * dc_p + Wv * dv)
    Wc, Wv = st.w_partials(st.c_minus, -jtil)
    d_jtil = -(Wc * dc_m + Wv * dv)
    Wc, Wv = st.w_partials(st.k2, st.result.t)
    d_ttil = Wc * dk2 + Wv * dv
    k1, k2, v = st.k1, st.k2, F.v
    span = k2 - k1
    d_vtil = TWO * (k1 * dk2 - k2 * dk1 - v * (dk2 - dk1)) / (span * span)
    if dv.lo != 0.0 or dv.hi != 0.0:
        d_vtil = d_vtil + TWO * dv / span
    del zero
    return _Scalars(dk1=dk1, dk2=dk2, di=d_itil, dj=d_jtil, dt=d_ttil, dv=d_vtil)


def _assemble(
    st: RenormStep,
    sc: _Scalars,
    dv: IInterval,
    di: IInterval,
    dj: IInterval,
    dt: IInterval,
    dphi_P: FuncEnclosure | None,
    dpsi_U: FuncEnclosure | None,
    dpsiU_dphi_sK: FuncEnclosure | None,
) -> TangentVector:
    """Function parts of the derivative from the scalar derivatives.

    dphi_P = dphi o P, dpsi_U = dpsi o U and dpsiU_dphi_sK = psi'(U) * (dphi o s_K)
    are the direction-specific compositions (None means zero).
    """
    N = st.N
    t = st.F.t
    inv_t = ONE / t
    res = st.result
    # psi~ = -phi(P)/t
    dc_til = (sc.di + sc.dj) * HALF
    dm_til = (sc.dj - sc.di) * HALF
    acc = st.H.scale(dc_til) + st.Hx.scale(dm_til)
    if dv.lo != 0.0 or dv.hi != 0.0:
        acc = acc + st.Q1.scale(dv)
    if dphi_P is not None:
        acc = acc + dphi_P
    dpsit = acc.scale(-inv_t)
    if dt.lo != 0.0 or dt.hi != 0.0:
        dpsit = dpsit - res.psi.scale(dt * inv_t)
    # phi~ = psi(U)/t,  U = (phi o s_K - cJ)/lamJ
    dkappa = (sc.dk1 + sc.dk2) * HALF
    dmu = (sc.dk2 - sc.dk1) * HALF
    dcJ = (di + dj) * HALF
    dlamJ = (dj - di) * HALF
    inner = st.G.scale(dkappa) + st.Gx.scale(dmu)
    if dcJ.lo != 0.0 or dcJ.hi != 0.0:
        inner = inner - st.dpsi_U.scale(dcJ)
    if dlamJ.lo != 0.0 or dlamJ.hi != 0.0:
        inner = inner - st.dpsi_U_times_U.scale(dlamJ)
    if dpsiU_dphi_sK is not None:
        inner = inner + dpsiU_dphi_sK
    acc = inner.scale(ONE / st.lamJ)
    if dpsi_U is not None:
        acc = acc + dpsi_U
    dphit = acc.scale(inv_t)
    if dt.lo != 0.0 or dt.hi != 0.0:
        dphit = dphit - res.phi.scale(dt * inv_t)
    assert dpsit.N == N and dphit.N == N
    return TangentVector(sc.dv, sc.di, sc.dj, sc.dt, dpsit, dphit)


def _is_zero(f: FuncEnclosure) -> bool:
    return not (np.any(f.lo) or np.any(f.hi) or np.any(f.tail))


def apply_derivative(st: RenormStep, h: TangentVector) -> TangentVector:
    """Enclosure of DR(F) h for an arbitrary direction (including tail standard sets)."""
    N = st.N
    dpsi = h.dpsi.resize(N)
    dphi = h.dphi.resize(N)
    zero = IInterval(0.0, 0.0)
    if _is_zero(dpsi):
        dpsi_at = (zero, zero)
        dpsi_U = None
    else:
        dpsi_at = (eval_enclosure(dpsi, st.a_plus), eval_enclosure(dpsi, st.a_minus))
        dpsi_U = compose_with_table(dpsi, st.U_table)
    if _is_zero(dphi):
        dphi_at = {key: zero for key in ("k1", "k2", "c+", "c-")}
        dphi_P = None
        cross = None
    else:
        dphi_at = {
            "k1": eval_enclosure(dphi, st.k1),
            "k2": eval_enclosure(dphi, st.k2),
            "c+": eval_enclosure(dphi, st.c_plus),
            "c-": eval_enclosure(dphi, st.c_minus),
        }
        dphi_P = compose_with_table(dphi, st.P_table)
        cross = multiply(st.dpsi_U, compose_with_table(dphi, st.sK_table))
    sc = _scalar_derivatives(st, h.dv, h.di, h.dj, h.dt, dpsi_at, dphi_at)
    return _assemble(st, sc, h.dv, h.di, h.dj, h.dt, dphi_P, dpsi_U, cross)


def _power_at(x: IInterval, k: int) -> IInterval:
    return x**k if k > 0 else ONE


def _basis_column(st: RenormStep, kind: str, k: int) -> TangentVector:
    """DR(F) applied to a basis vector, reusing cached power tables."""
    zero = IInterval(0.0, 0.0)
    one = ONE
    z4 = {"v": zero, "i": zero, "j": zero, "t": zero}
    if kind in z4:
        return apply_derivative(st, basis_direction(kind, 0, st.N))
    if kind == "psi":
        dpsi_at = (_power_at(st.a_plus, k), _power_at(st.a_minus, k))
        dphi_at = {key: zero for key in ("k1", "k2", "c+", "c-")}
        sc = _scalar_derivatives(st, zero, zero, zero, zero, dpsi_at, dphi_at)
        return _assemble(st, sc, zero, zero, zero, zero, None, st.U_table[k], None)
    if kind == "phi":
        dphi_at = {
            "k1": _power_at(st.k1, k),
            "k2": _power_at(st.k2, k),
            "c+": _power_at(st.c_plus, k),
            "c-": _power_at(st.c_minus, k),
        }
        sc = _scalar_derivatives(st, zero, zero, zero, zero, (zero, zero), dphi_at)
        cross = multiply(st.dpsi_U, st.sK_table[k])
        return _assemble(st, sc, zero, zero, zero, zero, st.P_table[k], None, cross)
    del one
    raise ValueError(kind)


# ---------------------------------------------------------------------------
# derivative matrix
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DerivativeMatrix:
    """Interval matrix of DR(F) on span{h1..h4, eta_0..eta_K, phi_0..phi_K} plus tail columns.

    Rows follow ``TangentVector.flatten``: v, i, j, t, psi coefficients 0..N,
    phi coefficients 0..N, psi tails 0..N, phi tails 0..N. Columns are the
    finite basis in the order h1..h4, eta_0..eta_K, phi_0..phi_K. ``tail_lo``
    and ``tail_hi`` hold the images of the unit-tail standard sets (psi tail of
    order K+1, phi tail of order K+1).
    """

    N: int
    K: int
    lo: np.ndarray
    hi: np.ndarray
    tail_lo: np.ndarray
    tail_hi: np.ndarray

    @property
    def finite_rows(self) -> np.ndarray:
        N, K = self.N, self.K
        return np.concatenate([np.arange(4), 4 + np.arange(K + 1), 5 + N + np.arange(K + 1)])

    @property
    def mid(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def finite_block_mid(self) -> np.ndarray:
        return self.mid[self.finite_rows, :]

    def column(self, c: int) -> tuple[np.ndarray, np.ndarray]:
        return self.lo[:, c], self.hi[:, c]

    def operator_norm_bound(self) -> float:
        """Upper bound on the l1 operator norm (max column l1 norm, tail columns included)."""
        mags = np.maximum(np.abs(self.lo), np.abs(self.hi))
        tails = np.maximum(np.abs(self.tail_lo), np.abs(self.tail_hi))
        cols = [math.fsum(mags[:, c]) for c in range(mags.shape[1])]
        cols += [math.fsum(tails[:, c]) for c in range(tails.shape[1])]
        return math.nextafter(max(cols), math.inf)


def column_labels(K: int) -> list[tuple[str, int]]:
    return [("v", 0), ("i", 0), ("j", 0), ("t", 0)] + [("psi", k) for k in range(K + 1)] + [
        ("phi", k) for k in range(K + 1)
    ]


def derivative_matrix(F: RenormElement | RenormStep, K: int) -> DerivativeMatrix:
    st = F if isinstance(F, RenormStep) else renormalize(F)
    N = st.N
    if K > N:
        raise ValueError("basis cut exceeds truncation degree")
    labels = column_labels(K)
    rows = 4 + 4 * (N + 1)
    lo = np.empty((rows, len(labels)))
    hi = np.empty((rows, len(labels)))
    for c, (kind, k) in enumerate(labels):
        lo[:, c], hi[:, c] = _basis_column(st, kind, k).flatten()
    tail_lo = np.zeros((rows, 2))
    tail_hi = np.zeros((rows, 2))
    # with K == N the order-N tail set is used, a superset of the order-(N+1) one
    z = TangentVector.zero(N)
    unit = FuncEnclosure.unit_tail(K + 1, N)
    for c, h in enumerate((replace(z, dpsi=unit), replace(z, dphi=unit))):
        tail_lo[:, c], tail_hi[:, c] = apply_derivative(st, h).flatten()
    return DerivativeMatrix(N, K, lo, hi, tail_lo, tail_hi)


# ---------------------------------------------------------------------------
# files
# ---------------------------------------------------------------------------


def _degree_tag(d: float) -> str:
    return f"{d:g}"


def write_element(F: RenormElement, directory: str | Path) -> dict[str, Path]:
    """Write ``data_<d>``, ``psi_<d>``, ``phi_<d>`` (hex floats) into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    tag = _degree_tag(F.d)
    paths = {name: directory / f"{name}_{tag}" for name in ("data", "psi", "phi")}
    write_enclosure(F.psi, paths["psi"])
    write_enclosure(F.phi, paths["phi"])
    lines = [
        f"{F.d.hex()}",
        interval_to_hex(F.v),
        interval_to_hex(F.i),
        interval_to_hex(F.j),
        interval_to_hex(F.t),
        paths["psi"].name,
        paths["phi"].name,
    ]
    paths["data"].write_text("\n".join(lines) + "\n")
    return paths


def read_element(d: float, directory: str | Path) -> RenormElement:
    directory = Path(directory)
    tag = _degree_tag(d)
    rows = (directory / f"data_{tag}").read_text().split("\n")
    dd = float.fromhex(rows[0].strip())
    v, i, j, t = (interval_from_hex(r) for r in rows[1:5])
    psi = read_enclosure(directory / rows[5].strip())
    phi = read_enclosure(directory / rows[6].strip())
    return RenormElement(dd, v, i, j, t, psi, phi)
