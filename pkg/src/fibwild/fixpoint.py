"""Locating and certifying the renormalization fixed point.

The search is non-rigorous: a floating-point version of the operator, a dense
Newton iteration at low degree, then Newton-Krylov at the working degree. The
certificate is rigorous. With Z0 the approximate fixed point, D_a the finite
block of DR(Z0) and M a float approximation of (I - D_a)^{-1} (extended by the
identity on the complementary tail space), the map

    N[z] = z + R[Z0 + M z] - (Z0 + M z)

has fixed points exactly where R does. If ||N[0]|| <= eps and ||DN|| <= D on
the ball B_delta with eps < (1 - D) delta, N contracts the ball. We bound DN by
evaluating I - (I - DR[X]) M over the interval hull X of Z0 + M B_delta, which
also absorbs the defect of M as an inverse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .funcspace import FuncEnclosure, _bound_nonneg
from .renorm import (
    DerivativeMatrix,
    RenormElement,
    TangentVector,
    derivative_matrix,
    element_difference,
    renormalize,
)
from .rigor import IInterval

__all__ = [
    "NoConvergence",
    "PUBLISHED",
    "renormalize_float",
    "published_seed",
    "find_approximate_fixed_point",
    "NewtonState",
    "ContractionCertificate",
    "build_newton_state",
    "newton_operator",
    "certify_contraction",
]

# (critical value F(0), i, j, t) printed with the existence results
PUBLISHED = {
    3.8: (-0.83700583021901265, -0.89842138158302138, -0.64345222855602410, 0.44908966263509253),
    5.1: (-0.89271858672458115, -0.93765644691994054, -0.68211126486048014, 0.56526098770489580),
}


class NoConvergence(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# floating-point operator (search only)
# ---------------------------------------------------------------------------


def _polyval(c: np.ndarray, x):
    return np.polynomial.polynomial.polyval(x, c)


def _float_inverse(c: np.ndarray, y: float, x0: float) -> float:
    dc = np.polynomial.polynomial.polyder(c)
    x = x0
    for _ in range(100):
        step = (_polyval(c, x) - y) / _polyval(dc, x)
        x -= step
        if abs(step) <= 1e-17 * max(1.0, abs(x)):
            break
    return float(x)


def _compose_float(f: np.ndarray, h: np.ndarray, N: int) -> np.ndarray:
    acc = np.zeros(N + 1)
    acc[0] = f[-1]
    for k in range(f.size - 2, -1, -1):
        acc = np.convolve(acc, h)[: N + 1]
        acc[0] += f[k]
    return acc


def _binomial_series(d: float, r: float, N: int) -> np.ndarray:
    out = np.empty(N + 1)
    c = 1.0
    for k in range(N + 1):
        out[k] = c * r**k
        c = c * (d - k) / (k + 1)
    return out


def renormalize_float(z: np.ndarray, d: float, N: int) -> np.ndarray:
    """Float version of the operator on the coefficient vector (v, i, j, t, psi_0..N, phi_0..N)."""
    v, i, j, t = z[:4]
    psi = z[4 : 5 + N]
    phi = z[5 + N : 6 + 2 * N]
    a_p = _float_inverse(psi, t, t)
    a_m = _float_inverse(psi, -t, -t)
    lamJ, cJ = (j - i) / 2, (i + j) / 2
    k2 = _float_inverse(phi, cJ + lamJ * a_p, cJ + lamJ * a_p)
    k1 = _float_inverse(phi, cJ + lamJ * a_m, cJ + lamJ * a_m)
    c_p = _float_inverse(phi, t, t)
    c_m = _float_inverse(phi, -t, -t)

    def W(c):
        return ((c - v) / (1 - v)) ** (1 / d)

    it, jt, tt = -W(c_p), -W(c_m), W(k2)
    vt = (2 * v - k1 - k2) / (k2 - k1)
    c, m = (it + jt) / 2, (jt - it) / 2
    P = (1 - v) * abs(c) ** d * _binomial_series(d, m / c, N)
    P[0] += v
    psit = -_compose_float(phi, P, N) / t
    sK = np.zeros(N + 1)
    sK[0], sK[1] = (k1 + k2) / 2, (k2 - k1) / 2
    U = _compose_float(phi, sK, N)
    U[0] -= cJ
    U /= lamJ
    phit = _compose_float(psi, U, N) / t
    return np.concatenate([[vt, it, jt, tt], psit, phit])


def _float_residual(z, d, N):
    return renormalize_float(z, d, N) - z


def published_seed(d: float, N: int) -> np.ndarray:
    """Published (F(0), i, j, t) with psi = phi = identity (so v = F(0))."""
    if d in PUBLISHED:
        v, i, j, t = PUBLISHED[d]
    else:
        # interpolate the two published configurations in d
        a, b = np.array(PUBLISHED[3.8]), np.array(PUBLISHED[5.1])
        s = (d - 3.8) / (5.1 - 3.8)
        v, i, j, t = (1 - s) * a + s * b
    z = np.zeros(6 + 2 * N)
    z[:4] = v, i, j, t
    z[5] = 1.0
    z[6 + N] = 1.0
    return z


def _resize_vector(z: np.ndarray, N_old: int, N_new: int) -> np.ndarray:
    out = np.zeros(6 + 2 * N_new)
    out[:4] = z[:4]
    m = min(N_old, N_new) + 1
    out[4 : 4 + m] = z[4 : 4 + m]
    out[5 + N_new : 5 + N_new + m] = z[5 + N_old : 5 + N_old + m]
    return out


def _dense_newton(z, d, N, iters, tol):
    n = z.size
    res = np.inf
    for _ in range(iters):
        r = _float_residual(z, d, N)
        res = np.abs(r).sum()
        if res < tol:
            break
        J = np.empty((n, n))
        h = 1e-7
        for c in range(n):
            e = np.zeros(n)
            e[c] = h
            J[:, c] = (renormalize_float(z + e, d, N) - renormalize_float(z - e, d, N)) / (2 * h)
        z = z + np.linalg.solve(np.eye(n) - J, r)
    return z, res


def find_approximate_fixed_point(
    d: float,
    seed: RenormElement | None = None,
    N: int = 80,
    iters: int = 40,
    tol: float = 1e-13,
) -> RenormElement:
    """Non-rigorous fixed point of the operator at truncation degree N."""
    N0 = min(N, 24)
    if seed is None:
        z = published_seed(d, N0)
        Ns = N0
    else:
        z = seed.mid_vector()
        Ns = seed.N
        if Ns > N0:
            z = _resize_vector(z, Ns, N0)
            Ns = N0
    z = _resize_vector(z, Ns, N0)
    z, res = _dense_newton(z, d, N0, iters, 1e-14)
    if not res < 1e-8:
        raise NoConvergence(f"low-degree Newton residual {res}")
    if N > N0:
        z = _resize_vector(z, N0, N)
        try:
            z = scipy.optimize.newton_krylov(
                lambda x: _float_residual(x, d, N), z, f_tol=1e-15, maxiter=iters, method="lgmres"
            )
        except scipy.optimize.NoConvergence as exc:
            z = exc.args[0]
    res = np.abs(_float_residual(z, d, N)).sum()
    if not res < 1e-8:
        raise NoConvergence(f"residual {res}")
    return RenormElement.from_vector(d, z, N)


# ---------------------------------------------------------------------------
# rigorous matrix helpers
# ---------------------------------------------------------------------------

_U = 2.0**-53


def _imatmul(Alo: np.ndarray, Ahi: np.ndarray, M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Enclosure of {A M : A in [Alo, Ahi]} for a float matrix M."""
    Am = 0.5 * (Alo + Ahi)
    Ar = np.maximum(np.nextafter(Ahi - Am, np.inf), np.nextafter(Am - Alo, np.inf))
    Ar = np.maximum(Ar, 0.0)
    C = Am @ M
    n = Am.shape[-1]
    err = _bound_nonneg(2.0 * (n + 2) * _U * (np.abs(Am) @ np.abs(M)) + Ar @ np.abs(M), n)
    return np.nextafter(C - err, -np.inf), np.nextafter(C + err, np.inf)


def _col_norms(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    mags = np.maximum(np.abs(lo), np.abs(hi))
    out = np.array([math.fsum(mags[:, c]) for c in range(mags.shape[1])])
    return np.nextafter(out, np.inf)


# ---------------------------------------------------------------------------
# Newton state and certificate
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class NewtonState:
    """Approximate fixed point Z0, finite block D_a of DR(Z0) and M ~ (I - D_a)^{-1}."""

    Z0: RenormElement
    K: int
    Da: np.ndarray
    M: np.ndarray
    derivative: DerivativeMatrix = field(repr=False)

    @property
    def N(self) -> int:
        return self.Z0.N

    def inverse_defect(self) -> float:
        """||M (I - D_a) - I||_1 in floating point (diagnostic)."""
        n = self.Da.shape[0]
        E = self.M @ (np.eye(n) - self.Da) - np.eye(n)
        return float(np.abs(E).sum(axis=0).max())

    def finite_coordinates(self, h: TangentVector) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = h.flatten()
        idx = self.derivative.finite_rows
        return lo[idx], hi[idx]

    def apply_M(self, h: TangentVector) -> TangentVector:
        """M acting on the finite block of h, identity on the rest."""
        N, K = self.N, self.K
        flo, fhi = self.finite_coordinates(h)
        wlo, whi = _imatmul(flo[None, :], fhi[None, :], self.M.T)
        wlo, whi = wlo[0], whi[0]
        iv = [IInterval(wlo[k], whi[k]) for k in range(4)]

        def merge(f: FuncEnclosure, off: int) -> FuncEnclosure:
            lo, hi = f.lo.copy(), f.hi.copy()
            lo[: K + 1] = wlo[off : off + K + 1]
            hi[: K + 1] = whi[off : off + K + 1]
            return FuncEnclosure(lo, hi, f.tail)

        return TangentVector(iv[0], iv[1], iv[2], iv[3], merge(h.dpsi.resize(N), 4), merge(h.dphi.resize(N), 5 + K))


@dataclass(frozen=True)
class ContractionCertificate:
    epsilon: float
    Dbound: float
    delta: float
    valid: bool
    N: int = 0
    K: int = 0
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def radius(self) -> float:
        """Upper bound on the distance of the fixed point from Z0 in the z-coordinates."""
        if not self.valid:
            return math.inf
        return (IInterval.point(self.epsilon) / (IInterval(1.0, 1.0) - IInterval.point(self.Dbound))).hi

    def report(self) -> str:
        lines = [
            f"epsilon {self.epsilon!r}",
            f"Dbound {self.Dbound!r}",
            f"delta {self.delta!r}",
            f"valid {self.valid}",
            f"N {self.N}",
            f"K {self.K}",
        ]
        lines += [f"{k} {v!r}" for k, v in self.diagnostics.items()]
        return "\n".join(lines) + "\n"


def build_newton_state(Z0: RenormElement, K: int) -> NewtonState:
    dm = derivative_matrix(Z0, K)
    Da = dm.finite_block_mid()
    M = np.linalg.inv(np.eye(Da.shape[0]) - Da)
    return NewtonState(Z0, K, Da, M, dm)


def newton_operator(state: NewtonState, z: TangentVector) -> TangentVector:
    """Enclosure of N[z] = z + R[Z0 + M z] - (Z0 + M z)."""
    X = state.Z0.plus(state.apply_M(z))
    R = renormalize(X).result
    return z + element_difference(R, X)


def _ball_hull(state: NewtonState, delta: float) -> RenormElement:
    """Interval hull of Z0 + M B_delta."""
    N, K = state.N, state.K
    rowmax = np.abs(state.M).max(axis=1)
    r = np.nextafter(rowmax * delta, np.inf)
    r = np.nextafter(r * (1.0 + 4 * _U), np.inf)

    def box(k: int) -> IInterval:
        return IInterval(-r[k], r[k])

    def fball(off: int) -> FuncEnclosure:
        lo = np.zeros(N + 1)
        hi = np.zeros(N + 1)
        lo[: K + 1] = -r[off : off + K + 1]
        hi[: K + 1] = r[off : off + K + 1]
        tail = np.zeros(N + 1)
        tail[min(K + 1, N)] = delta
        return FuncEnclosure(lo, hi, tail)

    h = TangentVector(box(0), box(1), box(2), box(3), fball(4), fball(5 + K))
    return state.Z0.plus(h)


def certify_contraction(state: NewtonState, delta: float) -> ContractionCertificate:
    """Bound eps = ||N[0]|| and D = sup over B_delta of ||DN||, and test eps < (1 - D) delta."""
    N, K = state.N, state.K
    step0 = renormalize(state.Z0)
    eps = element_difference(step0.result, state.Z0).norm()
    if not delta > 0.0:
        return ContractionCertificate(eps, math.inf, delta, False, N, K, {"reason": "empty ball"})
    X = _ball_hull(state, delta)
    dm = derivative_matrix(X, K)
    rows = dm.lo.shape[0]
    fin = dm.finite_rows
    Clo, Chi = _imatmul(dm.lo, dm.hi, state.M)
    E = np.zeros((rows, len(fin)))
    E[fin, :] = np.eye(len(fin)) - state.M
    Elo = np.nextafter(E, -np.inf)
    Ehi = np.nextafter(E, np.inf)
    Elo[E == 0.0] = 0.0
    Ehi[E == 0.0] = 0.0
    DNlo = np.nextafter(Clo + Elo, -np.inf)
    DNhi = np.nextafter(Chi + Ehi, np.inf)
    finite_norms = _col_norms(DNlo, DNhi)
    tail_norms = _col_norms(dm.tail_lo, dm.tail_hi)
    D = float(max(finite_norms.max(), tail_norms.max()))
    room = (IInterval(1.0, 1.0) - IInterval.point(D)) * IInterval.point(delta)
    valid = bool(D < 1.0 and eps < room.lo)
    diag = {
        "finite_column_max": float(finite_norms.max()),
        "tail_column_psi": float(tail_norms[0]),
        "tail_column_phi": float(tail_norms[1]),
        "inverse_defect": state.inverse_defect(),
        "ball_hull_max_radius": float(np.abs(state.M).max(axis=1).max() * delta),
    }
    return ContractionCertificate(eps, D, delta, valid, N, K, diag)


def certified_element(state: NewtonState, cert: ContractionCertificate) -> RenormElement:
    """Interval element containing the certified fixed point (hull of Z0 + M B_rho)."""
    if not cert.valid:
        raise ValueError("certificate is not valid")
    return _ball_hull(state, cert.radius)


def certified_parameters(state: NewtonState, cert: ContractionCertificate) -> dict[str, IInterval]:
    """Enclosures of (v, i, j, t) and F(0) for the certified fixed point."""
    hull = certified_element(state, cert)
    return {
        "v": hull.v,
        "i": hull.i,
        "j": hull.j,
        "t": hull.t,
        "critical_value": hull.critical_value(),
    }


@dataclass(frozen=True)
class FixedPointRun:
    state: NewtonState
    certificate: ContractionCertificate
    element: RenormElement | None


def certify_fixed_point(
    d: float, N: int = 300, K: int = 250, delta: float = 1e-8, seed: RenormElement | None = None
) -> FixedPointRun:
    """Find, then certify; ``element`` is the enclosure of the true fixed point (None if invalid)."""
    Z0 = find_approximate_fixed_point(d, seed=seed, N=N)
    state = build_newton_state(Z0, K)
    cert = certify_contraction(state, delta)
    return FixedPointRun(state, cert, certified_element(state, cert) if cert.valid else None)


__all__ += ["certified_parameters", "certified_element", "FixedPointRun", "certify_fixed_point"]
