"""Acceptance criteria; each test records one PASS/FAIL line shown in the terminal summary.

Criteria that cannot be met are run as stated and marked xfail; the reason
and the supporting measurements are in the decisions ledger.
"""

import time

import numpy as np
import pytest

from conftest import certified_run
from oracles import fd_column
from test_rigor import OPS, exact_pairs, random_intervals
from fibwild.attractor import (
    BoundReport,
    SegmentSet,
    TrichotomyVerdict,
    eta_lower,
    eta_segments,
    eta_upper,
    recursive_inequality_check,
    trichotomy,
    zeta_lower,
    zeta_upper,
)
from fibwild.cli import read_endpoints, write_endpoints
from fibwild.distortion import koebe_constant
from fibwild.fixpoint import PUBLISHED, certify_fixed_point, find_approximate_fixed_point
from fibwild.renorm import apply_derivative, basis_direction, renormalize
from fibwild.rigor import IInterval

PRINTED_C = {3.8: 13.4664644314052974, 5.1: 29.4431036985348317}
C_LIMIT = {3.8: 13.47, 5.1: 29.45}


# ---------------------------------------------------------------------------
# 1. fixed-point location
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("d", [3.8, 5.1])
def test_ac1_fixed_point_location(d, record):
    Z = find_approximate_fixed_point(d, N=300)
    got = np.array([Z.critical_value().mid, Z.i.mid, Z.j.mid, Z.t.mid])
    err = float(np.max(np.abs(got - np.array(PUBLISHED[d]))))
    record(f"AC1 d={d}", err <= 1e-9, f"max |(F(0), i, j, t) - printed| = {err:.2e} (N=300)")
    assert err <= 1e-9


# ---------------------------------------------------------------------------
# 2. contraction certificate
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("d", [3.8, 5.1])
def test_ac2_desk_profile_as_stated(d, record):
    c = certify_fixed_point(d, N=80, K=40, delta=1e-8).certificate
    ok = c.valid and c.Dbound < 1e-2
    record(f"AC2 desk d={d}", ok, f"N=80 K=40 delta=1e-8: valid={c.valid} eps={c.epsilon:.2e} D={c.Dbound:.3g}")
    if not ok:
        pytest.xfail("phi tail decays like |k1|^m, so D < 1e-2 is out of reach with K=40 (ledger)")


@pytest.mark.parametrize("d", [3.8, 5.1])
def test_ac2_desk_profile_sized_to_the_tail(d, record):
    c = certified_run(d).certificate
    ok = c.valid and c.Dbound < 1e-2
    record(f"AC2 alt d={d}", ok, f"N=K={c.N} delta=1e-10: valid={c.valid} eps={c.epsilon:.2e} D={c.Dbound:.3g}")
    assert ok


@pytest.mark.parametrize("d", [3.8, 5.1])
def test_ac2_proof_scale(d, record):
    t0 = time.time()
    c = certify_fixed_point(d, N=300, K=250, delta=1e-11).certificate
    ok = c.valid and c.epsilon <= 5e-13 and c.Dbound <= 5e-6
    record(f"AC2 proof d={d}", ok,
           f"N=300 K=250 delta=1e-11: eps={c.epsilon:.2e} D={c.Dbound:.2e} ({time.time() - t0:.0f} s)")
    assert ok


# ---------------------------------------------------------------------------
# 3. Koebe constants
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("d", [3.8, 5.1])
def test_ac3_koebe_constant(d, record):
    C = koebe_constant(certified_run(d).element).C
    ok = C < C_LIMIT[d] and f"{C:.3g}" == f"{PRINTED_C[d]:.3g}"
    record(f"AC3 d={d}", ok, f"C = {C:.10f} (printed {PRINTED_C[d]:.10f})")
    assert ok


# ---------------------------------------------------------------------------
# 4. derivative audit
# ---------------------------------------------------------------------------

AUDIT_N = 30
AUDIT_DIRECTIONS = [("v", 0), ("i", 0), ("j", 0), ("t", 0)] + [
    (kind, k) for kind in ("psi", "phi") for k in (0, 1, 2, 3, 5, 10, 20, 30)
]


@pytest.mark.parametrize("d", [3.8, 5.1])
def test_ac4_derivative_formulas_match_finite_differences(d, record):
    Em = certified_run(d).element.with_degree(AUDIT_N).midpoint()
    z = Em.mid_vector()
    st = renormalize(Em)
    worst = 0.0
    for kind, k in AUDIT_DIRECTIONS:
        idx = {"v": 0, "i": 1, "j": 2, "t": 3}.get(kind, 4 + k if kind == "psi" else 5 + AUDIT_N + k)
        fd = np.array(fd_column(z, d, AUDIT_N, idx))
        lo, hi = apply_derivative(st, basis_direction(kind, k, AUDIT_N)).flatten()
        mid = ((lo + hi) / 2)[: fd.size]
        floor = 1e-8 * np.abs(fd).max()
        worst = max(worst, float(np.max(np.abs(mid - fd) / (np.abs(fd) + floor))))
    record(f"AC4 d={d}", worst < 1e-4, f"{len(AUDIT_DIRECTIONS)} directions x all rows, max rel err {worst:.1e}")
    assert worst < 1e-4


# ---------------------------------------------------------------------------
# 5. trichotomy
# ---------------------------------------------------------------------------


def _bounds(E, n, M, B, Mz, pre, ret):
    r = eta_lower(E, n, M, B).combine(eta_upper(E, n, M, B))
    return r.combine(zeta_lower(E, n, Mz, B, B)).combine(zeta_upper(E, n, pre, ret))


def test_ac5ab_bounds_are_ordered_and_improve_with_budget(record):
    E = certified_run(5.1).element
    ladder = [(250, 6, 4), (500, 8, 5), (1000, 10, 7)]
    reps = [_bounds(E, 4, 4000, B, 300, pre, ret) for B, pre, ret in ladder]
    ordered = all(r.eta_lo <= r.eta_hi and r.zeta_lo <= r.zeta_hi for r in reps)
    monotone = all(
        b.eta_lo >= a.eta_lo and b.eta_hi <= a.eta_hi and b.zeta_lo >= a.zeta_lo and b.zeta_hi <= a.zeta_hi
        for a, b in zip(reps, reps[1:])
    )
    last = reps[-1]
    record("AC5(a,b)", ordered and monotone,
           f"d=5.1 n=4 reduced ladder M=4000 budgets 250/500/1000: eta in [{last.eta_lo:.4f}, {last.eta_hi:.4f}], "
           f"zeta in [{last.zeta_lo:.4f}, {last.zeta_hi:.4f}]")
    assert ordered and monotone


@pytest.mark.slow
def test_ac5a_desk_parameters(record):
    E = certified_run(5.1).element
    r = _bounds(E, 4, 200_000, 5000, 200_000, 10, 7)
    ok = r.eta_lo <= r.eta_hi and r.zeta_lo <= r.zeta_hi
    record("AC5(a) desk", ok, f"M=2e5 budgets 5000 N_pre=10 K_ret=7: {r.to_text().splitlines()[1:5]}")
    assert ok


def test_ac5c_case3_at_d51(record):
    """Case 3 needs eta_lo > C zeta_hi >= C zeta_lo; a certified zeta_lo > 1/C rules it out for any budget."""
    E = certified_run(5.1).element
    C = koebe_constant(E).C
    z = zeta_lower(E, 4, 500, 500, 500)
    reachable = C * z.zeta_lo <= 1.0
    rep = BoundReport(4, zeta_lo=z.zeta_lo)
    verdict = trichotomy(rep, C)
    record("AC5(c)", reachable and verdict is TrichotomyVerdict.WildAttractor_Case3,
           f"certified zeta_4 >= {z.zeta_lo:.4f} > 1/C = {1 / C:.4f}, so WildAttractor_Case3 is unreachable (ledger)")
    if not reachable:
        pytest.xfail("certified zeta_4 lower bound contradicts the printed zeta_4 < 0.01635 (ledger)")
    assert verdict is TrichotomyVerdict.WildAttractor_Case3


def test_ac5_case1_at_d38(record):
    E = certified_run(3.8).element
    C = koebe_constant(E).C
    r = eta_upper(E, 9, 4000, 1000).combine(zeta_lower(E, 9, 300, 1000, 1000))
    verdict = trichotomy(r, C)
    ok = verdict is TrichotomyVerdict.NoWildAttractor_Case1
    record("AC5 d=3.8", ok, f"n=9 desk budgets: eta_hi={r.eta_hi:.4f} zeta_lo={r.zeta_lo:.4f} C={C:.4f} -> {verdict.name}")
    if not ok:
        pytest.xfail("Case 1 at n=9 needs overnight budgets; desk runs leave eta_9 unresolved (ledger)")


# ---------------------------------------------------------------------------
# 6. interval soundness
# ---------------------------------------------------------------------------


def test_ac6_interval_soundness(record):
    from fractions import Fraction

    checks = 100_000
    violations = 0
    for k, (name, (up, dn, exact)) in enumerate(sorted(OPS.items())):
        x, y = exact_pairs(np.random.default_rng(1000 + k), checks)
        for a, b in zip(x.tolist(), y.tolist()):
            e = exact(Fraction(a), Fraction(b))
            violations += not (Fraction(dn(a, b)) <= e <= Fraction(up(a, b)))
    # inclusion monotonicity of the interval operations
    for k, op in enumerate((lambda A, B: A + B, lambda A, B: A - B, lambda A, B: A * B, lambda A, B: A / B)):
        rng = np.random.default_rng(2000 + k)
        alo, ahi = random_intervals(rng, checks)
        blo, bhi = random_intervals(rng, checks, positive=(k == 3))
        for a0, a1, b0, b1 in zip(alo.tolist(), ahi.tolist(), blo.tolist(), bhi.tolist()):
            R = op(IInterval(a0, a1), IInterval(b0, b1))
            Rw = op(IInterval(a0 - abs(a0) * 0.01, a1 + abs(a1) * 0.01), IInterval(b0 - abs(b0) * 0.001, b1 + abs(b1) * 0.01))
            violations += not (Rw.lo <= R.lo and R.hi <= Rw.hi)
    record("AC6", violations == 0, f"{8 * checks} randomized containment and monotonicity checks, {violations} violations")
    assert violations == 0


# ---------------------------------------------------------------------------
# 7. pipeline audits
# ---------------------------------------------------------------------------


def test_ac7_pipeline_audits(record, tmp_path):
    E = certified_run(5.1).element
    C = koebe_constant(E).C
    whole = eta_segments(E, 3, 600, 200, 1e-2).segments
    parts = [eta_segments(E, 3, 600, 200, 1e-2, shard=(4, i)).segments for i in (2, 4, 1, 3)]
    shard_ok = SegmentSet.empty().union(*parts) == whole

    write_endpoints(tmp_path / "l", tmp_path / "r", whole.lo, whole.hi)
    lo, hi = read_endpoints(tmp_path / "l", tmp_path / "r")
    round_trip = np.array_equal(lo, whole.lo) and np.array_equal(hi, whole.hi)

    eta = {n: eta_lower(E, n, 4000, 500).combine(eta_upper(E, n, 4000, 500)) for n in (2, 3)}
    eta[1] = BoundReport(1, 1.0, 1.0)
    windows = []
    for n, m in ((1, 1), (2, 1)):
        z = zeta_lower(E, n, 1000, 500, 500, avoid=m).combine(zeta_upper(E, n, 8, 5))
        windows.append(recursive_inequality_check(
            C, n, m, {"eta_n": eta[n], "eta_m1": eta[m + 1], "eta_nm": eta[n + m], "zeta_nm": z}
        ))
    ok = shard_ok and round_trip and all(windows)
    record("AC7", ok, f"shard invariance {shard_ok}, endpoint round trip {round_trip}, windows (1,1),(2,1) {windows}")
    assert ok
