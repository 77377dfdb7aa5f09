"""Orbits, segment sets, certified eta and zeta bounds and the trichotomy."""

import math

import numpy as np
import pytest

from oracles import eta_survey, float_map
from fibwild.attractor import (
    BoundReport,
    OrbitStatus,
    SegmentSet,
    TrichotomyVerdict,
    eta_lower,
    eta_segments,
    eta_upper,
    first_return_iterate,
    iterate_map,
    level_scale,
    partition_edges,
    recursive_inequality_check,
    shard_range,
    theorem_window,
    trichotomy,
    zeta_lower,
    zeta_upper,
)
from fibwild.distortion import postcritical_orbit
from fibwild.maps import BranchAmbiguous
from fibwild.rigor import IInterval


# ---------------------------------------------------------------------------
# orbits
# ---------------------------------------------------------------------------


def test_critical_orbit_matches_postcritical_data(E51):
    orb = iterate_map(E51, 0.0, 12)
    pc = postcritical_orbit(E51)
    assert orb.status is OrbitStatus.Exhausted
    for k in range(13):
        assert orb[k].overlaps(pc[k])
    assert orb.branches[0] == "T"


def test_point_outside_the_domain_escapes_immediately(E51):
    orb = iterate_map(E51, 0.99, 5)
    assert orb.status is OrbitStatus.Escaped and orb.steps == 0


def test_straddling_interval_is_ambiguous(E51):
    t = E51.t.mid
    orb = iterate_map(E51, IInterval(t - 1e-3, t + 1e-3), 3)
    assert orb.status is OrbitStatus.Ambiguous


def test_level_one_first_return_is_the_map_itself(E38):
    for x in np.linspace(-0.4, 0.4, 9).tolist():
        a = iterate_map(E38, x, 6)
        b = first_return_iterate(E38, 1, x, 6)
        assert a.status == b.status and len(a.points) == len(b.points)
        for p, q in zip(a.points, b.points):
            assert (p.lo, p.hi) == (q.lo, q.hi)


@pytest.mark.parametrize("n", [2, 3])
def test_first_return_is_first_landing_of_the_map(E51, n):
    """F_{n-1} on T_n u J_n equals the first landing of F in T_{n-1} (100 sample points)."""
    f = float_map(E51)
    t = E51.t.mid
    c, _ = level_scale(E51, n)
    Jn = sorted([c.mid * E51.i.mid, c.mid * E51.j.mid])
    pts = np.concatenate([np.linspace(-(t**n), t**n, 52)[1:-1], np.linspace(*Jn, 52)[1:-1]])
    assert pts.size == 100
    for x in pts:
        y = np.array([x])
        for _ in range(500):
            y = f(y)
            if abs(y[0]) <= t ** (n - 1):
                break
        img = first_return_iterate(E51, n, x, 1)[1]
        assert abs(img.mid - y[0]) < 1e-9


def test_first_return_rejects_points_outside_the_level(E51):
    with pytest.raises(BranchAmbiguous):
        first_return_iterate(E51, 3, 0.9 * E51.t.mid, 1)


# ---------------------------------------------------------------------------
# segment sets, partitions, shards
# ---------------------------------------------------------------------------


def test_segment_union_is_idempotent_and_order_independent():
    rng = np.random.default_rng(0)
    a = rng.uniform(-1, 1, 200)
    w = rng.uniform(0, 0.02, 200)
    S = SegmentSet(a, a + w)
    perm = rng.permutation(200)
    assert S == SegmentSet(a[perm], (a + w)[perm])
    assert S.union(S) == S
    halves = SegmentSet(a[:100], (a + w)[:100]).union(SegmentSet(a[100:], (a + w)[100:]))
    assert halves == S
    assert np.all(S.lo[1:] > S.hi[:-1])


def test_touching_segments_merge():
    S = SegmentSet.from_pairs([[0.0, 1.0], [0.5, 2.0], [3.0, 4.0]])
    assert S.pairs().tolist() == [[0.0, 2.0], [3.0, 4.0]]
    assert S.measure_lo <= 3.0 <= S.measure_hi


def test_closed_removal_and_clip():
    S = SegmentSet.from_pairs([[0.0, 1.0]])
    R = S.remove(0.25, 0.5)
    assert R.hi[0] < 0.25 and R.lo[1] > 0.5
    assert S.clip(0.5, 3.0).pairs().tolist() == [[0.5, 1.0]]


def test_inner_scale_stays_inside_every_scaled_copy():
    S = SegmentSet.from_pairs([[0.1, 0.3], [-0.4, -0.2]])
    c = IInterval(0.5, 0.5 + 1e-12)
    T = S.inner_scale(c)
    for (a, b), (x, y) in zip(S.pairs(), T.pairs()):
        assert x >= a * c.hi and y <= b * c.lo


def test_partition_and_shards():
    e = partition_edges(-1.0, 1.0, 10)
    assert e[0] == -1.0 and e[-1] == 1.0 and np.all(np.diff(e) > 0)
    assert [shard_range(10, 3, i) for i in (1, 2, 3)] == [(0, 3), (3, 6), (6, 10)]
    with pytest.raises(ValueError):
        shard_range(10, 3, 4)


def test_eta_shards_merge_to_the_unsharded_result(E51):
    whole = eta_segments(E51, 3, 300, 100, 1e-2).segments
    parts = [eta_segments(E51, 3, 300, 100, 1e-2, shard=(3, i)).segments for i in (3, 1, 2)]
    assert SegmentSet.empty().union(*parts) == whole


# ---------------------------------------------------------------------------
# eta and zeta bounds
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def eta51(E51):
    return {
        (n, N): (eta_lower(E51, n, 400, N, 1e-2), eta_upper(E51, n, 400, N, 1e-2))
        for n in (2, 3, 4)
        for N in (50, 200)
    }


@pytest.mark.parametrize("n", [2, 3, 4])
def test_eta_bounds_bracket_float_survey(E51, eta51, n):
    lo, hi = eta51[(n, 200)]
    reach, _, undecided = eta_survey(E51, n)
    assert lo.eta_lo <= reach + 0.01
    assert reach + undecided <= hi.eta_hi + 0.01
    assert lo.eta_lo <= hi.eta_hi


@pytest.mark.parametrize("n", [2, 3, 4])
def test_eta_bounds_tighten_with_budget(eta51, n):
    (lo1, hi1), (lo2, hi2) = eta51[(n, 50)], eta51[(n, 200)]
    assert lo2.eta_lo >= lo1.eta_lo and hi2.eta_hi <= hi1.eta_hi


def test_eta_is_nonincreasing_in_level(eta51):
    for n in (2, 3):
        assert eta51[(n + 1, 200)][0].eta_lo <= eta51[(n, 200)][1].eta_hi


def test_coarsest_cutoff_is_still_sound(E51, eta51):
    lo = eta_lower(E51, 3, 400, 200, cutoff=1.0)
    hi = eta_upper(E51, 3, 400, 200, cutoff=1.0)
    assert lo.eta_lo <= eta51[(3, 200)][0].eta_lo
    assert hi.eta_hi >= eta51[(3, 200)][1].eta_hi


def test_level_one_is_all_of_t1(E51):
    assert eta_upper(E51, 1, 10, 10).eta_hi == 1.0 and eta_lower(E51, 1, 10, 10).eta_lo == 1.0


def test_zeta_lower_does_not_exceed_zeta_upper(E51):
    lo = zeta_lower(E51, 4, 150, 300, 300, 1e-2, 1e-2)
    hi = zeta_upper(E51, 4, 6, 4)
    assert 0.0 < lo.zeta_lo <= hi.zeta_hi < 1.0
    both = lo.combine(hi)
    assert both.zeta_lo == lo.zeta_lo and both.zeta_hi == hi.zeta_hi


def test_zeta_upper_tightens_with_depth(E51):
    assert zeta_upper(E51, 4, 6, 4).zeta_hi <= zeta_upper(E51, 4, 4, 3).zeta_hi


def test_avoiding_a_deeper_level_only_shrinks_the_certified_set(E51):
    plain = zeta_lower(E51, 3, 100, 200, 200, 1e-2, 1e-2)
    avoid = zeta_lower(E51, 3, 100, 200, 200, 1e-2, 1e-2, avoid=1)
    assert avoid.zeta_lo <= plain.zeta_lo


# ---------------------------------------------------------------------------
# reports, trichotomy and the recursive window
# ---------------------------------------------------------------------------


def test_report_text_round_trip():
    r = BoundReport(4, 0.1, 0.2, 0.3, 0.4, {"M": 10})
    back = BoundReport.from_text(r.to_text())
    assert (back.n, back.eta_lo, back.eta_hi, back.zeta_lo, back.zeta_hi) == (4, 0.1, 0.2, 0.3, 0.4)


def test_inconsistent_report_is_rejected():
    with pytest.raises(ValueError):
        BoundReport(2, eta_lo=0.5, eta_hi=0.4)


@pytest.mark.parametrize(
    "eta,zeta,verdict",
    [
        ((0.01, 0.015), (0.6, 0.7), TrichotomyVerdict.NoWildAttractor_Case1),
        ((0.52, 0.53), (0.01, 0.016), TrichotomyVerdict.WildAttractor_Case3),
        ((0.2, 0.3), (0.2, 0.3), TrichotomyVerdict.Indeterminate_Case2Band),
        ((0.01, 0.03), (0.0, 0.7), TrichotomyVerdict.Indeterminate_Case2Band),
    ],
)
def test_trichotomy_examples(eta, zeta, verdict):
    r = BoundReport(4, *eta, *zeta)
    assert trichotomy(r, 29.45) is verdict


def test_trichotomy_needs_distortion_above_one():
    with pytest.raises(ValueError):
        trichotomy(BoundReport(2), 1.0)


def test_window_with_vanishing_zeta_collapses_to_eta_n():
    w = theorem_window((0.3, 0.3), (0.5, 0.5), (0.0, 0.0), 10.0)
    assert w.contains(0.3) and w.width < 1e-15


def test_window_formula():
    C, en, em, z = 10.0, 0.4, 0.5, 0.2
    w = theorem_window(en, em, z, C)
    assert w.lo <= en * em / (em + C * z) and w.hi >= en * em / (em + z / C)
    assert math.isclose(w.lo, en * em / (em + C * z), rel_tol=1e-14)


def test_recursive_check_accepts_and_rejects():
    reports = {"eta_n": (0.4, 0.4), "eta_m1": (0.5, 0.5), "zeta_nm": (0.2, 0.2)}
    assert recursive_inequality_check(10.0, 1, 1, {**reports, "eta_nm": (0.3, 0.31)})
    assert not recursive_inequality_check(10.0, 1, 1, {**reports, "eta_nm": (0.395, 0.399)})
