"""The renormalization operator and its derivative against independent routes."""

import numpy as np
import pytest

from oracles import fd_column, renormalize_mp
from fibwild.fixpoint import renormalize_float
from fibwild.renorm import (
    CombinatoricsBroken,
    RenormElement,
    apply_derivative,
    basis_direction,
    read_element,
    renormalize,
    write_element,
)

AUDIT_N = 30


def flat_index(kind, k, N):
    return {"v": 0, "i": 1, "j": 2, "t": 3}.get(kind, 4 + k if kind == "psi" else 5 + N + k)


def audit(E, directions, rel=1e-4):
    """Largest relative mismatch between the interval derivative and central differences."""
    Em = E.with_degree(AUDIT_N).midpoint()
    z = Em.mid_vector()
    st = renormalize(Em)
    worst = 0.0
    for kind, k in directions:
        fd = np.array(fd_column(z, Em.d, AUDIT_N, flat_index(kind, k, AUDIT_N)))
        lo, hi = apply_derivative(st, basis_direction(kind, k, AUDIT_N)).flatten()
        mid = ((lo + hi) / 2)[: fd.size]
        scale = np.abs(fd).max()
        err = np.abs(mid - fd) / (np.abs(fd) + 1e-8 * scale)
        worst = max(worst, float(err.max()))
    return worst


@pytest.mark.parametrize("d", [3.8, 5.1])
def test_derivative_matches_finite_differences(d, request):
    E = request.getfixturevalue("E38" if d == 3.8 else "E51")
    directions = [("v", 0), ("i", 0), ("j", 0), ("t", 0), ("psi", 0), ("psi", 2), ("phi", 1), ("phi", 4)]
    assert audit(E, directions) < 1e-4


def test_operator_agrees_with_float_and_high_precision_routes(E51):
    Em = E51.with_degree(AUDIT_N).midpoint()
    z = Em.mid_vector()
    res = renormalize(Em).result
    enc_lo = np.concatenate([[x.lo for x in (res.v, res.i, res.j, res.t)], res.psi.lo, res.phi.lo])
    enc_hi = np.concatenate([[x.hi for x in (res.v, res.i, res.j, res.t)], res.psi.hi, res.phi.hi])
    ref = np.array([float(x) for x in renormalize_mp(z, Em.d, AUDIT_N)])
    slack = 1e-15 * np.maximum(1.0, np.abs(ref))
    assert np.all(enc_lo - slack <= ref) and np.all(ref <= enc_hi + slack)
    flt = renormalize_float(z, Em.d, AUDIT_N)
    assert np.max(np.abs(flt - ref)) < 1e-12


def test_fixed_point_is_mapped_into_itself(E51):
    res = renormalize(E51).result
    for name in ("v", "i", "j", "t"):
        a, b = getattr(E51, name), getattr(res, name)
        assert abs(a.mid - b.mid) < 1e-12


def test_broken_configuration_is_reported(E51):
    Em = E51.with_degree(10).midpoint()
    z = Em.mid_vector()
    z[3] = 0.95  # t beyond j makes the first-return combinatorics impossible
    with pytest.raises(CombinatoricsBroken):
        renormalize(RenormElement.from_vector(5.1, z, 10))


def test_element_file_round_trip(E38, tmp_path):
    write_element(E38, tmp_path)
    back = read_element(3.8, tmp_path)
    for name in ("v", "i", "j", "t"):
        assert (getattr(back, name).lo, getattr(back, name).hi) == (getattr(E38, name).lo, getattr(E38, name).hi)
    assert np.array_equal(back.psi.lo, E38.psi.lo) and np.array_equal(back.phi.tail, E38.phi.tail)
