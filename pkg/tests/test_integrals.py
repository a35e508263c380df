import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qhavg.geometry import BoxUnion, UnitCube, rasterize
from qhavg.integrals import (
    GROWING,
    INCONCLUSIVE,
    SATURATING,
    IntegralError,
    block_critical_s,
    classify_increments,
    cusp_critical_s,
    ls_integral,
    poincare_lower_bound,
    poincare_ratio,
    refinement_sweep,
    u_function,
)
from qhavg.solver import solve
from qhavg.weights import Weight


def test_constant_field_normalized_is_the_constant(square_field):
    v = ls_integral(square_field, 2.0)
    assert v.measure == pytest.approx(1.0)
    assert v.n_unreachable == 0
    assert v.normalized == pytest.approx(math.sqrt(v.raw))


def test_unreachable_cells_are_excluded():
    f = solve(rasterize(BoxUnion((((0, 0), (1, 1)), ((2, 0), (3, 1)))), 1 / 16), (0.5, 0.5))
    v = ls_integral(f, 1.0)
    assert v.n_unreachable == 256 and v.measure == pytest.approx(1.0)


def test_bad_exponent(square_field):
    with pytest.raises(IntegralError):
        ls_integral(square_field, 0.0)


@pytest.mark.parametrize(
    "raws,label",
    [
        ([1.0, 2.0, 2.5, 2.75, 2.875], SATURATING),
        ([1.0, 2.0, 4.0, 8.0, 16.0], GROWING),
        ([1.0, 2.0], INCONCLUSIVE),
        ([1.0, 2.0, 2.9, 3.71, 4.439], INCONCLUSIVE),
    ],
)
def test_classify_increments(raws, label):
    assert classify_increments(raws)[0] == label


def test_critical_values():
    assert cusp_critical_s(3.0, 2) == 2.0
    assert block_critical_s(2) == pytest.approx(2 * math.log2(3) - 1)


def test_square_saturates_along_whitney_layers():
    rep = refinement_sweep(UnitCube(2), (0.5, 0.5), 1.0, [1 / 64, 1 / 128], [0, 1, 2, 3, 4])
    assert rep.classification == SATURATING
    raws = [r.raw for r in rep.rows if r.h == 1 / 128]
    assert all(b >= a for a, b in zip(raws, raws[1:]))


def test_sweep_lists_validated():
    with pytest.raises(IntegralError):
        refinement_sweep(UnitCube(2), (0.5, 0.5), 1.0, [1 / 64, 1 / 32], [0, 1, 2])
    with pytest.raises(IntegralError):
        refinement_sweep(UnitCube(2), (0.5, 0.5), 1.0, [1 / 32], [2, 1])


def test_poincare_ratio_example():
    assert poincare_lower_bound(3, 2) == pytest.approx((24 / 1024) ** 0.5)
    pr = poincare_ratio(3, 2, 1 / 1024)
    assert pr.ratio >= pr.lower_bound


def test_poincare_ratio_truncated_room():
    with pytest.raises(IntegralError, match="truncated"):
        poincare_ratio(6, 2, 1 / 64)


def test_u_function_is_odd_and_clipped():
    u = u_function(2)
    pts = np.array([[0.1, 0.5], [-0.1, 0.5], [0.78125, 0.1], [-0.95, 0.5]])
    assert u(pts).tolist() == [0.0, -0.0, 0.5, -1.0]


def test_poincare_matches_grid_quadrature():
    # exact per-box integration against a midpoint sum of the same u_j
    from qhavg.geometry import RoomsAndHalls

    j, p, h = 2, 2.0, 1 / 256
    pr = poincare_ratio(j, p, h)
    r = rasterize(RoomsAndHalls(j_max=pr.j_max), h, policy=False)
    u = u_function(j)(r.inside_centers())
    num = (np.sum(np.abs(u - u.mean()) ** p) * r.cell_volume) ** (1 / p)
    assert num == pytest.approx(pr.numerator, rel=0.02)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.5, 4.0), st.floats(0.5, 4.0))
def test_holder_monotone(t, s):
    from qhavg.integrals import ls_integral as ls

    f = solve(rasterize(UnitCube(2), 1 / 32), (0.3, 0.7))
    lo, hi = sorted((t, s))
    w = Weight.power((0.1, 0.2), 0.5)
    assert ls(f, lo, w).normalized <= ls(f, hi, w).normalized * (1 + 1e-12)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.5, 3.0), st.floats(0.1, 1.5))
def test_raw_log_convex_in_s(s, ds):
    f = solve(rasterize(UnitCube(2), 1 / 32), (0.5, 0.5))
    a, b, c = (ls_integral(f, v).raw for v in (s, s + ds, s + 2 * ds))
    assert b * b <= a * c * (1 + 1e-12)
