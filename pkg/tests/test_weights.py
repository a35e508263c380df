import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qhavg.geometry import Ball, UnitCube, rasterize, translated
from qhavg.solver import solve
from qhavg.weights import (
    Weight,
    WeightError,
    ar_estimate,
    holder_check,
    union_chain,
    union_check,
    weighted_ls,
)

SQ = UnitCube(2)


def test_weight_validation():
    with pytest.raises(WeightError):
        Weight.constant(0.0)
    with pytest.raises(WeightError):
        Weight.power((0.0, 0.0), -2.0)
    with pytest.raises(WeightError):
        Weight.power((0.0, 0.0), 3.0).check_ar(2.0)
    w = Weight.power((0.0, 0.0), 1.0)
    assert w.evaluate(np.array([[3.0, 4.0]]))[0] == pytest.approx(5.0)
    assert Weight.from_dict(w.to_dict()) == w


def test_constant_weight_changes_nothing(square_field):
    assert weighted_ls(square_field, 2.0, Weight.constant(7.0)) == pytest.approx(weighted_ls(square_field, 2.0), rel=1e-12)


def test_ar_constant_weight_is_one():
    r = rasterize(Ball((0.0, 0.0), 1.0), 1 / 64)
    est = ar_estimate(Weight.constant(3.0), r, 2.0, 30, [0.1, 0.3])
    assert est.estimate == pytest.approx(1.0, abs=1e-12)
    assert "no violation found up to 30 balls" in est.message


def test_ar_estimate_monotone_in_ball_count():
    r = rasterize(Ball((0.0, 0.0), 1.0), 1 / 64)
    w = Weight.power((0.0, 0.0), 1.0)
    vals = [ar_estimate(w, r, 2.0, n, [0.1, 0.2, 0.4]).estimate for n in (10, 40, 160)]
    assert vals == sorted(vals)


def test_union_of_offset_squares():
    rep = union_check(SQ, translated(SQ, (0.5, 0.5)), (0.75, 0.75), 1 / 64, 2.0)
    assert rep.ok
    assert rep.mean_union <= rep.mean_sum_bound <= rep.bound
    assert rep.csv().startswith("cell,k_union,k1_star,k2_star,slack\n")


def test_union_requires_shared_base_point():
    with pytest.raises(WeightError, match="intersection"):
        union_check(SQ, translated(SQ, (0.5, 0.5)), (0.25, 0.25), 1 / 32, 2.0)


def test_disjoint_union_rejected():
    with pytest.raises(WeightError):
        union_check(SQ, translated(SQ, (2.0, 0.0)), (0.5, 0.5), 1 / 32, 2.0)


def test_three_domain_chain():
    specs = [SQ, translated(SQ, (0.5, 0.5)), translated(SQ, (1.0, 1.0))]
    reps = union_chain(specs, [(0.75, 0.75), (1.25, 1.25)], 1 / 32, 2.0)
    assert len(reps) == 2 and all(r.ok for r in reps)
    with pytest.raises(WeightError):
        union_chain(specs, [(0.75, 0.75)], 1 / 32, 2.0)


def test_holder_bad_order(square_field):
    with pytest.raises(WeightError):
        holder_check(square_field, None, 3.0, 2.0)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(0.0, 3.0), st.floats(-1.5, 2.0))
def test_holder_property(t, gap, beta):
    f = solve(rasterize(SQ, 1 / 32), (0.4, 0.6))
    rep = holder_check(f, Weight.power((0.2, 0.2), beta), t, t + gap)
    assert rep.ok
