import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qhavg.geometry import Cusp, UnitCube, rasterize
from qhavg.whitney import (
    WhitneyError,
    block_counts,
    block_upper_series,
    chain_bound,
    cube_bound_series,
    cube_chain,
    cube_layer,
    cube_layer_of,
    cube_subdivision,
    cusp_chain_value,
    cusp_distance_factor,
    cusp_family,
    cusp_k_bound,
    cusp_m_sum,
    cusp_set,
    cusp_upper_series,
    edge_count,
    edge_count_recurrence,
    lambda_chain,
    subdivision_csv,
    validate_subdivision,
)


def test_edge_counts():
    assert [edge_count(j) for j in range(4)] == [1, 5, 17, 53]
    assert edge_count_recurrence(3) == [1, 5, 17, 53]


def test_layer_one_square():
    layer = cube_layer(2, 1)
    assert layer.nu == 16 and layer.nu_bound == 24
    assert layer.delta == Fraction(1, 12)
    assert layer.measure <= layer.measure_bound


def test_cube_sets_have_exact_ratio():
    sub = cube_subdivision(2, 3)
    assert len(sub.sets) == sum(cube_layer(2, j).nu for j in range(4))
    for s in sub.sets:
        assert s.d == pytest.approx(2 * math.sqrt(2) * s.delta, rel=1e-15)


def test_cube_validation():
    sub = cube_subdivision(2, 3)
    rep = validate_subdivision(sub.sets, rasterize(UnitCube(2), 1 / 256, policy=False))
    assert rep.ok and rep.overlap_measure == 0 and rep.connected
    assert rep.coverage > 0.95


def test_cube_chain_example():
    ch = cube_chain(2, (0.01, 0.3))
    assert len(ch) == 4
    assert chain_bound(ch).value == pytest.approx(4 * math.sqrt(2) * 4)


def test_broken_chain_rejected():
    ch = cube_chain(2, (0.01, 0.3))
    with pytest.raises(WhitneyError, match="adjacency"):
        chain_bound([ch[0], ch[-1]])


def test_layer_of_point():
    assert cube_layer_of((0.5, 0.5)) == 0
    assert cube_layer_of((0.1, 0.5)) == 1
    with pytest.raises(WhitneyError):
        cube_layer_of((1.5, 0.5))


def test_cube_bound_series_converges():
    assert cube_bound_series(2, 2.0, 40).classification == "converges"


def test_lambda_chain():
    assert lambda_chain(51) == [51, 25, 12, 6, 3, 1]
    assert lambda_chain(1) == [1]


def test_cusp_chain_below_k_bound():
    for j, m in [(1, 1), (3, 5), (5, 51), (6, 200)]:
        assert cusp_chain_value(3.0, j, m) <= cusp_k_bound(3.0, j, m)


def test_cusp_family_validates_and_has_growing_ratio():
    sets = cusp_family(3.0, 3, 4)
    rep = validate_subdivision(sets, rasterize(Cusp(alpha=3.0), 1 / 512, policy=False))
    assert rep.ok and rep.overlap_measure == 0 and rep.connected
    # d_x / delta grows like 2^((alpha - 1) j): no uniform distance factor
    r1 = cusp_set(3.0, 2, 1).d_x / cusp_set(3.0, 2, 1).delta
    r2 = cusp_set(3.0, 3, 1).d_x / cusp_set(3.0, 3, 1).delta
    assert r2 / r1 == pytest.approx(4.0)
    assert math.isfinite(cusp_distance_factor(sets))


@pytest.mark.parametrize("s,converges", [(1.0, True), (1.9, True), (2.0, False), (3.0, False)])
def test_cusp_upper_series(s, converges):
    up = cusp_upper_series(3.0, 2, s, 40, 2 ** 10)
    assert up.converges == converges == up.tube_condition
    assert up.j_ratio == pytest.approx(2.0 ** (2 * s - 4))


def test_m_sum_partial_sums_increase():
    m = cusp_m_sum(2.0, 1024)
    assert np.all(np.diff(m) > 0) and m[0] == 4.0


def test_block_counts_and_series():
    c = block_counts(5)
    assert isinstance(c, dict)
    assert block_upper_series(2, 1.0, 2 ** 12, 60).converges
    up = block_upper_series(2, 3.0, 2 ** 12, 60)
    assert not up.converges and up.limit_ratio == pytest.approx(16 / 9)


def test_csv_export():
    text = subdivision_csv(cube_subdivision(2, 1).sets)
    lines = text.strip().split("\n")
    assert lines[0] == "id,family,layer,d,delta,neighbors"
    assert len(lines) == 1 + 1 + 16


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 2 ** 16))
def test_lambda_chain_length(m):
    lam = lambda_chain(m)
    assert len(lam) == m.bit_length()
    assert all(b == a // 2 for a, b in zip(lam, lam[1:]))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.001, 0.999), st.floats(0.001, 0.999))
def test_chain_ends_in_set_containing_point(x, y):
    ch = cube_chain(2, (x, y))
    assert ch[0].layer == 0
    assert ch[-1].contains(np.array([x, y]))
    chain_bound(ch)  # adjacency holds
