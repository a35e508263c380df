import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qhavg.geometry import (
    Ball,
    BlockTower,
    BoxUnion,
    Cusp,
    DiskAndRooms,
    GeometryError,
    RoomsAndHalls,
    UnionOf,
    UnitCube,
    dump_spec,
    grid_for,
    load_spec,
    rasterize,
    read_mask,
    translated,
    unit_ball_volume,
)

ALL_SPECS = [
    UnitCube(2),
    UnitCube(3),
    Ball((0.0, 0.0), 1.0),
    Cusp(alpha=3.0, n=2, x_min=0.1),
    Cusp(alpha=2.0, n=3),
    RoomsAndHalls(j_max=5),
    DiskAndRooms(j_max=4),
    BlockTower(n=2, m_max=15),
    BoxUnion((((0, 0), (1, 1)), ((1, 0.25), (2, 0.75)))),
    translated(UnitCube(2), (0.5, 0.5)),
]


@pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: s.kind)
def test_roundtrip(spec):
    assert load_spec(dump_spec(spec)) == spec


def test_unit_ball_volume():
    assert unit_ball_volume(1) == pytest.approx(2.0)
    assert unit_ball_volume(2) == pytest.approx(math.pi)
    assert unit_ball_volume(3) == pytest.approx(4 * math.pi / 3)


def test_cusp_membership():
    c = Cusp(alpha=3.0, n=2)
    assert c.contains((0.5, 0.1))
    assert not c.contains((0.5, 0.2))  # 0.5^3 = 0.125
    assert not c.contains((1.0, 0.0))
    assert not c.contains((-0.1, 0.0))
    pts = np.array([[0.5, 0.1], [0.5, 0.2]])
    assert c.contains(pts).tolist() == [True, False]


def test_rooms_and_halls_layout():
    rh = RoomsAndHalls(j_max=4)
    assert rh.x(1) == 0.5 and rh.x_prime(1) == 0.625
    (lo, hi) = rh.hall(2)
    assert hi[1] == pytest.approx(1 / 6)
    assert rh.contains((0.55, 0.6)) is False  # above hall 1 (height 1/2)
    assert rh.contains((0.55, 0.3))
    assert rh.contains((-0.55, 0.3))


def test_block_tower_blocks():
    bt = BlockTower(n=2, m_max=7)
    assert np.allclose(bt.block(2), ((1 / 3, 1.0), (2 / 3, 4 / 3)))
    assert bt.edge(4) == pytest.approx(1 / 9)
    assert bt.contains((0.5, 1.5))
    assert not bt.contains((0.2, 1.2))


def test_disk_rooms_frame_reaches_outer_circle():
    d = DiskAndRooms(j_max=3)
    mid, t, normal, half, depth = d.room_frame(2, 3.0)
    corner = mid + normal * depth + t * half
    assert np.linalg.norm(corner) == pytest.approx(3.0)
    assert d.contains(mid + 0.5 * depth * normal)


def test_rasterize_has_outside_margin_and_positive_distance():
    r = rasterize(UnitCube(2), 1 / 32)
    assert r.n_inside == 32 * 32
    assert not r.mask[0].any() and not r.mask[-1].any()
    assert np.all(r.dist[r.mask] > 0)
    assert r.dist[r.mask].max() <= 0.5


def test_distance_matches_closed_form_on_ball():
    r = rasterize(Ball((0.0, 0.0), 1.0), 1 / 64)
    c = r.inside_centers()
    exact = 1.0 - np.linalg.norm(c, axis=1)
    assert np.all(r.dist[r.mask] <= exact + 1e-12)
    assert np.max(exact - r.dist[r.mask]) < 1 / 64


def test_truncation_policy_drops_small_features():
    r = rasterize(RoomsAndHalls(j_max=8), 1 / 256)
    assert r.truncation.requested == 8
    assert r.truncation.effective == 4
    assert r.truncation.dropped_measure > 0
    cusp = rasterize(Cusp(alpha=3.0), 1 / 64)
    assert cusp.truncation.effective == pytest.approx((1 / 64) ** (1 / 3))


def test_empty_and_bad_inputs():
    with pytest.raises(GeometryError):
        rasterize(UnitCube(2), 0.0)
    with pytest.raises(GeometryError):
        Cusp(alpha=1.0)
    with pytest.raises(GeometryError):
        load_spec("kind: Torus\n")


def test_aligned_grids_for_union():
    g1 = UnitCube(2)
    g2 = translated(g1, (0.5, 0.5))
    origin, shape = grid_for(UnionOf(((g1, None), (g2, None))), 1 / 16)
    r1 = rasterize(g1, 1 / 16, origin=origin, shape=shape)
    r2 = rasterize(g2, 1 / 16, origin=origin, shape=shape)
    assert r1.same_grid(r2)
    assert (r1.mask & r2.mask).sum() == 8 * 8


def test_mask_export(tmp_path):
    r = rasterize(BlockTower(2, 7), 1 / 64)
    r.write_mask(tmp_path / "m")
    header, mask = read_mask(tmp_path / "m")
    assert np.array_equal(mask, r.mask)
    assert header["truncation"]["effective"] == r.truncation.effective


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(-0.99, 0.99), st.floats(1.2, 4.0))
def test_cusp_distance_bound_is_an_upper_bound(x, y, alpha):
    c = Cusp(alpha=alpha, n=2)
    p = np.array([[x, y * x ** alpha]])
    # the vertical gap bounds the distance to the boundary from above
    assert c.contains(p[0])
    assert c.distance_bound(p)[0] >= 0
