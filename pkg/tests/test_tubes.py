from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qhavg.geometry import BoxUnion, RoomsAndHalls, UnitCube
from qhavg.tubes import (
    CONVERGES,
    DIVERGES,
    INCONCLUSIVE,
    AmbiguousComponent,
    Tube,
    TubeError,
    block_term_ratio,
    block_tubes,
    certify_not_averaging,
    classify_series,
    cusp_term_ratio,
    cusp_tubes,
    disk_rooms_bound_term,
    disk_rooms_tubes,
    family_series,
    rooms_halls_tubes,
    tube_lower_bound,
    verify_essential,
)


def test_lower_bound_examples():
    assert tube_lower_bound(Tube((0, 0), (1, 0), 4.0, 1.0), 1.0) == pytest.approx(4.0)
    r = 0.3
    assert tube_lower_bound(Tube((0, 0), (1, 0), r, r), 1.0) == pytest.approx(r * r / 4)
    with pytest.raises(TubeError):
        tube_lower_bound(Tube((0, 0), (1, 0), 1.0, 1.0), 0.5)


def test_tube_validation():
    with pytest.raises(TubeError):
        Tube((0, 0), (0, 0), 1.0, 1.0)
    with pytest.raises(TubeError):
        Tube((0, 0), (1, 0), 1.0, 1.0, c=1.5)


def test_rooms_halls_terms_are_exact_sixteenths():
    fam = rooms_halls_tubes(16)
    for t in fam.tubes:
        assert Fraction(t.term(1.0)) == Fraction(1, 16)
    assert family_series(fam, 1.0).partial_sums[-1] == 1.0


def test_verify_rooms_tube():
    rh = RoomsAndHalls(j_max=6)
    chk = verify_essential(rh, rooms_halls_tubes(6).tubes[1])
    assert chk.ok and chk.wall_clear and chk.c_hat == pytest.approx(1.0)


def test_tube_with_domain_beyond_its_wall_is_not_essential():
    chk = verify_essential(UnitCube(2), Tube((0.5, 0.5), (1.0, 0.0), 0.3, 0.2))
    assert not chk.wall_clear and not chk.ok


def test_corridor_tube_is_essential():
    spec = BoxUnion((((0, 0), (1, 1)), ((1, 0.45), (2, 0.55))))
    assert verify_essential(spec, Tube((1.2, 0.5), (1.0, 0.0), 0.5, 0.05)).ok
    assert not verify_essential(spec, Tube((1.2, 0.5), (1.0, 0.0), 0.5, 0.02)).wall_clear


def test_ambiguous_component():
    spec = BoxUnion((((0, 0), (1, 0.4)), ((0, 0.6), (1, 1))))
    with pytest.raises(AmbiguousComponent):
        verify_essential(spec, Tube((0.5, 0.0), (0.0, 1.0), 1.0, 0.2))


@pytest.mark.parametrize(
    "terms,label",
    [
        ([1.0] * 12, DIVERGES),
        ([2.0 ** -j for j in range(20)], CONVERGES),
        ([1.0, 2.0], INCONCLUSIVE),
        ([0.995 ** j for j in range(20)], INCONCLUSIVE),
    ],
)
def test_classify_series(terms, label):
    assert classify_series(terms)[0] == label


def test_family_ratios():
    fam = cusp_tubes(3.0, 2, 10)
    terms = family_series(fam, 2.5).terms
    assert terms[-1] / terms[-2] == pytest.approx(cusp_term_ratio(3.0, 2, 2.5), rel=1e-12)
    b = family_series(block_tubes(2, 8), 3.0).terms
    assert b[-1] / b[-2] == pytest.approx(block_term_ratio(2, 3.0), rel=1e-12)
    assert block_term_ratio(2, 3.0) == pytest.approx(16 / 9)


def test_disk_rooms_exact_terms_dominate_bound():
    fam = disk_rooms_tubes(8)
    for t in fam.tubes:
        assert t.term(1.0) >= disk_rooms_bound_term(t.index, 1.0) * 0.99


@pytest.mark.parametrize("s", [1.0, 2.0])
def test_certify_rooms_and_halls(s):
    cert = certify_not_averaging(None, rooms_halls_tubes(12), s)
    assert cert.certified
    text = cert.to_text()
    assert "certified: true" in text and "partial" in text


def test_block_certificate_refused_below_threshold():
    cert = certify_not_averaging(None, block_tubes(2, 5), 1.0)
    assert not cert.certified and "converges" in cert.reason


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 10.0), st.floats(1.0, 4.0))
def test_series_classification_scale_invariant(lam, s):
    fam = cusp_tubes(3.0, 2, 24)
    a = family_series(fam, s)
    b = family_series(fam.scaled(lam), s)
    assert a.classification == b.classification
    assert np.allclose(np.array(b.terms), lam ** 2 * np.array(a.terms), rtol=1e-9)


@pytest.mark.parametrize("j_max", [16, 24])
def test_disk_rooms_certified_for_small_rooms(j_max):
    # rooms near the pinch are ~1e-7 wide; their walls must not pick up rounding tilt
    cert = certify_not_averaging(None, disk_rooms_tubes(j_max), 1.0)
    assert cert.certified, cert.reason
