import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cutfem.geometry import (BoundaryRep, GeometryError, Location, Tag, clip_cell, drilled_lshape, make_geometry,
                             point_in_domain, rectangle, rep_from_config, ring, signed_area)


def test_signed_area_orientation():
    sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    assert signed_area(sq) == pytest.approx(1.0)
    assert signed_area(sq[::-1]) == pytest.approx(-1.0)


def test_ring_area_and_classification():
    r = ring(0.5, 1.0, segments=64)
    exact = 0.5 * 64 * math.sin(2 * math.pi / 64) * (1.0 - 0.25)
    assert r.area == pytest.approx(exact, rel=1e-12)
    assert point_in_domain(r, (0.75, 0.0)) == Location.INSIDE
    assert point_in_domain(r, (0.0, 0.0)) == Location.OUTSIDE
    assert point_in_domain(r, (2.0, 0.0)) == Location.OUTSIDE
    assert point_in_domain(r, (1.0, 0.0)) == Location.ON_BOUNDARY


def test_invalid_reps():
    with pytest.raises(GeometryError):
        BoundaryRep([[(0, 0), (1, 0)]])
    with pytest.raises(GeometryError):
        BoundaryRep([[(0, 0), (1, 1), (1, 0), (0, 1)]])  # bow tie
    with pytest.raises(GeometryError):
        BoundaryRep([[(0, 0), (0, 1), (1, 1), (1, 0)]])  # clockwise outer loop
    with pytest.raises(GeometryError):
        BoundaryRep([[(0, 0), (1, 0), (1, 1)]], [[Tag.NEUMANN] * 2])
    with pytest.raises(GeometryError):
        ring(1.0, 0.5)
    with pytest.raises(GeometryError):
        make_geometry("moebius")


def test_rep_from_config_roundtrip():
    rep = rep_from_config({"kind": "rectangle", "params": {"width": 2.0, "height": 0.5}})
    assert rep.area == pytest.approx(1.0)
    rep2 = rep_from_config({"loops": [rep.loops[0].tolist()]})
    assert rep2.area == pytest.approx(1.0)


def test_rectangle_dirichlet_tags():
    rep = rectangle(dirichlet=("left", "bottom"))
    assert (rep.edge_tags == Tag.DIRICHLET).sum() == 2


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.3, 0.3), st.floats(-0.3, 0.3), st.floats(0.05, 0.4))
def test_clipped_cells_tile_the_domain(ox, oy, h):
    rep = drilled_lshape(segments=16)
    xs = ox + h * np.arange(math.floor(-ox / h) - 1, math.ceil((2.0 - ox) / h) + 1)
    ys = oy + h * np.arange(math.floor(-oy / h) - 1, math.ceil((2.0 - oy) / h) + 1)
    total = 0.0
    for x in xs:
        for y in ys:
            cell = np.array([[x, y], [x + h, y], [x + h, y + h], [x, y + h]])
            total += clip_cell(rep, cell).area
    assert total == pytest.approx(rep.area, rel=1e-12)


def test_clip_keeps_boundary_tags():
    rep = rectangle(dirichlet=("bottom",))
    cell = np.array([[0.5, -0.5], [1.5, -0.5], [1.5, 0.5], [0.5, 0.5]])
    reg = clip_cell(rep, cell)
    assert reg.area == pytest.approx(0.25)
    a, b, t = reg.domain_segments()
    lengths = {int(k): 0.0 for k in (Tag.DIRICHLET, Tag.NEUMANN)}
    for p, q, k in zip(a, b, t):
        lengths[int(k)] += float(np.hypot(*(q - p)))
    assert lengths[int(Tag.DIRICHLET)] == pytest.approx(0.5)
    assert lengths[int(Tag.NEUMANN)] == pytest.approx(0.5)
