import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cutfem.geometry import rectangle, ring
from cutfem.mesh import (BackgroundMesh, CoverageError, Family, build_active_mesh, build_background,
                         make_sliver_background, split_segment, write_face_sets_csv)


@pytest.mark.parametrize("family", ["quad", "tri"])
@settings(max_examples=25, deadline=None)
@given(theta=st.floats(0, math.pi / 2), h=st.floats(0.05, 0.5))
def test_background_covers_box(family, theta, h):
    bg = build_background(family, (0.0, 0.0, 1.0, 0.5), h, theta)
    assert bg.covers(np.array([[0, 0], [1, 0], [1, 0.5], [0, 0.5]]))
    polys = bg.element_polygons()
    assert np.allclose([abs(_area(p)) for p in polys], bg.element_area())


def _area(p):
    x, y = p[:, 0], p[:, 1]
    return 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)


@pytest.mark.parametrize("family", ["quad", "tri"])
def test_locate_round_trip(family, rng):
    bg = build_background(family, (0, 0, 1, 1), 0.1, math.pi / 9)
    e = rng.integers(0, bg.n_elements, 50)
    cent = bg.element_polygons(e).mean(axis=1)
    np.testing.assert_array_equal(bg.locate(cent), e)
    assert bg.locate(np.array([[100.0, 100.0]]))[0] == -1


def test_nested_lattice():
    coarse = build_background("quad", (0, 0, 1, 1), 0.2, 0.3, offset=(0.01, 0.02))
    fine = build_background("quad", (0, 0, 1, 1), 0.05, 0.3, offset=(0.01, 0.02))
    g = fine.to_grid(np.array(coarse.origin)) 
    np.testing.assert_allclose(g, np.round(g), atol=1e-9)


def test_active_mesh_area_and_faces():
    rep = ring(0.5, 1.0, segments=40)
    bg = build_background("tri", rep.bbox, 0.1, 0.2)
    am = build_active_mesh(bg, rep)
    area = sum(am.cut_area(e) for e in am.elements)
    assert area == pytest.approx(rep.area, rel=1e-12)
    assert am.is_cut.any() and (~am.is_cut).any()
    # stabilized faces touch a boundary element
    tb = np.zeros(bg.n_elements, bool)
    tb[am.elements[am.touches_boundary]] = True
    fe = am.face_elements[am.faces_boundary]
    assert np.all(tb[fe[:, 0]] | tb[fe[:, 1]])
    assert len(am.faces_dirichlet) == 0


def test_face_normals_point_from_first_to_second():
    bg = build_background("tri", (0, 0, 1, 1), 0.25, 0.4)
    am = build_active_mesh(bg, rectangle())
    for f in range(len(am.face_kind)):
        a, b, n = am.face_geometry(f)
        c1, c2 = (bg.element_polygons([e]).mean(axis=1)[0] for e in am.face_elements[f])
        assert np.dot(c2 - c1, n) > 0
        assert abs(np.dot(b - a, n)) < 1e-12


def test_coverage_error():
    bg = BackgroundMesh("quad", 2, 2, 0.1)
    with pytest.raises(CoverageError):
        build_active_mesh(bg, rectangle())


def test_sliver_fraction():
    rep = rectangle()
    bg = make_sliver_background(rep, 0.1, 1e-3)
    am = build_active_mesh(bg, rep)
    frac = min(am.cut_area(e) for e in am.elements) / bg.element_area()
    assert frac == pytest.approx(1e-6, rel=1e-3)  # corner cell: delta in both directions


@pytest.mark.parametrize("family", list(Family))
def test_split_segment(family):
    bg = build_background(family, (0, 0, 1, 1), 0.1, 0.25)
    ts, els = split_segment(bg, (0.05, 0.13), (0.93, 0.71))
    assert ts[0] == 0 and ts[-1] == 1 and np.all(np.diff(ts) > 0)
    assert np.all(els >= 0)
    assert len(np.unique(els)) == len(els)


def test_face_sets_csv(tmp_path):
    am = build_active_mesh(build_background("quad", (0, 0, 1, 1), 0.25, 0.1), rectangle())
    write_face_sets_csv(tmp_path / "f.csv", am)
    rows = (tmp_path / "f.csv").read_text().splitlines()
    assert len(rows) == len(am.face_kind) + 1
