import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cutfem.geometry import GeometryError, clip_cell, ring
from cutfem.quadrature import (TENSOR, TOTAL, boundary_rule, cut_cell_rule, gauss_1d, monomial_moment_polygon,
                               square_rule, triangle_rule, write_rule_csv)


def _fan_integral(poly, a, b):
    """Integrate x^a y^b over a convex polygon by fan triangulation."""
    xi, w = triangle_rule(a + b)
    tot = 0.0
    for i in range(1, len(poly) - 1):
        p0, p1, p2 = poly[0], poly[i], poly[i + 1]
        J = np.column_stack([p1 - p0, p2 - p0])
        x = p0 + xi @ J.T
        tot += abs(np.linalg.det(J)) * np.dot(w, x[:, 0] ** a * x[:, 1] ** b)
    return tot


def test_gauss_exactness():
    for n in range(1, 8):
        x, w = gauss_1d(n)
        for d in range(2 * n):
            assert np.dot(w, x**d) == pytest.approx((1 - (-1) ** (d + 1)) / (d + 1), abs=1e-14)
    with pytest.raises(ValueError):
        gauss_1d(0)


@pytest.mark.parametrize("q", [1, 2, 4, 7])
def test_reference_rules(q):
    xs, ws = square_rule(q)
    xt, wt = triangle_rule(q)
    for a in range(q + 1):
        for b in range(q + 1):
            assert np.dot(ws, xs[:, 0] ** a * xs[:, 1] ** b) == pytest.approx(1 / ((a + 1) * (b + 1)), rel=1e-13)
            if a + b <= q:
                exact = math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)
                assert np.dot(wt, xt[:, 0] ** a * xt[:, 1] ** b) == pytest.approx(exact, rel=1e-13)


def _random_cut(seed):
    """Unit-size cell far from the origin clipped by a random disc or half-plane."""
    r = np.random.default_rng(seed)
    c = np.array([3.0, -2.0]) + r.uniform(-1, 1, 2)
    h = r.uniform(0.2, 1.0)
    cell = c + h * np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    if r.random() < 0.5:
        cell = cell[[0, 1, 2]] if r.random() < 0.5 else cell[[0, 2, 3]]
    centre = cell.mean(0) + r.uniform(-0.6, 0.6, 2) * h
    rad = r.uniform(0.3, 0.9) * h
    rep = ring(0.3 * rad, rad, center=tuple(centre + r.uniform(-0.1, 0.1, 2) * h), segments=24)
    reg = clip_cell(rep, cell)
    return reg, cell


@pytest.mark.parametrize("seed", range(100))
def test_cut_rule_matches_green_moments(seed):
    reg, cell = _random_cut(seed)
    if reg.is_empty:
        pytest.skip("empty cut")
    q = 2 * (1 + seed % 4)
    mode = TENSOR if len(cell) == 4 else TOTAL
    rule = cut_cell_rule(reg, q, mode)
    assert rule.weights.sum() == pytest.approx(reg.area, rel=1e-12)
    for a in range(q + 1):
        for b in range(q + 1):
            if mode == TOTAL and a + b > q:
                continue
            got = rule.integrate(lambda x, y: x**a * y**b)
            ref = monomial_moment_polygon(reg.loops, a, b)
            scale = abs(reg.area) * np.max(np.abs(np.concatenate(reg.loops)), axis=0) ** [a, b]
            assert abs(got - ref) <= 1e-12 * max(abs(ref), float(np.prod(scale)))


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 2 * math.pi), st.floats(-0.45, 0.45), st.integers(1, 5))
def test_halfplane_cut_matches_subdivision(angle, offset, p):
    cell = np.array([[1, 1], [2, 1], [2, 2], [1, 2]], dtype=float)
    n = np.array([math.cos(angle), math.sin(angle)])
    centre = cell.mean(0) + offset * n
    t = np.array([-n[1], n[0]])
    big = [centre - 10 * t, centre + 10 * t, centre + 10 * t - 20 * n, centre - 10 * t - 20 * n]
    from cutfem.geometry import BoundaryRep
    rep = BoundaryRep([big])
    reg = clip_cell(rep, cell)
    poly = reg.loops[0]
    q = 2 * p
    rule = cut_cell_rule(reg, q, TENSOR)
    for a in range(q + 1):
        for b in range(q + 1):
            ref = _fan_integral(poly, a, b)
            got = rule.integrate(lambda x, y: x**a * y**b)
            assert got == pytest.approx(ref, rel=1e-12, abs=1e-14)


def test_total_mode_is_smaller():
    loops = [np.array([[0, 0], [1, 0], [0.2, 0.9]])]
    assert len(cut_cell_rule(loops, 6, TOTAL)) < len(cut_cell_rule(loops, 6, TENSOR))


def test_degenerate_regions_rejected():
    with pytest.raises(GeometryError):
        cut_cell_rule([], 2)
    with pytest.raises(GeometryError):
        cut_cell_rule([np.array([[0, 0], [1, 0]])], 2)
    with pytest.raises(ValueError):
        cut_cell_rule([np.array([[0, 0], [1, 0], [0, 1]])], 2, "bogus")


def test_boundary_rule_length_and_normals():
    r = boundary_rule([[0, 0], [1, 1]], [[1, 0], [1, 1]], 3)
    assert r.skipped == 1
    assert r.weights.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(r.normals, np.tile([0.0, -1.0], (len(r.weights), 1)))


def test_rule_csv(tmp_path):
    rule = cut_cell_rule([np.array([[0, 0], [1, 0], [0, 1]])], 2, TOTAL)
    write_rule_csv(tmp_path / "r.csv", rule, {"element": 7})
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "element,x,y,weight,sign"
    assert len(lines) == len(rule) + 1
    assert all(ln.startswith("7,") for ln in lines[1:])
