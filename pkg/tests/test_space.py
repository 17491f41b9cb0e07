import math

import numpy as np
import pytest

from cutfem.geometry import ring
from cutfem.mesh import build_active_mesh, build_background
from cutfem.space import (FESpace, directional_derivative, face_normal_derivative_jump, reference_nodes,
                          shape_derivative, shape_eval)


@pytest.mark.parametrize("family", ["quad", "tri"])
@pytest.mark.parametrize("p", [1, 2, 3, 4, 5])
def test_kronecker_and_partition_of_unity(family, p, rng):
    nodes = reference_nodes(family, p)
    np.testing.assert_allclose(shape_eval(family, p, nodes), np.eye(len(nodes)), atol=1e-11)
    pts = rng.random((20, 2)) * (0.5 if family == "tri" else 1.0)
    np.testing.assert_allclose(shape_eval(family, p, pts).sum(1), 1.0, atol=1e-12)
    np.testing.assert_allclose(shape_eval(family, p, pts, 1).sum(1), 0.0, atol=1e-10)


@pytest.mark.parametrize("family", ["quad", "tri"])
def test_derivatives_match_finite_differences(family, rng):
    p = 4
    x = rng.random((5, 2)) * 0.4 + 0.1
    d = 1e-6
    fd = (shape_eval(family, p, x + [d, 0]) - shape_eval(family, p, x - [d, 0])) / (2 * d)
    np.testing.assert_allclose(shape_derivative(family, p, x, 1, 0), fd, atol=1e-6)
    g = np.array([0.6, -0.8])
    dd = directional_derivative(family, p, x, g, 2)
    H = shape_eval(family, p, x, 2)
    np.testing.assert_allclose(dd, np.einsum("qnab,a,b->qn", H, g, g), atol=1e-9)
    top = 2 * p if family == "quad" else p  # Q_p has total degree 2p
    assert np.all(directional_derivative(family, p, x, g, top + 1) == 0)


def test_order_bounds():
    with pytest.raises(ValueError):
        reference_nodes("quad", 6)
    with pytest.raises(ValueError):
        shape_eval("quad", 2, [[0.5, 0.5]], 3)


def _space(family, p, theta=0.3):
    rep = ring(0.5, 1.0, segments=32)
    return FESpace(build_active_mesh(build_background(family, rep.bbox, 0.2, theta), rep), p)


@pytest.mark.parametrize("family", ["quad", "tri"])
@pytest.mark.parametrize("p", [1, 3])
def test_interpolation_reproduces_polynomials(family, p, rng):
    V = _space(family, p)
    c = rng.standard_normal((2, p + 1, p + 1))
    c = c * (np.add.outer(np.arange(p + 1), np.arange(p + 1)) <= p)
    f = lambda x, y: (np.polynomial.polynomial.polyval2d(x, y, c[0]), np.polynomial.polynomial.polyval2d(x, y, c[1]))
    u = V.interpolate(f)
    pts = np.array([[0.7, 0.1], [-0.2, 0.8], [0.0, -0.6]])
    vals, grads = V.evaluate(u, pts, grad=True)
    np.testing.assert_allclose(vals, np.column_stack(f(pts[:, 0], pts[:, 1])), atol=1e-11)
    assert np.all(np.isfinite(grads))


def test_dof_layout():
    V = _space("quad", 2)
    assert V.n_dofs == 2 * V.n_nodes
    assert np.all(V.cell_dofs[:, 1::2] == V.cell_dofs[:, 0::2] + 1)
    outside = V.evaluate(np.zeros(V.n_dofs), np.array([[5.0, 5.0]]))
    assert np.all(np.isnan(outside))


@pytest.mark.parametrize("family", ["quad", "tri"])
def test_face_jump_of_smooth_field_vanishes(family):
    V = _space(family, 2, theta=math.pi / 9)
    u = V.interpolate(lambda x, y: (x * x - y, x * y))
    for f in V.mesh.faces_boundary[:10]:
        nodes, vals = face_normal_derivative_jump(V, f, 1, [0.2, 0.7])
        assert np.abs(vals @ u[2 * nodes]).max() < 1e-11
    with pytest.raises(ValueError):
        face_normal_derivative_jump(V, 10**7, 1, [0.5])
