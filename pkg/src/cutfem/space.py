"""Lagrange spaces of order p on an active mesh.

Reference cells are the unit square (QUAD) and the unit triangle
{ξ, η ≥ 0, ξ + η ≤ 1} (TRI).  Basis functions are stored as 2D monomial
coefficient arrays c[a, b] in variables shifted to the cell centre
(coefficient of (ξ-cξ)^a (η-cη)^b), built as products of linear factors, so
derivatives of any order are available and coefficients stay small.
"""
from __future__ import annotations

from functools import lru_cache
from math import comb

import numpy as np
from numpy.polynomial import polynomial as P

from .mesh import ActiveMesh, Family

MAX_ORDER = 5


def _check_order(p):
    if not 1 <= int(p) <= MAX_ORDER:
        raise ValueError(f"polynomial order must be in 1..{MAX_ORDER}, got {p}")


def _mul2(c1, c2):
    n = (c1.shape[0] + c2.shape[0] - 1, c1.shape[1] + c2.shape[1] - 1)
    out = np.zeros(n)
    for a, b in zip(*np.nonzero(c1)):
        out[a : a + c2.shape[0], b : b + c2.shape[1]] += c1[a, b] * c2
    return out


def _center(family):
    return (0.5, 0.5) if Family(family) is Family.QUAD else (1.0 / 3.0, 1.0 / 3.0)


def _linear(c0, cx, cy, center):
    """Factor c0 + cx ξ + cy η in shifted variables."""
    return np.array([[c0 + cx * center[0] + cy * center[1], cy], [cx, 0.0]])


def _lagrange_1d(p, i, c0):
    """1D equispaced Lagrange polynomial for node i/p on [0, 1] in t - c0."""
    c = np.array([1.0])
    for m in range(p + 1):
        if m != i:
            c = P.polymul(c, np.array([c0 - m / p, 1.0]) / ((i - m) / p))
    return c


@lru_cache(maxsize=None)
def reference_nodes(family, p: int) -> np.ndarray:
    _check_order(p)
    fam = Family(family)
    if fam is Family.QUAD:
        idx = [(a, b) for b in range(p + 1) for a in range(p + 1)]
    else:
        idx = [(a, b) for b in range(p + 1) for a in range(p + 1 - b)]
    out = np.array(idx, dtype=float) / p
    out.flags.writeable = False
    return out


@lru_cache(maxsize=None)
def _coefficients(family, p: int) -> np.ndarray:
    """Array (n_nodes, p+1, p+1) of monomial coefficients."""
    fam = Family(family)
    nodes = np.rint(reference_nodes(fam, p) * p).astype(int)
    ctr = _center(fam)
    out = np.zeros((len(nodes), p + 1, p + 1))
    for n, (a, b) in enumerate(nodes):
        if fam is Family.QUAD:
            c = np.outer(_lagrange_1d(p, a, ctr[0]), _lagrange_1d(p, b, ctr[1]))
        else:
            c = np.ones((1, 1))
            for m in range(a):
                c = _mul2(c, _linear(-m / (m + 1), p / (m + 1), 0.0, ctr))
            for m in range(b):
                c = _mul2(c, _linear(-m / (m + 1), 0.0, p / (m + 1), ctr))
            k = p - a - b
            for m in range(k):
                c = _mul2(c, _linear((p - m) / (m + 1), -p / (m + 1), -p / (m + 1), ctr))
        out[n, : c.shape[0], : c.shape[1]] = c
    out.flags.writeable = False
    return out


@lru_cache(maxsize=None)
def _deriv_coefficients(family, p: int, r: int, s: int) -> np.ndarray:
    c = np.array(_coefficients(family, p))
    if r:
        c = P.polyder(c, r, axis=1)
    if s:
        c = P.polyder(c, s, axis=2)
    return c


def shape_derivative(family, p: int, pts, r: int = 0, s: int = 0) -> np.ndarray:
    """∂ξ^r ∂η^s of every basis function at reference points; shape (npts, n_nodes)."""
    _check_order(p)
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    c = _deriv_coefficients(Family(family), int(p), int(r), int(s))
    if c.shape[1] == 0 or c.shape[2] == 0:
        return np.zeros((len(pts), c.shape[0]))
    ctr = _center(family)
    px = (pts[:, 0:1] - ctr[0]) ** np.arange(c.shape[1])[None, :]
    py = (pts[:, 1:2] - ctr[1]) ** np.arange(c.shape[2])[None, :]
    return np.einsum("nab,qa,qb->qn", c, px, py, optimize=True)


def shape_eval(family, p: int, pts, order: int = 0) -> np.ndarray:
    """Values (order 0), gradients (order 1) or Hessians (order 2) in reference coordinates.

    Shapes: (npts, n), (npts, n, 2) and (npts, n, 2, 2).
    """
    if order == 0:
        return shape_derivative(family, p, pts)
    if order == 1:
        return np.stack([shape_derivative(family, p, pts, 1, 0), shape_derivative(family, p, pts, 0, 1)], axis=-1)
    if order == 2:
        hxx = shape_derivative(family, p, pts, 2, 0)
        hxy = shape_derivative(family, p, pts, 1, 1)
        hyy = shape_derivative(family, p, pts, 0, 2)
        return np.stack([np.stack([hxx, hxy], -1), np.stack([hxy, hyy], -1)], -2)
    raise ValueError(f"derivative order must be 0, 1 or 2, got {order}")


def directional_derivative(family, p: int, pts, g, l: int) -> np.ndarray:
    """l-th derivative along the reference vector g, (npts, n)."""
    out = 0.0
    for k in range(l + 1):
        coef = comb(l, k) * g[0] ** k * g[1] ** (l - k)
        if coef != 0.0:
            out = out + coef * shape_derivative(family, p, pts, k, l - k)
    if np.isscalar(out):
        return np.zeros((len(np.atleast_2d(pts)), len(reference_nodes(family, p))))
    return out


class FESpace:
    """Continuous vector-valued Lagrange space on the active elements.

    Scalar nodes live on the lattice with spacing h/p in grid coordinates;
    vector DOFs are interleaved as 2*node + component.
    """

    def __init__(self, mesh: ActiveMesh, p: int):
        _check_order(p)
        self.mesh = mesh
        self.bg = mesh.bg
        self.p = int(p)
        self.family = self.bg.family
        self.ref_nodes = reference_nodes(self.family, self.p)
        self.n_local = len(self.ref_nodes)
        bg = self.bg
        i, j, k = bg.element_ijk(mesh.elements)
        lat = np.rint(self.ref_nodes * self.p).astype(int)
        la, lb = lat[:, 0], lat[:, 1]
        if self.family is Family.QUAD:
            ox = np.broadcast_to(la, (len(k), self.n_local))
            oy = np.broadcast_to(lb, (len(k), self.n_local))
        else:
            k0 = (k == 0)[:, None]
            ox = np.where(k0, la + lb, la)
            oy = np.where(k0, lb, la + lb)
        X = self.p * i[:, None] + ox
        Y = self.p * j[:, None] + oy
        self.lattice_width = self.p * bg.nx + 1
        lattice = X + self.lattice_width * Y
        uniq, inv = np.unique(lattice, return_inverse=True)
        self.lattice_ids = uniq
        self.cell_nodes = inv.reshape(lattice.shape)
        gx = (uniq % self.lattice_width) / self.p
        gy = (uniq // self.lattice_width) / self.p
        self.node_coords = bg.to_physical(np.stack([gx, gy], axis=1))
        self.n_nodes = len(uniq)
        self.n_dofs = 2 * self.n_nodes
        self.cell_dofs = np.empty((len(k), 2 * self.n_local), dtype=int)
        self.cell_dofs[:, 0::2] = 2 * self.cell_nodes
        self.cell_dofs[:, 1::2] = 2 * self.cell_nodes + 1
        self._jac = {}
        for kk in range(bg.per_cell):
            J = bg.reference_jacobian(kk)
            self._jac[kk] = (J, np.linalg.inv(J), abs(np.linalg.det(J)))

    @property
    def h(self) -> float:
        return self.bg.h

    def jacobian(self, k: int):
        """(J, J^{-1}, |det J|) of the affine map for element type k."""
        return self._jac[int(k)]

    def element_type(self, e) -> int:
        return int(self.bg.element_ijk(e)[2])

    def to_reference(self, e, x) -> np.ndarray:
        _, Jinv, _ = self.jacobian(self.element_type(e))
        o = self.bg.element_origin(e)
        return (np.atleast_2d(x) - o) @ Jinv.T

    def to_element(self, e, xi) -> np.ndarray:
        J, _, _ = self.jacobian(self.element_type(e))
        return self.bg.element_origin(e) + np.atleast_2d(xi) @ J.T

    def physical_gradients(self, k: int, xi) -> np.ndarray:
        """Physical gradients (npts, n_local, 2) at reference points of an element of type k."""
        _, Jinv, _ = self.jacobian(k)
        return shape_eval(self.family, self.p, xi, 1) @ Jinv

    def interpolate(self, func) -> np.ndarray:
        """Nodal interpolant of a vector field func(x, y) -> (fx, fy)."""
        vals = func(self.node_coords[:, 0], self.node_coords[:, 1])
        u = np.empty(self.n_dofs)
        u[0::2] = np.broadcast_to(np.asarray(vals[0], dtype=float), (self.n_nodes,))
        u[1::2] = np.broadcast_to(np.asarray(vals[1], dtype=float), (self.n_nodes,))
        return u

    def evaluate(self, u, points, grad: bool = False):
        """Field values (npts, 2) at physical points; NaN outside the active mesh.

        With ``grad`` also returns the gradient (npts, 2, 2), g[q, a, b] = ∂_b u_a.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        e = self.bg.locate(points)
        loc = np.full(len(points), -1)
        ok = e >= 0
        loc[ok] = self.mesh.local_index[e[ok]]
        vals = np.full((len(points), 2), np.nan)
        grads = np.full((len(points), 2, 2), np.nan)
        for li in np.unique(loc[loc >= 0]):
            sel = loc == li
            ee = self.mesh.elements[li]
            xi = self.to_reference(ee, points[sel])
            phi = shape_eval(self.family, self.p, xi, 0)
            ue = u[self.cell_dofs[li]].reshape(-1, 2)
            vals[sel] = phi @ ue
            if grad:
                dphi = self.physical_gradients(self.element_type(ee), xi)
                grads[sel] = np.einsum("qnb,na->qab", dphi, ue)
        return (vals, grads) if grad else vals

    def face_jump(self, f: int, l: int, s):
        """Jumps [D^l_n φ] across face f at parameters s in [0,1] along the face.

        Returns (scalar node ids, values (len(s), n)); the jump is the derivative
        from the second element minus that from the first, along the face normal
        pointing from the first to the second element.
        """
        e1, e2 = self.mesh.face_elements[f]
        a, b, n = self.mesh.face_geometry(f)
        s = np.atleast_1d(np.asarray(s, dtype=float))
        x = a[None, :] + s[:, None] * (b - a)[None, :]
        li1, li2 = self.mesh.local_index[e1], self.mesh.local_index[e2]
        d1 = self._dir_deriv(e1, x, n, l)
        d2 = self._dir_deriv(e2, x, n, l)
        nodes = np.concatenate([self.cell_nodes[li1], self.cell_nodes[li2]])
        vals = np.concatenate([-d1, d2], axis=1)
        uniq, inv = np.unique(nodes, return_inverse=True)
        out = np.zeros((len(s), len(uniq)))
        np.add.at(out.T, inv, vals.T)
        return uniq, out

    def _dir_deriv(self, e, x, n, l):
        k = self.element_type(e)
        _, Jinv, _ = self.jacobian(k)
        xi = self.to_reference(e, x)
        return directional_derivative(self.family, self.p, xi, Jinv @ n, l)


def face_normal_derivative_jump(space: FESpace, f: int, l: int, s):
    """Per-node jump values [D^l_n φ] on face f at face parameters s."""
    if f < 0 or f >= len(space.mesh.face_elements):
        raise ValueError(f"face {f} is not an interior face of the active mesh")
    if not 1 <= l:
        raise ValueError("jump order must be at least 1")
    return space.face_jump(f, l, s)
