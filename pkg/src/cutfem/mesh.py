"""Structured background grids, active meshes and stabilized face sets.

Grid cells are squares of side ``h`` in a frame rotated by ``theta``.  The
lattice point ``(i, j)`` sits at ``origin + h * R(theta) @ (i, j)``.  The
triangle family splits every square along its (0,0)-(1,1) diagonal:
``k = 0`` is the lower-right triangle and ``k = 1`` the upper-left one.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import BoundaryRep, CutRegion, GeometryError, Location, Tag, clip_cell, point_in_domain, segments_touch_cells


class CoverageError(GeometryError):
    """The background grid does not cover the geometry."""


class Family(str, enum.Enum):
    QUAD = "quad"
    TRI = "tri"


# corner offsets (grid units) of the reference shapes
_QUAD_CORNERS = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
_TRI_CORNERS = (
    np.array([[0, 0], [1, 0], [1, 1]], dtype=float),
    np.array([[0, 0], [1, 1], [0, 1]], dtype=float),
)
# maps reference-triangle coordinates into the unit square: s = B @ xi
_TRI_B = (np.array([[1.0, 1.0], [0.0, 1.0]]), np.array([[1.0, 0.0], [1.0, 1.0]]))


def rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class BackgroundMesh:
    family: Family
    nx: int
    ny: int
    h: float
    theta: float = 0.0
    origin: tuple = (0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if not self.h > 0:
            raise ValueError("mesh size h must be positive")
        if self.nx < 1 or self.ny < 1:
            raise ValueError("grid needs at least one cell in each direction")

    @property
    def R(self) -> np.ndarray:
        return rotation(self.theta)

    @property
    def per_cell(self) -> int:
        return 1 if self.family is Family.QUAD else 2

    @property
    def n_elements(self) -> int:
        return self.nx * self.ny * self.per_cell

    def to_physical(self, g):
        """Grid coordinates (in cell units) to physical coordinates."""
        g = np.asarray(g, dtype=float)
        return np.asarray(self.origin) + self.h * g @ self.R.T

    def to_grid(self, x):
        x = np.asarray(x, dtype=float)
        return (x - np.asarray(self.origin)) @ self.R / self.h

    def element_ijk(self, e):
        e = np.asarray(e)
        k = e % self.per_cell
        c = e // self.per_cell
        return c % self.nx, c // self.nx, k

    def element_id(self, i, j, k=0):
        return (np.asarray(i) + self.nx * np.asarray(j)) * self.per_cell + np.asarray(k)

    def reference_jacobian(self, k: int = 0) -> np.ndarray:
        """Jacobian of the affine map from the reference shape of type ``k``."""
        J = self.h * self.R
        if self.family is Family.TRI:
            J = J @ _TRI_B[k]
        return J

    def element_origin(self, e) -> np.ndarray:
        i, j, _ = self.element_ijk(e)
        return self.to_physical(np.stack([i, j], axis=-1).astype(float))

    def element_polygons(self, elements=None) -> np.ndarray:
        if elements is None:
            elements = np.arange(self.n_elements)
        i, j, k = self.element_ijk(np.asarray(elements))
        base = np.stack([i, j], axis=-1).astype(float)[:, None, :]
        if self.family is Family.QUAD:
            g = base + _QUAD_CORNERS[None]
        else:
            g = base + np.where(k[:, None, None] == 0, _TRI_CORNERS[0][None], _TRI_CORNERS[1][None])
        return self.to_physical(g)

    def element_area(self) -> float:
        return self.h**2 / self.per_cell

    def locate(self, x, tol: float = 1e-12) -> np.ndarray:
        """Element id containing each point, or -1 outside the grid."""
        g = self.to_grid(np.atleast_2d(x))
        i = np.floor(g[:, 0]).astype(int)
        j = np.floor(g[:, 1]).astype(int)
        i = np.where((i == self.nx) & (g[:, 0] <= self.nx + tol), self.nx - 1, i)
        j = np.where((j == self.ny) & (g[:, 1] <= self.ny + tol), self.ny - 1, j)
        i = np.where((i == -1) & (g[:, 0] >= -tol), 0, i)
        j = np.where((j == -1) & (g[:, 1] >= -tol), 0, j)
        ok = (i >= 0) & (i < self.nx) & (j >= 0) & (j < self.ny)
        k = np.zeros_like(i)
        if self.family is Family.TRI:
            fx = g[:, 0] - i
            fy = g[:, 1] - j
            k = (fy > fx).astype(int)
        return np.where(ok, self.element_id(i, j, k), -1)

    def covers(self, points, tol: float = 1e-9) -> bool:
        g = self.to_grid(points)
        return bool(np.all((g.min(axis=1) >= -tol) & (g[:, 0] <= self.nx + tol) & (g[:, 1] <= self.ny + tol)))


def build_background(family, box, h: float, theta: float = 0.0, offset=(0.0, 0.0), pad: int = 0) -> BackgroundMesh:
    """Smallest grid of the lattice through ``offset`` covering the physical box.

    ``box`` is ``(x0, y0, x1, y1)``.  ``pad`` adds extra cell layers.
    """
    if not h > 0:
        raise ValueError("mesh size h must be positive")
    x0, y0, x1, y1 = box
    corners = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float)
    g = (corners - np.asarray(offset, dtype=float)) @ rotation(theta) / h
    tol = 1e-9
    lo = np.floor(g.min(0) + tol).astype(int) - pad
    hi = np.ceil(g.max(0) - tol).astype(int) + pad
    hi = np.maximum(hi, lo + 1)
    origin = np.asarray(offset, dtype=float) + h * rotation(theta) @ lo.astype(float)
    return BackgroundMesh(Family(family), int(hi[0] - lo[0]), int(hi[1] - lo[1]), float(h), float(theta), tuple(origin))


def background_for(rep: BoundaryRep, family, h: float, theta: float = 0.0, offset=(0.0, 0.0)) -> BackgroundMesh:
    return build_background(family, rep.bbox, h, theta, offset)


def make_sliver_background(rep: BoundaryRep, h: float, delta: float, family=Family.QUAD) -> BackgroundMesh:
    """Axis-aligned grid whose boundary rows have only ``delta`` of their width inside Ω.

    The cell size is adjusted from ``h`` so that the pattern is exact on both
    sides in x; in y the sliver fraction is recomputed for the same cell size.
    """
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    if len(rep.loops) != 1 or len(rep.loops[0]) != 4:
        raise GeometryError("sliver meshes need an axis-aligned rectangle")
    v = rep.loops[0]
    x0, y0, x1, y1 = rep.bbox
    on_box = np.isclose(v[:, 0], x0) | np.isclose(v[:, 0], x1)
    on_box &= np.isclose(v[:, 1], y0) | np.isclose(v[:, 1], y1)
    if not np.all(on_box):
        raise GeometryError("sliver meshes need an axis-aligned rectangle")
    Lx, Ly = x1 - x0, y1 - y0
    nx = max(int(round(Lx / h - 2 * delta)), 0)
    hh = Lx / (nx + 2 * delta)
    ny = max(int(math.floor(Ly / hh - 2 * delta + 1e-9)), 0)
    dy = 0.5 * (Ly / hh - ny)
    origin = (x0 + delta * hh - hh, y0 + dy * hh - hh)
    return BackgroundMesh(Family(family), nx + 2, ny + 2, hh, 0.0, origin)


@dataclass
class ActiveMesh:
    """Elements intersecting Ω with their classification and stabilized faces.

    ``regions`` holds the clipped region of every active element that meets
    the boundary (cut or not); other active elements are full cells.
    """

    bg: BackgroundMesh
    rep: BoundaryRep
    elements: np.ndarray
    is_cut: np.ndarray
    regions: dict
    touches_boundary: np.ndarray
    touches_dirichlet: np.ndarray
    face_elements: np.ndarray
    face_kind: np.ndarray
    face_stab: np.ndarray
    face_stab_dirichlet: np.ndarray
    local_index: np.ndarray = field(repr=False)

    @property
    def n_active(self) -> int:
        return len(self.elements)

    @property
    def faces_boundary(self) -> np.ndarray:
        """Indices of faces in F_h(∂Ω)."""
        return np.nonzero(self.face_stab)[0]

    @property
    def faces_dirichlet(self) -> np.ndarray:
        return np.nonzero(self.face_stab_dirichlet)[0]

    @property
    def faces_neumann(self) -> np.ndarray:
        return np.nonzero(self.face_stab & ~self.face_stab_dirichlet)[0]

    def region(self, e) -> CutRegion | None:
        return self.regions.get(int(e))

    def face_geometry(self, f):
        """Endpoints (physical) and unit normal pointing from the first to the second element."""
        e1 = self.face_elements[f, 0]
        i, j, _ = self.bg.element_ijk(e1)
        kind = self.face_kind[f]
        g0, g1, n = _FACE_GEOM[(self.bg.family, int(kind))]
        base = np.array([i, j], dtype=float)
        a = self.bg.to_physical(base + g0)
        b = self.bg.to_physical(base + g1)
        return a, b, self.bg.R @ n

    def cut_area(self, e) -> float:
        r = self.regions.get(int(e))
        if r is None:
            return self.bg.element_area()
        return r.area


# face kinds: (start, end) in grid units relative to the first element's cell, normal (grid frame)
_S2 = 1.0 / math.sqrt(2.0)
_FACE_GEOM = {
    (Family.QUAD, 0): (np.array([1.0, 0.0]), np.array([1.0, 1.0]), np.array([1.0, 0.0])),
    (Family.QUAD, 1): (np.array([0.0, 1.0]), np.array([1.0, 1.0]), np.array([0.0, 1.0])),
    (Family.TRI, 0): (np.array([1.0, 0.0]), np.array([1.0, 1.0]), np.array([1.0, 0.0])),
    (Family.TRI, 1): (np.array([0.0, 1.0]), np.array([1.0, 1.0]), np.array([0.0, 1.0])),
    (Family.TRI, 2): (np.array([0.0, 0.0]), np.array([1.0, 1.0]), np.array([-_S2, _S2])),
}


def _all_faces(bg: BackgroundMesh):
    """Interior faces of the full background grid as (e1, e2, kind)."""
    ii, jj = np.meshgrid(np.arange(bg.nx), np.arange(bg.ny), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    out = []
    mx = ii < bg.nx - 1
    my = jj < bg.ny - 1
    if bg.family is Family.QUAD:
        out.append((bg.element_id(ii[mx], jj[mx]), bg.element_id(ii[mx] + 1, jj[mx]), 0))
        out.append((bg.element_id(ii[my], jj[my]), bg.element_id(ii[my], jj[my] + 1), 1))
    else:
        out.append((bg.element_id(ii[mx], jj[mx], 0), bg.element_id(ii[mx] + 1, jj[mx], 1), 0))
        out.append((bg.element_id(ii[my], jj[my], 1), bg.element_id(ii[my], jj[my] + 1, 0), 1))
        out.append((bg.element_id(ii, jj, 0), bg.element_id(ii, jj, 1), 2))
    e1 = np.concatenate([o[0] for o in out])
    e2 = np.concatenate([o[1] for o in out])
    kind = np.concatenate([np.full(len(o[0]), o[2]) for o in out])
    return np.stack([e1, e2], axis=1), kind


def build_active_mesh(bg: BackgroundMesh, rep: BoundaryRep) -> ActiveMesh:
    if not bg.covers(rep.vertices):
        raise CoverageError("background grid does not cover the domain")
    polys = bg.element_polygons()
    eps = rep.eps
    area_k = bg.element_area()

    touch = segments_touch_cells(rep.edges[:, 0], rep.edges[:, 1], polys, eps)
    near = touch.any(axis=1)
    is_d = rep.edge_tags == Tag.DIRICHLET
    touch_d = touch[:, is_d].any(axis=1) if is_d.any() else np.zeros(len(polys), dtype=bool)

    far = np.nonzero(~near)[0]
    loc = point_in_domain(rep, polys[far].mean(axis=1))
    active = np.zeros(bg.n_elements, dtype=bool)
    active[far] = loc == Location.INSIDE
    cut = np.zeros(bg.n_elements, dtype=bool)
    regions = {}
    for e in np.nonzero(near)[0]:
        r = clip_cell(rep, polys[e])
        if r.is_empty:
            continue
        active[e] = True
        regions[int(e)] = r
        cut[e] = abs(r.area - area_k) > 1e-12 * area_k

    elements = np.nonzero(active)[0]
    local = np.full(bg.n_elements, -1)
    local[elements] = np.arange(len(elements))

    fe, kind = _all_faces(bg)
    both = active[fe[:, 0]] & active[fe[:, 1]]
    fe, kind = fe[both], kind[both]
    near_b = near & active
    stab = near_b[fe[:, 0]] | near_b[fe[:, 1]]
    td = touch_d & active
    stab_d = td[fe[:, 0]] | td[fe[:, 1]]

    return ActiveMesh(
        bg=bg,
        rep=rep,
        elements=elements,
        is_cut=cut[elements],
        regions=regions,
        touches_boundary=near[elements],
        touches_dirichlet=touch_d[elements],
        face_elements=fe,
        face_kind=kind,
        face_stab=stab,
        face_stab_dirichlet=stab_d,
        local_index=local,
    )


def split_segment(bg: BackgroundMesh, a, b, tol: float = 1e-12):
    """Break the segment a-b at grid lines.

    Returns ``(params, elements)`` with ``params`` the sorted break parameters
    in [0, 1] (including both ends) and ``elements[k]`` the element containing
    the piece ``params[k]..params[k+1]``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ga, gb = bg.to_grid(a), bg.to_grid(b)
    d = gb - ga
    ts = [0.0, 1.0]
    for c in range(2):
        if abs(d[c]) > tol:
            lo, hi = sorted((ga[c], gb[c]))
            for m in range(int(math.ceil(lo - tol)), int(math.floor(hi + tol)) + 1):
                ts.append((m - ga[c]) / d[c])
    if bg.family is Family.TRI:
        dd = d[0] - d[1]
        if abs(dd) > tol:
            sa, sb = ga[0] - ga[1], gb[0] - gb[1]
            lo, hi = sorted((sa, sb))
            for m in range(int(math.ceil(lo - tol)), int(math.floor(hi + tol)) + 1):
                ts.append((m - sa) / dd)
    ts = np.unique(np.clip(ts, 0.0, 1.0))
    keep = np.concatenate([[True], np.diff(ts) > tol])
    ts = ts[keep]
    if ts[-1] < 1.0:
        ts[-1] = 1.0
    mids = a + np.outer(0.5 * (ts[:-1] + ts[1:]), b - a)
    return ts, bg.locate(mids)


def write_face_sets_csv(path, am: ActiveMesh):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["face", "element1", "element2", "kind", "boundary", "dirichlet"])
        for f in range(len(am.face_kind)):
            w.writerow([f, int(am.face_elements[f, 0]), int(am.face_elements[f, 1]), int(am.face_kind[f]),
                        int(am.face_stab[f]), int(am.face_stab_dirichlet[f])])
