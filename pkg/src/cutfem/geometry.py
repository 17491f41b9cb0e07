"""Piecewise-linear boundary representations and cell clipping.

A domain is a set of closed polylines.  The outer loop runs counter-clockwise
and holes run clockwise, so the domain is always on the left of an edge and
the outward normal of edge ``a -> b`` is ``(dy, -dx) / |b - a|``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class GeometryError(ValueError):
    """Invalid or unsupported geometry."""


class Tag(enum.IntEnum):
    CELL = 0
    DIRICHLET = 1
    NEUMANN = 2
    INTERFACE = 3


class Location(enum.IntEnum):
    OUTSIDE = 0
    INSIDE = 1
    ON_BOUNDARY = 2


_TAG_NAMES = {
    "D": Tag.DIRICHLET, "DIRICHLET": Tag.DIRICHLET,
    "N": Tag.NEUMANN, "NEUMANN": Tag.NEUMANN,
    "I": Tag.INTERFACE, "INTERFACE": Tag.INTERFACE,
}

REL_TOL = 1e-12


def signed_area(vertices: np.ndarray) -> float:
    """Shoelace area of an implicitly closed polygon."""
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _segments_cross(a, b, c, d, eps):
    """Proper or touching intersection of segments a-b and c-d (vectorized over c, d)."""
    def orient(p, q, r):
        return (q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1]) - (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0])

    o1 = orient(a, b, c)
    o2 = orient(a, b, d)
    o3 = orient(c, d, a)
    o4 = orient(c, d, b)
    return (o1 * o2 < -eps) & (o3 * o4 < -eps)


@dataclass(frozen=True)
class BoundaryRep:
    """Closed polylines bounding a 2D domain with per-edge boundary tags.

    ``tags[k][i]`` belongs to the edge from ``loops[k][i]`` to ``loops[k][i + 1]``
    (wrapping around).
    """

    loops: tuple
    tags: tuple
    edges: np.ndarray = field(init=False, repr=False)
    edge_tags: np.ndarray = field(init=False, repr=False)
    normals: np.ndarray = field(init=False, repr=False)

    def __init__(self, loops: Sequence, tags: Sequence | None = None):
        loops = tuple(np.array(lp, dtype=float).reshape(-1, 2) for lp in loops)
        if tags is None:
            tags = [np.full(len(lp), Tag.NEUMANN) for lp in loops]
        tags = tuple(np.array([_as_tag(t) for t in tg], dtype=int) for tg in tags)
        object.__setattr__(self, "loops", loops)
        object.__setattr__(self, "tags", tags)
        self._validate()
        a = np.concatenate(loops)
        b = np.concatenate([np.roll(lp, -1, axis=0) for lp in loops])
        d = b - a
        length = np.hypot(d[:, 0], d[:, 1])
        object.__setattr__(self, "edges", np.stack([a, b], axis=1))
        object.__setattr__(self, "edge_tags", np.concatenate(tags))
        object.__setattr__(self, "normals", np.stack([d[:, 1], -d[:, 0]], axis=1) / length[:, None])

    def _validate(self):
        if not self.loops:
            raise GeometryError("no boundary loops")
        allv = np.concatenate(self.loops)
        if not np.all(np.isfinite(allv)):
            raise GeometryError("non-finite boundary vertex")
        diam = float(np.hypot(*(allv.max(0) - allv.min(0))))
        eps = REL_TOL * max(diam, 1e-300)
        for k, (lp, tg) in enumerate(zip(self.loops, self.tags)):
            if len(lp) < 3:
                raise GeometryError(f"loop {k} has fewer than 3 vertices")
            if len(tg) != len(lp):
                raise GeometryError(f"loop {k}: {len(tg)} tags for {len(lp)} edges")
            seg = np.roll(lp, -1, axis=0) - lp
            if np.any(np.hypot(seg[:, 0], seg[:, 1]) <= eps):
                raise GeometryError(f"loop {k} has a zero-length edge")
            if np.any((tg != Tag.DIRICHLET) & (tg != Tag.NEUMANN) & (tg != Tag.INTERFACE)):
                raise GeometryError(f"loop {k} has an invalid edge tag")
            n = len(lp)
            if n <= 400:
                a, b = lp, np.roll(lp, -1, axis=0)
                for i in range(n):
                    hit = _segments_cross(a[i], b[i], a, b, eps * eps)
                    if np.any(hit):
                        raise GeometryError(f"loop {k} self-intersects at edge {i}")
        if self.area <= 0.0:
            raise GeometryError("total signed area must be positive (outer loops CCW, holes CW)")

    @property
    def area(self) -> float:
        return sum(signed_area(lp) for lp in self.loops)

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        v = np.concatenate(self.loops)
        return (*v.min(0), *v.max(0))

    @property
    def diameter(self) -> float:
        x0, y0, x1, y1 = self.bbox
        return math.hypot(x1 - x0, y1 - y0)

    @property
    def eps(self) -> float:
        return REL_TOL * self.diameter

    @property
    def vertices(self) -> np.ndarray:
        return np.concatenate(self.loops)

    def loop_areas(self) -> list[float]:
        return [signed_area(lp) for lp in self.loops]

    def edges_with_tag(self, tag: Tag) -> np.ndarray:
        return self.edges[self.edge_tags == tag]


def _as_tag(t) -> Tag:
    if isinstance(t, str):
        try:
            return _TAG_NAMES[t.upper()]
        except KeyError:
            raise GeometryError(f"unknown boundary tag {t!r}") from None
    return Tag(int(t))


def point_in_domain(rep: BoundaryRep, p) -> np.ndarray | Location:
    """Classify points as INSIDE, OUTSIDE or ON_BOUNDARY by winding number.

    Accepts a single point or an ``(n, 2)`` array; returns a Location or an
    integer array of Location values.
    """
    pts = np.asarray(p, dtype=float)
    single = pts.ndim == 1
    pts = pts.reshape(-1, 2)
    a = rep.edges[:, 0]
    b = rep.edges[:, 1]
    px = pts[:, 0:1]
    py = pts[:, 1:2]
    ax, ay, bx, by = a[:, 0], a[:, 1], b[:, 0], b[:, 1]
    is_left = (bx - ax) * (py - ay) - (px - ax) * (by - ay)
    up = (ay <= py) & (by > py) & (is_left > 0)
    down = (ay > py) & (by <= py) & (is_left < 0)
    winding = up.sum(1) - down.sum(1)

    d = b - a
    t = ((px - ax) * d[:, 0] + (py - ay) * d[:, 1]) / (d[:, 0] ** 2 + d[:, 1] ** 2)
    t = np.clip(t, 0.0, 1.0)
    dist = np.hypot(ax + t * d[:, 0] - px, ay + t * d[:, 1] - py).min(1)

    out = np.where(winding != 0, Location.INSIDE, Location.OUTSIDE).astype(int)
    out[dist <= rep.eps] = Location.ON_BOUNDARY
    if single:
        return Location(int(out[0]))
    return out


@dataclass
class CutRegion:
    """Loops describing K ∩ Ω with CELL/DIRICHLET/NEUMANN/INTERFACE segment tags.

    Loops from hole boundaries may be clockwise; the region is the signed sum
    of all loops, so integrals over it are sums of loop contributions.
    """

    loops: list
    tags: list
    cell: np.ndarray

    @property
    def area(self) -> float:
        return sum(signed_area(lp) for lp in self.loops)

    @property
    def is_empty(self) -> bool:
        return not self.loops

    def segments(self, tags: Iterable[Tag] | None = None):
        """Return ``(a, b, tag)`` arrays of all segments, optionally filtered by tag."""
        if not self.loops:
            z = np.zeros((0, 2))
            return z, z, np.zeros(0, dtype=int)
        a = np.concatenate(self.loops)
        b = np.concatenate([np.roll(lp, -1, axis=0) for lp in self.loops])
        t = np.concatenate(self.tags)
        if tags is not None:
            keep = np.isin(t, [int(x) for x in tags])
            a, b, t = a[keep], b[keep], t[keep]
        return a, b, t

    def domain_segments(self):
        return self.segments((Tag.DIRICHLET, Tag.NEUMANN, Tag.INTERFACE))


def _clip_halfplane(verts, tags, a, b, eps):
    """One Sutherland-Hodgman pass keeping the left side of the line a -> b.

    Each output vertex carries the tag of the edge that starts at it; new
    edges running along the clip line are tagged CELL.
    """
    d = b - a
    length = math.hypot(d[0], d[1])
    nx, ny = -d[1] / length, d[0] / length
    out_v, out_t = [], []
    n = len(verts)
    dist = [(v[0] - a[0]) * nx + (v[1] - a[1]) * ny for v in verts]
    for i in range(n):
        j = (i + 1) % n
        P, Q = verts[i], verts[j]
        dp, dq = dist[i], dist[j]
        pin, qin = dp >= -eps, dq >= -eps
        if pin:
            out_v.append(P)
            out_t.append(tags[i])
            if not qin:
                s = dp / (dp - dq)
                out_v.append((P[0] + s * (Q[0] - P[0]), P[1] + s * (Q[1] - P[1])))
                out_t.append(Tag.CELL)
        elif qin:
            s = dp / (dp - dq)
            out_v.append((P[0] + s * (Q[0] - P[0]), P[1] + s * (Q[1] - P[1])))
            out_t.append(tags[i])
    return out_v, out_t


def _drop_duplicates(verts, tags, eps):
    changed = True
    while changed and len(verts) >= 2:
        changed = False
        keep_v, keep_t = [], []
        n = len(verts)
        for i in range(n):
            q = verts[(i + 1) % n]
            p = verts[i]
            if abs(p[0] - q[0]) <= eps and abs(p[1] - q[1]) <= eps:
                changed = True
                continue
            keep_v.append(p)
            keep_t.append(tags[i])
        verts, tags = keep_v, keep_t
    return verts, tags


def clip_cell(rep: BoundaryRep, cell) -> CutRegion:
    """Intersect a convex, counter-clockwise cell polygon with the domain.

    Returns an empty region when the intersection has (numerically) zero area.
    Domain segments lying on the cell boundary are only kept by the cell that
    contains the domain side of that segment.
    """
    cell = np.asarray(cell, dtype=float)
    if signed_area(cell) <= 0:
        raise GeometryError("cell must be positively oriented")
    cell_area = signed_area(cell)
    eps = rep.eps
    loops, tags = [], []
    for lp, tg in zip(rep.loops, rep.tags):
        v = [tuple(x) for x in lp]
        t = [Tag(int(x)) for x in tg]
        for k in range(len(cell)):
            if not v:
                break
            v, t = _clip_halfplane(v, t, cell[k], cell[(k + 1) % len(cell)], eps)
        v, t = _drop_duplicates(v, t, eps)
        if len(v) < 3:
            continue
        arr = np.array(v)
        if abs(signed_area(arr)) <= REL_TOL**2 * cell_area:
            continue
        loops.append(arr)
        tags.append(np.array(t, dtype=int))

    if not loops or sum(signed_area(lp) for lp in loops) <= REL_TOL**2 * cell_area:
        return CutRegion([], [], cell)

    # keep a domain segment only if the domain side is inside this cell
    size = math.sqrt(cell_area)
    centre = cell.mean(0)
    for lp, tg in zip(loops, tags):
        nxt = np.roll(lp, -1, axis=0)
        for i in np.nonzero(tg != Tag.CELL)[0]:
            d = nxt[i] - lp[i]
            mid = 0.5 * (nxt[i] + lp[i])
            probe = mid + 1e-7 * size * np.array([-d[1], d[0]]) / math.hypot(*d)
            probe = probe + 1e-12 * (centre - probe)
            if not _inside_convex(cell, probe, 0.0):
                tg[i] = Tag.CELL
    return CutRegion(loops, tags, cell)


def _inside_convex(cell, p, eps):
    a = cell
    b = np.roll(cell, -1, axis=0)
    cross = (b[:, 0] - a[:, 0]) * (p[1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (p[0] - a[:, 0])
    return bool(np.all(cross >= -eps))


def segments_touch_cells(seg_a, seg_b, cells, eps):
    """Boolean matrix ``(ncells, nsegs)``: does a segment meet a closed convex cell.

    Separating-axis test over the cell edge normals and the segment normal.
    """
    cells = np.asarray(cells, dtype=float)
    if len(seg_a) == 0:
        return np.zeros((len(cells), 0), dtype=bool)
    nc, nv, _ = cells.shape
    sa = seg_a[None, :, :]
    sb = seg_b[None, :, :]
    touch = np.ones((nc, len(seg_a)), dtype=bool)
    for k in range(nv):
        p = cells[:, k, :][:, None, :]
        e = cells[:, (k + 1) % nv, :][:, None, :] - p
        elen = np.hypot(e[..., 0], e[..., 1])
        # positive = outside the CCW cell edge
        da = (sa[..., 0] - p[..., 0]) * e[..., 1] - (sa[..., 1] - p[..., 1]) * e[..., 0]
        db = (sb[..., 0] - p[..., 0]) * e[..., 1] - (sb[..., 1] - p[..., 1]) * e[..., 0]
        touch &= ~((da > eps * elen) & (db > eps * elen))
    d = seg_b - seg_a
    nlen = np.hypot(d[:, 0], d[:, 1])
    proj = (cells[:, :, None, 0] - seg_a[None, None, :, 0]) * -d[None, None, :, 1] + (
        cells[:, :, None, 1] - seg_a[None, None, :, 1]
    ) * d[None, None, :, 0]
    tol = eps * nlen[None, None, :]
    touch &= ~(np.all(proj > tol, axis=1) | np.all(proj < -tol, axis=1))
    return touch


# --------------------------------------------------------------------------
# constructors

def _circle(center, r, n, start=0.0, stop=2 * math.pi, endpoint=False):
    th = np.linspace(start, stop, n + (1 if endpoint else 0), endpoint=endpoint)
    pts = np.stack([center[0] + r * np.cos(th), center[1] + r * np.sin(th)], axis=1)
    return pts


def _side_tags(sides, dirichlet, n_edges_per_side):
    tags = []
    for side, n in zip(sides, n_edges_per_side):
        tags += [Tag.DIRICHLET if side in dirichlet else Tag.NEUMANN] * n
    return tags


def _check_positive(**kw):
    for k, v in kw.items():
        if not (isinstance(v, (int, float)) and v > 0):
            raise GeometryError(f"{k} must be positive, got {v!r}")


def _check_segments(n):
    if int(n) < 8:
        raise GeometryError(f"circle segment count must be >= 8, got {n}")
    return int(n)


def rectangle(x0=0.0, y0=0.0, width=1.0, height=1.0, dirichlet=("bottom",)):
    _check_positive(width=width, height=height)
    v = [(x0, y0), (x0 + width, y0), (x0 + width, y0 + height), (x0, y0 + height)]
    tags = _side_tags(["bottom", "right", "top", "left"], set(dirichlet), [1, 1, 1, 1])
    return BoundaryRep([v], [tags])


def ring(r_in=0.8, r_out=1.0, center=(0.0, 0.0), segments=50, dirichlet=()):
    _check_positive(r_in=r_in, r_out=r_out)
    n = _check_segments(segments)
    if r_in >= r_out:
        raise GeometryError("r_in must be smaller than r_out")
    outer = _circle(center, r_out, n)
    inner = _circle(center, r_in, n)[::-1]
    to = Tag.DIRICHLET if "outer" in dirichlet else Tag.NEUMANN
    ti = Tag.DIRICHLET if "inner" in dirichlet else Tag.NEUMANN
    return BoundaryRep([outer, inner], [[to] * n, [ti] * n])


def _lshape_arms(size, inner):
    _check_positive(size=size, inner=inner)
    if inner >= size:
        raise GeometryError("inner must be smaller than size")


def rounded_lshape(size=2.0, inner=1.0, radius=0.2, segments=5, dirichlet=("left",)):
    """L-shape [0,size]^2 minus the upper-right square, reentrant corner filleted."""
    _lshape_arms(size, inner)
    _check_positive(radius=radius)
    n = int(segments)
    if n < 1 or radius >= size - inner:
        raise GeometryError("invalid fillet")
    c = (inner + radius, inner + radius)
    arc = _circle(c, radius, n, start=-0.5 * math.pi, stop=-math.pi, endpoint=True)
    v = [(0.0, 0.0), (size, 0.0), (size, inner)] + [tuple(p) for p in arc] + [(inner, size), (0.0, size)]
    sides = ["bottom", "right", "inner"] + ["fillet"] * n + ["inner", "top", "left"]
    tags = _side_tags(sides, set(dirichlet), [1] * len(sides))
    return BoundaryRep([v], [tags])


def drilled_lshape(size=2.0, inner=1.0, radius=0.2, segments=48, dirichlet=("left",)):
    """L-shape with a circular hole drilled at the reentrant corner."""
    _lshape_arms(size, inner)
    _check_positive(radius=radius)
    n = _check_segments(segments)
    if radius >= min(inner, size - inner):
        raise GeometryError("drill radius too large")
    c = (inner, inner)
    arc = _circle(c, radius, n, start=0.0, stop=-1.5 * math.pi, endpoint=True)
    v = [(0.0, 0.0), (size, 0.0), (size, inner)] + [tuple(p) for p in arc] + [(inner, size), (0.0, size)]
    sides = ["bottom", "right", "inner"] + ["drill"] * n + ["inner", "top", "left"]
    tags = _side_tags(sides, set(dirichlet), [1] * len(sides))
    return BoundaryRep([v], [tags])


def beam_with_holes(length=2.0, height=0.4, holes=None, n_holes=3, hole_radius=0.08,
                    segments=32, dirichlet=("left",)):
    """Rectangular beam with circular holes.

    Default hole centres are spread evenly along the beam and alternate above
    and below the centreline so that no mode is orthogonal to a vertical load.
    """
    _check_positive(length=length, height=height)
    n = _check_segments(segments)
    if holes is None:
        _check_positive(hole_radius=hole_radius)
        holes = []
        for i in range(int(n_holes)):
            cx = length * (i + 1) / (n_holes + 1)
            cy = height * (0.5 + (0.12 if i % 2 == 0 else -0.12))
            holes.append((cx, cy, hole_radius))
    base = rectangle(0.0, 0.0, length, height, dirichlet)
    loops = [base.loops[0]]
    tags = [base.tags[0]]
    for cx, cy, r in holes:
        _check_positive(hole_radius=r)
        if cx - r <= 0 or cx + r >= length or cy - r <= 0 or cy + r >= height:
            raise GeometryError(f"hole at ({cx}, {cy}) r={r} leaves the beam")
        loops.append(_circle((cx, cy), r, n)[::-1])
        tags.append([Tag.NEUMANN] * n)
    return BoundaryRep(loops, tags)


GEOMETRIES = {
    "rectangle": rectangle,
    "ring": ring,
    "rounded_lshape": rounded_lshape,
    "drilled_lshape": drilled_lshape,
    "beam_with_holes": beam_with_holes,
}


def make_geometry(kind: str, **params) -> BoundaryRep:
    try:
        ctor = GEOMETRIES[kind]
    except KeyError:
        raise GeometryError(f"unknown geometry kind {kind!r}; choose from {sorted(GEOMETRIES)}") from None
    try:
        return ctor(**params)
    except TypeError as exc:
        raise GeometryError(f"bad parameters for {kind}: {exc}") from None


def rep_from_config(cfg: dict) -> BoundaryRep:
    """Build a BoundaryRep from ``{"kind": ..., "params": {...}}`` or ``{"loops": ..., "tags": ...}``."""
    if "kind" in cfg:
        return make_geometry(cfg["kind"], **cfg.get("params", {}))
    if "loops" in cfg:
        return BoundaryRep(cfg["loops"], cfg.get("tags"))
    raise GeometryError("geometry config needs 'kind' or 'loops'")
