"""Quadrature on cut regions, boundary segments and reference shapes.

Cut regions are integrated by turning the area integral into a boundary
integral with an antiderivative in x, then evaluating both the boundary
integral and the antiderivative with Gauss rules.  Weights may be negative.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .geometry import CutRegion, GeometryError

TENSOR = "tensor"
TOTAL = "total"


@dataclass
class QuadRule:
    points: np.ndarray
    weights: np.ndarray
    normals: np.ndarray | None = None
    skipped: int = 0

    def __len__(self):
        return len(self.weights)

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, f(self.points[:, 0], self.points[:, 1])))


@lru_cache(maxsize=None)
def _leggauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def gauss_1d(n: int):
    """Gauss-Legendre nodes and weights on [-1, 1], exact to degree 2n-1."""
    if not 1 <= int(n) <= 20:
        raise ValueError(f"Gauss rule size must be in 1..20, got {n}")
    return _leggauss(int(n))


def gauss_01(n: int):
    x, w = gauss_1d(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _npts(degree: int) -> int:
    return max(1, (degree + 2) // 2)


def _loops_of(region):
    if isinstance(region, CutRegion):
        return region.loops
    return [np.asarray(lp, dtype=float) for lp in region]


def cut_cell_rule(region, q: int, mode: str = TENSOR) -> QuadRule:
    """Rule exact for monomials x^a y^b over a polygonal region.

    ``mode`` TENSOR covers a, b <= q; TOTAL covers a + b <= q.  ``region`` is
    a CutRegion or a list of closed vertex loops.
    """
    loops = _loops_of(region)
    if not loops:
        raise GeometryError("empty region")
    for lp in loops:
        if len(lp) < 3:
            raise GeometryError("open or degenerate loop")
    if mode == TENSOR:
        n_t, n_s = q + 1, _npts(q)
    elif mode == TOTAL:
        n_t, n_s = _npts(q + 1), _npts(q)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    a = np.concatenate(loops)
    b = np.concatenate([np.roll(lp, -1, axis=0) for lp in loops])
    x0 = float(a[:, 0].min())
    dy = b[:, 1] - a[:, 1]
    scale = max(float(np.ptp(a[:, 1])), float(np.ptp(a[:, 0])), 1e-300)
    keep = np.abs(dy) > 1e-15 * scale
    a, b, dy = a[keep], b[keep], dy[keep]
    t, wt = gauss_01(n_t)
    s, ws = gauss_01(n_s)
    # outer points along each segment: (nseg, n_t)
    xs = a[:, None, 0] + t[None, :] * (b[:, None, 0] - a[:, None, 0])
    ys = a[:, None, 1] + t[None, :] * dy[:, None]
    wo = wt[None, :] * dy[:, None] * (xs - x0)
    px = x0 + s[None, None, :] * (xs[..., None] - x0)
    py = np.broadcast_to(ys[..., None], px.shape)
    w = wo[..., None] * ws[None, None, :]
    pts = np.stack([px.ravel(), py.ravel()], axis=1)
    w = w.ravel()
    nz = w != 0.0
    return QuadRule(pts[nz], w[nz])


def boundary_rule(a, b, q: int, normals=None) -> QuadRule:
    """Gauss rule along straight segments a[i] -> b[i], exact to degree q.

    Normals default to the right-hand normal of each segment, which is the
    outward normal for counter-clockwise domain loops.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    d = b - a
    length = np.hypot(d[:, 0], d[:, 1])
    ok = length > 0
    skipped = int((~ok).sum())
    a, d, length = a[ok], d[ok], length[ok]
    if normals is None:
        n = np.stack([d[:, 1], -d[:, 0]], axis=1) / length[:, None] if len(length) else np.zeros((0, 2))
    else:
        n = np.atleast_2d(np.asarray(normals, dtype=float))[ok]
    t, w = gauss_01(_npts(q))
    pts = a[:, None, :] + t[None, :, None] * d[:, None, :]
    wts = length[:, None] * w[None, :]
    nrm = np.broadcast_to(n[:, None, :], pts.shape)
    return QuadRule(pts.reshape(-1, 2), wts.ravel(), nrm.reshape(-1, 2).copy(), skipped)


@lru_cache(maxsize=None)
def square_rule(q: int):
    """Tensor Gauss rule on [0,1]^2 exact for tensor degree q."""
    s, w = gauss_01(_npts(q))
    X, Y = np.meshgrid(s, s, indexing="ij")
    W = np.outer(w, w)
    return np.stack([X.ravel(), Y.ravel()], axis=1), W.ravel()


@lru_cache(maxsize=None)
def triangle_rule(q: int):
    """Collapsed (Duffy) Gauss rule on the unit triangle, exact for total degree q."""
    u, wu = gauss_01(_npts(q + 1))
    v, wv = gauss_01(_npts(q))
    U, V = np.meshgrid(u, v, indexing="ij")
    X = U
    Y = V * (1.0 - U)
    W = np.outer(wu * (1.0 - u), wv)
    return np.stack([X.ravel(), Y.ravel()], axis=1), W.ravel()


def write_rule_csv(path, rule: QuadRule, extra: dict | None = None):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        head = ["x", "y", "weight", "sign"]
        if extra:
            head = list(extra) + head
        w.writerow(head)
        for k in range(len(rule)):
            row = [f"{rule.points[k, 0]:.17g}", f"{rule.points[k, 1]:.17g}", f"{rule.weights[k]:.17g}",
                   "+" if rule.weights[k] >= 0 else "-"]
            if extra:
                row = [str(v) for v in extra.values()] + row
            w.writerow(row)


def monomial_moment_polygon(loops, a: int, b: int) -> float:
    """Exact ∫ x^a y^b over polygon loops via Green's theorem with exact segment integration.

    Used as an independent check: each segment integral of x^(a+1) y^b / (a+1) dy
    is evaluated with a Gauss rule of sufficient degree in the segment parameter.
    """
    total = 0.0
    n = math.ceil((a + b + 2) / 2) + 1
    t, w = gauss_01(n)
    for lp in _loops_of(loops):
        p = np.asarray(lp, dtype=float)
        q = np.roll(p, -1, axis=0)
        x = p[:, None, 0] + t[None, :] * (q[:, None, 0] - p[:, None, 0])
        y = p[:, None, 1] + t[None, :] * (q[:, None, 1] - p[:, None, 1])
        f = x ** (a + 1) * y**b / (a + 1)
        total += float(np.sum(f * w[None, :] * (q[:, None, 1] - p[:, None, 1])))
    return total
