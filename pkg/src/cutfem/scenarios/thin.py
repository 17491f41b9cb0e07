"""Thin structures on coarse grids: locking of low-order elements."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..forms import STEEL, MaterialParams
from ..geometry import rectangle, ring
from ..linalg import rigid_body_basis, solve_free, solve_spd
from ..mesh import Family
from .common import build_problem, gravity


@dataclass
class ThinResult:
    kind: str
    p: int
    h: float
    n_dofs: int
    indicator: float
    extra: dict

    def row(self) -> dict:
        d = asdict(self)
        d.update(d.pop("extra"))
        return d


def cantilever(p: int, h: float = 0.05, length: float = 1.0, thickness: float = 0.02, theta: float = np.pi / 9,
               family=Family.QUAD, material: MaterialParams = STEEL):
    """Clamped thin strip under self-weight; indicator = tip deflection (downward positive).

    Also reports the Euler-Bernoulli plane-strain value qL⁴/(8EI).
    """
    rep = rectangle(0.0, 0.0, length, thickness, dirichlet=("left",))
    pr = build_problem(rep, family, h, p, material, theta=theta, f=gravity(material))
    u = solve_spd(pr.system.A, pr.system.L)
    tip = pr.space.evaluate(u, np.array([[length, 0.5 * thickness]]))[0]
    q = material.rho * 9.81 * thickness
    EI = material.E / (1 - material.nu**2) * thickness**3 / 12
    ref = q * length**4 / (8 * EI)
    return pr, u, ThinResult("cantilever", p, pr.space.h, pr.space.n_dofs, float(-tip[1]),
                             {"beam_theory": ref})


def centrifugal_load(material: MaterialParams, omega: float, center=(0.0, 0.0)):
    """f = ρω² r ê_r = ρω² (x − c)."""
    c = np.asarray(center, dtype=float)

    def f(x):
        return material.rho * omega**2 * (x - c)
    return f


def net_torque(f, pts, w, center=(0.0, 0.0)) -> float:
    """∫ (x − c) × f over a point set with weights."""
    d = pts - np.asarray(center)
    v = f(pts)
    return float(np.sum(w * (d[:, 0] * v[:, 1] - d[:, 1] * v[:, 0])))


def ring_centrifugal(p: int, h: float = 0.1, r_in: float = 0.9, r_out: float = 1.0, omega: float = 100.0,
                     theta: float = 0.0, family=Family.QUAD, material: MaterialParams = STEEL, n_samples: int = 720,
                     offset=(0.013, 0.027)):
    """Free ring spun at ω; indicator = (max − min)/|mean| of the midline radial displacement."""
    rep = ring(r_in, r_out, segments=200)
    f = centrifugal_load(material, omega)
    pr = build_problem(rep, family, h, p, material, theta=theta, offset=offset, f=f)
    s = pr.system
    R = rigid_body_basis(pr.space, s.M_stab)
    u = solve_free(s.A, s.M_stab, R, s.L)
    phi = np.linspace(0, 2 * np.pi, n_samples, endpoint=False)
    rm = 0.5 * (r_in + r_out)
    er = np.stack([np.cos(phi), np.sin(phi)], axis=1)
    ur = np.einsum("qa,qa->q", pr.space.evaluate(u, rm * er), er)
    x, w, _ = s.rules.volume_points()
    return pr, u, ThinResult("ring_centrifugal", p, pr.space.h, pr.space.n_dofs,
                             float((ur.max() - ur.min()) / abs(ur.mean())),
                             {"mean_radial": float(ur.mean()), "net_torque": net_torque(f, x, w)})


def thin_geometry_demo(kind: str, p: int, h: float | None = None, **kw):
    if kind == "cantilever":
        return cantilever(p, 0.05 if h is None else h, **kw)
    if kind == "ring_centrifugal":
        return ring_centrifugal(p, 0.1 if h is None else h, **kw)
    raise ValueError(f"unknown thin-geometry kind {kind!r}")
