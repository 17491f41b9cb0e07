"""Manufactured static problem on the unit square with a clamped bottom edge.

u = [−cos(πx) sin(πy), sin(πx/7) sin(πy/3)] / 10 vanishes on y = 0; the body
force is −div σ(u) in closed form and the remaining sides carry the exact
traction σ(u)n.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..forms import STEEL, MaterialParams, StabilizationParams, Variant, l2_error, stress
from ..geometry import rectangle
from ..linalg import solve_spd
from ..mesh import Family
from ..space import shape_eval
from .common import build_problem, loglog_fit, pairwise_rates

PI = np.pi


def exact_u(x):
    X, Y = x[:, 0], x[:, 1]
    return np.stack([-np.cos(PI * X) * np.sin(PI * Y), np.sin(PI * X / 7) * np.sin(PI * Y / 3)], axis=1) / 10


def exact_grad(x):
    """g[q, a, b] = ∂_b u_a."""
    X, Y = x[:, 0], x[:, 1]
    g = np.empty((len(x), 2, 2))
    g[:, 0, 0] = PI * np.sin(PI * X) * np.sin(PI * Y)
    g[:, 0, 1] = -PI * np.cos(PI * X) * np.cos(PI * Y)
    g[:, 1, 0] = PI / 7 * np.cos(PI * X / 7) * np.sin(PI * Y / 3)
    g[:, 1, 1] = PI / 3 * np.sin(PI * X / 7) * np.cos(PI * Y / 3)
    return g / 10


def _second_derivatives(x):
    """Δu and ∇(div u), each (m, 2)."""
    X, Y = x[:, 0], x[:, 1]
    c, s = np.cos, np.sin
    lap = np.stack([2 * PI**2 * c(PI * X) * s(PI * Y), -(PI**2 / 49 + PI**2 / 9) * s(PI * X / 7) * s(PI * Y / 3)], 1)
    gdiv = np.stack([
        PI**2 * c(PI * X) * s(PI * Y) + PI**2 / 21 * c(PI * X / 7) * c(PI * Y / 3),
        PI**2 * s(PI * X) * c(PI * Y) - PI**2 / 9 * s(PI * X / 7) * s(PI * Y / 3),
    ], 1)
    return lap / 10, gdiv / 10


def body_force_parts(x):
    """(f_μ, f_λ) with f = μ f_μ + λ f_λ = −div σ(u)."""
    lap, gdiv = _second_derivatives(np.atleast_2d(x))
    return -(lap + gdiv), -gdiv


def body_force(material: MaterialParams = STEEL):
    def f(x):
        fm, fl = body_force_parts(x)
        return material.mu * fm + material.lam * fl
    return f


def traction(material: MaterialParams = STEEL):
    def g(x, n):
        return np.einsum("qab,qb->qa", stress(material, exact_grad(x)), n)
    return g


def zero_dirichlet(x, n):
    return np.zeros_like(x)


def fd_body_force_parts(x, step: float = 1e-5):
    """(f_μ, f_λ) from 5-point stencils applied to exact_u (finite-difference oracle)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    ex, ey = np.array([step, 0.0]), np.array([0.0, step])
    u0 = exact_u(x)
    uxx = (exact_u(x + ex) - 2 * u0 + exact_u(x - ex)) / step**2
    uyy = (exact_u(x + ey) - 2 * u0 + exact_u(x - ey)) / step**2
    uxy = (exact_u(x + ex + ey) - exact_u(x + ex - ey) - exact_u(x - ex + ey) + exact_u(x - ex - ey)) / (4 * step**2)
    lap = uxx + uyy
    gdiv = np.stack([uxx[:, 0] + uxy[:, 1], uxy[:, 0] + uyy[:, 1]], axis=1)
    return -(lap + gdiv), -gdiv


def check_body_force(n_points: int = 100, seed: int = 0, tol: float = 1e-5) -> float:
    """Max abs difference between coded and finite-difference body force for unit Lamé pairs.

    The force is linear in (μ, λ), so checking (1, 0) and (0, 1) checks every
    material; raises ValueError above ``tol``.
    """
    x = np.random.default_rng(seed).random((n_points, 2))
    fm, fl = body_force_parts(x)
    dm, dl = fd_body_force_parts(x)
    err = float(max(np.abs(fm - dm).max(), np.abs(fl - dl).max()))
    if err > tol:
        raise ValueError(f"manufactured body force disagrees with finite differences: {err:.3e}")
    return err


@dataclass
class ConvergenceRecord:
    h: float
    p: int
    family: str
    theta: float
    n_dofs: int
    l2_error: float
    energy_error: float
    rate: float | None = None
    energy_rate: float | None = None

    def row(self) -> dict:
        return asdict(self)


def energy_error(space, rules, u, material: MaterialParams, grad) -> float:
    """(σ(u_h − u), ε(u_h − u))^{1/2} over Ω."""
    tot = 0.0
    for li, e in enumerate(space.mesh.elements):
        xi, w = rules.volume(li)
        G = space.physical_gradients(space.element_type(e), xi)
        gh = np.einsum("qnb,na->qab", G, u[space.cell_dofs[li]].reshape(-1, 2))
        d = gh - grad(space.to_element(e, xi))
        eps = 0.5 * (d + np.swapaxes(d, 1, 2))
        s = stress(material, d)
        tot += float(np.sum(w * np.einsum("qab,qab->q", s, eps)))
    return float(np.sqrt(max(tot, 0.0)))


def solve_manufactured(h: float, p: int, family=Family.QUAD, theta: float = 0.0, variant=Variant.UNIFORM,
                       material: MaterialParams = STEEL, stab: StabilizationParams | None = None):
    rep = rectangle(0.0, 0.0, 1.0, 1.0, dirichlet=("bottom",))
    pr = build_problem(rep, family, h, p, material, stab, variant, theta,
                       f=body_force(material), g_N=traction(material), g_D=zero_dirichlet)
    u = solve_spd(pr.system.A, pr.system.L)
    return pr, u


def manufactured_static(h: float, p: int, family=Family.QUAD, theta: float = 0.0, variant=Variant.UNIFORM,
                        material: MaterialParams = STEEL) -> ConvergenceRecord:
    pr, u = solve_manufactured(h, p, family, theta, variant, material)
    V, rules = pr.space, pr.system.rules
    return ConvergenceRecord(
        h=float(h), p=int(p), family=Family(family).value, theta=float(theta), n_dofs=V.n_dofs,
        l2_error=l2_error(V, rules, u, exact_u),
        energy_error=energy_error(V, rules, u, material, exact_grad),
    )


def converge(hs, p: int, family=Family.QUAD, theta: float = 0.0, variant=Variant.UNIFORM,
             material: MaterialParams = STEEL):
    """Records over a sequence of mesh sizes with pairwise rates, plus the
    least-squares fit (slope, residual) of the L² error over the last 3 levels."""
    recs = [manufactured_static(h, p, family, theta, variant, material) for h in hs]
    hv = [r.h for r in recs]
    for r, rate, er in zip(recs, pairwise_rates(hv, [r.l2_error for r in recs]),
                           pairwise_rates(hv, [r.energy_error for r in recs])):
        r.rate, r.energy_rate = rate, er
    fit = loglog_fit(hv[-3:], [r.l2_error for r in recs[-3:]]) if len(recs) >= 2 else (None, None)
    return recs, fit
