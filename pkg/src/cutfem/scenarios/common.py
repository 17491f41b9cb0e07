"""Shared helpers for the scenario drivers."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..forms import STEEL, AssembledSystem, MaterialParams, StabilizationParams, Variant, assemble_system
from ..geometry import BoundaryRep
from ..mesh import ActiveMesh, BackgroundMesh, Family, background_for, build_active_mesh
from ..space import FESpace


@dataclass
class Problem:
    rep: BoundaryRep
    bg: BackgroundMesh
    mesh: ActiveMesh
    space: FESpace
    system: AssembledSystem | None = None


def build_space(rep: BoundaryRep, family, h: float, p: int, theta: float = 0.0, offset=(0.0, 0.0),
                bg: BackgroundMesh | None = None) -> Problem:
    if bg is None:
        bg = background_for(rep, Family(family), h, theta=theta, offset=offset)
    am = build_active_mesh(bg, rep)
    return Problem(rep, bg, am, FESpace(am, p))


def build_problem(rep: BoundaryRep, family, h: float, p: int, material: MaterialParams = STEEL,
                  stab: StabilizationParams | None = None, variant=Variant.UNIFORM, theta: float = 0.0,
                  offset=(0.0, 0.0), bg: BackgroundMesh | None = None, **data) -> Problem:
    """Space plus assembled system; ``data`` is forwarded to assemble_system (f, g_N, g_D, free, q)."""
    pr = build_space(rep, family, h, p, theta, offset, bg)
    if stab is None:
        stab = StabilizationParams.defaults(material, p, variant)
    pr.system = assemble_system(pr.space, material, stab, **data)
    return pr


def loglog_fit(x, y):
    """Least-squares slope of log y against log x and the RMS residual of the fit."""
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    A = np.stack([lx, np.ones_like(lx)], axis=1)
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    res = ly - A @ coef
    return float(coef[0]), float(np.sqrt(np.mean(res**2)))


def pairwise_rates(h, err):
    """Rates log(e_i/e_{i+1}) / log(h_i/h_{i+1}); the first entry is None."""
    out = [None]
    for i in range(1, len(h)):
        out.append(float(np.log(err[i - 1] / err[i]) / np.log(h[i - 1] / h[i])))
    return out


def gravity(material: MaterialParams, g: float = 9.81):
    """Constant body force (0, −ρg)."""
    return np.array([0.0, -material.rho * g])
