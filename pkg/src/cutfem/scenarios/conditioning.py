"""Condition numbers of stiffness and mass matrices with and without
ghost-penalty stabilization and diagonal scaling."""
from __future__ import annotations

import enum
from dataclasses import asdict, dataclass

import numpy as np

from ..forms import STEEL, MaterialParams, StabilizationParams, Variant, assemble_system
from ..geometry import BoundaryRep, rectangle
from ..linalg import KAPPA_SENTINEL, DegenerateSystemError, condition_estimate, diag_scale
from ..mesh import Family, background_for, make_sliver_background
from .common import build_space, loglog_fit


class MeshVariant(str, enum.Enum):
    FITTED = "fitted"
    SLIVER = "sliver"
    ROTATED = "rotated"


@dataclass
class ConditionRow:
    p: int
    h: float
    variant: str
    n_dofs: int
    A_plain: float
    A_precond: float
    A_stab: float
    A_stab_precond: float
    M_plain: float
    M_precond: float
    M_stab: float
    M_stab_precond: float

    def row(self) -> dict:
        return asdict(self)


def unit_square() -> BoundaryRep:
    return rectangle(0.0, 0.0, 1.0, 1.0, dirichlet=("bottom",))


def _background(rep, family, h, variant, delta, theta):
    variant = MeshVariant(variant)
    if variant is MeshVariant.FITTED:
        return background_for(rep, family, h)
    if variant is MeshVariant.SLIVER:
        return make_sliver_background(rep, h, delta, family)
    return background_for(rep, family, h, theta=theta)


def _kappa(B, precond: bool, dense):
    if precond:
        try:
            _, B = diag_scale(B)
        except DegenerateSystemError:
            return KAPPA_SENTINEL
    return condition_estimate(B, dense=dense)


def condition_row(p: int, h: float, variant=MeshVariant.FITTED, delta: float = 1e-3, theta: float = 0.0,
                  family=Family.QUAD, material: MaterialParams = STEEL, rep: BoundaryRep | None = None,
                  dense: bool | None = None, stab_scale: float = 1.0) -> ConditionRow:
    """κ(A) and κ(M) for the four combinations of stabilization and diagonal scaling.

    The unstabilized operators use the same Nitsche terms with both ghost
    penalty coefficients set to zero.  ``stab_scale`` multiplies the default
    ghost-penalty coefficients of the stabilized operators.
    """
    rep = unit_square() if rep is None else rep
    bg = _background(rep, family, h, variant, delta, theta)
    pr = build_space(rep, family, h, p, bg=bg)
    stab = StabilizationParams.defaults(material, p, scale=stab_scale)
    s = assemble_system(pr.space, material, stab)
    plain = StabilizationParams.defaults(material, p, scale=0.0)
    s0 = assemble_system(pr.space, material, plain, rules=s.rules)
    return ConditionRow(
        int(p), float(bg.h), MeshVariant(variant).value, pr.space.n_dofs,
        _kappa(s0.A, False, dense), _kappa(s0.A, True, dense), _kappa(s.A, False, dense), _kappa(s.A, True, dense),
        _kappa(s.M, False, dense), _kappa(s.M, True, dense), _kappa(s.M_stab, False, dense),
        _kappa(s.M_stab, True, dense),
    )


def condition_table(ps=(1, 2, 3, 4, 5), h: float = 0.1, variant=MeshVariant.FITTED, delta: float = 1e-3,
                    theta: float = 0.0, family=Family.QUAD, material: MaterialParams = STEEL, rep=None):
    return [condition_row(p, h, variant, delta, theta, family, material, rep) for p in ps]


def condition_scaling(hs=(0.2, 0.1, 0.05, 0.025), p: int = 1, theta: float = np.pi / 9, family=Family.QUAD,
                      material: MaterialParams = STEEL, rep=None, stab_scale: float = 1.0):
    """Rows over mesh sizes on a rotated grid plus log–log slopes of the
    stabilized + scaled κ(A) and κ(M) with their fit residuals."""
    rows = [condition_row(p, h, MeshVariant.ROTATED, theta=theta, family=family, material=material, rep=rep,
                          stab_scale=stab_scale) for h in hs]
    hv = [r.h for r in rows]
    slopes = {
        "A_stab_precond": loglog_fit(hv, [r.A_stab_precond for r in rows]),
        "M_stab_precond": loglog_fit(hv, [r.M_stab_precond for r in rows]),
    }
    return rows, slopes
