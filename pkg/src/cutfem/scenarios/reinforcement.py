"""Bulk block reinforced by embedded trusses or a beam."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..fibre import FibreSpec, assemble_fibre_system, decompose_fibre, point_values
from ..forms import MaterialParams, energy
from ..geometry import rectangle
from ..linalg import quadratic_form, solve_spd_extended
from ..mesh import Family
from .common import build_problem

BULK = MaterialParams(E=300.0, nu=1.0 / 3.0, rho=1.0)
LOAD = (0.0, -1.0)


def truss_pair(E: float = 1e4, t: float = 0.1, length: float = 4.0, ys=(0.249, 0.751)):
    return [FibreSpec((0.0, y), (length, y), t, E, truss=True, beam=False) for y in ys]


def centre_beam(E: float = 1e6, t: float = 0.1, length: float = 4.0, y: float = 0.501, beta_b=None):
    """Superposed truss and Euler-Bernoulli beam along y."""
    return [FibreSpec((0.0, y), (length, y), t, E, truss=True, beam=True, beta_b=beta_b)]


CONFIGS = {
    "bulk": lambda: [],
    "trusses": truss_pair,
    "beam": centre_beam,
    "trusses+beam": lambda: truss_pair() + centre_beam(),
}


@dataclass
class FibreRecord:
    config: str
    compliance: float
    bulk_energy: float
    fibre_energy: float
    balance_error: float
    tip_deflection: float
    n_dofs: int

    def row(self) -> dict:
        return asdict(self)


def bulk_problem(h: float = 1.0 / 16, p: int = 2, family=Family.QUAD, theta: float = 0.0,
                 material: MaterialParams = BULK, load=LOAD):
    rep = rectangle(0.0, 0.0, 4.0, 1.0, dirichlet=("left",))
    return build_problem(rep, family, h, p, material, theta=theta, f=np.asarray(load, dtype=float))


def solve_config(problem, fibres, load=LOAD, fibre_load: bool = False, name: str = ""):
    """Solve with the given fibres.  The compliance Lᵀu uses the bulk load
    unless ``fibre_load`` adds the fibre self-weight (A f, v)_Σ as well.

    Energies are accumulated in extended precision after an extended
    refinement of the solve, so the balance uᵀA_tot u = Lᵀu is checked well
    below the double-precision rounding level of the stiff beam terms.
    """
    s = problem.system
    A, L, datas = assemble_fibre_system(problem.space, s.A, s.L, fibres, f=load if fibre_load else None)
    u = solve_spd_extended(A, L)
    total = quadratic_form(A, u)
    comp = float(np.sum(np.asarray(L, dtype=np.longdouble) * u))
    bulk = quadratic_form(s.A, u)
    tip = problem.space.evaluate(u, np.array([[4.0, 0.5]]))[0, 1]
    rec = FibreRecord(name, comp, bulk, total - bulk, abs(total - comp) / abs(comp), float(-tip),
                      problem.space.n_dofs)
    return rec, u, A, datas


def fibre_demo(h: float = 1.0 / 16, p: int = 2, configs=("bulk", "trusses", "beam"), fibre_load: bool = False,
               family=Family.QUAD, theta: float = 0.0):
    pr = bulk_problem(h, p, family, theta)
    out = []
    for name in configs:
        rec, *_ = solve_config(pr, CONFIGS[name](), fibre_load=fibre_load, name=name)
        out.append(rec)
    return out


def beta_sensitivity(betas=(1.0, 10.0, 40.0, 400.0, 4000.0), h: float = 1.0 / 16, p: int = 2):
    """Compliance of the beam configuration as a function of the point penalty β_b."""
    pr = bulk_problem(h, p)
    return [(b, solve_config(pr, centre_beam(beta_b=b), name=f"beta={b:g}")[0].compliance) for b in betas]


def cdg_jump_residual(space, fibre: FibreSpec, coeffs=(0.3, -0.2, 0.1, 0.05, 0.7, -0.4)):
    """Point terms of the beam form for a globally linear u (so u·n is linear along the fibre).

    Returns the largest |[∂_t(u·n)]| over crossings and the largest point-term
    value −2EI⟨∂²_tt(u·n)⟩[∂_t(u·n)] + (β_b EI/h)[∂_t(u·n)]², each evaluated at
    the crossing.  Forming uᵀKu through the assembled matrix instead would
    only measure rounding of order ε‖K‖‖u‖².
    """
    a0, a1, a2, b0, b1, b2 = coeffs
    u = space.interpolate(lambda x, y: (a0 + a1 * x + a2 * y, b0 + b1 * x + b2 * y))
    data = decompose_fibre(space, fibre)
    EI = fibre.E * fibre.I
    pen = fibre.penalty(space.p) * EI / space.h
    jumps, terms = [0.0], [0.0]
    for d, j, avg in point_values(space, data):
        ju, au = float(j @ u[d]), float(avg @ u[d])
        jumps.append(abs(ju))
        terms.append(abs(-2.0 * EI * au * ju + pen * ju * ju))
    return max(jumps), max(terms)
