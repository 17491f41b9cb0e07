"""Bodies discretized on separate background grids and glued by interface Nitsche terms."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..forms import (STEEL, MaterialParams, StabilizationParams, assemble_interface_nitsche, assemble_system,
                     field_norm, interface_jump_norm, l2_error, von_mises, _interface_points)
from ..geometry import BoundaryRep, Tag, _circle
from ..linalg import solve_spd
from ..mesh import Family
from ..space import shape_eval
from . import manufactured as mf
from .common import Problem, build_space, gravity


@dataclass
class Body:
    rep: BoundaryRep
    material: MaterialParams = STEEL
    h: float = 0.1
    p: int = 2
    family: Family = Family.QUAD
    theta: float = 0.0
    offset: tuple = (0.0, 0.0)
    f: object = None
    g_N: object = None
    g_D: object = None


@dataclass
class CompoundResult:
    problems: list
    u: list
    interfaces: list
    jumps: list = field(default_factory=list)
    norms: list = field(default_factory=list)

    @property
    def total_norm(self) -> float:
        return float(np.sqrt(sum(n**2 for n in self.norms)))


def solve_compound(bodies, interfaces, gamma_d: float | None = None, weighted: bool = True) -> CompoundResult:
    """Assemble every body on its own grid, add the coupling for each pair (i, j) and solve.

    The interface quadrature of pair (i, j) comes from body i's INTERFACE
    edges shared with body j.  ``weighted`` selects the material-weighted
    interface penalty; the plain penalty γ_D h⁻¹([u],[v]) is too weak for
    realistic moduli.
    """
    probs = []
    for b in bodies:
        pr = build_space(b.rep, b.family, b.h, b.p, b.theta, b.offset)
        stab = StabilizationParams.defaults(b.material, b.p)
        pr.system = assemble_system(pr.space, b.material, stab, f=b.f, g_N=b.g_N, g_D=b.g_D, free=False)
        probs.append(pr)
    sizes = [pr.space.n_dofs for pr in probs]
    starts = np.concatenate([[0], np.cumsum(sizes)])
    blocks = [[None] * len(probs) for _ in probs]
    for i, pr in enumerate(probs):
        blocks[i][i] = pr.system.A
    for i, j in interfaces:
        bi, bj = bodies[i], bodies[j]
        g = 1000.0 * max(bi.p, bj.p) ** 2 if gamma_d is None else gamma_d
        C = assemble_interface_nitsche(probs[i].space, probs[i].system.rules, probs[j].space,
                                       bi.material, bj.material, g, weighted=weighted)
        ni = sizes[i]
        for (r, rs), (c, cs) in [((i, slice(0, ni)), (i, slice(0, ni))), ((i, slice(0, ni)), (j, slice(ni, None))),
                                 ((j, slice(ni, None)), (i, slice(0, ni))), ((j, slice(ni, None)), (j, slice(ni, None)))]:
            blk = C[rs, :][:, cs]
            blocks[r][c] = blk if blocks[r][c] is None else blocks[r][c] + blk
    K = sp.bmat(blocks, format="csr")
    L = np.concatenate([pr.system.L for pr in probs])
    x = solve_spd(K, L)
    us = [x[starts[k]:starts[k + 1]] for k in range(len(probs))]
    res = CompoundResult(probs, us, list(interfaces))
    for i, j in interfaces:
        res.jumps.append(interface_jump_norm(probs[i].space, probs[i].system.rules, probs[j].space, us[i], us[j]))
    res.norms = [field_norm(pr.space, pr.system.rules, u) for pr, u in zip(probs, us)]
    return res


def interface_von_mises_jump(res: CompoundResult, bodies, pair_index: int = 0):
    """Max |σ_vm(u_i) − σ_vm(u_j)| over interface points of a pair, and the max σ_vm there."""
    i, j = res.interfaces[pair_index]
    Pi, Pj = res.problems[i], res.problems[j]
    Si, Sj = Pi.space, Pj.space
    jump, peak = 0.0, 0.0
    for li1, li2, xi1, xi2, _, _ in _interface_points(Si, Pi.system.rules, Sj, Pi.system.rules.q):
        g1 = np.einsum("qnb,na->qab", Si.physical_gradients(Si.element_type(Si.mesh.elements[li1]), xi1),
                       res.u[i][Si.cell_dofs[li1]].reshape(-1, 2))
        g2 = np.einsum("qnb,na->qab", Sj.physical_gradients(Sj.element_type(Sj.mesh.elements[li2]), xi2),
                       res.u[j][Sj.cell_dofs[li2]].reshape(-1, 2))
        v1, v2 = von_mises(bodies[i].material, g1), von_mises(bodies[j].material, g2)
        jump = max(jump, float(np.abs(v1 - v2).max()))
        peak = max(peak, float(max(v1.max(), v2.max())))
    return jump, peak


# ---------------------------------------------------------------- manufactured halves


def halves(x_split: float = 0.5):
    """Unit square cut at x = x_split into two bodies with a clamped bottom."""
    D, N, I = Tag.DIRICHLET, Tag.NEUMANN, Tag.INTERFACE
    left = BoundaryRep([[(0, 0), (x_split, 0), (x_split, 1), (0, 1)]], [[D, I, N, N]])
    right = BoundaryRep([[(x_split, 0), (1, 0), (1, 1), (x_split, 1)]], [[D, N, N, I]])
    return left, right


def manufactured_halves(h: float, p: int, theta=(0.0, 0.0), family=Family.QUAD, material: MaterialParams = STEEL,
                        weighted: bool = True, gamma_d: float | None = None):
    """L² errors of the glued two-body solve and the single-domain solve of the manufactured problem."""
    data = dict(f=mf.body_force(material), g_N=mf.traction(material), g_D=mf.zero_dirichlet)
    left, right = halves()
    bodies = [Body(left, material, h, p, family, theta[0], **data), Body(right, material, h, p, family, theta[1], **data)]
    res = solve_compound(bodies, [(0, 1)], gamma_d=gamma_d, weighted=weighted)
    err = math.sqrt(sum(l2_error(pr.space, pr.system.rules, u, mf.exact_u) ** 2 for pr, u in zip(res.problems, res.u)))
    pr1, u1 = mf.solve_manufactured(h, p, family, theta[0], material=material)
    err1 = l2_error(pr1.space, pr1.system.rules, u1, mf.exact_u)
    return {"compound_error": err, "single_error": err1, "jump": res.jumps[0], "norm": res.total_norm}


# ---------------------------------------------------------------- drilled L-shape


def drilled_lshape_bodies(size: float = 2.0, inner: float = 1.0, r_drill: float = 0.2, r_ring: float = 0.4,
                          segments: int = 24):
    """Three bodies: lower arm, upper arm, and the ring around the drilled corner.

    The ring occupies r_drill ≤ |x − c| ≤ r_ring for the three quadrants of
    the corner c = (inner, inner) that lie in the L; both arms are clamped at x = 0.
    """
    if not r_drill < r_ring < min(inner, size - inner):
        raise ValueError("need r_drill < r_ring < arm width")
    D, N, I = Tag.DIRICHLET, Tag.NEUMANN, Tag.INTERFACE
    c = (inner, inner)
    n2, n1 = 2 * segments, segments
    lower_arc = _circle(c, r_ring, n2, start=0.0, stop=-math.pi, endpoint=True)
    upper_arc = _circle(c, r_ring, n1, start=-math.pi, stop=-1.5 * math.pi, endpoint=True)
    lower = [(0, 0), (size, 0), (size, inner)] + [tuple(q) for q in lower_arc] + [(0, inner)]
    lower_tags = [N, N, N] + [I] * n2 + [I, D]
    upper = [(0, inner)] + [tuple(q) for q in upper_arc] + [(inner, size), (0, size)]
    upper_tags = [I] * (n1 + 1) + [N, N, D]
    outer = np.concatenate([lower_arc, upper_arc[1:]])[::-1]
    drill = _circle(c, r_drill, 3 * segments, start=0.0, stop=-1.5 * math.pi, endpoint=True)
    ring = [tuple(q) for q in outer] + [tuple(q) for q in drill]
    ring_tags = [I] * (len(outer) - 1) + [N] + [N] * (len(drill) - 1) + [N]
    return BoundaryRep([lower], [lower_tags]), BoundaryRep([upper], [upper_tags]), BoundaryRep([ring], [ring_tags])


def drilled_lshape_demo(h: float = 0.1, p: int = 2, stiffness_ratio: float = 10.0, ring_refine: int = 2,
                        theta=(0.0, 0.05, 0.1), material: MaterialParams = STEEL, weighted: bool = True):
    """Steel ring around the drilled corner, outer bodies ``stiffness_ratio`` times softer, self-weight load."""
    lower, upper, ring = drilled_lshape_bodies()
    soft = MaterialParams(material.E / stiffness_ratio, material.nu, material.rho)
    load = gravity(material)
    bodies = [
        Body(lower, soft, h, p, theta=theta[0], f=load),
        Body(upper, soft, h, p, theta=theta[1], f=load),
        Body(ring, material, h / ring_refine, p, theta=theta[2], f=load),
    ]
    res = solve_compound(bodies, [(0, 1), (2, 0), (2, 1)], weighted=weighted)
    vm = [interface_von_mises_jump(res, bodies, k) for k in range(3)]
    return bodies, res, vm
