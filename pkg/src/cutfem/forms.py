"""Bilinear and linear forms of the stabilized Nitsche CutFEM for plane-strain elasticity.

Local DOFs are interleaved (2*node + component) to match FESpace.cell_dofs.
Integration on full cells uses one shared reference rule per element type;
cut cells use divergence-theorem rules built in reference coordinates.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .geometry import GeometryError, Location, Tag, point_in_domain
from .mesh import CoverageError, Family, split_segment
from .quadrature import TENSOR, TOTAL, boundary_rule, cut_cell_rule, gauss_01, square_rule, triangle_rule
from .space import FESpace, directional_derivative, shape_eval


class Variant(str, enum.Enum):
    UNIFORM = "uniform"
    SPLIT = "split"


class Which(str, enum.Enum):
    ALL = "all"
    DIRICHLET_ONLY = "dirichlet"
    NEUMANN_ONLY = "neumann"


@dataclass(frozen=True)
class MaterialParams:
    E: float = 200e9
    nu: float = 0.3
    rho: float = 7850.0

    def __post_init__(self):
        if not self.E > 0 or not self.rho > 0:
            raise ValueError("E and rho must be positive")
        if not 0.0 <= self.nu < 0.5:
            raise ValueError("Poisson ratio must lie in [0, 0.5)")

    @property
    def mu(self) -> float:
        return self.E / (2.0 * (1.0 + self.nu))

    @property
    def lam(self) -> float:
        """Plane-strain first Lamé parameter."""
        return self.E * self.nu / ((1.0 + self.nu) * (1.0 - 2.0 * self.nu))


STEEL = MaterialParams()


@dataclass(frozen=True)
class StabilizationParams:
    gamma_m: float
    gamma_a: float
    beta: float
    variant: Variant = Variant.UNIFORM

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.beta <= 0:
            raise ValueError("Nitsche penalty beta must be positive")
        if self.gamma_m < 0 or self.gamma_a < 0:
            raise ValueError("stabilization coefficients must be nonnegative")

    @classmethod
    def defaults(cls, material: MaterialParams, p: int, variant=Variant.UNIFORM, scale: float = 1.0):
        """Default coefficients; ``scale`` multiplies both ghost-penalty weights (0 disables them)."""
        return cls(
            gamma_m=scale * material.rho * 1e-4,
            gamma_a=scale * (2.0 * material.mu + material.lam) * 1e-4,
            beta=1000.0 * p**2,
            variant=variant,
        )


# ---------------------------------------------------------------- quadrature


@dataclass
class ElementRules:
    """Volume and boundary rules for every active element of a space.

    ``full[k]`` is the reference rule (points, weights including |det J|)
    shared by every uncut element of type k; ``cut[li]`` the rule of cut
    element li; ``boundary[li]`` holds (xi, x, w, n, tag) on ∂Ω ∩ K.
    """

    space: FESpace
    q: int
    full: dict
    cut: dict
    boundary: dict
    skipped: int = 0

    def volume(self, li):
        if li in self.cut:
            return self.cut[li]
        return self.full[self.space.element_type(self.space.mesh.elements[li])]

    def volume_points(self):
        """All physical volume points with weights, as (x, w, li)."""
        xs, ws, ls = [], [], []
        sp_ = self.space
        for li, e in enumerate(sp_.mesh.elements):
            xi, w = self.volume(li)
            xs.append(sp_.to_element(e, xi))
            ws.append(w)
            ls.append(np.full(len(w), li))
        return np.concatenate(xs), np.concatenate(ws), np.concatenate(ls)


def build_rules(space: FESpace, q: int | None = None) -> ElementRules:
    q = 2 * space.p if q is None else int(q)
    mesh = space.mesh
    full = {}
    mode = TENSOR if space.family is Family.QUAD else TOTAL
    for k in range(space.bg.per_cell):
        xi, w = square_rule(q) if space.family is Family.QUAD else triangle_rule(q)
        full[k] = (np.asarray(xi), np.asarray(w) * space.jacobian(k)[2])
    cut, bnd = {}, {}
    skipped = 0
    for e, reg in mesh.regions.items():
        li = int(mesh.local_index[e])
        k = space.element_type(e)
        _, Jinv, det = space.jacobian(k)
        o = space.bg.element_origin(e)
        if mesh.is_cut[li]:
            loops = [(lp - o) @ Jinv.T for lp in reg.loops]
            r = cut_cell_rule(loops, q, mode)
            cut[li] = (r.points, r.weights * det)
        a, b, tags = reg.segments((Tag.DIRICHLET, Tag.NEUMANN, Tag.INTERFACE))
        if len(a):
            length = np.hypot(*(b - a).T)
            keep = length > 0
            skipped += int((~keep).sum())
            if keep.any():
                r = boundary_rule(a[keep], b[keep], q)
                npts = len(r.weights) // int(keep.sum())
                bnd[li] = ((r.points - o) @ Jinv.T, r.points, r.weights, r.normals, np.repeat(tags[keep], npts))
    return ElementRules(space, q, full, cut, bnd, skipped)


# ---------------------------------------------------------------- kernels


def _elastic_local(G, w, mu, lam):
    """Local stiffness (2n, 2n) from physical gradients G (nq, n, 2)."""
    n = G.shape[1]
    GG = np.einsum("q,qia,qjb->iajb", w, G, G, optimize=True)
    K = lam * GG + mu * GG.transpose(0, 3, 2, 1)
    tr = np.einsum("icjc->ij", GG)
    K[:, 0, :, 0] += mu * tr
    K[:, 1, :, 1] += mu * tr
    return K.reshape(2 * n, 2 * n)


def _traction(G, nrm, mu, lam):
    """T[q, j, b, a]: component a of σ(φ_j e_b)·n."""
    dn = np.einsum("qjc,qc->qj", G, nrm)
    nq, n = dn.shape
    T = np.zeros((nq, n, 2, 2))
    for b in range(2):
        T[:, :, b, b] += mu * dn
        for a in range(2):
            T[:, :, b, a] += mu * G[:, :, a] * nrm[:, None, b] + lam * G[:, :, b] * nrm[:, None, a]
    return T


def _scatter(dofs_list, mats, n):
    """Sum local matrices into a CSR matrix of size n."""
    if not mats:
        return sp.csr_matrix((n, n))
    rows = np.concatenate([np.repeat(d, len(d)) for d in dofs_list])
    cols = np.concatenate([np.tile(d, len(d)) for d in dofs_list])
    vals = np.concatenate([m.ravel() for m in mats])
    A = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    return A


def _scatter_uniform(dofs, mat, n):
    """Same local matrix on every row of ``dofs`` (ne, m)."""
    if len(dofs) == 0:
        return sp.csr_matrix((n, n))
    m = dofs.shape[1]
    rows = np.repeat(dofs, m, axis=1).ravel()
    cols = np.tile(dofs, (1, m)).ravel()
    vals = np.tile(mat.ravel(), len(dofs))
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def _volume_assemble(space: FESpace, rules: ElementRules, local_fn, scalar: bool = False):
    """Assemble a volume form; local_fn(k, xi, w) -> local matrix."""
    mesh = space.mesh
    cd = space.cell_nodes if scalar else space.cell_dofs
    n = space.n_nodes if scalar else space.n_dofs
    is_cut = mesh.is_cut
    ks = np.asarray(space.bg.element_ijk(mesh.elements)[2])
    out = sp.csr_matrix((n, n))
    for k, (xi, w) in rules.full.items():
        sel = (~is_cut) & (ks == k)
        if sel.any():
            out = out + _scatter_uniform(cd[sel], local_fn(k, xi, w), n)
    lis = sorted(rules.cut)
    if lis:
        mats = [local_fn(int(ks[li]), *rules.cut[li]) for li in lis]
        out = out + _scatter([cd[li] for li in lis], mats, n)
    return out.tocsr()


# ---------------------------------------------------------------- forms


def assemble_elastic_a(space: FESpace, rules: ElementRules, material: MaterialParams) -> sp.csr_matrix:
    """Matrix of a(v,w) = 2μ(ε(v),ε(w))_Ω + λ(div v, div w)_Ω."""
    mu, lam = material.mu, material.lam

    def local(k, xi, w):
        return _elastic_local(space.physical_gradients(k, xi), w, mu, lam)

    return _volume_assemble(space, rules, local)


def assemble_scalar_mass(space: FESpace, rules: ElementRules, weight: float = 1.0) -> sp.csr_matrix:
    def local(k, xi, w):
        phi = shape_eval(space.family, space.p, xi, 0)
        return weight * (phi.T * w) @ phi

    return _volume_assemble(space, rules, local, scalar=True)


def _vector(Ms):
    return sp.kron(Ms, sp.identity(2), format="csr")


def _face_local(space: FESpace, f: int, q: int):
    """Scalar ghost-penalty matrix over the node list [nodes(e1), nodes(e2)] of face f."""
    e1, e2 = space.mesh.face_elements[f]
    a, b, n = space.mesh.face_geometry(f)
    s, w = gauss_01(max(1, (q + 2) // 2))
    length = float(np.hypot(*(b - a)))
    x = a[None, :] + s[:, None] * (b - a)[None, :]
    h = space.h
    out = 0.0
    for l in range(1, space.p + 1):
        d1 = space._dir_deriv(e1, x, n, l)
        d2 = space._dir_deriv(e2, x, n, l)
        jv = np.concatenate([-d1, d2], axis=1)
        out = out + h ** (2 * l + 1) * (jv.T * (w * length)) @ jv
    return out


def assemble_scalar_ghost_penalty(space: FESpace, faces, q: int | None = None) -> sp.csr_matrix:
    q = 2 * space.p if q is None else q
    mesh = space.mesh
    faces = np.asarray(faces, dtype=int)
    n = space.n_nodes
    if len(faces) == 0:
        return sp.csr_matrix((n, n))
    out = sp.csr_matrix((n, n))
    li = mesh.local_index[mesh.face_elements[faces]]
    nodes = np.concatenate([space.cell_nodes[li[:, 0]], space.cell_nodes[li[:, 1]]], axis=1)
    kinds = mesh.face_kind[faces]
    for kind in np.unique(kinds):
        sel = kinds == kind
        # congruent faces of one kind share the local matrix
        loc = _face_local(space, int(faces[np.nonzero(sel)[0][0]]), q)
        out = out + _scatter_uniform(nodes[sel], loc, n)
    return out.tocsr()


def assemble_ghost_penalty(space: FESpace, which=Which.ALL, q: int | None = None) -> sp.csr_matrix:
    """Vector ghost-penalty matrix J over F_h(∂Ω), F_h(∂Ω_D) or F_h(∂Ω_N)."""
    which = Which(which)
    mesh = space.mesh
    faces = {
        Which.ALL: mesh.faces_boundary,
        Which.DIRICHLET_ONLY: mesh.faces_dirichlet,
        Which.NEUMANN_ONLY: mesh.faces_neumann,
    }[which]
    return _vector(assemble_scalar_ghost_penalty(space, faces, q))


def ghost_penalty_value(space: FESpace, u, which=Which.ALL, q: int | None = None) -> float:
    """j_h(u, u) summed face by face from the derivative jumps of u.

    Agrees with uᵀJu but avoids its rounding floor of order ε‖J‖‖u‖², so it
    can resolve j_h(u, u) for fields that are (nearly) global polynomials.
    """
    which = Which(which)
    mesh = space.mesh
    faces = {
        Which.ALL: mesh.faces_boundary,
        Which.DIRICHLET_ONLY: mesh.faces_dirichlet,
        Which.NEUMANN_ONLY: mesh.faces_neumann,
    }[which]
    q = 2 * space.p if q is None else q
    s, w = gauss_01(max(1, (q + 2) // 2))
    u = np.asarray(u, dtype=float)
    h = space.h
    tot = 0.0
    for f in faces:
        a, b, _ = mesh.face_geometry(f)
        wl = w * float(np.hypot(*(b - a)))
        for l in range(1, space.p + 1):
            nodes, vals = space.face_jump(f, l, s)
            jx = vals @ u[2 * nodes]
            jy = vals @ u[2 * nodes + 1]
            tot += h ** (2 * l + 1) * float(np.dot(wl, jx * jx + jy * jy))
    return tot


def assemble_mass(space: FESpace, rules: ElementRules, material: MaterialParams, stab: StabilizationParams, J=None):
    """Density-weighted mass M and M_stab = M + γ_m J."""
    M = _vector(assemble_scalar_mass(space, rules, material.rho))
    if J is None:
        J = assemble_ghost_penalty(space, Which.ALL, rules.q)
    return M, (M + stab.gamma_m * J).tocsr()


def stiffness_penalty(space: FESpace, stab: StabilizationParams, q: int | None = None, J=None) -> sp.csr_matrix:
    """γ_a-weighted ghost penalty entering a_h for the chosen variant."""
    h = space.h
    if stab.variant is Variant.UNIFORM:
        if J is None:
            J = assemble_ghost_penalty(space, Which.ALL, q)
        return (stab.gamma_a / h**2) * J
    Jd = assemble_ghost_penalty(space, Which.DIRICHLET_ONLY, q)
    Jn = assemble_ghost_penalty(space, Which.NEUMANN_ONLY, q)
    return (stab.gamma_a * (Jn + Jd / h**2)).tocsr()


def _boundary_points(rules: ElementRules, tag):
    for li, (xi, x, w, nrm, tags) in rules.boundary.items():
        sel = tags == int(tag)
        if sel.any():
            yield li, xi[sel], x[sel], w[sel], nrm[sel]


def assemble_nitsche_boundary(space: FESpace, rules: ElementRules, material: MaterialParams, beta: float):
    """Dirichlet Nitsche terms −(σ(v)n,w) − (v,σ(w)n) + β h⁻¹ b_h(v,w) on ∂Ω_D."""
    if beta <= 0:
        raise ValueError("Nitsche penalty beta must be positive")
    mu, lam = material.mu, material.lam
    h = space.h
    dofs, mats = [], []
    for li, xi, _, w, nrm in _boundary_points(rules, Tag.DIRICHLET):
        k = space.element_type(space.mesh.elements[li])
        phi = shape_eval(space.family, space.p, xi, 0)
        G = space.physical_gradients(k, xi)
        T = _traction(G, nrm, mu, lam)
        n = phi.shape[1]
        # N[(i,a),(j,b)] = Σ w φ_i T[q,j,b,a]
        N = np.einsum("q,qi,qjba->iajb", w, phi, T, optimize=True).reshape(2 * n, 2 * n)
        pm = np.einsum("q,qi,qj->ij", w, phi, phi)
        P = np.zeros((n, 2, n, 2))
        P[:, 0, :, 0] = 2 * mu * pm
        P[:, 1, :, 1] = 2 * mu * pm
        P += lam * np.einsum("q,qi,qa,qj,qb->iajb", w, phi, nrm, phi, nrm, optimize=True)
        mats.append(-N - N.T + (beta / h) * P.reshape(2 * n, 2 * n))
        dofs.append(space.cell_dofs[li])
    return _scatter(dofs, mats, space.n_dofs)


def assemble_nitsche_A(space: FESpace, rules: ElementRules, material: MaterialParams, stab: StabilizationParams,
                       a=None, J=None, free: bool = False):
    """A_h = a + stiffness ghost penalty + Dirichlet Nitsche terms (skipped for free problems)."""
    if a is None:
        a = assemble_elastic_a(space, rules, material)
    A = a + stiffness_penalty(space, stab, rules.q, J)
    if not free:
        A = A + assemble_nitsche_boundary(space, rules, material, stab.beta)
    return A.tocsr()


def _call_field(fn, x, n=None):
    if fn is None:
        return None
    if callable(fn):
        val = fn(x) if n is None else fn(x, n)
    else:
        val = fn
    val = np.asarray(val, dtype=float)
    if val.shape == (2,):
        val = np.broadcast_to(val, x.shape)
    if val.shape != x.shape:
        val = val.T
    return val


def assemble_load(space: FESpace, rules: ElementRules, material: MaterialParams, stab: StabilizationParams,
                  f=None, g_N=None, g_D=None) -> np.ndarray:
    """L_h(v) = (f,v)_Ω + (g_N,v)_N − (g_D,σ(v)n)_D + β h⁻¹ b_h(g_D,v).

    ``f(x)`` maps points (m, 2) to values (m, 2); boundary data are called as
    ``g(x, n)`` with outward unit normals n.  Constant 2-vectors are accepted.
    """
    L = np.zeros(space.n_dofs)
    mu, lam = material.mu, material.lam
    if f is not None:
        for li, e in enumerate(space.mesh.elements):
            xi, w = rules.volume(li)
            fv = _call_field(f, space.to_element(e, xi))
            phi = shape_eval(space.family, space.p, xi, 0)
            np.add.at(L, space.cell_dofs[li], np.einsum("q,qi,qa->ia", w, phi, fv).ravel())
    if g_N is not None:
        for li, xi, x, w, nrm in _boundary_points(rules, Tag.NEUMANN):
            phi = shape_eval(space.family, space.p, xi, 0)
            g = _call_field(g_N, x, nrm)
            np.add.at(L, space.cell_dofs[li], np.einsum("q,qi,qa->ia", w, phi, g).ravel())
    if g_D is not None:
        h = space.h
        for li, xi, x, w, nrm in _boundary_points(rules, Tag.DIRICHLET):
            k = space.element_type(space.mesh.elements[li])
            phi = shape_eval(space.family, space.p, xi, 0)
            G = space.physical_gradients(k, xi)
            T = _traction(G, nrm, mu, lam)
            g = _call_field(g_D, x, nrm)
            gn = np.einsum("qa,qa->q", g, nrm)
            loc = -np.einsum("q,qa,qiba->ib", w, g, T, optimize=True)
            loc += (stab.beta / h) * (2 * mu * np.einsum("q,qa,qi->ia", w, g, phi)
                                      + lam * np.einsum("q,q,qi,qa->ia", w, gn, phi, nrm))
            np.add.at(L, space.cell_dofs[li], loc.ravel())
    return L


@dataclass
class AssembledSystem:
    space: FESpace
    rules: ElementRules
    material: MaterialParams
    stab: StabilizationParams
    a: sp.csr_matrix
    J: sp.csr_matrix
    M: sp.csr_matrix
    M_stab: sp.csr_matrix
    A: sp.csr_matrix
    L: np.ndarray
    free: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def A_nitsche(self):
        return self.A


def assemble_system(space: FESpace, material: MaterialParams = STEEL, stab: StabilizationParams | None = None,
                    f=None, g_N=None, g_D=None, free: bool | None = None, q: int | None = None,
                    rules: ElementRules | None = None) -> AssembledSystem:
    """Assemble every operator of the discrete problem on one space.

    ``free`` defaults to True when the geometry has no Dirichlet edges.
    """
    if stab is None:
        stab = StabilizationParams.defaults(material, space.p)
    if rules is None:
        rules = build_rules(space, q)
    if free is None:
        free = not np.any(space.mesh.rep.edge_tags == Tag.DIRICHLET)
    J = assemble_ghost_penalty(space, Which.ALL, rules.q)
    a = assemble_elastic_a(space, rules, material)
    M, Ms = assemble_mass(space, rules, material, stab, J)
    A = assemble_nitsche_A(space, rules, material, stab, a=a, J=J, free=free)
    L = assemble_load(space, rules, material, stab, f, g_N, None if free else g_D)
    return AssembledSystem(space, rules, material, stab, a, J, M, Ms, A, L, free)


def energy(u, a: sp.spmatrix) -> float:
    """E = ∫ σ(u):ε(u) = uᵀ a u with the unstabilized elastic matrix."""
    return float(u @ (a @ u))


def l2_error(space: FESpace, rules: ElementRules, u, exact) -> float:
    """‖u_h − u‖_{L²(Ω)} using the volume rules."""
    tot = 0.0
    for li, e in enumerate(space.mesh.elements):
        xi, w = rules.volume(li)
        phi = shape_eval(space.family, space.p, xi, 0)
        uh = phi @ u[space.cell_dofs[li]].reshape(-1, 2)
        ex = _call_field(exact, space.to_element(e, xi))
        tot += float(np.sum(w[:, None] * (uh - ex) ** 2))
    return float(np.sqrt(max(tot, 0.0)))


def field_norm(space: FESpace, rules: ElementRules, u) -> float:
    return l2_error(space, rules, u, lambda x: np.zeros_like(x))


def stress(material: MaterialParams, grad):
    """Plane-strain stress (…, 2, 2) from displacement gradients g[..., a, b] = ∂_b u_a."""
    eps = 0.5 * (grad + np.swapaxes(grad, -1, -2))
    tr = eps[..., 0, 0] + eps[..., 1, 1]
    sig = 2 * material.mu * eps
    sig[..., 0, 0] += material.lam * tr
    sig[..., 1, 1] += material.lam * tr
    return sig


def von_mises(material: MaterialParams, grad):
    """Plane-strain von Mises stress with σ_zz = ν(σ_xx + σ_yy)."""
    s = stress(material, grad)
    sxx, syy, sxy = s[..., 0, 0], s[..., 1, 1], s[..., 0, 1]
    szz = material.nu * (sxx + syy)
    return np.sqrt(0.5 * ((sxx - syy) ** 2 + (syy - szz) ** 2 + (szz - sxx) ** 2) + 3 * sxy**2)


# ---------------------------------------------------------------- interface coupling


def _interface_points(space: FESpace, rules: ElementRules, other: FESpace, q: int, only_shared: bool = True):
    """Interface quadrature from ``space``'s INTERFACE segments, split at ``other``'s grid lines.

    With ``only_shared`` segments whose midpoint is not on the boundary of
    ``other``'s body are skipped, so a body with several neighbours couples
    each pair only along their common interface.  Yields (li_self, li_other,
    xi_self, xi_other, w, n) with n the outward normal of ``space``'s body.
    """
    mesh = space.mesh
    s, ws = gauss_01(max(1, (q + 2) // 2))
    for e, reg in mesh.regions.items():
        li = int(mesh.local_index[e])
        sa, sb, _ = reg.segments((Tag.INTERFACE,))
        if only_shared and len(sa):
            on = point_in_domain(other.mesh.rep, 0.5 * (sa + sb)) == Location.ON_BOUNDARY
            sa, sb = sa[on], sb[on]
        for a, b in zip(sa, sb):
            d = b - a
            length = float(np.hypot(*d))
            if length == 0:
                continue
            n = np.array([d[1], -d[0]]) / length
            ts, hosts = split_segment(other.bg, a, b)
            for t0, t1, e2 in zip(ts[:-1], ts[1:], hosts):
                li2 = other.mesh.local_index[e2] if e2 >= 0 else -1
                if li2 < 0:
                    raise CoverageError("interface segment leaves the active mesh of the neighbouring body")
                x = a[None, :] + (t0 + s[:, None] * (t1 - t0)) * d[None, :]
                w = ws * length * (t1 - t0)
                yield li, int(li2), space.to_reference(e, x), other.to_reference(other.mesh.elements[li2], x), w, \
                    np.broadcast_to(n, x.shape)


def assemble_interface_nitsche(space1: FESpace, rules1: ElementRules, space2: FESpace, mat1: MaterialParams,
                               mat2: MaterialParams, gamma_d: float, weighted: bool = False) -> sp.csr_matrix:
    """Coupling matrix on the stacked DOF vector [u1, u2] for [u] = u1 − u2 on Γ₁₂.

    −(⟨σ(u)n⟩,[v]) − ([u],⟨σ(v)n⟩) + penalty, with ½/½ averages and n the
    outward normal of body 1.  The penalty is γ h⁻¹ (2μ̂[u]·[v] + λ̂[u·n][v·n])
    with μ̂, λ̂ the larger of the two materials when ``weighted``, and the plain
    γ h⁻¹([u],[v]) otherwise.
    """
    n1, n2 = space1.n_dofs, space2.n_dofs
    h = min(space1.h, space2.h)
    q = rules1.q
    mu_hat, lam_hat = max(mat1.mu, mat2.mu), max(mat1.lam, mat2.lam)
    dofs, mats = [], []
    for li1, li2, xi1, xi2, w, nrm in _interface_points(space1, rules1, space2, q):
        k1 = space1.element_type(space1.mesh.elements[li1])
        k2 = space2.element_type(space2.mesh.elements[li2])
        phi1 = shape_eval(space1.family, space1.p, xi1, 0)
        phi2 = shape_eval(space2.family, space2.p, xi2, 0)
        T1 = _traction(space1.physical_gradients(k1, xi1), nrm, mat1.mu, mat1.lam)
        T2 = _traction(space2.physical_gradients(k2, xi2), nrm, mat2.mu, mat2.lam)
        nq = len(w)
        # jump values V[q, (i,b), a] and averaged tractions S[q, (i,b), a]
        m1, m2 = phi1.shape[1], phi2.shape[1]
        V = np.zeros((nq, 2 * (m1 + m2), 2))
        S = np.zeros_like(V)
        for c in range(2):
            V[:, c : 2 * m1 : 2, c] = phi1
            V[:, 2 * m1 + c :: 2, c] = -phi2
        S[:, : 2 * m1, :] = 0.5 * T1.reshape(nq, 2 * m1, 2)
        S[:, 2 * m1 :, :] = 0.5 * T2.reshape(nq, 2 * m2, 2)
        N = np.einsum("q,qia,qja->ij", w, V, S)
        if weighted:
            Vn = np.einsum("qia,qa->qi", V, nrm)
            P = 2 * mu_hat * np.einsum("q,qia,qja->ij", w, V, V) + lam_hat * np.einsum("q,qi,qj->ij", w, Vn, Vn)
        else:
            P = np.einsum("q,qia,qja->ij", w, V, V)
        mats.append(-N - N.T + (gamma_d / h) * P)
        dofs.append(np.concatenate([space1.cell_dofs[li1], n1 + space2.cell_dofs[li2]]))
    return _scatter(dofs, mats, n1 + n2)


def interface_jump_norm(space1: FESpace, rules1: ElementRules, space2: FESpace, u1, u2) -> float:
    """‖u1 − u2‖_{L²(Γ₁₂)}."""
    tot = 0.0
    for li1, li2, xi1, xi2, w, _ in _interface_points(space1, rules1, space2, rules1.q):
        v1 = shape_eval(space1.family, space1.p, xi1, 0) @ u1[space1.cell_dofs[li1]].reshape(-1, 2)
        v2 = shape_eval(space2.family, space2.p, xi2, 0) @ u2[space2.cell_dofs[li2]].reshape(-1, 2)
        tot += float(np.sum(w[:, None] * (v1 - v2) ** 2))
    return float(np.sqrt(tot))


def write_coo(path, B):
    """Matrix export as 'row col value' lines (0-based)."""
    C = sp.coo_matrix(B)
    with open(path, "w") as fh:
        fh.write(f"# {C.shape[0]} {C.shape[1]} {C.nnz}\n")
        for r, c, v in zip(C.row, C.col, C.data):
            fh.write(f"{r} {c} {v:.17g}\n")


__all__ = [
    "AssembledSystem", "ElementRules", "MaterialParams", "STEEL", "StabilizationParams", "Variant", "Which",
    "assemble_elastic_a", "assemble_ghost_penalty", "assemble_interface_nitsche", "assemble_load", "assemble_mass",
    "assemble_nitsche_A", "assemble_system", "build_rules", "energy", "l2_error", "stress", "von_mises",
    "write_coo", "GeometryError", "directional_derivative",
]
