"""Embedded straight fibres acting as trusses (axial) and Euler-Bernoulli beams (bending).

Both act on the bulk displacement space.  The beam term is a C0 interior
penalty discretisation: element-wise second derivatives along the fibre plus
consistency and penalty terms at the points where the fibre crosses faces.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .geometry import GeometryError
from .mesh import CoverageError, Family, split_segment
from .quadrature import gauss_01
from .space import FESpace, directional_derivative, shape_eval


class UnsupportedFibreError(GeometryError):
    pass


@dataclass(frozen=True)
class FibreSpec:
    a: tuple
    b: tuple
    t: float
    E: float
    truss: bool = True
    beam: bool = False
    beta_b: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))
        object.__setattr__(self, "b", tuple(float(v) for v in self.b))
        if not self.t > 0 or not self.E > 0:
            raise ValueError("fibre thickness and modulus must be positive")
        if self.length == 0:
            raise ValueError("fibre endpoints coincide")

    @property
    def length(self) -> float:
        return float(np.hypot(self.b[0] - self.a[0], self.b[1] - self.a[1]))

    @property
    def A(self) -> float:
        return self.t

    @property
    def I(self) -> float:  # noqa: E743
        return self.t**3 / 12.0

    @property
    def tangent(self) -> np.ndarray:
        d = np.subtract(self.b, self.a)
        return d / np.hypot(*d)

    @property
    def normal(self) -> np.ndarray:
        tx, ty = self.tangent
        return np.array([-ty, tx])

    def penalty(self, p: int) -> float:
        return 10.0 * p**2 if self.beta_b is None else float(self.beta_b)


@dataclass
class FibreMeshData:
    """Sub-segments (s0, s1, local element) in arclength and crossing points (s, left, right)."""

    fibre: FibreSpec
    pieces: list = field(default_factory=list)
    points: list = field(default_factory=list)

    @property
    def total_length(self) -> float:
        return float(sum(s1 - s0 for s0, s1, _ in self.pieces))


def _on_grid_line(space: FESpace, fibre: FibreSpec, tol=1e-10) -> bool:
    bg = space.bg
    ga, gb = bg.to_grid(np.array(fibre.a)), bg.to_grid(np.array(fibre.b))
    for c in range(2):
        if abs(ga[c] - gb[c]) < tol and abs(ga[c] - round(ga[c])) < tol:
            return True
    if bg.family is Family.TRI:
        sa, sb = ga[0] - ga[1], gb[0] - gb[1]
        if abs(sa - sb) < tol and abs(sa - round(sa)) < tol:
            return True
    return False


def decompose_fibre(space: FESpace, fibre: FibreSpec) -> FibreMeshData:
    if _on_grid_line(space, fibre):
        raise UnsupportedFibreError("fibre runs along a mesh face")
    a = np.array(fibre.a)
    b = np.array(fibre.b)
    ts, hosts = split_segment(space.bg, a, b)
    L = fibre.length
    lis = []
    for e in hosts:
        li = space.mesh.local_index[e] if e >= 0 else -1
        if li < 0:
            raise CoverageError("fibre leaves the active mesh")
        lis.append(int(li))
    data = FibreMeshData(fibre)
    for k, li in enumerate(lis):
        data.pieces.append((ts[k] * L, ts[k + 1] * L, li))
    for k in range(1, len(lis)):
        data.points.append((ts[k] * L, lis[k - 1], lis[k]))
    return data


def _eval(space: FESpace, li: int, x, g, l):
    e = space.mesh.elements[li]
    _, Jinv, _ = space.jacobian(space.element_type(e))
    xi = space.to_reference(e, x)
    if l == 0:
        return shape_eval(space.family, space.p, xi, 0)
    return directional_derivative(space.family, space.p, xi, Jinv @ g, l)


def _vec(vals, d):
    """Scalar basis values (nq, n) times fixed direction d → (nq, 2n) interleaved."""
    out = np.empty((vals.shape[0], 2 * vals.shape[1]))
    out[:, 0::2] = vals * d[0]
    out[:, 1::2] = vals * d[1]
    return out


def _pieces_quadrature(space: FESpace, data: FibreMeshData):
    f = data.fibre
    a = np.array(f.a)
    tvec = f.tangent
    s, w = gauss_01(space.p + 1)
    for s0, s1, li in data.pieces:
        arc = s0 + s * (s1 - s0)
        yield li, a[None, :] + arc[:, None] * tvec[None, :], w * (s1 - s0), arc


def _assemble(space: FESpace, dofs, mats):
    n = space.n_dofs
    if not mats:
        return sp.csr_matrix((n, n))
    rows = np.concatenate([np.repeat(d, len(d)) for d in dofs])
    cols = np.concatenate([np.tile(d, len(d)) for d in dofs])
    vals = np.concatenate([m.ravel() for m in mats])
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def assemble_truss(space: FESpace, data: FibreMeshData) -> sp.csr_matrix:
    """b(v,w) = (E A ∂_t(v·t), ∂_t(w·t))_Σ."""
    f = data.fibre
    tv = f.tangent
    dofs, mats = [], []
    for li, x, w, _ in _pieces_quadrature(space, data):
        B = _vec(_eval(space, li, x, tv, 1), tv)
        mats.append(f.E * f.A * (B.T * w) @ B)
        dofs.append(space.cell_dofs[li])
    return _assemble(space, dofs, mats)


def beam_bending(space: FESpace, data: FibreMeshData) -> sp.csr_matrix:
    """Element-wise c(v,w) = (E I ∂²_tt(v·n), ∂²_tt(w·n))_Σ without point terms."""
    f = data.fibre
    tv, nv = f.tangent, f.normal
    dofs, mats = [], []
    for li, x, w, _ in _pieces_quadrature(space, data):
        C = _vec(_eval(space, li, x, tv, 2), nv)
        mats.append(f.E * f.I * (C.T * w) @ C)
        dofs.append(space.cell_dofs[li])
    return _assemble(space, dofs, mats)


def point_values(space: FESpace, data: FibreMeshData):
    """At each crossing point: (dofs, jump of ∂_t(v·n), average of ∂²_tt(v·n)) over the union of both hosts.

    The jump is the left limit minus the right limit (left = towards the
    fibre start), i.e. the outward-normal convention of the left piece.
    """
    f = data.fibre
    tv, nv = f.tangent, f.normal
    a = np.array(f.a)
    out = []
    for s, li_l, li_r in data.points:
        x = (a + s * tv)[None, :]
        d1l = _vec(_eval(space, li_l, x, tv, 1), nv)[0]
        d1r = _vec(_eval(space, li_r, x, tv, 1), nv)[0]
        d2l = _vec(_eval(space, li_l, x, tv, 2), nv)[0]
        d2r = _vec(_eval(space, li_r, x, tv, 2), nv)[0]
        dofs = np.concatenate([space.cell_dofs[li_l], space.cell_dofs[li_r]])
        jump = np.concatenate([d1l, -d1r])
        avg = 0.5 * np.concatenate([d2l, d2r])
        out.append((dofs, jump, avg))
    return out


def beam_point_terms(space: FESpace, data: FibreMeshData) -> sp.csr_matrix:
    """−⟨E I ∂²_tt(u·n)⟩[∂_t(v·n)] − (symmetric) + (β_b E I / h)[∂_t(u·n)][∂_t(v·n)] summed over crossings."""
    f = data.fibre
    EI = f.E * f.I
    beta = f.penalty(space.p)
    dofs, mats = [], []
    for d, jump, avg in point_values(space, data):
        K = -EI * (np.outer(jump, avg) + np.outer(avg, jump)) + (beta * EI / space.h) * np.outer(jump, jump)
        mats.append(K)
        dofs.append(d)
    return _assemble(space, dofs, mats)


def assemble_beam(space: FESpace, data: FibreMeshData) -> sp.csr_matrix:
    if space.p < 2:
        raise ValueError("beam fibres need polynomial order p >= 2")
    return (beam_bending(space, data) + beam_point_terms(space, data)).tocsr()


def fibre_load(space: FESpace, data: FibreMeshData, fvec) -> np.ndarray:
    """(A f, v)_Σ for a body force f(x) -> (m, 2) or a constant 2-vector."""
    L = np.zeros(space.n_dofs)
    A = data.fibre.A
    for li, x, w, _ in _pieces_quadrature(space, data):
        val = fvec(x) if callable(fvec) else np.broadcast_to(np.asarray(fvec, dtype=float), x.shape)
        phi = _eval(space, li, x, None, 0)
        np.add.at(L, space.cell_dofs[li], A * np.einsum("q,qi,qa->ia", w, phi, val).ravel())
    return L


def assemble_fibre_system(space: FESpace, A_bulk, L_bulk, fibres, f=None):
    """Total operator a_h + Σ(b + c) and load L + Σ (A f, v)_Σ; returns (A, L, per-fibre data)."""
    A = sp.csr_matrix(A_bulk)
    L = np.array(L_bulk, dtype=float)
    datas = []
    for fib in fibres:
        data = decompose_fibre(space, fib)
        datas.append(data)
        if fib.truss:
            A = A + assemble_truss(space, data)
        if fib.beam:
            A = A + assemble_beam(space, data)
        if f is not None and (fib.truss or fib.beam):
            L = L + fibre_load(space, data, f)
    return A.tocsr(), L, datas
