import math

import numpy as np
import pytest

from cutfem.fibre import (FibreSpec, UnsupportedFibreError, assemble_beam, assemble_fibre_system, assemble_truss,
                          decompose_fibre, fibre_load)
from cutfem.geometry import rectangle
from cutfem.mesh import build_active_mesh, build_background
from cutfem.scenarios.reinforcement import cdg_jump_residual
from cutfem.space import FESpace


def space(family="quad", p=2, theta=0.0, h=0.25):
    rep = rectangle(0, 0, 4, 1, dirichlet=("left",))
    return FESpace(build_active_mesh(build_background(family, rep.bbox, h, theta), rep), p)


def test_spec_properties():
    f = FibreSpec((0, 0), (3, 4), t=0.2, E=5.0, beam=True)
    assert f.length == 5.0
    assert f.A == 0.2 and f.I == pytest.approx(0.2**3 / 12)
    np.testing.assert_allclose(f.tangent, [0.6, 0.8])
    np.testing.assert_allclose(f.normal, [-0.8, 0.6])
    assert f.penalty(3) == 90.0
    with pytest.raises(ValueError):
        FibreSpec((0, 0), (0, 0), 0.1, 1.0)


@pytest.mark.parametrize("family", ["quad", "tri"])
def test_decomposition_covers_fibre(family):
    V = space(family, theta=0.2)
    f = FibreSpec((0.1, 0.3), (3.7, 0.81), 0.1, 1.0)
    d = decompose_fibre(V, f)
    assert d.total_length == pytest.approx(f.length, rel=1e-12)
    assert len(d.points) == len(d.pieces) - 1


def test_fibre_on_grid_line_rejected():
    with pytest.raises(UnsupportedFibreError):
        decompose_fibre(space(), FibreSpec((0.0, 0.5), (4.0, 0.5), 0.1, 1.0))


def test_truss_energy_of_uniform_stretch():
    V = space(p=1)
    f = FibreSpec((0.1, 0.3), (3.9, 0.6), 0.1, 7.0)
    K = assemble_truss(V, decompose_fibre(V, f))
    eps = 1e-3
    u = V.interpolate(lambda x, y: (eps * x, eps * y))  # ∂_t(u·t) = eps for any direction
    assert u @ (K @ u) == pytest.approx(f.E * f.A * eps**2 * f.length, rel=1e-10)


@pytest.mark.parametrize("family", ["quad", "tri"])
def test_beam_bending_energy_of_quadratic_deflection(family):
    # u·n = κ s²/2 along a horizontal fibre gives ∫ EI (u·n)'' ² = EI κ² L
    V = space(family, p=2)
    f = FibreSpec((0.13, 0.41), (3.87, 0.41), 0.1, 1e3, truss=False, beam=True)
    K = assemble_beam(V, decompose_fibre(V, f))
    k = 0.01
    u = V.interpolate(lambda x, y: (0 * x, 0.5 * k * x**2))
    assert u @ (K @ u) == pytest.approx(f.E * f.I * k**2 * f.length, rel=1e-8)


@pytest.mark.parametrize("family", ["quad", "tri"])
def test_cdg_terms_vanish_for_linear_fields(family):
    V = space(family, p=2, theta=0.1)
    jump, term = cdg_jump_residual(V, FibreSpec((0.1, 0.45), (3.9, 0.55), 0.1, 1e6, beam=True))
    assert jump <= 1e-12
    assert term <= 1e-18


def test_fibre_load_total():
    V = space()
    f = FibreSpec((0.1, 0.3), (3.9, 0.6), 0.1, 1.0)
    L = fibre_load(V, decompose_fibre(V, f), np.array([0.0, -2.0]))
    assert L[1::2].sum() == pytest.approx(-2.0 * f.A * f.length, rel=1e-12)
    assert abs(L[0::2].sum()) < 1e-14


def test_system_assembly_adds_stiffness():
    import scipy.sparse as sp
    V = space()
    A0 = sp.csr_matrix((V.n_dofs, V.n_dofs))
    f = FibreSpec((0.1, 0.3), (3.9, 0.6), 0.1, 1.0, beam=True)
    A, L, datas = assemble_fibre_system(V, A0, np.zeros(V.n_dofs), [f], f=np.array([0.0, -1.0]))
    assert len(datas) == 1 and A.nnz > 0 and L.sum() < 0
