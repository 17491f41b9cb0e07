import math

import numpy as np
import pytest

from cutfem.forms import STEEL, MaterialParams
from cutfem.geometry import rectangle, ring
from cutfem.linalg import solve_spd
from cutfem.scenarios import common, compound, dynamics, manufactured, reinforcement, thin
from cutfem.scenarios.conditioning import MeshVariant, condition_row


def test_loglog_fit_and_rates():
    h = np.array([0.1, 0.05, 0.025])
    s, r = common.loglog_fit(h, 3 * h**2.5)
    assert s == pytest.approx(2.5) and r < 1e-12
    rates = common.pairwise_rates(h, h**2)
    assert rates[0] is None and rates[1] == pytest.approx(2.0)


def test_manufactured_body_force_against_finite_differences():
    assert manufactured.check_body_force(n_points=30) <= 1e-5


def test_manufactured_traction_consistent_with_gradient():
    x = np.array([[0.3, 0.7], [0.9, 0.1]])
    n = np.array([[1.0, 0.0], [0.0, 1.0]])
    from cutfem.forms import stress
    sig = stress(STEEL, manufactured.exact_grad(x))
    np.testing.assert_allclose(manufactured.traction(STEEL)(x, n), np.einsum("qab,qb->qa", sig, n))


def test_manufactured_converges_on_coarse_meshes():
    recs, (slope, _) = manufactured.converge([1 / 4, 1 / 8, 1 / 16], 2, "tri", math.pi / 7)
    assert slope == pytest.approx(3.0, abs=0.35)
    assert recs[-1].l2_error < recs[0].l2_error


def test_refinement_factor():
    assert dynamics.refinement_factor(0.1, 0.1 / 3) == 3
    with pytest.raises(ValueError):
        dynamics.refinement_factor(0.1, 0.04)


@pytest.mark.parametrize("family", ["quad", "tri"])
def test_prolongation_exact_for_coarse_polynomials(family):
    rep = ring(0.5, 1.0, segments=24)
    prH = common.build_space(rep, family, 0.2, 2, theta=0.3)
    prh = common.build_space(rep, family, 0.1, 2, bg=dynamics._nested_background(prH.bg, 2))
    f = lambda x, y: (x * x - y, 2 * x * y + 1)
    uh = dynamics.prolongate(prH.space, prh.space, prH.space.interpolate(f))
    np.testing.assert_allclose(uh, prh.space.interpolate(f), atol=1e-12)


def test_sweep_zero_frequency_equals_static():
    pr = dynamics.sweep_problem(h=0.1, p=1)
    rec = dynamics.frequency_sweep([0.0], pr)[0]
    u = solve_spd(pr.system.A, pr.system.L)
    assert rec.energy == float(u @ (pr.system.a @ u))


def test_two_grid_clamped_improves():
    rep = rectangle(0, 0, 3, 0.3, dirichlet=("left",))
    r = dynamics.two_grid_eigen(rep, 0.15, 0.075, mode=1, p=2)
    assert not r.free
    assert abs(r.lam_two_grid - r.lam_direct) <= 0.25 * abs(r.lam_H - r.lam_direct)


def test_condition_row_stabilization_helps():
    row = condition_row(1, 0.2, MeshVariant.SLIVER, delta=1e-3)
    assert row.A_stab_precond < row.A_precond < row.A_plain


def test_compound_halves_matches_single_body():
    r = compound.manufactured_halves(1 / 8, 2, (0.0, 0.3))
    assert r["compound_error"] <= 2.0 * r["single_error"]
    assert r["jump"] <= 1e-3 * r["norm"]


def test_ring_torque_balance():
    f = thin.centrifugal_load(STEEL, 100.0, (0.1, -0.2))
    pts = np.random.default_rng(0).random((50, 2))
    fv = f(pts)
    r = pts - [0.1, -0.2]
    np.testing.assert_allclose(r[:, 0] * fv[:, 1] - r[:, 1] * fv[:, 0], 0, atol=1e-6)


def test_thin_cantilever_orders():
    r1 = thin.cantilever(1, h=0.1)[2]
    r2 = thin.cantilever(2, h=0.1)[2]
    ref = r2.extra["beam_theory"]
    assert abs(r2.indicator - ref) < abs(r1.indicator - ref)


def test_reinforcement_energy_balance_and_monotone():
    pr = reinforcement.bulk_problem(h=0.25, p=2)
    recs = [reinforcement.solve_config(pr, reinforcement.CONFIGS[c](), name=c)[0] for c in ("bulk", "trusses")]
    assert recs[1].compliance < recs[0].compliance
    for r in recs:
        assert r.balance_error <= 1e-8
