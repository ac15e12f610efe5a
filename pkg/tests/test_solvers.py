import itertools

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from viscodamage.assembly import LoadSpec, assemble_load, assemble_viscosity, gamma3_quadrature
from viscodamage.friction import FrictionModel
from viscodamage.material import MaterialParams
from viscodamage.solvers import (NonConvergenceError, SolverTolerances, box_kkt_residual, cg_solve,
                                 friction_energy, solve_box_qp, solve_velocity_step)
from viscodamage.spaces import build_velocity_dofmap

from conftest import square_mesh


def random_spd(rng, n, cond=50.0):
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    return q @ np.diag(np.geomspace(1.0, cond, n)) @ q.T


def box_qp_enumeration(H, b, lower, upper):
    """Try every lower/upper/free assignment and keep the one meeting the KKT conditions."""
    n = len(b)
    best = None
    for pattern in itertools.product((0, 1, 2), repeat=n):
        pattern = np.array(pattern)
        x = np.where(pattern == 0, lower, upper).astype(float)
        free = pattern == 2
        if free.any():
            rhs = b[free] - H[np.ix_(free, ~free)] @ x[~free]
            x[free] = np.linalg.solve(H[np.ix_(free, free)], rhs)
            if np.any(x[free] < lower - 1e-12) or np.any(x[free] > upper + 1e-12):
                continue
        g = H @ x - b
        if np.any(g[pattern == 0] < -1e-10) or np.any(g[pattern == 1] > 1e-10):
            continue
        energy = 0.5 * x @ H @ x - b @ x
        if best is None or energy < best[0]:
            best = (energy, x)
    return best[1]


def test_cg_matches_dense_solve(rng):
    A = random_spd(rng, 30, 1e3)
    b = rng.normal(size=30)
    x = cg_solve(sp.csr_matrix(A), b, tol=1e-12)
    assert np.allclose(x, np.linalg.solve(A, b), rtol=1e-9, atol=1e-9)
    assert np.array_equal(cg_solve(A, np.zeros(30)), np.zeros(30))


def test_cg_reports_failure(rng):
    A = random_spd(rng, 30, 1e6)
    with pytest.raises(NonConvergenceError) as info:
        cg_solve(A, rng.normal(size=30), tol=1e-14, maxiter=2)
    assert info.value.residual > 1e-14


@given(st.integers(1, 6), st.integers(0, 10**6), st.floats(0.1, 10))
@settings(max_examples=60, deadline=None)
def test_box_qp_matches_enumeration(n, seed, scale):
    rng = np.random.default_rng(seed)
    H = random_spd(rng, n, 20.0)
    b = scale * rng.normal(size=n)
    x = solve_box_qp(sp.csr_matrix(H), b, 0.0, 1.0, tol=1e-13)
    assert np.allclose(x, box_qp_enumeration(H, b, 0.0, 1.0), atol=1e-8)


def test_box_qp_eight_unknowns(rng):
    for _ in range(3):
        H = random_spd(rng, 8, 30.0)
        b = 3 * rng.normal(size=8)
        x = solve_box_qp(H, b, 0.0, 1.0, tol=1e-13)
        assert np.allclose(x, box_qp_enumeration(H, b, 0.0, 1.0), atol=1e-8)
        assert np.all((x >= 0) & (x <= 1))
        assert box_kkt_residual(sp.csr_matrix(H), b, x) < 1e-10


def test_box_qp_nonconvergence(rng):
    H = random_spd(rng, 8, 1e4)
    with pytest.raises(NonConvergenceError):
        solve_box_qp(H, rng.normal(size=8), tol=1e-14, maxiter=10, check_every=10)


def test_box_qp_rejects_bad_diagonal():
    with pytest.raises(ValueError):
        solve_box_qp(np.array([[0.0]]), np.array([1.0]))


def velocity_problem(bound):
    mesh = square_mesh("1/2")
    dm = build_velocity_dofmap(mesh)
    K = assemble_viscosity(mesh, dm, MaterialParams())
    return mesh, dm, K, gamma3_quadrature(mesh, dm), FrictionModel(bound)


def dual_oracle(K, rhs, g3, model, iters=200_000):
    """Projected (accelerated) gradient on the multipliers of the friction term.

    The velocity is ``K^{-1}(rhs - A' lam)`` with ``|lam_q| <= bound * weight_q``.
    """
    n = len(rhs)
    Kd = K.toarray()
    A = np.column_stack([g3.tangential(e).ravel() for e in np.eye(n)])
    cap = model.bound * g3.weights.ravel()
    Kinv = np.linalg.inv(Kd)
    G = A @ Kinv @ A.T
    step = 1.0 / np.linalg.eigvalsh(G).max()
    lam = np.zeros(len(cap))
    y, t = lam.copy(), 1.0
    base = A @ Kinv @ rhs
    for _ in range(iters):
        lam_new = np.clip(y + step * (base - G @ y), -cap, cap)
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        y = lam_new + (t - 1) / t_new * (lam_new - lam)
        lam, t = lam_new, t_new
    return Kinv @ (rhs - A.T @ lam)


@pytest.mark.parametrize("bound,seed", [(0.5, 0), (2.0, 1), (20.0, 2), (0.05, 3)])
def test_velocity_step_matches_dual_oracle(bound, seed):
    mesh, dm, K, g3, model = velocity_problem(bound)
    assert dm.n_free <= 12
    rng = np.random.default_rng(seed)
    rhs = assemble_load(LoadSpec(f2=(-1.4, -0.2)), mesh, dm) + 0.5 * rng.normal(size=dm.n_free)
    w = solve_velocity_step(K, rhs, g3, model)
    ref = dual_oracle(K, rhs, g3, model)
    assert np.allclose(w, ref, atol=1e-5)
    e = friction_energy(K, rhs, g3, model, w)
    e_ref = friction_energy(K, rhs, g3, model, ref)
    assert abs(e - e_ref) < 1e-8
    assert e <= e_ref + 1e-8


def test_velocity_step_beats_perturbations():
    mesh, dm, K, g3, model = velocity_problem(1.0)
    rhs = assemble_load(LoadSpec(f2=(-1.4, -0.2)), mesh, dm)
    w = solve_velocity_step(K, rhs, g3, model)
    e = friction_energy(K, rhs, g3, model, w)
    rng = np.random.default_rng(7)
    for _ in range(200):
        d = rng.normal(size=dm.n_free) * 10.0 ** rng.uniform(-6, -1)
        assert friction_energy(K, rhs, g3, model, w + d) >= e - 1e-12


def test_velocity_step_smooth_case_is_linear_solve():
    mesh, dm, K, g3, _ = velocity_problem(1.0)
    rhs = np.random.default_rng(3).normal(size=dm.n_free)
    w = solve_velocity_step(K, rhs, g3, FrictionModel(0.0))
    assert np.allclose(w, np.linalg.solve(K.toarray(), rhs), atol=1e-10)


def test_velocity_step_large_friction_sticks():
    mesh, dm, K, g3, model = velocity_problem(1e4)
    rhs = assemble_load(LoadSpec(f2=(-1.4, -0.2)), mesh, dm)
    w = solve_velocity_step(K, rhs, g3, model)
    assert np.abs(g3.tangential(w)).max() < 1e-8


def test_velocity_step_warm_start_agrees():
    mesh, dm, K, g3, model = velocity_problem(0.5)
    rhs = assemble_load(LoadSpec(f2=(-1.4, -0.2)), mesh, dm)
    cold = solve_velocity_step(K, rhs, g3, model)
    warm = solve_velocity_step(K, rhs, g3, model, w0=cold * 1.01)
    assert np.allclose(cold, warm, atol=1e-7)


def test_velocity_step_nonconvergence_raises():
    mesh, dm, K, g3, model = velocity_problem(2.0)
    rhs = assemble_load(LoadSpec(f2=(-1.4, -0.2)), mesh, dm)
    tol = SolverTolerances(newton_max_iters=1, newton_grad_tol=1e-15)
    with pytest.raises(NonConvergenceError):
        solve_velocity_step(K, rhs, g3, model, tol)


def test_tolerances_validated():
    with pytest.raises(ValueError):
        SolverTolerances(cg_rel_tol=0.0)
    with pytest.raises(ValueError):
        SolverTolerances(rho_schedule=())
