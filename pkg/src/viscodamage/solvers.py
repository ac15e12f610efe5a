"""Per-step solvers: Jacobi-CG for SPD systems, projected SOR for the damage
obstacle problem and regularized Newton for the frictional velocity problem."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numba
import numpy as np
import scipy.sparse as sp

from .assembly import Gamma3Quadrature
from .friction import DEFAULT_RHO_SCHEDULE, FrictionModel

log = logging.getLogger(__name__)


class NonConvergenceError(RuntimeError):
    def __init__(self, message, residual=None, step=None):
        self.residual = residual
        self.step = step
        super().__init__(message)


@dataclass(frozen=True)
class SolverTolerances:
    cg_rel_tol: float = 1e-12
    qp_rel_tol: float = 1e-10
    newton_grad_tol: float = 1e-9
    cg_max_iters: int = 20000
    qp_max_iters: int = 200000
    newton_max_iters: int = 100
    rho_schedule: tuple = DEFAULT_RHO_SCHEDULE
    sor_omega: float = 1.5

    def __post_init__(self):
        for name in ("cg_rel_tol", "qp_rel_tol", "newton_grad_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.rho_schedule or min(self.rho_schedule) <= 0:
            raise ValueError("rho schedule must be a non-empty list of positive values")


@numba.njit(cache=True)
def _pcg(indptr, indices, data, b, x, rtol, maxiter):
    """Jacobi-preconditioned CG on a CSR matrix; stops on the true residual."""
    n = b.shape[0]
    diag = np.zeros(n)
    for i in range(n):
        for p in range(indptr[i], indptr[i + 1]):
            if indices[p] == i:
                diag[i] += data[p]
    r = np.empty(n)
    for i in range(n):
        s = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            s += data[p] * x[indices[p]]
        r[i] = b[i] - s
    bnorm = np.sqrt(np.dot(b, b))
    target = rtol * bnorm
    z = r / diag
    d = z.copy()
    rz = np.dot(r, z)
    q = np.empty(n)
    it = 0
    rnorm = np.sqrt(np.dot(r, r))
    while rnorm > target and it < maxiter:
        dq = 0.0
        for i in range(n):
            s = 0.0
            for p in range(indptr[i], indptr[i + 1]):
                s += data[p] * d[indices[p]]
            q[i] = s
            dq += d[i] * s
        if dq <= 0.0:
            break
        alpha = rz / dq
        rz_new = 0.0
        rr = 0.0
        for i in range(n):
            x[i] += alpha * d[i]
            r[i] -= alpha * q[i]
            z[i] = r[i] / diag[i]
            rz_new += r[i] * z[i]
            rr += r[i] * r[i]
        beta = rz_new / rz
        for i in range(n):
            d[i] = z[i] + beta * d[i]
        rz = rz_new
        rnorm = np.sqrt(rr)
        it += 1
    return it, rnorm


def cg_solve(A, b, tol=1e-12, maxiter=20000, x0=None, raise_on_fail=True):
    """Jacobi-preconditioned conjugate gradients with ``|Ax - b| <= tol |b|``."""
    b = np.asarray(b, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b)
    A = sp.csr_matrix(A, dtype=float)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    _, rnorm = _pcg(A.indptr.astype(np.int64), A.indices.astype(np.int64), A.data, b, x, tol, maxiter)
    if raise_on_fail and not rnorm <= tol * bnorm:
        raise NonConvergenceError(
            f"CG did not converge in {maxiter} iterations: relative residual "
            f"{rnorm / bnorm:.3e} > {tol:.1e}", residual=rnorm / bnorm)
    return x


@numba.njit(cache=True)
def _psor_sweeps(indptr, indices, data, diag, b, x, lower, upper, omega, sweeps):
    n = x.shape[0]
    for _ in range(sweeps):
        for i in range(n):
            s = b[i]
            for p in range(indptr[i], indptr[i + 1]):
                s -= data[p] * x[indices[p]]
            # s = b_i - (Hx)_i including the diagonal term
            xi = x[i] + omega * s / diag[i]
            if xi < lower:
                xi = lower
            elif xi > upper:
                xi = upper
            x[i] = xi


def box_kkt_residual(H, b, x, lower=0.0, upper=1.0) -> float:
    """Norm of the projected gradient of ``0.5 x'Hx - b'x`` on the box."""
    g = H @ x - b
    pg = np.where(x <= lower, np.minimum(g, 0.0), np.where(x >= upper, np.maximum(g, 0.0), g))
    return float(np.linalg.norm(pg))


def solve_box_qp(H, b, lower=0.0, upper=1.0, tol=1e-10, x0=None, omega=1.5,
                 maxiter=200000, check_every=10):
    """Minimize ``0.5 x'Hx - b'x`` over ``lower <= x <= upper`` by projected SOR."""
    H = sp.csr_matrix(H, dtype=float)
    H.sort_indices()
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    x = np.clip(np.zeros(n) if x0 is None else np.array(x0, dtype=float), lower, upper)
    diag = H.diagonal()
    if np.any(diag <= 0):
        raise ValueError("box QP matrix must have a positive diagonal")
    scale = max(np.linalg.norm(b), 1e-300)
    indptr = H.indptr.astype(np.int64)
    indices = H.indices.astype(np.int64)
    done = 0
    res = box_kkt_residual(H, b, x, lower, upper)
    while res > tol * scale:
        if done >= maxiter:
            raise NonConvergenceError(
                f"projected SOR did not converge in {maxiter} sweeps "
                f"(KKT residual {res / scale:.3e})", residual=res / scale)
        _psor_sweeps(indptr, indices, H.data, diag, b, x, lower, upper, omega, check_every)
        done += check_every
        res = box_kkt_residual(H, b, x, lower, upper)
    return x


@dataclass
class VelocityStepInfo:
    newton_iters: int
    cg_iters: int
    final_rho: float
    grad_norm: float


def friction_energy(K, rhs, gamma3: Gamma3Quadrature | None, model: FrictionModel, w, rho=None):
    """``0.5 w'Kw - rhs'w + int_Gamma3 j(w_t)``; smoothed when ``rho`` is given."""
    e = 0.5 * w @ (K @ w) - rhs @ w
    if gamma3 is not None and not gamma3.empty:
        e += gamma3.exact_energy(w, model) if rho is None else gamma3.energy(w, model, rho)
    return float(e)


def solve_velocity_step(K, rhs, gamma3: Gamma3Quadrature | None, model: FrictionModel,
                        tol: SolverTolerances = SolverTolerances(), w0=None, info=None):
    """Minimize the per-step energy with the friction term smoothed and ``rho -> 0``.

    Newton with Armijo backtracking at each ``rho`` in ``tol.rho_schedule``;
    gradient steps are used whenever the Newton direction fails to descend.
    """
    rhs = np.asarray(rhs, dtype=float)
    n = rhs.shape[0]
    smooth = gamma3 is None or gamma3.empty or model.bound == 0.0
    if smooth:
        w = cg_solve(K, rhs, tol.cg_rel_tol, tol.cg_max_iters, x0=w0)
        if info is not None:
            info.append(VelocityStepInfo(0, 0, 0.0, float(np.linalg.norm(K @ w - rhs))))
        return w

    scale = max(1.0, np.linalg.norm(rhs))
    gtol = tol.newton_grad_tol * scale
    w = np.zeros(n) if w0 is None else np.array(w0, dtype=float)
    contact = np.unique(gamma3.dofs[gamma3.dofs >= 0])
    # warm starts come from a converged solve at the last (smallest) rho
    rho_w = min(tol.rho_schedule) if w0 is not None else None
    total_newton = 0
    for rho in tol.rho_schedule:
        if rho_w is not None:
            _rescale_stuck(w, contact, rho_w, rho)
        rho_w = rho
        def energy(v):
            return 0.5 * v @ (K @ v) - rhs @ v + gamma3.energy(v, model, rho)

        def gradient(v):
            gj, Hj = gamma3.gradient_hessian(v, model, rho, n)
            return K @ v - rhs + gj, Hj

        e = energy(w)
        g, Hj = gradient(w)
        gnorm = np.linalg.norm(g)
        for _ in range(tol.newton_max_iters):
            if gnorm <= gtol:
                break
            H = (K + Hj).tocsr()
            d = _newton_direction(H, g, gnorm, gtol, scale)
            slope = g @ d
            if not np.isfinite(slope) or slope >= 0:
                log.debug("newton direction not descending at rho=%g; gradient step", rho)
                d = -g / H.diagonal()
                slope = g @ d
            t = 1.0
            while True:
                w_new = w + t * d
                e_new = energy(w_new)
                g_new, Hj_new = gradient(w_new)
                gn_new = np.linalg.norm(g_new)
                if e_new <= e + 1e-4 * t * slope:
                    break
                # energy differences below round-off: fall back to the gradient norm
                if abs(e_new - e) <= 1e-13 * (abs(e) + 1.0) and gn_new < gnorm:
                    break
                t *= 0.5
                if t < 1e-12:
                    raise NonConvergenceError(
                        f"line search failed at rho={rho:g}: |grad|={gnorm:.3e}", residual=gnorm)
            w, e, g, Hj, gnorm = w_new, e_new, g_new, Hj_new, gn_new
            total_newton += 1
        else:
            raise NonConvergenceError(
                f"Newton did not converge at rho={rho:g}: |grad|={gnorm:.3e} > {gtol:.3e}",
                residual=gnorm)
    w = _polish_sticking(K, rhs, gamma3, model, w, contact, rho, tol)
    if info is not None:
        info.append(VelocityStepInfo(total_newton, 0, rho, float(gnorm)))
    return w


def _polish_sticking(K, rhs, gamma3, model, w, contact, rho, tol):
    """Remove the smoothing bias left by the final ``rho``.

    Sticking contact unknowns are set to zero and the remaining problem, which
    is quadratic once the slip directions are frozen, is solved to CG accuracy. The
    result replaces ``w`` only if the slip signs stay consistent and the exact
    energy does not increase.
    """
    stuck = contact[np.abs(w[contact]) <= 10.0 * rho]
    trial = w.copy()
    trial[stuck] = 0.0
    sign = np.sign(gamma3.tangential(trial))
    keep = np.ones(len(w), dtype=bool)
    keep[stuck] = False
    K = sp.csr_matrix(K)
    b = rhs - gamma3.linear_form(model.bound * sign, len(w))
    Kff = K[keep][:, keep]
    trial[keep] = cg_solve(Kff, b[keep], tol.cg_rel_tol, tol.cg_max_iters, x0=w[keep],
                           raise_on_fail=False)
    s_new = gamma3.tangential(trial)
    if np.any(s_new * sign < 0) or np.any((sign == 0) & (s_new != 0)):
        return w
    if friction_energy(K, rhs, gamma3, model, trial) > friction_energy(K, rhs, gamma3, model, w):
        return w
    return trial


def _rescale_stuck(w, contact, rho_old, rho_new):
    """Keep ``s / rho`` fixed on sticking contact unknowns when rho changes.

    Sticking tangential speeds scale like rho, so this puts the iterate close
    to the next smoothed minimizer instead of far outside its sticking zone.
    """
    stuck = contact[np.abs(w[contact]) <= 10.0 * rho_old]
    w[stuck] *= rho_new / rho_old


def _newton_direction(H, g, gnorm, gtol, scale):
    # inexact Newton with a quadratic forcing term, floored by the stopping test
    eta = max(min(0.1, gnorm / scale), 0.1 * gtol / gnorm)
    return cg_solve(H, -g, eta, maxiter=50 * H.shape[0] + 100, raise_on_fail=False)
