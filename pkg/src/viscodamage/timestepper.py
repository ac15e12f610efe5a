"""Fully discrete evolution: backward Euler for the damage, a frictional
velocity problem per step, and displacement by accumulation of velocities."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .assembly import (LoadSpec, assemble_damage_operators, assemble_damage_source,
                       assemble_elastic_residual, assemble_load, assemble_viscosity,
                       elastic_stress, error_norms, gamma3_quadrature, strain)
from .friction import FrictionModel
from .material import MaterialParams, apply_viscosity_A
from .mesh import BoundarySpec, Mesh, build_structured_mesh, classify_boundary
from .solvers import NonConvergenceError, SolverTolerances, solve_box_qp, solve_velocity_step
from .spaces import DofMap, build_velocity_dofmap, interpolate_scalar, interpolate_vector

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TimeGrid:
    T: float
    N: int

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("time grid needs N >= 1")
        if not self.T > 0:
            raise ValueError("final time must be positive")

    @property
    def k(self) -> float:
        return self.T / self.N

    def t(self, n: int) -> float:
        return n * self.T / self.N

    @classmethod
    def from_step(cls, T, k) -> "TimeGrid":
        n = Fraction(T).limit_denominator(1 << 20) / Fraction(k).limit_denominator(1 << 20)
        if n.denominator != 1:
            raise ValueError(f"step k={k} does not divide T={T}")
        return cls(float(T), int(n))


@dataclass
class TimeState:
    n: int
    t: float
    u: np.ndarray
    zeta: np.ndarray
    w: np.ndarray | None = None
    sigma: np.ndarray | None = None
    # u0 and the running velocity sum give u_n = u0 + k * sum(w_i)
    u0: np.ndarray | None = None
    w_sum: np.ndarray | None = None


def zero_field(x, y):
    return (np.zeros_like(x), np.zeros_like(x))


@dataclass(eq=False)
class Problem:
    """Mesh, constrained spaces and all time-independent assembled operators."""

    mesh: Mesh
    dofmap: DofMap
    params: MaterialParams
    friction: FrictionModel
    load: LoadSpec
    grid: TimeGrid
    tolerances: SolverTolerances = field(default_factory=SolverTolerances)
    elasticity: str = "linear"

    def __post_init__(self):
        self.K = assemble_viscosity(self.mesh, self.dofmap, self.params)
        self.M, self.S = assemble_damage_operators(self.mesh, self.params)
        self.H = (self.M / self.grid.k + self.S).tocsr()
        self.gamma3 = gamma3_quadrature(self.mesh, self.dofmap)
        self.f = assemble_load(self.load, self.mesh, self.dofmap)

    @classmethod
    def build(cls, width, height, h, boundary: BoundarySpec, params, friction, load, grid,
              tolerances=None, elasticity="linear") -> "Problem":
        mesh = classify_boundary(build_structured_mesh(width, height, h), boundary)
        return cls(mesh, build_velocity_dofmap(mesh), params, friction, load, grid,
                   tolerances or SolverTolerances(), elasticity)

    def load_at(self, t: float) -> np.ndarray:
        # loads are constant in time; hook for re-assembly
        return self.f

    def initial_state(self, u0=zero_field, zeta0=1.0) -> TimeState:
        u = interpolate_vector(self.mesh, self.dofmap, u0)
        if callable(zeta0):
            z = interpolate_scalar(self.mesh, zeta0)
        else:
            z = np.full(self.mesh.n_vertices, float(zeta0))
        if np.any(z < 0.0) or np.any(z > 1.0):
            warnings.warn("initial damage outside [0, 1]; clamping", RuntimeWarning, stacklevel=2)
            z = np.clip(z, 0.0, 1.0)
        return TimeState(0, 0.0, u, z, u0=u, w_sum=np.zeros_like(u))

    def stress(self, w_nodal, u_prev, zeta_prev) -> np.ndarray:
        """Elementwise stress from the velocity and the lagged displacement and damage."""
        visc = apply_viscosity_A(strain(self.mesh, w_nodal), self.params)
        return visc + elastic_stress(self.mesh, u_prev, zeta_prev, self.params, self.elasticity)

    def step(self, prev: TimeState, w_guess=None) -> TimeState:
        n = prev.n + 1
        t = self.grid.t(n)
        k = self.grid.k
        try:
            rhs = self.load_at(t) - assemble_elastic_residual(
                prev.u, prev.zeta, self.mesh, self.dofmap, self.params, self.elasticity)
            if w_guess is None and prev.w is not None:
                w_guess = self.dofmap.restrict(prev.w)
            w_free = solve_velocity_step(self.K, rhs, self.gamma3, self.friction,
                                         self.tolerances, w0=w_guess)
            w = self.dofmap.expand(w_free)
            w_sum = prev.w_sum + w
            u = prev.u0 + k * w_sum

            b = (self.M @ prev.zeta) / k + assemble_damage_source(
                self.mesh, prev.u, prev.zeta, self.params)
            zeta = solve_box_qp(self.H, b, 0.0, 1.0, tol=self.tolerances.qp_rel_tol,
                                x0=prev.zeta, omega=self.tolerances.sor_omega,
                                maxiter=self.tolerances.qp_max_iters)
        except NonConvergenceError as exc:
            exc.step = n
            raise NonConvergenceError(f"step {n}: {exc}", exc.residual, n) from exc
        sigma = self.stress(w, prev.u, prev.zeta)
        return TimeState(n, t, u, zeta, w, sigma, prev.u0, w_sum)

    def run(self, state: TimeState | None = None, snapshots="final", callback=None) -> list[TimeState]:
        """March all ``N`` steps; returns the initial state plus the selected snapshots.

        ``snapshots`` is ``"final"``, ``"all"`` or ``"every:m"``.
        """
        state = self.initial_state() if state is None else state
        every = _snapshot_stride(snapshots, self.grid.N)
        out = [state]
        for n in range(1, self.grid.N + 1):
            state = self.step(state)
            if callback is not None:
                callback(state)
            if n % every == 0 or n == self.grid.N:
                out.append(state)
        return out

    def norms(self, state: TimeState):
        """``(|w|_V, |zeta|_Z0, |zeta|_Z)`` of a state."""
        v, _, _ = error_norms(self.mesh, state.w, None) if state.w is not None else (0.0, 0, 0)
        _, z0, z1 = error_norms(self.mesh, None, state.zeta)
        return v, z0, z1


def _snapshot_stride(policy: str, N: int) -> int:
    if policy == "final":
        return N
    if policy == "all":
        return 1
    if isinstance(policy, str) and policy.startswith("every:"):
        m = int(policy.split(":", 1)[1])
        if m < 1:
            raise ValueError("snapshot stride must be >= 1")
        return m
    raise ValueError(f"unknown snapshot policy {policy!r}")
