"""P1 finite element assembly on triangles.

Vector unknowns are numbered ``2*vertex + component`` before constraint
elimination; the assembled velocity operators act on the free unknowns of a
:class:`~viscodamage.spaces.DofMap`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .friction import FrictionModel
from .material import ELASTICITY, WEIGHTS, MaterialParams, damage_source
from .mesh import GAMMA2, ConfigurationError, Mesh
from .spaces import DofMap


@dataclass(frozen=True)
class LoadSpec:
    f0: tuple = (0.0, 0.0)
    f2: tuple = (0.0, 0.0)


def element_geometry(mesh: Mesh):
    """Triangle areas ``(T,)`` and barycentric gradients ``(T, 3, 2)``."""
    p = mesh.vertices[mesh.triangles]
    x, y = p[..., 0], p[..., 1]
    # gradient of lambda_a is perp(opposite edge) / (2 area)
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    area2 = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    grads = np.stack([b, c], axis=2) / area2[:, None, None]
    return 0.5 * area2, grads


def strain_operator(grads: np.ndarray) -> np.ndarray:
    """Map local dofs ``[u0x, u0y, u1x, u1y, u2x, u2y]`` to ``[exx, eyy, exy]``."""
    nt = grads.shape[0]
    B = np.zeros((nt, 3, 6))
    gx, gy = grads[..., 0], grads[..., 1]
    B[:, 0, 0::2] = gx
    B[:, 1, 1::2] = gy
    B[:, 2, 0::2] = 0.5 * gy
    B[:, 2, 1::2] = 0.5 * gx
    return B


def local_dofs(mesh: Mesh) -> np.ndarray:
    t = mesh.triangles
    return np.stack([2 * t, 2 * t + 1], axis=2).reshape(-1, 6)


def strain(mesh: Mesh, nodal: np.ndarray) -> np.ndarray:
    """Elementwise constant strain of a nodal vector field, ``(T, 3)``."""
    _, grads = element_geometry(mesh)
    loc = np.asarray(nodal, dtype=float).reshape(-1)[local_dofs(mesh)]
    return np.einsum("tij,tj->ti", strain_operator(grads), loc)


def _restrict_matrix(rows, cols, vals, dofmap: DofMap):
    fmap = dofmap.index.reshape(-1)
    r, c = fmap[rows], fmap[cols]
    keep = (r >= 0) & (c >= 0)
    n = dofmap.n_free
    return sp.coo_matrix((vals[keep], (r[keep], c[keep])), shape=(n, n)).tocsr()


def _scatter_vector(mesh: Mesh, local: np.ndarray) -> np.ndarray:
    out = np.zeros(2 * mesh.n_vertices)
    np.add.at(out, local_dofs(mesh).reshape(-1), local.reshape(-1))
    return out


def assemble_viscosity(mesh: Mesh, dofmap: DofMap, params: MaterialParams) -> sp.csr_matrix:
    """``(A eps(phi_j), eps(phi_i))_Q`` on the free unknowns."""
    if dofmap.n_free == 0:
        raise ConfigurationError("no free velocity unknowns")
    area, grads = element_geometry(mesh)
    B = strain_operator(grads)
    D = WEIGHTS[:, None] * params.viscosity_matrix()
    Ke = area[:, None, None] * np.einsum("tki,kl,tlj->tij", B, D, B)
    loc = local_dofs(mesh)
    rows = np.repeat(loc, 6, axis=1).reshape(-1)
    cols = np.tile(loc, (1, 6)).reshape(-1)
    return _restrict_matrix(rows, cols, Ke.reshape(-1), dofmap)


def elastic_stress(mesh: Mesh, u_nodal, zeta_nodal, params: MaterialParams,
                   elasticity: str = "linear") -> np.ndarray:
    """Elementwise ``B(eps(u), zeta)`` with zeta taken at the barycenter."""
    eps = strain(mesh, u_nodal)
    zb = np.asarray(zeta_nodal, dtype=float)[mesh.triangles].mean(axis=1)
    return ELASTICITY[elasticity](eps, zb, params)


def assemble_elastic_residual(u_nodal, zeta_nodal, mesh: Mesh, dofmap: DofMap,
                              params: MaterialParams, elasticity: str = "linear") -> np.ndarray:
    """``(B(eps(u), zeta), eps(phi_i))_Q`` on the free unknowns."""
    area, grads = element_geometry(mesh)
    sig = elastic_stress(mesh, u_nodal, zeta_nodal, params, elasticity)
    local = area[:, None] * np.einsum("tki,tk->ti", strain_operator(grads), sig * WEIGHTS)
    return dofmap.restrict(_scatter_vector(mesh, local))


def assemble_load_full(spec: LoadSpec, mesh: Mesh) -> np.ndarray:
    """Load on all vertices before constraint elimination, shape ``(n_vertices, 2)``."""
    area, _ = element_geometry(mesh)
    out = np.zeros((mesh.n_vertices, 2))
    f0 = np.asarray(spec.f0, dtype=float)
    f2 = np.asarray(spec.f2, dtype=float)
    if np.any(f0):
        support = np.zeros(mesh.n_vertices)
        np.add.at(support, mesh.triangles.reshape(-1), np.repeat(area / 3.0, 3))
        out += support[:, None] * f0
    if np.any(f2):
        edges = mesh.edges_with_tag(GAMMA2)
        half = 0.5 * mesh.edge_lengths(edges)
        share = np.zeros(mesh.n_vertices)
        np.add.at(share, edges.reshape(-1), np.repeat(half, 2))
        out += share[:, None] * f2
    return out


def assemble_load(spec: LoadSpec, mesh: Mesh, dofmap: DofMap) -> np.ndarray:
    return dofmap.restrict(assemble_load_full(spec, mesh))


def assemble_damage_operators(mesh: Mesh, params: MaterialParams):
    """P1 mass matrix ``M`` and ``kappa``-scaled stiffness ``S`` on all vertices."""
    area, grads = element_geometry(mesh)
    Me = area[:, None, None] / 12.0 * (np.ones((3, 3)) + np.eye(3))
    Se = params.kappa * area[:, None, None] * np.einsum("tad,tbd->tab", grads, grads)
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).reshape(-1)
    cols = np.tile(t, (1, 3)).reshape(-1)
    n = mesh.n_vertices
    M = sp.coo_matrix((Me.reshape(-1), (rows, cols)), shape=(n, n)).tocsr()
    S = sp.coo_matrix((Se.reshape(-1), (rows, cols)), shape=(n, n)).tocsr()
    return M, S


def assemble_damage_source(mesh: Mesh, u_nodal, zeta_nodal, params: MaterialParams) -> np.ndarray:
    """``(phi(eps(u), zeta), xi_i)_{Z0}`` by vertex quadrature on each triangle."""
    area, _ = element_geometry(mesh)
    eps = strain(mesh, u_nodal)
    zv = np.asarray(zeta_nodal, dtype=float)[mesh.triangles]
    vals = damage_source(eps[:, None, :], zv, params)
    out = np.zeros(mesh.n_vertices)
    np.add.at(out, mesh.triangles.reshape(-1), (vals * (area / 3.0)[:, None]).reshape(-1))
    return out


GAUSS2 = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])


@dataclass(frozen=True, eq=False)
class Gamma3Quadrature:
    """Two-point Gauss rule on each contact edge.

    ``dofs[e, a]`` is the free index of the tangential velocity component at
    edge vertex ``a`` (``-1`` if fixed) and ``signs[e, a]`` maps it to the
    signed tangential speed ``w . t``. ``shape[q, a]`` holds the P1 shape
    values at the Gauss points and ``weights[e, q]`` the edge weights.
    """

    edges: np.ndarray
    points: np.ndarray
    weights: np.ndarray
    shape: np.ndarray
    dofs: np.ndarray
    signs: np.ndarray
    tangents: np.ndarray

    @property
    def empty(self) -> bool:
        return len(self.edges) == 0

    def tangential(self, w_free: np.ndarray) -> np.ndarray:
        """Signed tangential speed at the Gauss points, ``(E, 2)``."""
        w = np.where(self.dofs >= 0, np.asarray(w_free)[np.maximum(self.dofs, 0)], 0.0)
        return (w * self.signs) @ self.shape.T

    def integrate(self, values: np.ndarray) -> float:
        return float(np.sum(self.weights * values))

    def energy(self, w_free, model: FrictionModel, rho: float) -> float:
        value, _, _ = model.reg_scalar(self.tangential(w_free), rho)
        return self.integrate(value)

    def exact_energy(self, w_free, model: FrictionModel) -> float:
        return self.integrate(model.bound * np.abs(self.tangential(w_free)))

    def linear_form(self, coef: np.ndarray, n_free: int) -> np.ndarray:
        """Vector of ``int_Gamma3 coef * (phi_i . t)`` with ``coef`` given at Gauss points."""
        mask = self.dofs >= 0
        g_loc = np.einsum("eq,qa->ea", self.weights * coef, self.shape) * self.signs
        out = np.zeros(n_free)
        np.add.at(out, self.dofs[mask], g_loc[mask])
        return out

    def gradient_hessian(self, w_free, model: FrictionModel, rho: float, n_free: int):
        s = self.tangential(w_free)
        _, d1, d2 = model.reg_scalar(s, rho)
        mask = self.dofs >= 0
        # local hessian (E, a, b)
        sg = self.signs
        h_loc = np.einsum("eq,qa,qb->eab", self.weights * d2, self.shape, self.shape)
        h_loc *= sg[:, :, None] * sg[:, None, :]
        grad = self.linear_form(d1, n_free)
        pair = mask[:, :, None] & mask[:, None, :]
        rows = np.broadcast_to(self.dofs[:, :, None], h_loc.shape)[pair]
        cols = np.broadcast_to(self.dofs[:, None, :], h_loc.shape)[pair]
        hess = sp.coo_matrix((h_loc[pair], (rows, cols)), shape=(n_free, n_free)).tocsr()
        return grad, hess


def gamma3_quadrature(mesh: Mesh, dofmap: DofMap) -> Gamma3Quadrature:
    edges = dofmap.gamma3_edges
    t = dofmap.gamma3_tangents
    p0 = mesh.vertices[edges[:, 0]] if len(edges) else np.zeros((0, 2))
    p1 = mesh.vertices[edges[:, 1]] if len(edges) else np.zeros((0, 2))
    length = np.hypot(*(p1 - p0).T) if len(edges) else np.zeros(0)
    points = p0[:, None, :] + GAUSS2[None, :, None] * (p1 - p0)[:, None, :]
    weights = 0.5 * length[:, None] * np.ones((1, 2))
    shape = np.column_stack([1.0 - GAUSS2, GAUSS2])
    comp = np.argmax(np.abs(t), axis=1) if len(edges) else np.zeros(0, dtype=int)
    dofs = dofmap.index[edges, comp[:, None]] if len(edges) else np.zeros((0, 2), dtype=np.int64)
    signs = np.repeat(np.sign(t[np.arange(len(edges)), comp])[:, None], 2, axis=1) if len(edges) \
        else np.zeros((0, 2))
    return Gamma3Quadrature(edges, points, weights, shape, dofs, signs, t)


def error_norms(mesh: Mesh, w_err=None, zeta_err=None):
    """V-norm of a nodal vector field, Z0 norm and H1 seminorm of a nodal scalar field.

    Computed exactly for P1 fields on ``mesh``. Missing fields give ``nan``.
    """
    v_norm = z0 = z1 = float("nan")
    area, grads = element_geometry(mesh)
    if w_err is not None:
        w = np.asarray(w_err, dtype=float)
        if w.shape != (mesh.n_vertices, 2):
            raise ConfigurationError("vector field does not match the mesh")
        eps = strain(mesh, w)
        v_norm = float(np.sqrt(np.sum(area * np.sum(eps * eps * WEIGHTS, axis=1))))
    if zeta_err is not None:
        z = np.asarray(zeta_err, dtype=float)
        if z.shape != (mesh.n_vertices,):
            raise ConfigurationError("scalar field does not match the mesh")
        zt = z[mesh.triangles]
        # exact P1 mass on each triangle: area/12 (sum z_a^2 + (sum z_a)^2)
        z0 = float(np.sqrt(np.sum(area / 12.0 * (np.sum(zt**2, axis=1) + np.sum(zt, axis=1) ** 2))))
        g = np.einsum("ta,tad->td", zt, grads)
        z1 = float(np.sqrt(np.sum(area * np.sum(g * g, axis=1))))
    return v_norm, z0, z1
