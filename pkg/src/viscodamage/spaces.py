"""Degrees of freedom for the constrained P1 velocity space, P1 damage space and
elementwise-constant tensor fields, plus transfer between nested meshes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import GAMMA1, GAMMA3, ConfigurationError, Mesh

FIXED = -1


class UnsupportedGeometryError(ConfigurationError):
    pass


@dataclass(frozen=True, eq=False)
class DofMap:
    """Velocity unknowns after eliminating ``v = 0`` on Gamma1 and ``v.n = 0`` on Gamma3.

    ``index[v, c]`` is the free index of component ``c`` at vertex ``v`` or
    ``FIXED``. ``gamma3_edges`` holds the Gamma3 edges and ``gamma3_tangents``
    their unit tangents.
    """

    index: np.ndarray
    n_free: int
    gamma3_edges: np.ndarray
    gamma3_tangents: np.ndarray

    @property
    def n_vertices(self) -> int:
        return self.index.shape[0]

    @property
    def free_mask(self) -> np.ndarray:
        return self.index >= 0

    def expand(self, free: np.ndarray) -> np.ndarray:
        """Free vector -> nodal ``(n_vertices, 2)`` field with zeros at fixed slots."""
        out = np.zeros(self.index.shape)
        mask = self.free_mask
        out[mask] = np.asarray(free)[self.index[mask]]
        return out

    def restrict(self, nodal: np.ndarray) -> np.ndarray:
        """Nodal field (or full-length load vector) -> free vector."""
        nodal = np.asarray(nodal).reshape(self.index.shape)
        out = np.empty(self.n_free)
        mask = self.free_mask
        out[self.index[mask]] = nodal[mask]
        return out

    def apply_constraints(self, nodal: np.ndarray) -> np.ndarray:
        out = np.array(nodal, dtype=float).reshape(self.index.shape)
        out[~self.free_mask] = 0.0
        return out


def build_velocity_dofmap(mesh: Mesh) -> DofMap:
    fixed = np.zeros((mesh.n_vertices, 2), dtype=bool)
    fixed[mesh.vertices_with_tag(GAMMA1)] = True

    edges = mesh.edges_with_tag(GAMMA3)
    d = mesh.vertices[edges[:, 1]] - mesh.vertices[edges[:, 0]]
    lengths = np.hypot(d[:, 0], d[:, 1])
    tangents = d / lengths[:, None] if len(edges) else np.zeros((0, 2))
    for (a, b), t in zip(edges, tangents):
        if abs(t[0]) == 1.0 and t[1] == 0.0:
            normal_comp = 1
        elif abs(t[1]) == 1.0 and t[0] == 0.0:
            normal_comp = 0
        else:
            raise UnsupportedGeometryError(
                f"Gamma3 edge ({a}, {b}) is not axis-aligned; tangent {tuple(t)}")
        fixed[a, normal_comp] = True
        fixed[b, normal_comp] = True

    index = np.full((mesh.n_vertices, 2), FIXED, dtype=np.int64)
    n_free = int((~fixed).sum())
    index[~fixed] = np.arange(n_free)
    return DofMap(index, n_free, edges, tangents)


def interpolate_vector(mesh: Mesh, dofmap: DofMap, func) -> np.ndarray:
    """Nodal interpolant of ``func(x, y) -> (vx, vy)`` with constraints applied."""
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    vals = np.broadcast_arrays(*func(x, y))
    nodal = np.column_stack([np.asarray(v, dtype=float) for v in vals])
    return dofmap.apply_constraints(nodal)


def interpolate_scalar(mesh: Mesh, func) -> np.ndarray:
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    return np.broadcast_to(np.asarray(func(x, y), dtype=float), x.shape).copy()


# Degree-2 rule at edge midpoints, barycentric coordinates.
EDGE_MIDPOINT_RULE = (
    np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]),
    np.full(3, 1.0 / 3.0),
)


def project_Qh(mesh: Mesh, integrand, rule=EDGE_MIDPOINT_RULE) -> np.ndarray:
    """L2-orthogonal projection onto elementwise constants (elementwise mean).

    ``integrand(points)`` receives ``(n_triangles, q, 2)`` physical points and
    returns ``(n_triangles, q, 3)`` tensor components ``[xx, yy, xy]`` (or any
    trailing shape). The default rule is exact for quadratic integrands.
    """
    bary, weights = rule
    corners = mesh.vertices[mesh.triangles]
    points = np.einsum("qa,tad->tqd", bary, corners)
    values = np.asarray(integrand(points), dtype=float)
    return np.einsum("q,tq...->t...", weights, values)


def check_nested(coarse: Mesh, fine: Mesh) -> int:
    """Return the refinement ratio, raising if the meshes are not nested."""
    if abs(coarse.width - fine.width) > 1e-12 or abs(coarse.height - fine.height) > 1e-12:
        raise ConfigurationError("meshes cover different rectangles")
    ratio = fine.nx / coarse.nx
    if ratio < 1 or abs(ratio - round(ratio)) > 1e-12 or fine.ny != round(ratio) * coarse.ny:
        raise ConfigurationError(
            f"mesh with h={fine.h:g} is not a nested refinement of h={coarse.h:g}")
    return int(round(ratio))


def evaluate_p1(mesh: Mesh, nodal: np.ndarray, points) -> np.ndarray:
    """Evaluate a P1 field (scalar or vector valued nodal array) at points."""
    tri, bary = mesh.locate(points)
    vals = np.asarray(nodal)[mesh.triangles[tri]]
    return np.einsum("pa,pa...->p...", bary, vals)


def transfer_to_fine(coarse: Mesh, field: np.ndarray, fine: Mesh, kind: str = "P1") -> np.ndarray:
    """Represent a coarse P1 (nodal) or P0 (per-triangle) field on a nested fine mesh.

    For P1 the result is the fine nodal field, which reproduces the coarse
    field exactly since coarse P1 functions are fine P1 functions. For P0 the
    result has one value per fine triangle.
    """
    check_nested(coarse, fine)
    field = np.asarray(field)
    if kind == "P1":
        if field.shape[0] != coarse.n_vertices:
            raise ConfigurationError("P1 field length does not match the coarse mesh")
        return evaluate_p1(coarse, field, fine.vertices)
    if kind == "P0":
        if field.shape[0] != coarse.n_triangles:
            raise ConfigurationError("P0 field length does not match the coarse mesh")
        tri, _ = coarse.locate(fine.barycenters())
        return field[tri]
    raise ValueError(f"unknown field kind {kind!r}")
