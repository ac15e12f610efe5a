"""Structured triangulations of rectangles with tagged boundary edges."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

import numpy as np

GAMMA1 = "Gamma1"
GAMMA2 = "Gamma2"
GAMMA3 = "Gamma3"
TAGS = (GAMMA1, GAMMA2, GAMMA3)


class ConfigurationError(ValueError):
    """Invalid mesh, boundary or simulation configuration."""


@dataclass(frozen=True)
class Segment:
    """Axis-aligned boundary segment ``{axis = at} x [lo, hi]`` carrying a tag.

    ``axis`` is the coordinate held fixed, so the bottom edge of a rectangle
    is ``Segment("y", 0.0, 0.0, width, tag)``.
    """

    axis: str
    at: float
    lo: float
    hi: float
    tag: str

    def __post_init__(self):
        if self.axis not in ("x", "y"):
            raise ConfigurationError(f"segment axis must be 'x' or 'y', got {self.axis!r}")
        if self.tag not in TAGS:
            raise ConfigurationError(f"unknown boundary tag {self.tag!r}")
        if not self.lo < self.hi:
            raise ConfigurationError(f"empty segment interval [{self.lo}, {self.hi}]")

    def contains(self, point, tol=1e-12) -> bool:
        fixed, free = (point[0], point[1]) if self.axis == "x" else (point[1], point[0])
        return abs(fixed - self.at) <= tol and self.lo - tol <= free <= self.hi + tol


BoundarySpec = Sequence[Segment]


@dataclass(frozen=True, eq=False)
class Mesh:
    width: float
    height: float
    nx: int
    ny: int
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    edge_tags: tuple = field(default=())

    @property
    def h(self) -> float:
        return self.width / self.nx

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def tagged(self) -> bool:
        return len(self.edge_tags) == len(self.boundary_edges)

    def edges_with_tag(self, tag: str) -> np.ndarray:
        if not self.tagged:
            raise ConfigurationError("mesh boundary has not been classified")
        mask = np.array([t == tag for t in self.edge_tags], dtype=bool)
        return self.boundary_edges[mask].reshape(-1, 2)

    def vertices_with_tag(self, tag: str) -> np.ndarray:
        """Vertices belonging to at least one edge with ``tag``."""
        return np.unique(self.edges_with_tag(tag))

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def barycenters(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    def edge_lengths(self, edges: np.ndarray | None = None) -> np.ndarray:
        e = self.boundary_edges if edges is None else edges
        d = self.vertices[e[:, 1]] - self.vertices[e[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    def locate(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Find the containing triangle and barycentric coordinates of points.

        Uses the structured layout directly; points on shared edges go to the
        lower/left cell, which is harmless since P1 fields are continuous.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        h = self.h
        tol = 1e-9 * h
        x, y = pts[:, 0], pts[:, 1]
        if (np.any(x < -tol) or np.any(x > self.width + tol)
                or np.any(y < -tol) or np.any(y > self.height + tol)):
            raise ConfigurationError("point outside the mesh rectangle")
        # small inward shift keeps points on internal grid lines in one cell
        i = np.clip(np.floor(x / h - 1e-9).astype(int), 0, self.nx - 1)
        j = np.clip(np.floor(y / h - 1e-9).astype(int), 0, self.ny - 1)
        lx = x / h - i
        ly = y / h - j
        upper = ly > lx
        tri = 2 * (j * self.nx + i) + upper.astype(int)
        # barycentrics for (v00, v10, v11) and (v00, v11, v01)
        bary = np.empty((len(pts), 3))
        lo = ~upper
        bary[lo, 0] = 1.0 - lx[lo]
        bary[lo, 1] = lx[lo] - ly[lo]
        bary[lo, 2] = ly[lo]
        bary[upper, 0] = 1.0 - ly[upper]
        bary[upper, 1] = lx[upper]
        bary[upper, 2] = ly[upper] - lx[upper]
        return tri, bary


def _reciprocal_integer(h) -> int:
    try:
        exact = Fraction(h) if isinstance(h, (Fraction, int)) else Fraction(str(h).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigurationError(f"cannot parse mesh size {h!r}") from exc
    frac = exact.limit_denominator(1 << 20)
    if frac <= 0 or frac.numerator != 1 or abs(frac - exact) > 1e-12 * abs(exact):
        raise ConfigurationError(f"mesh size h={h} is not 1/m for a positive integer m")
    return frac.denominator


def _cells(length, m, name) -> int:
    n = length * m
    if abs(n - round(n)) > 1e-9 or round(n) < 1:
        raise ConfigurationError(f"{name}={length} times 1/h={m} is not a positive integer")
    return int(round(n))


def build_structured_mesh(width: float, height: float, h) -> Mesh:
    """Uniform mesh of ``(0, width) x (0, height)`` with squares of side ``h``.

    Every square is cut along its lower-left to upper-right diagonal, so the
    meshes for ``h`` and ``h/2`` are nested.
    """
    m = _reciprocal_integer(h)
    nx = _cells(width, m, "width")
    ny = _cells(height, m, "height")
    hx = float(width) / nx
    xs = np.arange(nx + 1) * hx
    ys = np.arange(ny + 1) * (float(height) / ny)
    X, Y = np.meshgrid(xs, ys)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    jj, ii = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    v00 = (jj * (nx + 1) + ii).ravel()
    v10 = v00 + 1
    v01 = v00 + nx + 1
    v11 = v01 + 1
    triangles = np.empty((2 * nx * ny, 3), dtype=np.int64)
    triangles[0::2] = np.column_stack([v00, v10, v11])
    triangles[1::2] = np.column_stack([v00, v11, v01])

    row = nx + 1
    bottom = [(i, i + 1) for i in range(nx)]
    right = [(j * row + nx, (j + 1) * row + nx) for j in range(ny)]
    top = [(ny * row + i + 1, ny * row + i) for i in reversed(range(nx))]
    left = [((j + 1) * row, j * row) for j in reversed(range(ny))]
    boundary_edges = np.array(bottom + right + top + left, dtype=np.int64)
    return Mesh(float(width), float(height), nx, ny, vertices, triangles, boundary_edges)


def classify_boundary(mesh: Mesh, spec: BoundarySpec) -> Mesh:
    """Tag each boundary edge with the segment that contains its midpoint."""
    mids = 0.5 * (mesh.vertices[mesh.boundary_edges[:, 0]] + mesh.vertices[mesh.boundary_edges[:, 1]])
    tol = 1e-9 * mesh.h
    tags = []
    for mid in mids:
        hits = [s for s in spec if s.contains(mid, tol)]
        if len(hits) != 1:
            raise ConfigurationError(
                f"boundary edge midpoint ({mid[0]:.6g}, {mid[1]:.6g}) is covered by "
                f"{len(hits)} segments, expected exactly one")
        tags.append(hits[0].tag)
    return replace(mesh, edge_tags=tuple(tags))


def rectangle_spec(width, height, *, left=GAMMA2, right=GAMMA2, top=GAMMA2, bottom=()) -> list[Segment]:
    """Boundary spec with one tag per side; ``bottom`` may be split.

    ``bottom`` is either a tag or a list of ``(lo, hi, tag)`` pieces.
    """
    if isinstance(bottom, str):
        bottom = [(0.0, width, bottom)]
    elif not bottom:
        bottom = [(0.0, width, GAMMA2)]
    segs = [Segment("y", 0.0, lo, hi, tag) for lo, hi, tag in bottom]
    segs += [
        Segment("x", width, 0.0, height, right),
        Segment("y", height, 0.0, width, top),
        Segment("x", 0.0, 0.0, height, left),
    ]
    return segs
