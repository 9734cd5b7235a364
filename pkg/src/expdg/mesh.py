"""Interval and tensor-product quadrilateral meshes, nodal field states and face traces."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .basis import NodalBasis

PERIODIC = "periodic"
DIRICHLET_ZERO = "dirichlet_zero"
BC_KINDS = (PERIODIC, DIRICHLET_ZERO)


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class Element:
    index: int
    lower: tuple
    upper: tuple

    @property
    def sizes(self) -> tuple:
        return tuple(b - a for a, b in zip(self.lower, self.upper))

    @property
    def measure(self) -> float:
        return float(np.prod(self.sizes))

    @property
    def h(self) -> float:
        return max(self.sizes)


@dataclass(frozen=True)
class Face:
    """A face seen from its owner element.

    ``kind`` is ``"interior"``, ``"periodic"`` (boundary face with a partner on
    the opposite boundary) or ``"dirichlet_zero"``.  ``normal`` is the unit
    outward normal of the owner side.
    """

    index: int
    owner: int
    owner_side: int
    neighbor: int | None
    neighbor_side: int | None
    normal: tuple
    measure: float
    kind: str
    partner: int | None = None

    @property
    def is_boundary(self) -> bool:
        return self.kind != "interior"

    def flipped(self) -> "Face":
        """The same face seen from the neighbor side."""
        if self.neighbor is None:
            raise MeshError("a Dirichlet boundary face has no neighbor side")
        return replace(self, owner=self.neighbor, owner_side=self.neighbor_side,
                       neighbor=self.owner, neighbor_side=self.owner_side,
                       normal=tuple(-c for c in self.normal))


@dataclass(frozen=True, eq=False)
class Mesh:
    dim: int
    bc: str
    # vertex coordinates per axis; 1D meshes only use the first entry
    axes: tuple
    elements: tuple = field(repr=False)
    faces: tuple = field(repr=False)

    @property
    def shape(self) -> tuple:
        return tuple(len(a) - 1 for a in self.axes)

    @property
    def nelements(self) -> int:
        return int(np.prod(self.shape))

    @property
    def widths(self) -> tuple:
        return tuple(np.diff(a) for a in self.axes)

    @property
    def measure(self) -> float:
        return float(np.prod([a[-1] - a[0] for a in self.axes]))

    def map_points(self, ref: np.ndarray):
        """Map reference points in [-1, 1] into every element.

        1D: array (ne, nq).  2D: pair of arrays (nx, ny, nq, nq).
        """
        ref = np.asarray(ref, dtype=float)
        if self.dim == 1:
            v = self.axes[0]
            return 0.5 * (v[:-1, None] + v[1:, None]) + 0.5 * np.diff(v)[:, None] * ref[None, :]
        xs = [0.5 * (a[:-1, None] + a[1:, None]) + 0.5 * np.diff(a)[:, None] * ref[None, :]
              for a in self.axes]
        nq = len(ref)
        x = np.broadcast_to(xs[0][:, None, :, None], (*self.shape, nq, nq))
        y = np.broadcast_to(xs[1][None, :, None, :], (*self.shape, nq, nq))
        return x, y

    def element_index(self, *ijk) -> int:
        if self.dim == 1:
            return int(ijk[0])
        return int(ijk[0]) * self.shape[1] + int(ijk[1])


def _check_bc(bc: str) -> str:
    if bc not in BC_KINDS:
        raise MeshError(f"unknown boundary condition {bc!r}; expected one of {BC_KINDS}")
    return bc


def build_interval_mesh(a: float, b: float, ne: int, bc: str = DIRICHLET_ZERO) -> Mesh:
    """Uniform partition of [a, b] into ``ne`` elements."""
    if not b > a:
        raise MeshError(f"degenerate interval ({a}, {b})")
    if ne < 1:
        raise MeshError("need at least one element")
    return interval_mesh_from_vertices(np.linspace(a, b, ne + 1), bc)


def interval_mesh_from_vertices(vertices: Sequence[float], bc: str = DIRICHLET_ZERO) -> Mesh:
    _check_bc(bc)
    v = np.asarray(vertices, dtype=float)
    if v.ndim != 1 or len(v) < 2 or np.any(np.diff(v) <= 0):
        raise MeshError("vertices must be strictly increasing")
    v.setflags(write=False)
    ne = len(v) - 1
    elements = tuple(Element(e, (v[e],), (v[e + 1],)) for e in range(ne))
    faces = []
    kind = PERIODIC if bc == PERIODIC else DIRICHLET_ZERO
    faces.append(Face(0, 0, 0, ne - 1 if kind == PERIODIC else None,
                      1 if kind == PERIODIC else None, (-1.0,), 1.0, kind,
                      partner=ne if kind == PERIODIC else None))
    for f in range(1, ne):
        faces.append(Face(f, f - 1, 1, f, 0, (1.0,), 1.0, "interior"))
    faces.append(Face(ne, ne - 1, 1, 0 if kind == PERIODIC else None,
                      0 if kind == PERIODIC else None, (1.0,), 1.0, kind,
                      partner=0 if kind == PERIODIC else None))
    return Mesh(1, bc, (v,), elements, tuple(faces))


def _axis_vertices(lo, hi, n, grading, name):
    if grading is None:
        if n < 1:
            raise MeshError(f"need at least one element along {name}")
        return np.linspace(lo, hi, n + 1)
    g = np.asarray(grading, dtype=float)
    if g.ndim != 1 or len(g) < 2 or np.any(np.diff(g) <= 0):
        raise MeshError(f"grading along {name} must be strictly increasing")
    if not (np.isclose(g[0], lo) and np.isclose(g[-1], hi)):
        raise MeshError(f"grading along {name} must span [{lo}, {hi}]")
    if n is not None and len(g) != n + 1:
        raise MeshError(f"grading along {name} has {len(g) - 1} cells, expected {n}")
    return g


def build_quad_mesh(domain, nx: int | None, ny: int | None, grading=None,
                    bc: str = PERIODIC) -> Mesh:
    """Axis-aligned tensor-product quadrilaterals on ``domain = ((x0, x1), (y0, y1))``.

    ``grading`` is an optional pair of vertex lists (either entry may be None)
    replacing the uniform spacing along that axis.
    """
    _check_bc(bc)
    (x0, x1), (y0, y1) = domain
    if not (x1 > x0 and y1 > y0):
        raise MeshError("degenerate rectangle")
    gx, gy = grading if grading is not None else (None, None)
    xv = _axis_vertices(x0, x1, nx, gx, "x")
    yv = _axis_vertices(y0, y1, ny, gy, "y")
    xv.setflags(write=False)
    yv.setflags(write=False)
    nx, ny = len(xv) - 1, len(yv) - 1
    eid = lambda i, j: i * ny + j  # noqa: E731
    elements = tuple(Element(eid(i, j), (xv[i], yv[j]), (xv[i + 1], yv[j + 1]))
                     for i in range(nx) for j in range(ny))
    periodic = bc == PERIODIC
    faces = []

    def add(owner, oside, nb, nside, normal, measure, kind, partner=None):
        faces.append(Face(len(faces), owner, oside, nb, nside, normal, float(measure), kind, partner))

    # x-normal faces, sides 0 (x-) and 1 (x+)
    for j in range(ny):
        hy = yv[j + 1] - yv[j]
        left = len(faces)
        add(eid(0, j), 0, eid(nx - 1, j) if periodic else None, 1 if periodic else None,
            (-1.0, 0.0), hy, PERIODIC if periodic else DIRICHLET_ZERO)
        for i in range(nx - 1):
            add(eid(i, j), 1, eid(i + 1, j), 0, (1.0, 0.0), hy, "interior")
        right = len(faces)
        add(eid(nx - 1, j), 1, eid(0, j) if periodic else None, 0 if periodic else None,
            (1.0, 0.0), hy, PERIODIC if periodic else DIRICHLET_ZERO)
        if periodic:
            faces[left] = replace(faces[left], partner=right)
            faces[right] = replace(faces[right], partner=left)
    # y-normal faces, sides 2 (y-) and 3 (y+)
    for i in range(nx):
        hx = xv[i + 1] - xv[i]
        bottom = len(faces)
        add(eid(i, 0), 2, eid(i, ny - 1) if periodic else None, 3 if periodic else None,
            (0.0, -1.0), hx, PERIODIC if periodic else DIRICHLET_ZERO)
        for j in range(ny - 1):
            add(eid(i, j), 3, eid(i, j + 1), 2, (0.0, 1.0), hx, "interior")
        top = len(faces)
        add(eid(i, ny - 1), 3, eid(i, 0) if periodic else None, 2 if periodic else None,
            (0.0, 1.0), hx, PERIODIC if periodic else DIRICHLET_ZERO)
        if periodic:
            faces[bottom] = replace(faces[bottom], partner=top)
            faces[top] = replace(faces[top], partner=bottom)
    return Mesh(2, bc, (xv, yv), elements, tuple(faces))


def side_node_indices(dim: int, k: int, side: int) -> np.ndarray:
    """Local node indices on an element side, ordered along the tangential axis."""
    if dim == 1:
        return np.array([0 if side == 0 else k])
    n = k + 1
    grid = np.arange(n * n).reshape(n, n)  # axis 0 = x, axis 1 = y
    return {0: grid[0, :], 1: grid[-1, :], 2: grid[:, 0], 3: grid[:, -1]}[side].copy()


def min_node_spacing(mesh: Mesh, basis: NodalBasis) -> float:
    """Smallest physical distance between adjacent LGL nodes over all elements and axes."""
    gap = float(np.min(np.diff(basis.nodes)))
    return min(float(np.min(w)) for w in mesh.widths) * gap / 2.0


@dataclass(eq=False)
class FieldState:
    """Nodal values of an m-component field, shape (nelements, nodes per element, m)."""

    mesh: Mesh
    basis: NodalBasis
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        nloc = self.basis.npoints ** self.mesh.dim
        if v.ndim == 2:
            v = v[..., None]
        if v.shape[:2] != (self.mesh.nelements, nloc):
            raise MeshError(f"values of shape {v.shape} do not match mesh/basis "
                            f"({self.mesh.nelements}, {nloc}, m)")
        self.values = v

    @property
    def ncomponents(self) -> int:
        return self.values.shape[2]

    @property
    def order(self) -> int:
        return self.basis.order

    def as_vector(self) -> np.ndarray:
        return self.values.reshape(-1)

    def with_vector(self, vec: np.ndarray) -> "FieldState":
        return FieldState(self.mesh, self.basis, np.asarray(vec, dtype=float).reshape(self.values.shape))

    def copy(self) -> "FieldState":
        return FieldState(self.mesh, self.basis, self.values.copy())

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def evaluate(self, x) -> np.ndarray:
        """Evaluate a 1D field at physical points; returns (npoints, m)."""
        if self.mesh.dim != 1:
            raise NotImplementedError("point evaluation is implemented for 1D fields")
        x = np.atleast_1d(np.asarray(x, dtype=float))
        v = self.mesh.axes[0]
        e = np.clip(np.searchsorted(v, x, side="right") - 1, 0, self.mesh.nelements - 1)
        xi = 2.0 * (x - v[e]) / (v[e + 1] - v[e]) - 1.0
        out = np.empty((len(x), self.ncomponents))
        for elem in np.unique(e):
            sel = e == elem
            out[sel] = self.basis.interpolation_matrix(xi[sel]) @ self.values[elem]
        return out


def face_traces(state: FieldState, face: Face):
    """Return (u_minus, u_plus) on ``face``, each of shape (face nodes, m).

    Dirichlet faces have the zero exterior state; periodic faces take the
    exterior state from the partner side.
    """
    k = state.order
    dim = state.mesh.dim
    um = state.values[face.owner][side_node_indices(dim, k, face.owner_side)]
    if face.neighbor is None:
        return um.copy(), np.zeros_like(um)
    up = state.values[face.neighbor][side_node_indices(dim, k, face.neighbor_side)]
    return um.copy(), up.copy()


def face_jump(state: FieldState, face: Face) -> np.ndarray:
    """[u] = u^- n^- + u^+ n^+, shape (face nodes, m, dim)."""
    um, up = face_traces(state, face)
    n = np.asarray(face.normal)
    return (um - up)[..., None] * n


def face_average(state: FieldState, face: Face) -> np.ndarray:
    um, up = face_traces(state, face)
    return 0.5 * (um + up)
