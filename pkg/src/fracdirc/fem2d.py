"""P1 finite elements on a uniform right-triangle mesh of the unit square.

Node ``(i, j)`` sits at ``(i*h, j*h)`` and has index ``j*(N+1) + i`` with
``N = 2**L``.  Each lattice cell is split along its lower-left to upper-right
diagonal, which makes the stiffness matrix coincide with the 5-point stencil.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .sparse_solve import SparseOperator

MAX_LEVEL = 10


@dataclass(frozen=True)
class StructuredMesh:
    level: int
    nodes: np.ndarray = field(repr=False)
    triangles: np.ndarray = field(repr=False)
    boundary_nodes: np.ndarray = field(repr=False)
    interior_nodes: np.ndarray = field(repr=False)

    @property
    def h(self) -> float:
        return 2.0**-self.level

    @property
    def n_per_side(self) -> int:
        return 2**self.level

    @property
    def num_nodes(self) -> int:
        return self.nodes.shape[0]

    def signed_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def build_mesh(L: int) -> StructuredMesh:
    if int(L) != L or not 1 <= L <= MAX_LEVEL:
        raise ValueError(f"mesh level must be an integer in [1, {MAX_LEVEL}], got {L!r}")
    L = int(L)
    N = 2**L
    h = 1.0 / N
    ii, jj = np.meshgrid(np.arange(N + 1), np.arange(N + 1))
    nodes = np.column_stack([ii.ravel() * h, jj.ravel() * h])

    ci, cj = np.meshgrid(np.arange(N), np.arange(N))
    a = (cj * (N + 1) + ci).ravel()
    b = a + 1
    c = a + N + 2
    d = a + N + 1
    triangles = np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])])

    idx = lambda i, j: j * (N + 1) + i  # noqa: E731
    k = np.arange(N)
    boundary = np.concatenate([
        idx(k, 0),          # bottom, left to right
        idx(N, k),          # right, bottom to top
        idx(N - k, N),      # top, right to left
        idx(0, N - k),      # left, top to bottom
    ])
    mask = np.ones(nodes.shape[0], dtype=bool)
    mask[boundary] = False
    interior = np.flatnonzero(mask)
    for arr in (nodes, triangles, boundary, interior):
        arr.setflags(write=False)
    return StructuredMesh(L, nodes, triangles, boundary, interior)


def _local_gradients(p: np.ndarray):
    """Gradients of the three barycentric hats and the areas, per triangle."""
    x, y = p[..., 0], p[..., 1]
    area = 0.5 * ((x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0]))
    gx = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1) / (2 * area[:, None])
    gy = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1) / (2 * area[:, None])
    return gx, gy, area


def _assemble(mesh: StructuredMesh, local: np.ndarray) -> SparseOperator:
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    n = mesh.num_nodes
    # Duplicates are summed in canonical (row, col) order by tocsr().
    mat = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return SparseOperator(mat, symmetric=True)


def assemble_mass(mesh: StructuredMesh) -> SparseOperator:
    _, _, area = _local_gradients(mesh.nodes[mesh.triangles])
    ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    return _assemble(mesh, area[:, None, None] * ref[None])


def assemble_stiffness(mesh: StructuredMesh) -> SparseOperator:
    gx, gy, area = _local_gradients(mesh.nodes[mesh.triangles])
    local = area[:, None, None] * (gx[:, :, None] * gx[:, None, :] + gy[:, :, None] * gy[:, None, :])
    return _assemble(mesh, local)


@dataclass(frozen=True)
class BoundaryTrace:
    """Piecewise-linear trace space on the closed curve of the unit square.

    Entry ``i`` of every boundary vector refers to ``nodes[i]`` (global index
    ``mesh.boundary_nodes[i]``), ordered counterclockwise from the origin.
    ``mass`` is the consistent 1D mass matrix; ``lumped`` its row sums.
    """

    nodes: np.ndarray = field(repr=False)
    points: np.ndarray = field(repr=False)
    arclength: np.ndarray = field(repr=False)
    mass: SparseOperator = field(repr=False)
    lumped: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.nodes.size

    def segments(self):
        """Index pairs ``(k, k+1 mod n)`` of consecutive boundary entries."""
        k = np.arange(self.size)
        return k, (k + 1) % self.size


def build_trace(mesh: StructuredMesh) -> BoundaryTrace:
    nb = mesh.boundary_nodes.size
    h = mesh.h
    k = np.arange(nb)
    kn = (k + 1) % nb
    rows = np.concatenate([k, k, kn, kn])
    cols = np.concatenate([k, kn, k, kn])
    vals = np.concatenate([np.full(nb, 2.0), np.full(nb, 1.0), np.full(nb, 1.0), np.full(nb, 2.0)]) * h / 6.0
    mass = sp.coo_matrix((vals, (rows, cols)), shape=(nb, nb)).tocsr()
    mass.sum_duplicates()
    mass.sort_indices()
    lumped = np.asarray(mass.sum(axis=1)).ravel()
    return BoundaryTrace(
        nodes=mesh.boundary_nodes,
        points=mesh.nodes[mesh.boundary_nodes],
        arclength=k * h,
        mass=SparseOperator(mass, symmetric=True),
        lumped=lumped,
    )


@dataclass(frozen=True)
class EdgePowerProfile:
    """Boundary function ``s**power`` on one edge of the square, zero elsewhere.

    ``edge`` names the edge by its fixed coordinate (``"x=0"``, ``"x=1"``,
    ``"y=0"``, ``"y=1"``); ``s`` is the free coordinate along that edge.
    """

    edge: str = "x=0"
    power: float = -0.5
    scale: float = 1.0

    def __post_init__(self):
        if self.edge not in ("x=0", "x=1", "y=0", "y=1"):
            raise ValueError(f"unknown edge {self.edge!r}")
        if self.power <= -1.0:
            raise ValueError(f"s**{self.power} is not integrable on the boundary")

    def _on_edge(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        fixed_axis = 0 if self.edge[0] == "x" else 1
        value = float(self.edge[2])
        return np.isclose(pts[:, fixed_axis], value, atol=1e-14), pts[:, 1 - fixed_axis]

    def moments(self, trace: BoundaryTrace) -> np.ndarray:
        """Exact ``int f * mu_i`` over the boundary for every boundary hat."""
        k, kn = trace.segments()
        on_a, sa = self._on_edge(trace.points[k])
        on_b, sb = self._on_edge(trace.points[kn])
        seg = np.flatnonzero(on_a & on_b)
        lo = np.minimum(sa[seg], sb[seg])
        hi = np.maximum(sa[seg], sb[seg])
        p = self.power
        # int_lo^hi s^p (s - lo)/len ds and int_lo^hi s^p (hi - s)/len ds
        i0 = (hi ** (p + 1) - lo ** (p + 1)) / (p + 1)
        i1 = (hi ** (p + 2) - lo ** (p + 2)) / (p + 2)
        ln = hi - lo
        rising = (i1 - lo * i0) / ln
        falling = (hi * i0 - i1) / ln
        out = np.zeros(trace.size)
        a_is_lo = sa[seg] <= sb[seg]
        ia, ib = k[seg], kn[seg]
        np.add.at(out, ia, np.where(a_is_lo, falling, rising))
        np.add.at(out, ib, np.where(a_is_lo, rising, falling))
        return self.scale * out


def boundary_moments_quadrature(f: Callable[[np.ndarray, np.ndarray], np.ndarray], trace: BoundaryTrace) -> np.ndarray:
    """``int f * mu_i`` by adaptive quadrature along each boundary segment."""
    from scipy.integrate import quad

    k, kn = trace.segments()
    out = np.zeros(trace.size)
    for a, b in zip(k, kn):
        pa, pb = trace.points[a], trace.points[b]

        def along(s, weight_b):
            x, y = pa + s * (pb - pa)
            w = s if weight_b else 1.0 - s
            return float(f(np.asarray(x), np.asarray(y))) * w

        length = float(np.hypot(*(pb - pa)))
        out[a] += length * quad(along, 0.0, 1.0, args=(False,), limit=200, epsabs=1e-14, epsrel=1e-13)[0]
        out[b] += length * quad(along, 0.0, 1.0, args=(True,), limit=200, epsabs=1e-14, epsrel=1e-13)[0]
    return out


def boundary_l2_project(f, trace: BoundaryTrace, tol: float = 1e-13) -> np.ndarray:
    """L2(boundary) projection onto continuous piecewise-linear functions.

    ``f`` is a constant, an :class:`EdgePowerProfile` (moments in closed form),
    or a callable ``f(x, y)`` integrated by adaptive quadrature.
    """
    from .sparse_solve import cg_solve

    if isinstance(f, (int, float)):
        rhs = float(f) * trace.lumped
    elif isinstance(f, EdgePowerProfile):
        rhs = f.moments(trace)
    elif callable(f):
        rhs = boundary_moments_quadrature(f, trace)
    else:
        raise TypeError(f"cannot project {type(f).__name__}")
    if not np.all(np.isfinite(rhs)):
        raise ValueError("boundary moments are not finite; profile is not integrable")
    if not np.any(rhs):
        return np.zeros(trace.size)
    x, report = cg_solve(trace.mass, rhs, tol=tol, max_iter=10 * trace.size)
    if not report.converged:
        raise RuntimeError(f"boundary projection did not converge: {report}")
    return x


def _power_moments(x0: np.ndarray, h: float, p: float) -> np.ndarray:
    """``m_k = int_{x0}^{x0+h} x**p ((x-x0)/h)**k dx`` for k = 0, 1, 2."""
    x1 = x0 + h
    I = [(x1 ** (p + q + 1) - x0 ** (p + q + 1)) / (p + q + 1) for q in range(3)]
    m0 = I[0]
    m1 = (I[1] - x0 * I[0]) / h
    m2 = (I[2] - 2 * x0 * I[1] + x0**2 * I[0]) / h**2
    return np.stack([m0, m1, m2])


def singular_load_vector(mesh: StructuredMesh, power: float | None = -0.5, scale: float = 1.0) -> np.ndarray:
    """Load vector ``f_i = int_Omega scale * x**power * phi_i``, integrated in
    closed form triangle by triangle.  ``power=None`` means the zero profile."""
    n = mesh.num_nodes
    if power is None or scale == 0.0:
        return np.zeros(n)
    if power <= -1.0:
        raise ValueError(f"x**{power} is not integrable over the unit square")
    h = mesh.h
    N = mesh.n_per_side
    ci, cj = np.meshgrid(np.arange(N), np.arange(N))
    ci, cj = ci.ravel(), cj.ravel()
    a = cj * (N + 1) + ci
    b, c, d = a + 1, a + N + 2, a + N + 1
    m0, m1, m2 = _power_moments(ci * h, h, power)
    # With s = (x - x0)/h, integrating the hats over y in each triangle gives
    # lower (a,b,c): s(1-s), s^2/2, s^2/2;  upper (a,c,d): (1-s)^2/2, s(1-s), (1-s)^2/2.
    s_1ms = m1 - m2
    s2_half = 0.5 * m2
    oms2_half = 0.5 * (m0 - 2 * m1 + m2)
    f = np.zeros(n)
    for idx, w in ((a, s_1ms + oms2_half), (b, s2_half), (c, s2_half + s_1ms), (d, oms2_half)):
        np.add.at(f, idx, h * w)
    return scale * f


def interpolate(mesh: StructuredMesh, f: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> np.ndarray:
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    return np.broadcast_to(np.asarray(f(x, y), dtype=float), x.shape).copy()


@dataclass(frozen=True)
class FemSpace:
    """Mesh plus the assembled operators every solver needs."""

    mesh: StructuredMesh
    mass: SparseOperator = field(repr=False)
    stiffness: SparseOperator = field(repr=False)
    trace: BoundaryTrace = field(repr=False)

    @classmethod
    def build(cls, L: int) -> "FemSpace":
        mesh = build_mesh(L)
        return cls(mesh, assemble_mass(mesh), assemble_stiffness(mesh), build_trace(mesh))

    @property
    def n(self) -> int:
        return self.mesh.num_nodes

    @cached_property
    def interior(self) -> np.ndarray:
        return self.mesh.interior_nodes

    @cached_property
    def boundary(self) -> np.ndarray:
        return self.mesh.boundary_nodes

    def load(self, f: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> np.ndarray:
        """Load vector of a smooth function via its nodal interpolant."""
        return self.mass.matrix @ interpolate(self.mesh, f)


def discrete_normal_derivative(
    slice_state: np.ndarray,
    time_residual: np.ndarray,
    source: np.ndarray,
    space: FemSpace,
) -> np.ndarray:
    """Variational outward normal derivative on the boundary.

    Returns the boundary coefficients ``g`` with
    ``(g, mu_i) = (time_residual, phi_i) + a(p, phi_i) - (source, phi_i)`` for
    every boundary node ``i``, where ``time_residual`` and ``source`` are
    already load vectors (mass-integrated).  The boundary pairing on the left
    is the lumped (trapezoidal) one, so the system is diagonal.
    """
    n = space.n
    for name, v in (("slice_state", slice_state), ("time_residual", time_residual), ("source", source)):
        if np.shape(v)[-1] != n:
            raise ValueError(f"{name} has trailing dimension {np.shape(v)[-1]}, expected {n}")
    A = space.stiffness.matrix
    bn = space.boundary
    state = np.asarray(slice_state, dtype=float)
    if state.ndim == 1:
        a_p = A @ state
    else:
        a_p = (A @ state.T).T
    resid = np.asarray(time_residual, dtype=float) + a_p - np.asarray(source, dtype=float)
    return resid[..., bn] / space.trace.lumped
