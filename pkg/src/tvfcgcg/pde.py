"""P1 finite element control-to-observation operators and their adjoints.

Controls are P0 (one value per triangle), states and observations are P1
with homogeneous Dirichlet conditions eliminated symmetrically: every
solve acts on interior vertices only and boundary values are zero.

Two operators are provided:

* elliptic: ``-Lap y = u`` in the square, ``y = 0`` on the boundary;
* parabolic: ``y_t - Lap y + y / 2 = 0`` with ``y(0) = u``, observed at
  the final time, discretized by implicit Euler with ``N`` uniform steps.

The adjoints return per-triangle integrals ``int_T q dx`` of the adjoint
state, which is what the cut weights need.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .mesh import TriMesh

__all__ = [
    "AssemblyError",
    "FemAssembly",
    "PdeProblem",
    "assemble",
    "elliptic_forward",
    "elliptic_adjoint_integrals",
    "parabolic_forward",
    "parabolic_adjoint_integrals",
    "observation_inner",
    "indicator_target",
    "l2_error",
]

MIN_AREA = 1e-14


class AssemblyError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FemAssembly:
    stiffness: sp.csr_matrix
    mass: sp.csr_matrix
    load: sp.csr_matrix          # (vertex x triangle), entries int_T phi_i dx
    boundary: np.ndarray         # bool mask over vertices
    interior: np.ndarray         # interior vertex indices

    def restrict(self, matrix):
        """Interior-interior block, as CSC for factorization."""
        idx = self.interior
        return matrix[idx][:, idx].tocsc()


def assemble(mesh: TriMesh) -> FemAssembly:
    tri = mesh.triangles
    p = mesh.vertices[tri]                      # (nt, 3, 2)
    # signed area from the coordinates, not the cached absolute value
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    area = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    bad = np.flatnonzero(np.abs(area) < MIN_AREA)
    if bad.size:
        raise AssemblyError(f"degenerate triangle {int(bad[0])} (area {area[bad[0]]:.3e})")

    # gradients of barycentric coordinates: grad(phi_i) = rot(e_i) / (2 area)
    e = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
    grads = np.stack([-e[..., 1], e[..., 0]], axis=-1) / (2 * area[:, None, None])
    absarea = np.abs(area)
    k_loc = absarea[:, None, None] * np.einsum("tik,tjk->tij", grads, grads)
    m_ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    m_loc = absarea[:, None, None] * m_ref

    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    nv = mesh.n_vertices
    stiffness = sp.csr_matrix((k_loc.ravel(), (rows, cols)), shape=(nv, nv))
    mass = sp.csr_matrix((m_loc.ravel(), (rows, cols)), shape=(nv, nv))
    nt = mesh.n_triangles
    load = sp.csr_matrix(
        (np.repeat(absarea / 3.0, 3), (tri.ravel(), np.repeat(np.arange(nt), 3))),
        shape=(nv, nt),
    )
    boundary = np.zeros(nv, dtype=bool)
    boundary[mesh.boundary_vertices] = True
    return FemAssembly(stiffness, mass, load, boundary, np.flatnonzero(~boundary))


@dataclass(eq=False)
class PdeProblem:
    """Discrete control problem ``min (1/2 alpha) |K u - y_d|_M^2 + TV(u)``.

    ``y_d`` is a P1 array; ``T`` and ``N`` only matter for the parabolic
    variant.  ``include_omega`` keeps the constant function in the active
    set; with ``nonneg=False`` its coefficient is sign-free.
    """

    mesh: TriMesh
    variant: str = "elliptic"
    alpha: float = 1e-4
    y_d: np.ndarray | None = None
    T: float = 0.02
    N: int = 9
    nonneg: bool = True
    include_omega: bool = True
    assembly: FemAssembly | None = None
    _lu: object = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.variant not in ("elliptic", "parabolic"):
            raise ValueError(f"variant must be 'elliptic' or 'parabolic', got {self.variant!r}")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.variant == "parabolic" and not (self.T > 0 and int(self.N) >= 1):
            raise ValueError("parabolic problems need T > 0 and N >= 1")
        self.N = int(self.N)
        if self.assembly is None:
            self.assembly = assemble(self.mesh)
        if self.y_d is None:
            self.y_d = np.zeros(self.mesh.n_vertices)
        self.y_d = np.asarray(self.y_d, dtype=float)
        if self.y_d.shape != (self.mesh.n_vertices,):
            raise ValueError("y_d must be a P1 field")

    @property
    def tau(self) -> float:
        return self.T / self.N

    def system_matrix(self):
        """Interior block of the matrix each solve inverts."""
        fem = self.assembly
        if self.variant == "elliptic":
            return fem.restrict(fem.stiffness)
        return fem.restrict(fem.mass + self.tau * (fem.stiffness + 0.5 * fem.mass))

    def _solve(self, rhs):
        if self._lu is None:
            self._lu = splu(self.system_matrix())
        x = self._lu.solve(rhs)
        if not np.all(np.isfinite(x)):
            raise np.linalg.LinAlgError("linear solve produced non-finite values")
        return x

    def forward(self, u) -> np.ndarray:
        if self.variant == "elliptic":
            return elliptic_forward(self, u)
        return parabolic_forward(self, u)

    def adjoint_integrals(self, z) -> np.ndarray:
        if self.variant == "elliptic":
            return elliptic_adjoint_integrals(self, z)
        return parabolic_adjoint_integrals(self, z)

    def inner(self, a, b) -> float:
        return observation_inner(self, a, b)

    def objective(self, y, u) -> float:
        from .mesh import tv_p0

        r = y - self.y_d
        return 0.5 / self.alpha * observation_inner(self, r, r) + tv_p0(self.mesh, u)


def _check(problem: PdeProblem, variant: str):
    if problem.variant != variant:
        raise ValueError(f"{variant} operator called on a {problem.variant} problem")


def _p0(problem, u):
    u = np.asarray(u, dtype=float)
    if u.shape[0] != problem.mesh.n_triangles:
        raise ValueError("control must be a P0 field")
    return u


def _p1(problem, z):
    z = np.asarray(z, dtype=float)
    if z.shape[0] != problem.mesh.n_vertices:
        raise ValueError("observation must be a P1 field")
    return z


def _extend(problem, y_int):
    y = np.zeros((problem.mesh.n_vertices,) + y_int.shape[1:])
    y[problem.assembly.interior] = y_int
    return y


def elliptic_forward(problem: PdeProblem, u) -> np.ndarray:
    """Solve ``A y = M01 u`` on interior vertices."""
    _check(problem, "elliptic")
    fem = problem.assembly
    rhs = (fem.load @ _p0(problem, u))[fem.interior]
    return _extend(problem, problem._solve(rhs))


def elliptic_adjoint_integrals(problem: PdeProblem, z) -> np.ndarray:
    """Solve ``A q = M z`` and return ``M01^T q``."""
    _check(problem, "elliptic")
    fem = problem.assembly
    rhs = (fem.mass @ _p1(problem, z))[fem.interior]
    q = _extend(problem, problem._solve(rhs))
    return fem.load.T @ q


def parabolic_forward(problem: PdeProblem, u) -> np.ndarray:
    """Implicit Euler: ``S y1 = M01 u``, then ``S y_{n+1} = M y_n``; returns ``y_N``."""
    _check(problem, "parabolic")
    fem = problem.assembly
    m_int = fem.restrict(fem.mass)
    y = problem._solve((fem.load @ _p0(problem, u))[fem.interior])
    for _ in range(problem.N - 1):
        y = problem._solve(m_int @ y)
    return _extend(problem, y)


def parabolic_adjoint_integrals(problem: PdeProblem, z) -> np.ndarray:
    """Transpose of :func:`parabolic_forward` composed with the mass matrix."""
    _check(problem, "parabolic")
    fem = problem.assembly
    m_int = fem.restrict(fem.mass)
    q = (fem.mass @ _p1(problem, z))[fem.interior]
    for _ in range(problem.N - 1):
        q = m_int @ problem._solve(q)
    q = problem._solve(q)
    return fem.load.T @ _extend(problem, q)


def observation_inner(problem: PdeProblem, a, b) -> float:
    """``a^T M b``, evaluated so that swapping the arguments gives the same bits."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    M = problem.assembly.mass
    return 0.5 * (float(a @ (M @ b)) + float(b @ (M @ a)))


def indicator_target(mesh: TriMesh, cx: float, cy: float, w: float, h: float) -> np.ndarray:
    """Nodal interpolant of the indicator of the open box centred at (cx, cy)."""
    x, y = mesh.vertices.T
    inside = (np.abs(x - cx) < w / 2) & (np.abs(y - cy) < h / 2)
    return inside.astype(float)


# 7-point degree-5 rule on the reference triangle (Strang-Fix / Dunavant)
_A1, _B1 = 0.797426985353087, 0.101286507323456
_A2, _B2 = 0.059715871789770, 0.470142064105115
_W0, _W1, _W2 = 0.225, 0.125939180544827, 0.132394152788506
_QBARY = np.array([
    [1 / 3, 1 / 3, 1 / 3],
    [_A1, _B1, _B1], [_B1, _A1, _B1], [_B1, _B1, _A1],
    [_A2, _B2, _B2], [_B2, _A2, _B2], [_B2, _B2, _A2],
])
_QW = np.array([_W0, _W1, _W1, _W1, _W2, _W2, _W2])


def l2_error(mesh: TriMesh, y_h, exact) -> float:
    """``|y_h - exact|_{L^2}`` with a degree-5 quadrature per triangle."""
    y_h = np.asarray(y_h, dtype=float)
    p = mesh.vertices[mesh.triangles]                 # (nt, 3, 2)
    pts = np.einsum("qi,tik->tqk", _QBARY, p)          # (nt, 7, 2)
    vals_h = np.einsum("qi,ti->tq", _QBARY, y_h[mesh.triangles])
    vals = exact(pts[..., 0], pts[..., 1])
    err2 = ((vals_h - vals) ** 2) @ _QW * mesh.areas
    return float(np.sqrt(err2.sum()))
