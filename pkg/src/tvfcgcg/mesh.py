"""Triangular meshes of the square (-1, 1)^2 and piecewise-constant geometry.

A :class:`TriMesh` stores vertices, counterclockwise triangles and the
interior/boundary edge structure needed by the cut graph (dual adjacency,
edge lengths) and by the finite element assembly (areas).  P0 fields are
plain arrays with one value per triangle, P1 fields one value per vertex.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "TriMesh",
    "MeshFormatError",
    "generate_square_mesh",
    "perimeter",
    "tv_p0",
    "indicator",
    "save_mesh",
    "load_mesh",
    "save_field",
    "load_field",
]


class MeshFormatError(ValueError):
    """Malformed mesh or field file."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Immutable triangulation with cached edge structure.

    Attributes
    ----------
    vertices : (nv, 2) float array
    triangles : (nt, 3) int array, counterclockwise
    edge_vertices : (ne, 2) int array, interior edges first
    interior_edges : (ni, 2) int array of (left, right) triangles, left < right
    interior_lengths : (ni,) float array
    boundary_edges : (nb,) int array, the triangle owning each boundary edge
    boundary_lengths : (nb,) float array
    areas : (nt,) float array
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edge_vertices: np.ndarray = field(repr=False)
    interior_edges: np.ndarray = field(repr=False)
    interior_lengths: np.ndarray = field(repr=False)
    boundary_edges: np.ndarray = field(repr=False)
    boundary_lengths: np.ndarray = field(repr=False)
    areas: np.ndarray = field(repr=False)

    @classmethod
    def from_arrays(cls, vertices, triangles) -> "TriMesh":
        vertices = np.ascontiguousarray(vertices, dtype=float)
        triangles = np.ascontiguousarray(triangles, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 2:
            raise ValueError("vertices must have shape (nv, 2)")
        if triangles.ndim != 2 or triangles.shape[1] != 3:
            raise ValueError("triangles must have shape (nt, 3)")
        if triangles.size and (triangles.min() < 0 or triangles.max() >= len(vertices)):
            raise ValueError("triangle references a vertex out of range")

        p = vertices[triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        areas = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        flip = areas < 0
        if flip.any():
            triangles = triangles.copy()
            triangles[flip] = triangles[flip][:, [0, 2, 1]]
            areas = np.abs(areas)

        nt = len(triangles)
        local = np.array([[1, 2], [2, 0], [0, 1]])
        half = np.sort(triangles[:, local].reshape(-1, 2), axis=1)
        owner = np.repeat(np.arange(nt), 3)
        uniq, inverse, counts = np.unique(half, axis=0, return_inverse=True, return_counts=True)
        inverse = inverse.ravel()
        if (counts > 2).any():
            raise ValueError("non-manifold mesh: an edge is shared by more than two triangles")

        order = np.argsort(inverse, kind="stable")
        owners_sorted = owner[order]
        starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
        first = owners_sorted[starts]
        second = np.where(counts == 2, owners_sorted[np.minimum(starts + 1, len(order) - 1)], -1)

        interior = counts == 2
        left = np.minimum(first[interior], second[interior])
        right = np.maximum(first[interior], second[interior])
        int_verts = uniq[interior]
        bnd_verts = uniq[~interior]
        # deterministic order: by (left, right) triangle pair
        io = np.lexsort((right, left))
        int_verts, left, right = int_verts[io], left[io], right[io]
        bnd_tri = first[~interior]
        bo = np.lexsort((bnd_verts[:, 1], bnd_verts[:, 0], bnd_tri))
        bnd_verts, bnd_tri = bnd_verts[bo], bnd_tri[bo]

        def lengths(ev):
            d = vertices[ev[:, 1]] - vertices[ev[:, 0]]
            return np.hypot(d[:, 0], d[:, 1])

        mesh = cls(
            vertices=vertices,
            triangles=triangles,
            edge_vertices=np.concatenate([int_verts, bnd_verts]).astype(np.int64),
            interior_edges=np.stack([left, right], axis=1).astype(np.int64),
            interior_lengths=lengths(int_verts),
            boundary_edges=bnd_tri.astype(np.int64),
            boundary_lengths=lengths(bnd_verts),
            areas=areas,
        )
        for arr in (mesh.vertices, mesh.triangles, mesh.edge_vertices, mesh.interior_edges,
                    mesh.interior_lengths, mesh.boundary_edges, mesh.boundary_lengths, mesh.areas):
            arr.setflags(write=False)
        return mesh

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edge_vertices)

    @property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    @property
    def boundary_vertices(self) -> np.ndarray:
        nb = len(self.boundary_edges)
        return np.unique(self.edge_vertices[len(self.edge_vertices) - nb:])

    @property
    def dual_adjacency(self) -> list[list[tuple[int, int]]]:
        """Per triangle, the list of ``(neighbor, interior_edge_index)`` pairs."""
        adj: list[list[tuple[int, int]]] = [[] for _ in range(self.n_triangles)]
        for e, (a, b) in enumerate(self.interior_edges.tolist()):
            adj[a].append((b, e))
            adj[b].append((a, e))
        return adj

    def dual_graph(self):
        """Symmetric sparse adjacency (triangle x triangle) of the dual graph."""
        from scipy.sparse import coo_matrix

        a, b = self.interior_edges.T
        n = self.n_triangles
        data = np.ones(2 * len(a))
        return coo_matrix((data, (np.r_[a, b], np.r_[b, a])), shape=(n, n)).tocsr()


def generate_square_mesh(n: int, jitter: float = 0.0, seed: int = 0) -> TriMesh:
    """Crisscross triangulation of (-1, 1)^2 with ``4 n^2`` triangles.

    Every cell of the uniform ``n x n`` grid is split into four triangles
    through its center.  With ``jitter > 0`` interior vertices are displaced
    by at most ``jitter * h / 2`` (``h = 2 / n``); displacements are drawn for
    the first quadrant and mirrored so the mesh stays symmetric under both
    axis reflections.  Vertices on an axis only move along it.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    if not 0.0 <= jitter <= 0.3:
        raise ValueError(f"jitter must lie in [0, 0.3], got {jitter!r}")
    n = int(n)
    h = 2.0 / n

    # integer coordinates on the half-grid: x = -1 + k * h / 2, k = 0..2n
    gi, gj = np.meshgrid(np.arange(0, 2 * n + 1, 2), np.arange(0, 2 * n + 1, 2), indexing="ij")
    ci, cj = np.meshgrid(np.arange(1, 2 * n, 2), np.arange(1, 2 * n, 2), indexing="ij")
    ik = np.concatenate([gi.ravel(), ci.ravel()])
    jk = np.concatenate([gj.ravel(), cj.ravel()])

    def grid(i, j):
        return i * (n + 1) + j

    def center(i, j):
        return (n + 1) ** 2 + i * n + j

    tris = []
    for i in range(n):
        for j in range(n):
            a, b = grid(i, j), grid(i + 1, j)
            c, d = grid(i + 1, j + 1), grid(i, j + 1)
            m = center(i, j)
            tris += [(a, b, m), (b, c, m), (c, d, m), (d, a, m)]

    verts = np.stack([-1.0 + ik * (h / 2), -1.0 + jk * (h / 2)], axis=1)
    if jitter > 0:
        verts = verts + _mirrored_jitter(ik, jk, n, jitter * h / 2, seed)
    return TriMesh.from_arrays(verts, np.array(tris))


def _mirrored_jitter(ik, jk, n, radius, seed):
    # offsets relative to the center index 2n/2 = n; mirror by sign
    si, sj = ik - n, jk - n
    ai, aj = np.abs(si), np.abs(sj)
    rng = np.random.default_rng(seed)
    # one draw per first-quadrant representative, indexed deterministically
    table_r = rng.random((n + 1, n + 1))
    table_t = rng.random((n + 1, n + 1)) * 2 * np.pi
    r = radius * np.sqrt(table_r[ai, aj])
    t = table_t[ai, aj]
    dx = np.sign(si) * np.abs(r * np.cos(t))
    dy = np.sign(sj) * np.abs(r * np.sin(t))
    # axis vertices keep their full displacement along the axis
    on_x_axis = sj == 0
    on_y_axis = si == 0
    dx = np.where(on_x_axis & ~on_y_axis, np.sign(si) * r, dx)
    dy = np.where(on_y_axis & ~on_x_axis, np.sign(sj) * r, dy)
    boundary = (ai == n) | (aj == n)
    dx[boundary] = 0.0
    dy[boundary] = 0.0
    return np.stack([dx, dy], axis=1)


def _as_mask(mesh: TriMesh, subset) -> np.ndarray:
    subset = np.asarray(subset)
    if subset.dtype == bool:
        if subset.shape != (mesh.n_triangles,):
            raise ValueError("boolean subset must have one entry per triangle")
        return subset
    idx = subset.astype(np.int64).ravel()
    if idx.size and (idx.min() < 0 or idx.max() >= mesh.n_triangles):
        raise IndexError("triangle index out of range")
    mask = np.zeros(mesh.n_triangles, dtype=bool)
    mask[idx] = True
    return mask


def indicator(mesh: TriMesh, subset) -> np.ndarray:
    """P0 characteristic function of a triangle subset."""
    return _as_mask(mesh, subset).astype(float)


def perimeter(mesh: TriMesh, subset) -> float:
    """Perimeter relative to the square: boundary edges of the domain are free."""
    mask = _as_mask(mesh, subset)
    left, right = mesh.interior_edges.T
    cut = mask[left] != mask[right]
    return float(mesh.interior_lengths[cut].sum())


def tv_p0(mesh: TriMesh, u) -> float:
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.n_triangles,):
        raise ValueError(f"expected {mesh.n_triangles} values, got shape {u.shape}")
    left, right = mesh.interior_edges.T
    return float(mesh.interior_lengths @ np.abs(u[left] - u[right]))


# ---------------------------------------------------------------------------
# file formats

def save_mesh(path, mesh: TriMesh) -> None:
    lines = ["TRIMESH v1", f"V {mesh.n_vertices}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    lines.append(f"T {mesh.n_triangles}")
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles.tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def _read_count(lines, pos, tag):
    if pos >= len(lines):
        raise MeshFormatError(f"unexpected end of file, expected '{tag} <count>'", pos + 1)
    parts = lines[pos].split()
    if len(parts) != 2 or parts[0] != tag:
        raise MeshFormatError(f"expected '{tag} <count>', got {lines[pos]!r}", pos + 1)
    try:
        count = int(parts[1])
    except ValueError:
        raise MeshFormatError(f"invalid count {parts[1]!r}", pos + 1) from None
    if count < 0:
        raise MeshFormatError("negative count", pos + 1)
    return count


def _read_rows(lines, pos, count, ncols, conv):
    rows = []
    for lineno in range(pos, pos + count):
        if lineno >= len(lines):
            raise MeshFormatError(f"unexpected end of file after {len(rows)} of {count} rows", lineno + 1)
        parts = lines[lineno].split()
        if len(parts) != ncols:
            raise MeshFormatError(f"expected {ncols} values, got {len(parts)}", lineno + 1)
        try:
            rows.append([conv(s) for s in parts])
        except ValueError:
            raise MeshFormatError(f"cannot parse {lines[lineno]!r}", lineno + 1) from None
    return rows


def load_mesh(path) -> TriMesh:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != "TRIMESH v1":
        raise MeshFormatError("missing 'TRIMESH v1' header", 1)
    nv = _read_count(lines, 1, "V")
    verts = _read_rows(lines, 2, nv, 2, float)
    pos = 2 + nv
    nt = _read_count(lines, pos, "T")
    tris = _read_rows(lines, pos + 1, nt, 3, int)
    trailing = [i for i in range(pos + 1 + nt, len(lines)) if lines[i].strip()]
    if trailing:
        raise MeshFormatError("unexpected trailing content", trailing[0] + 1)
    try:
        return TriMesh.from_arrays(np.array(verts, dtype=float).reshape(-1, 2),
                                   np.array(tris, dtype=np.int64).reshape(-1, 3))
    except ValueError as exc:
        raise MeshFormatError(str(exc)) from exc


def save_field(path, values, kind: str = "P0") -> None:
    if kind not in ("P0", "P1"):
        raise ValueError(f"kind must be 'P0' or 'P1', got {kind!r}")
    values = np.asarray(values, dtype=float).ravel()
    lines = [f"{kind}FIELD v1 {len(values)}"] + [repr(v) for v in values.tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def load_field(path, mesh: TriMesh | None = None) -> tuple[str, np.ndarray]:
    """Read a field file, returning ``(kind, values)``.

    When ``mesh`` is given the value count is checked against it.
    """
    lines = Path(path).read_text().splitlines()
    head = lines[0].split() if lines else []
    if len(head) != 3 or head[0] not in ("P0FIELD", "P1FIELD") or head[1] != "v1":
        raise MeshFormatError("expected 'P0FIELD v1 <count>' or 'P1FIELD v1 <count>'", 1)
    try:
        count = int(head[2])
    except ValueError:
        raise MeshFormatError(f"invalid count {head[2]!r}", 1) from None
    rows = _read_rows(lines, 1, count, 1, float)
    trailing = [i for i in range(1 + count, len(lines)) if lines[i].strip()]
    if trailing:
        raise MeshFormatError("unexpected trailing content", trailing[0] + 1)
    kind = head[0][:2]
    values = np.array(rows, dtype=float).reshape(-1)
    if mesh is not None:
        expected = mesh.n_triangles if kind == "P0" else mesh.n_vertices
        if len(values) != expected:
            raise MeshFormatError(f"{kind} field has {len(values)} values, mesh needs {expected}")
    return kind, values
