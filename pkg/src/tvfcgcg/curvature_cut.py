"""Discrete prescribed mean curvature problems solved by a single graph cut.

For per-triangle weights ``c_T`` (integrals of the curvature over each
triangle) we minimize::

    E(S) = -sum_{T in S} c_T + Per(S)

over all triangle subsets.  Capacities on the dual graph are the edge
lengths, ``c_T > 0`` becomes an arc ``T -> t`` and ``c_T < 0`` an arc
``s -> T``; the sink side of a minimum cut is then a minimizer, and the
complement of the source-reachable set in the residual graph is the
inclusion-maximal one.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .maxflow import FlowNetwork, boykov_kolmogorov, edmonds_karp, source_reachable
from .mesh import TriMesh, perimeter

logger = logging.getLogger(__name__)

__all__ = [
    "CutGraph",
    "CutSolution",
    "DinkelbachResult",
    "NoAdmissibleSet",
    "build_cut_graph",
    "solve_mincut",
    "decompose",
    "residual_components",
    "dinkelbach_insert",
    "insertion_energy",
    "brute_force_mincut",
    "write_dimacs",
]

CAPACITY_BITS = 40


class NoAdmissibleSet(ValueError):
    """No triangle subset has a positive weight integral."""


@dataclass
class CutGraph:
    """Dual graph with fixed-point capacities.

    ``edge_caps[e]`` is the capacity of both arcs of interior edge ``e``;
    ``source_caps`` / ``sink_caps`` hold the terminal arcs.
    """

    mesh: TriMesh
    scale: float
    edge_caps: np.ndarray
    source_caps: np.ndarray
    sink_caps: np.ndarray
    network: FlowNetwork | None = field(default=None, repr=False)

    @property
    def n_nodes(self) -> int:
        # triangles plus source and sink
        return self.mesh.n_triangles + 2

    def arcs(self):
        """All arcs as ``(tail, head, capacity)``; source is ``nt``, sink ``nt + 1``."""
        nt = self.mesh.n_triangles
        s, t = nt, nt + 1
        out = []
        for (a, b), c in zip(self.mesh.interior_edges.tolist(), self.edge_caps.tolist()):
            out.append((a, b, c))
            out.append((b, a, c))
        for v in range(nt):
            if self.source_caps[v]:
                out.append((s, v, int(self.source_caps[v])))
            if self.sink_caps[v]:
                out.append((v, t, int(self.sink_caps[v])))
        return out

    def integer_energy(self, mask) -> int:
        """Exact fixed-point energy ``-sum c + Per`` of a subset."""
        mask = np.asarray(mask, dtype=bool)
        left, right = self.mesh.interior_edges.T
        cut = mask[left] != mask[right]
        per = sum(int(c) for c in self.edge_caps[cut])
        gain = sum(int(c) for c in self.sink_caps[mask]) - sum(int(c) for c in self.source_caps[mask])
        return per - gain

    def fresh_network(self) -> FlowNetwork:
        terminal = [int(a) - int(b) for a, b in zip(self.source_caps, self.sink_caps)]
        return FlowNetwork(self.mesh.n_triangles, self.mesh.interior_edges.tolist(),
                           self.edge_caps.tolist(), terminal)


@dataclass
class CutSolution:
    subset: np.ndarray
    energy: float
    max_flow_value: float
    integer_energy: int
    graph: CutGraph = field(repr=False)

    @property
    def mask(self) -> np.ndarray:
        m = np.zeros(self.graph.mesh.n_triangles, dtype=bool)
        m[self.subset] = True
        return m


def build_cut_graph(mesh: TriMesh, c, bits: int = CAPACITY_BITS) -> CutGraph:
    c = np.asarray(c, dtype=float)
    if c.shape != (mesh.n_triangles,):
        raise ValueError(f"expected {mesh.n_triangles} weights, got shape {c.shape}")
    if not np.all(np.isfinite(c)):
        raise ValueError("weights must be finite")
    biggest = max(float(np.abs(c).max(initial=0.0)), float(mesh.interior_lengths.max(initial=0.0)))
    if biggest == 0.0:
        biggest = 1.0
    scale = 2.0 ** bits / biggest
    if not np.isfinite(scale) or scale == 0.0:
        raise OverflowError("cannot choose a fixed-point scale for these weights")
    edge_caps = np.rint(mesh.interior_lengths * scale).astype(np.int64)
    pos = np.rint(np.maximum(c, 0.0) * scale).astype(np.int64)
    neg = np.rint(np.maximum(-c, 0.0) * scale).astype(np.int64)
    return CutGraph(mesh=mesh, scale=scale, edge_caps=edge_caps, source_caps=neg, sink_caps=pos)


def insertion_energy(mesh: TriMesh, c, subset) -> float:
    """``-sum_{T in subset} c_T + Per(subset)`` in floating point."""
    c = np.asarray(c, dtype=float)
    mask = np.zeros(mesh.n_triangles, dtype=bool)
    mask[np.asarray(subset, dtype=np.int64)] = True
    return float(perimeter(mesh, mask) - c[mask].sum())


def solve_mincut(mesh: TriMesh, c, method: str = "bk") -> CutSolution:
    """Maximal minimizer of ``-sum c_T + Per`` via one max-flow.

    ``method`` is ``"bk"`` (Boykov-Kolmogorov) or ``"ek"`` (Edmonds-Karp).
    """
    graph = build_cut_graph(mesh, c)
    net = graph.fresh_network()
    if method == "bk":
        boykov_kolmogorov(net)
    elif method == "ek":
        edmonds_karp(net)
    else:
        raise ValueError(f"unknown max-flow method {method!r}")
    graph.network = net
    reach = np.array(source_reachable(net), dtype=bool)
    subset = np.flatnonzero(~reach)
    # max-flow = cut value = integer energy + total sink capacity
    total_sink = sum(int(x) for x in graph.sink_caps)
    flow = net.flow
    return CutSolution(
        subset=subset,
        energy=insertion_energy(mesh, c, subset),
        max_flow_value=flow / graph.scale,
        integer_energy=flow - total_sink,
        graph=graph,
    )


def decompose(mesh: TriMesh, subset) -> list[np.ndarray]:
    """Edge-connected components of a triangle subset, each sorted.

    Components are ordered by their smallest triangle index.
    """
    subset = np.unique(np.asarray(subset, dtype=np.int64))
    if subset.size == 0:
        return []
    mask = np.zeros(mesh.n_triangles, dtype=bool)
    mask[subset] = True
    left, right = mesh.interior_edges.T
    keep = mask[left] & mask[right]
    local = np.full(mesh.n_triangles, -1, dtype=np.int64)
    local[subset] = np.arange(subset.size)
    a, b = local[left[keep]], local[right[keep]]
    graph = coo_matrix((np.ones(a.size), (a, b)), shape=(subset.size, subset.size))
    ncomp, labels = connected_components(graph, directed=False)
    # labels are assigned in order of first appearance, i.e. by smallest index
    order = np.argsort(labels, kind="stable")
    splits = np.cumsum(np.bincount(labels, minlength=ncomp))[:-1]
    return [subset[idx] for idx in np.split(order, splits)]


def residual_components(solution: CutSolution) -> list[np.ndarray]:
    """Strongly connected components of the residual graph inside the cut set.

    Only arcs between triangles of the sink side with positive residual
    capacity are used.  Returned for comparison with :func:`decompose`; a
    mismatch is logged, since the edge-connected partition is the one that
    keeps perimeters additive.
    """
    net = solution.graph.network
    if net is None:
        raise ValueError("solution carries no residual network")
    mask = solution.mask
    sub = solution.subset
    local = np.full(len(mask), -1, dtype=np.int64)
    local[sub] = np.arange(sub.size)
    rows, cols = [], []
    for v in sub.tolist():
        for a in net.out[v]:
            u = net.head[a]
            if mask[u] and net.rcap[a] > 0:
                rows.append(local[v])
                cols.append(local[u])
    if sub.size == 0:
        return []
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(sub.size, sub.size))
    ncomp, labels = connected_components(graph, directed=True, connection="strong")
    comps = [np.sort(sub[labels == k]) for k in range(ncomp)]
    comps.sort(key=lambda s: s[0])
    cc = decompose(solution.graph.mesh, sub)
    if len(cc) != len(comps) or any(not np.array_equal(x, y) for x, y in zip(cc, comps)):
        logger.warning("residual SCC partition (%d parts) differs from edge-connected "
                       "components (%d parts)", len(comps), len(cc))
    return comps


@dataclass
class DinkelbachResult:
    subset: np.ndarray
    ratio: float
    converged: bool
    degenerate: bool
    n_cuts: int


def dinkelbach_insert(mesh: TriMesh, c, tol: float = 1e-12, max_iter: int = 100,
                      mass_rtol: float = 1e-10) -> DinkelbachResult:
    """Maximize ``sum_{T in E} c_T / Per(E)`` by a sequence of cuts.

    Starts from the positive support of ``c`` and alternates
    ``alpha = Per(E) / sum_E c`` with ``E = argmin -alpha sum_E c + Per(E)``.
    If the whole domain has a positive integral its ratio is infinite; it is
    returned with ``degenerate=True`` and no cut is computed; totals below
    ``mass_rtol * sum |c|`` count as zero.
    """
    c = np.asarray(c, dtype=float)
    if not (c > 0).any():
        raise NoAdmissibleSet("no triangle carries a positive weight")
    # a total integral at round-off level is treated as zero
    if c.sum() > mass_rtol * np.abs(c).sum():
        return DinkelbachResult(np.arange(mesh.n_triangles), np.inf, True, True, 0)
    # accumulated rounding of the fixed-point energies, in capacity units
    slack = mesh.n_triangles + len(mesh.interior_edges)

    current = np.flatnonzero(c > 0)
    per = perimeter(mesh, current)
    mass = float(c[current].sum())
    n_cuts = 0
    converged = False
    for _ in range(max_iter):
        alpha = per / mass
        sol = solve_mincut(mesh, alpha * c)
        n_cuts += 1
        new = sol.subset
        new_mass = float(c[new].sum()) if new.size else 0.0
        # stop once the best cut no longer improves on the current set
        if sol.integer_energy >= -slack or new_mass <= 0:
            converged = True
            break
        new_per = perimeter(mesh, new)
        if new_per == 0.0:
            # whole domain with positive mass cannot occur here (c.sum() <= 0)
            break
        old_ratio = mass / per
        current, per, mass = new, new_per, new_mass
        if abs(mass / per - old_ratio) <= tol * max(1.0, abs(old_ratio)):
            converged = True
            break
    return DinkelbachResult(current, mass / per, converged, False, n_cuts)


def brute_force_mincut(mesh: TriMesh, c, max_triangles: int = 20):
    """Exhaustive minimization over all ``2^n`` subsets (tiny meshes only).

    Returns ``(min_integer_energy, minimizers)`` where the energies are
    evaluated on the same fixed-point graph :func:`solve_mincut` uses and
    ``minimizers`` is a boolean array with one row per optimal subset.
    """
    n = mesh.n_triangles
    if n > max_triangles:
        raise ValueError(f"brute force limited to {max_triangles} triangles, mesh has {n}")
    graph = build_cut_graph(mesh, c)
    masks = np.array(list(product([False, True], repeat=n)), dtype=bool).reshape(-1, n)
    left, right = mesh.interior_edges.T
    cut = masks[:, left] != masks[:, right]
    # int64 is exact here: n <= 20 terms of at most 2^40 each
    energy = (cut.astype(np.int64) @ graph.edge_caps
              - masks.astype(np.int64) @ graph.sink_caps
              + masks.astype(np.int64) @ graph.source_caps)
    best = int(energy.min())
    return best, masks[energy == best]


def write_dimacs(graph: CutGraph, path) -> None:
    """Dump the cut graph in DIMACS max-flow format (1-based node ids)."""
    nt = graph.mesh.n_triangles
    arcs = graph.arcs()
    lines = [f"p max {nt + 2} {len(arcs)}", f"n {nt + 1} s", f"n {nt + 2} t"]
    lines += [f"a {u + 1} {v + 1} {cap}" for u, v, cap in arcs]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
