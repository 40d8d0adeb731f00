"""One-cut fully-corrective generalized conditional gradient driver.

Each outer iteration costs one adjoint solve, one graph cut and one
forward solve per inserted component::

    p_k   = (1/alpha) K^*(y_d - K u_k)            (per-triangle integrals)
    E_k   = maximal minimizer of -int_E p_k + Per(E)
    j_k   = int_{E_k} p_k - Per(E_k)              stop if j_k <= tol
    A_k+  = A_k + connected components of E_k
    lam   = argmin_{lam >= 0} F(K U(lam)) + sum lam_j Per(E_j)
    A_k+1 = A_k+ without zero coefficients

The ``dinkelbach`` insertion mode replaces the single cut by the ratio
maximization of the earlier two-level method and inserts the whole set.
"""
from __future__ import annotations

import csv
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .coeff_qp import Coefficients, ReducedProblem, prune, solve_coeffs
from .curvature_cut import NoAdmissibleSet, decompose, dinkelbach_insert, insertion_energy, solve_mincut
from .mesh import TriMesh, perimeter, save_field, save_mesh, tv_p0
from .pde import PdeProblem

logger = logging.getLogger(__name__)

__all__ = [
    "ActiveEntry",
    "TraceRecord",
    "SolverTrace",
    "SolverConfig",
    "FCGCGSolver",
    "RunResult",
    "run",
    "run_comparison",
    "residual_curve",
    "ResidualCurve",
    "write_outputs",
]

TRACE_COLUMNS = ["k", "J", "surrogate", "j_k", "n_components", "active_size",
                 "pde_solves", "cuts", "wall_ms"]


@dataclass
class ActiveEntry:
    subset: np.ndarray
    perimeter: float
    observation: np.ndarray = field(repr=False)
    is_omega: bool = False

    @property
    def key(self) -> bytes:
        return self.subset.tobytes()


@dataclass
class TraceRecord:
    k: int
    J: float
    surrogate: float
    j_k: float
    n_components: int
    active_size: int
    pde_solves: int
    cuts: int
    wall_ms: float
    # not written to trace.csv
    objective: float = float("nan")
    stationarity: float = 0.0
    component_energies: list = field(default_factory=list)
    iteration_cuts: int = 0
    iteration_pde: int = 0


@dataclass
class SolverTrace:
    records: list[TraceRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def column(self, name) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def write_csv(self, path, include_timing: bool = True) -> None:
        cols = TRACE_COLUMNS if include_timing else TRACE_COLUMNS[:-1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for r in self.records:
                w.writerow([repr(v) if isinstance(v, float) else v
                            for v in (getattr(r, c) for c in cols)])


@dataclass
class SolverConfig:
    tolerance: float = 1e-10
    max_iter: int = 200
    mode: str = "onecut"
    include_omega: bool | None = None
    output_dir: str | None = None

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.mode not in ("onecut", "dinkelbach"):
            raise ValueError(f"mode must be 'onecut' or 'dinkelbach', got {self.mode!r}")
        if int(self.max_iter) < 0:
            raise ValueError("max_iter must be nonnegative")


@dataclass
class RunResult:
    u: np.ndarray
    entries: list[ActiveEntry]
    lam: np.ndarray
    trace: SolverTrace
    converged: bool
    stalled: bool = False
    setup_pde_solves: int = 0

    @property
    def iterations(self) -> int:
        """Outer iterations performed, counting the terminating one (one cut each in onecut mode)."""
        return len(self.trace.records)

    @property
    def final_J(self) -> float:
        return self.trace.records[-1].J

    def summary(self) -> dict:
        last = self.trace.records[-1]
        return {
            "converged": bool(self.converged),
            "stalled": bool(self.stalled),
            "iterations": self.iterations,
            "final_J": float(last.J),
            "final_j_k": float(last.j_k),
            "active_size": int(last.active_size),
            "pde_solves": int(last.pde_solves),
            "setup_pde_solves": int(self.setup_pde_solves),
            "cuts": int(last.cuts),
        }


def _thread_count() -> int:
    try:
        return max(1, int(os.environ.get("TVFCGCG_THREADS", "1")))
    except ValueError:
        return 1


class FCGCGSolver:
    """Iterate of the method plus its bookkeeping.

    ``step()`` performs one outer iteration and returns its trace record;
    state is only committed once every sub-step has succeeded.
    """

    def __init__(self, problem: PdeProblem, config: SolverConfig | None = None):
        self.problem = problem
        self.config = config or SolverConfig()
        self.mesh: TriMesh = problem.mesh
        self.include_omega = (problem.include_omega if self.config.include_omega is None
                              else self.config.include_omega)
        self.omega_free = self.include_omega and not problem.nonneg
        self.entries: list[ActiveEntry] = []
        self.lam = np.zeros(0)
        self.gram = np.zeros((0, 0))
        self.linear = np.zeros(0)
        self.y = np.zeros(self.mesh.n_vertices)
        self.pde_solves = 0
        self.cuts = 0
        self.k = 0
        self.converged = False
        self.stalled = False
        self.trace = SolverTrace()
        self._t0 = time.perf_counter()
        self._yd_norm2 = problem.inner(problem.y_d, problem.y_d)
        if self.include_omega:
            omega = np.arange(self.mesh.n_triangles)
            obs = self._observe([omega])[0]
            self.pde_solves += 1
            entry = ActiveEntry(omega, 0.0, obs, is_omega=True)
            self._commit(*self._update_coefficients([entry], [obs]))
        self.setup_pde_solves = self.pde_solves

    # -- helpers ---------------------------------------------------------

    def _observe(self, subsets):
        def one(s):
            u = np.zeros(self.mesh.n_triangles)
            u[s] = 1.0
            return self.problem.forward(u)

        threads = _thread_count()
        if threads > 1 and len(subsets) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                return list(pool.map(one, subsets))
        return [one(s) for s in subsets]

    def _omega_index(self, entries):
        for j, e in enumerate(entries):
            if e.is_omega:
                return j
        return None

    def _update_coefficients(self, new_entries, new_obs):
        """Extend the Gram system, solve, prune. Returns the uncommitted state."""
        M = self.problem.assembly.mass
        entries = self.entries + list(new_entries)
        old = len(self.entries)
        n = len(entries)
        gram = np.zeros((n, n))
        gram[:old, :old] = self.gram
        linear = np.zeros(n)
        linear[:old] = self.linear
        all_obs = np.array([e.observation for e in entries]) if n else np.zeros((0, self.mesh.n_vertices))
        for i, o in enumerate(new_obs):
            col = all_obs @ (M @ o)
            gram[:, old + i] = col
            gram[old + i, :] = col
            linear[old + i] = o @ (M @ self.problem.y_d)
        omega = self._omega_index(entries)
        rp = ReducedProblem(
            gram, linear, np.array([e.perimeter for e in entries]), self.problem.alpha,
            free_index=omega if self.omega_free else None, target_norm2=self._yd_norm2,
        )
        warm = np.concatenate([self.lam, np.zeros(n - old)])
        coeffs = solve_coeffs(rp, warm=warm)
        if not coeffs.converged:
            logger.warning("coefficient solve hit its iteration cap (kkt %.2e)", coeffs.kkt_residual)
        kept, lam, pos = prune(coeffs, entries, keep_index=omega)
        return kept, lam, gram[np.ix_(pos, pos)], linear[pos], coeffs

    def _commit(self, entries, lam, gram, linear, coeffs=None):
        self.entries, self.lam, self.gram, self.linear = entries, lam, gram, linear
        if entries:
            self.y = lam @ np.array([e.observation for e in entries])
        else:
            self.y = np.zeros(self.mesh.n_vertices)

    @property
    def u(self) -> np.ndarray:
        u = np.zeros(self.mesh.n_triangles)
        for lam, e in zip(self.lam, self.entries):
            u[e.subset] += lam
        return u

    def objective_parts(self):
        r = self.y - self.problem.y_d
        fit = 0.5 / self.problem.alpha * self.problem.inner(r, r)
        sur = float(sum(l * e.perimeter for l, e in zip(self.lam, self.entries)))
        return fit, tv_p0(self.mesh, self.u), sur

    def weights(self) -> np.ndarray:
        """Per-triangle integrals of the dual variable at the current iterate."""
        return self.problem.adjoint_integrals(self.problem.y_d - self.y) / self.problem.alpha

    def stationarity(self, c) -> float:
        worst = 0.0
        for lam, e in zip(self.lam, self.entries):
            if lam > 0 or (e.is_omega and self.omega_free):
                worst = max(worst, abs(float(c[e.subset].sum()) - e.perimeter) / (1.0 + e.perimeter))
        return worst

    # -- iteration -------------------------------------------------------

    def _insert(self, c):
        """Candidate set, indicator value and cut count for this iteration."""
        if self.config.mode == "onecut":
            sol = solve_mincut(self.mesh, c)
            subset = sol.subset
            return subset, -sol.energy, 1, decompose(self.mesh, subset)
        try:
            res = dinkelbach_insert(self.mesh, c)
        except NoAdmissibleSet:
            return np.zeros(0, dtype=np.int64), 0.0, 0, []
        subset = res.subset
        j = float(c[subset].sum()) - perimeter(self.mesh, subset)
        return subset, j, res.n_cuts, [subset]

    def step(self) -> TraceRecord:
        if self.converged or self.stalled:
            raise RuntimeError("solver already terminated")
        c = self.weights()
        pde = 1
        subset, j_k, n_cuts, components = self._insert(c)
        fit, tv, sur = self.objective_parts()
        record = TraceRecord(
            k=self.k, J=fit + tv, surrogate=sur, j_k=j_k, n_components=0,
            active_size=len(self.entries), pde_solves=0, cuts=0, wall_ms=0.0,
            objective=fit + sur, stationarity=self.stationarity(c), iteration_cuts=n_cuts,
        )
        if j_k <= self.config.tolerance:
            self.converged = True
            self._finish(record, pde, n_cuts)
            return record

        known = {e.key for e in self.entries}
        fresh = []
        for comp in components:
            key = comp.tobytes()
            if key in known:
                continue
            known.add(key)
            fresh.append(comp)
        record.component_energies = [insertion_energy(self.mesh, c, s) for s in fresh]
        if not fresh:
            # every component is already active: j_k is round-off on stationary sets
            logger.warning("iteration %d: no new set to insert (j_k = %.3e)", self.k, j_k)
            self.stalled = True
            self._finish(record, pde, n_cuts)
            return record

        obs = self._observe(fresh)
        pde += len(fresh)
        new_entries = [ActiveEntry(s, perimeter(self.mesh, s), o) for s, o in zip(fresh, obs)]
        state = self._update_coefficients(new_entries, obs)
        self._commit(*state)
        record.n_components = len(fresh)
        self._finish(record, pde, n_cuts)
        self.k += 1
        return record

    def _finish(self, record, pde, n_cuts):
        self.pde_solves += pde
        self.cuts += n_cuts
        record.pde_solves = self.pde_solves
        record.cuts = self.cuts
        record.iteration_pde = pde
        record.wall_ms = (time.perf_counter() - self._t0) * 1e3
        self.trace.records.append(record)

    def run(self) -> RunResult:
        while not (self.converged or self.stalled) and self.k < self.config.max_iter:
            self.step()
        if not (self.converged or self.stalled):
            # record the final iterate without inserting anything more
            c = self.weights()
            subset, j_k, n_cuts, _ = self._insert(c)
            fit, tv, sur = self.objective_parts()
            rec = TraceRecord(self.k, fit + tv, sur, j_k, 0, len(self.entries), 0, 0, 0.0,
                              objective=fit + sur, stationarity=self.stationarity(c),
                              iteration_cuts=n_cuts)
            self.converged = j_k <= self.config.tolerance
            self._finish(rec, 1, n_cuts)
        return RunResult(self.u, list(self.entries), self.lam.copy(), self.trace,
                         self.converged, self.stalled, self.setup_pde_solves)


def run(problem: PdeProblem, config: SolverConfig | None = None) -> RunResult:
    result = FCGCGSolver(problem, config).run()
    if config is not None and config.output_dir:
        write_outputs(result, problem.mesh, config.output_dir)
    return result


def run_comparison(problem: PdeProblem, config: SolverConfig | None = None):
    """Run both insertion modes on the same problem; returns ``(onecut, dinkelbach)``."""
    config = config or SolverConfig()
    results = {}
    for mode in ("onecut", "dinkelbach"):
        cfg = SolverConfig(config.tolerance, config.max_iter, mode, config.include_omega, None)
        problem._lu = None  # fresh factorization so timings are comparable
        results[mode] = FCGCGSolver(problem, cfg).run()
    one, dink = results["onecut"], results["dinkelbach"]
    per_iter = [r.iteration_cuts for r in one.trace]
    if any(n != 1 for n in per_iter):
        raise AssertionError("one-cut mode used more than one cut in an iteration")
    if any(r.iteration_cuts < 1 for r in dink.trace if r.j_k > cfg.tolerance):
        logger.warning("dinkelbach iteration without a cut (degenerate ratio)")
    if config.output_dir:
        out = Path(config.output_dir)
        for mode, res in results.items():
            write_outputs(res, problem.mesh, out / mode)
    return one, dink


@dataclass
class ResidualCurve:
    residuals: np.ndarray
    consistent: bool
    tail_slope: float
    tail_intercept: float
    tail_correlation: float
    sublinear_q: float

    def rate(self) -> float:
        """Fitted per-iteration contraction factor of the tail."""
        return float(np.exp(self.tail_slope))


def residual_curve(trace: SolverTrace, J_ref: float, tail: float = 0.5) -> ResidualCurve:
    """Residuals ``J(u_k) - J_ref`` with a log-linear fit of the tail.

    The tail is the last ``tail`` fraction of the strictly positive
    residuals.  ``sublinear_q`` is the largest ``q`` for which
    ``r_k <= r_1 / (1 + q (k - 1))`` holds for every ``k >= 2``.
    """
    J = np.array([r.J for r in trace.records])
    r = J - J_ref
    consistent = bool(np.all(r >= -1e-10))
    if not consistent:
        logger.warning("reference value exceeds an iterate by %.3e", -r.min())
    k = np.arange(len(r))
    pos = np.flatnonzero(r > 0)
    slope = intercept = corr = float("nan")
    if pos.size >= 3:
        start = pos[int(np.floor((1 - tail) * pos.size))] if tail < 1 else pos[0]
        sel = pos[pos >= start]
        if sel.size < 3:
            sel = pos[-3:]
        logr = np.log(r[sel])
        slope, intercept = np.polyfit(sel, logr, 1)
        corr = float(np.corrcoef(sel, logr)[0, 1])
    q = float("nan")
    if len(r) > 2 and r[1] > 0:
        ks = k[2:]
        rk = r[2:]
        ok = rk > 0
        qs = (r[1] / rk[ok] - 1.0) / (ks[ok] - 1)
        q = float(qs.min()) if qs.size else float("inf")
    return ResidualCurve(r, consistent, float(slope), float(intercept), corr, q)


def write_outputs(result: RunResult, mesh: TriMesh, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result.trace.write_csv(out / "trace.csv")
    (out / "summary.json").write_text(json.dumps(result.summary(), indent=2, sort_keys=True) + "\n")
    save_field(out / "solution.p0field", result.u, "P0")
    save_mesh(out / "mesh.trimesh", mesh)
    return out
