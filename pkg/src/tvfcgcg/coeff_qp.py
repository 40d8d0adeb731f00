"""Fully-corrective coefficient update.

Given observations ``o_j`` of the active sets, minimize over ``lam``::

    f(lam) = 1/(2 alpha) * (lam^T G lam - 2 b^T lam + |y_d|^2) + pi^T lam

subject to ``lam_j >= 0`` for every index except an optional sign-free
one (the constant function).  ``G`` is only positive semidefinite: the
constant function, a set and its complement give linearly dependent
observations.  The primal active-set method below therefore moves along
null-space rays when the reduced Hessian on the current face is singular.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["ReducedProblem", "Coefficients", "solve_coeffs", "prune"]


@dataclass
class ReducedProblem:
    gram: np.ndarray
    linear: np.ndarray
    perimeters: np.ndarray
    alpha: float
    free_index: int | None = None
    target_norm2: float = 0.0

    def __post_init__(self):
        self.gram = np.atleast_2d(np.asarray(self.gram, dtype=float))
        self.linear = np.atleast_1d(np.asarray(self.linear, dtype=float))
        self.perimeters = np.atleast_1d(np.asarray(self.perimeters, dtype=float))
        n = len(self.linear)
        if self.gram.shape != (n, n) or self.perimeters.shape != (n,):
            raise ValueError("inconsistent dimensions")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.free_index is not None and not 0 <= self.free_index < n:
            raise ValueError("free_index out of range")

    @property
    def dim(self) -> int:
        return len(self.linear)

    def objective(self, lam) -> float:
        lam = np.asarray(lam, dtype=float)
        quad = lam @ self.gram @ lam - 2 * self.linear @ lam + self.target_norm2
        return float(0.5 / self.alpha * quad + self.perimeters @ lam)

    def gradient(self, lam) -> np.ndarray:
        return (self.gram @ lam - self.linear) / self.alpha + self.perimeters

    def constrained(self) -> np.ndarray:
        mask = np.ones(self.dim, dtype=bool)
        if self.free_index is not None:
            mask[self.free_index] = False
        return mask

    def kkt_residual(self, lam) -> float:
        """Largest violation of stationarity / complementarity / feasibility."""
        lam = np.asarray(lam, dtype=float)
        g = self.gradient(lam)
        con = self.constrained()
        infeasible = np.maximum(-lam[con], 0.0).max(initial=0.0)
        on = ~con | (lam > 0)
        viol = np.where(on, np.abs(g), np.maximum(-g, 0.0))
        return float(max(viol.max(initial=0.0), infeasible))


@dataclass
class Coefficients:
    lam: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int = 0
    converged: bool = True


def _face_direction(H, g, rtol):
    """Newton step on a face, or a descent ray when ``H`` is singular there."""
    w, V = np.linalg.eigh(H)
    top = max(float(np.abs(w).max(initial=0.0)), np.finfo(float).tiny)
    keep = w > rtol * top
    coef = V.T @ g
    gscale = float(np.abs(g).max(initial=0.0))
    null = ~keep & (np.abs(coef) > 1e3 * np.finfo(float).eps * max(gscale, 1.0) * np.sqrt(len(g)))
    if null.any():
        return -(V[:, null] @ coef[null]), True
    return -(V[:, keep] @ (coef[keep] / w[keep])), False


def solve_coeffs(rp: ReducedProblem, warm=None, tol: float = 1e-11,
                 max_iter: int | None = None) -> Coefficients:
    """Primal active-set solve of the reduced problem.

    ``warm`` (an array or :class:`Coefficients`) is projected onto the
    feasible set and used as the starting point.  Constraints enter the
    working face one at a time, smallest index first, which rules out
    cycling.  Inactive coefficients come back as exact zeros.
    """
    n = rp.dim
    if max_iter is None:
        max_iter = 100 * max(n, 1)
    con = rp.constrained()
    H = rp.gram / rp.alpha
    if isinstance(warm, Coefficients):
        warm = warm.lam
    lam = np.zeros(n) if warm is None else np.array(warm, dtype=float).copy()
    if lam.shape != (n,):
        raise ValueError("warm start has the wrong length")
    lam[con] = np.maximum(lam[con], 0.0)
    face = ~con | (lam > 0)

    scale = 1.0 + float(np.abs(rp.linear / rp.alpha).max(initial=0.0)) \
        + float(np.abs(rp.perimeters).max(initial=0.0))
    eig_rtol = 1e-13 * max(n, 1)

    it = 0
    converged = False
    while it < max_iter:
        it += 1
        idx = np.flatnonzero(face)
        if idx.size:
            g = rp.gradient(lam)
            d, ray = _face_direction(H[np.ix_(idx, idx)], g[idx], eig_rtol)
            cidx = con[idx]
            shrinking = cidx & (d < 0)
            if shrinking.any():
                ratios = -lam[idx[shrinking]] / d[shrinking]
                t_block = float(ratios.min())
            else:
                t_block = np.inf
            if ray and not np.isfinite(t_block):
                raise ValueError("reduced problem is unbounded below")
            t = t_block if ray else min(1.0, t_block)
            lam[idx] += t * d
            if t == t_block:
                hit = idx[shrinking][ratios <= t_block]
                lam[hit] = 0.0
                face[hit] = False
                lam[con & (lam < 0)] = 0.0
                continue
        g = rp.gradient(lam)
        viol = np.flatnonzero(con & ~face & (g < -tol * scale))
        if viol.size == 0:
            converged = True
            break
        face[viol[0]] = True

    lam[con & ~face] = 0.0
    return Coefficients(lam=lam, objective=rp.objective(lam), kkt_residual=rp.kkt_residual(lam),
                        iterations=it, converged=converged)


def prune(coeffs: Coefficients, entries, keep_index: int | None = None):
    """Drop entries whose coefficient is exactly zero, keeping order.

    ``keep_index`` (the constant function) survives regardless of its value.
    Returns ``(kept_entries, kept_lam, kept_positions)``.
    """
    lam = np.asarray(coeffs.lam)
    if len(entries) != len(lam):
        raise ValueError("one coefficient per entry required")
    pos = [j for j in range(len(lam)) if lam[j] != 0.0 or j == keep_index]
    return [entries[j] for j in pos], lam[pos], pos
