"""Ready-made instances of the two test problems."""
from __future__ import annotations

import numpy as np

from .mesh import TriMesh, generate_square_mesh
from .pde import PdeProblem, indicator_target


def phantom_control(mesh: TriMesh) -> np.ndarray:
    """Piecewise constant stand-in control with two nested level sets.

    Value 1 on the ellipse ``(x/0.7)^2 + (y/0.5)^2 < 1`` and 2 on the disc
    of radius 0.3 centred at the origin; symmetric in both axes.
    """
    x, y = mesh.centroids.T
    outer = (x / 0.7) ** 2 + (y / 0.5) ** 2 < 1.0
    inner = x ** 2 + y ** 2 < 0.3 ** 2
    return outer.astype(float) + inner.astype(float)


def elliptic_example(n: int = 24, jitter: float = 0.2, seed: int = 0, alpha: float = 1e-4,
                     mesh: TriMesh | None = None) -> PdeProblem:
    """``y_d`` = indicator of (-0.5, 0.5)^2, sign-free controls via the constant function."""
    mesh = mesh or generate_square_mesh(n, jitter, seed)
    y_d = indicator_target(mesh, 0.0, 0.0, 1.0, 1.0)
    return PdeProblem(mesh, "elliptic", alpha=alpha, y_d=y_d, nonneg=False, include_omega=True)


def parabolic_example(n: int = 24, jitter: float = 0.2, seed: int = 0, alpha: float = 1e-4,
                      T: float = 0.02, N: int = 9, mesh: TriMesh | None = None) -> PdeProblem:
    """End-time observation of the heat equation started from :func:`phantom_control`."""
    mesh = mesh or generate_square_mesh(n, jitter, seed)
    problem = PdeProblem(mesh, "parabolic", alpha=alpha, T=T, N=N, nonneg=True, include_omega=True)
    problem.y_d = problem.forward(phantom_control(mesh))
    return problem
