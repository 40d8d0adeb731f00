"""One-cut fully-corrective conditional gradient for TV-regularized problems on triangle meshes."""
from .coeff_qp import Coefficients, ReducedProblem, prune, solve_coeffs
from .curvature_cut import (CutSolution, NoAdmissibleSet, decompose, dinkelbach_insert,
                            insertion_energy, solve_mincut)
from .fcgcg import (FCGCGSolver, RunResult, SolverConfig, SolverTrace, residual_curve, run,
                    run_comparison, write_outputs)
from .mesh import (TriMesh, generate_square_mesh, load_field, load_mesh, perimeter, save_field,
                   save_mesh, tv_p0)
from .pde import PdeProblem, assemble, indicator_target, observation_inner
from .problems import elliptic_example, parabolic_example, phantom_control

__version__ = "0.1.0"
