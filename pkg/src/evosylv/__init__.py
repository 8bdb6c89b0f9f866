"""All-at-once space-time solver for evolutionary PDEs.

The discretized heat / convection-diffusion problem is written as one
Sylvester matrix equation

    (I - P + tau*beta*Kbar) U - U Sigma^T = [u0, F1][e1, tau*beta*F2]^T

and solved by Galerkin projection onto extended or rational Krylov
subspaces of the space operator, with an FFT + Sherman-Morrison-Woodbury
scheme for the reduced equations.
"""

from .discretization import (Grid, LowRankRhs, ProblemSpec, SpaceOperator,
                             assemble_rhs, assemble_space_operator,
                             compress_snapshots)
from .oracles import analytic_example1, dense_kron_solve, timestep_solve
from .presets import get_preset
from .solver import (FactoredSolution, SolveReport, extract_snapshot,
                     inner_solve_fft_smw, inner_solve_sequential, materialize,
                     solve_eksm, solve_eksm_separable, solve_rksm)
from .timeops import BdfScheme, TimeOperator, bdf_coefficients, build_time_operator

__all__ = [
    "Grid", "LowRankRhs", "ProblemSpec", "SpaceOperator",
    "assemble_rhs", "assemble_space_operator", "compress_snapshots",
    "analytic_example1", "dense_kron_solve", "timestep_solve",
    "get_preset",
    "FactoredSolution", "SolveReport", "extract_snapshot",
    "inner_solve_fft_smw", "inner_solve_sequential", "materialize",
    "solve_eksm", "solve_eksm_separable", "solve_rksm",
    "BdfScheme", "TimeOperator", "bdf_coefficients", "build_time_operator",
]

__version__ = "0.1.0"
