"""Flexible, adaptive Simpler GMRES with deflated restarting for shifted systems.

Solve ``(A + alpha_j I) x_j = b`` for several shifts at once::

    from shifted_sgmres import ProblemInstance, SolverConfig, gen_bidiag, gen_rhs, solve
    from shifted_sgmres import PreconditionerSpec

    A = gen_bidiag(1000, "bidiag1")
    problem = ProblemInstance(A, gen_rhs(1000, "seeded_random", 0), [0, 0.4, 2])
    config = SolverConfig(m=10, e=3, preconditioner=PreconditionerSpec.parse("igmres:10"))
    report = solve(problem, config, "fad_sgmres_dr_sh")
"""

from .counters import CostCounters
from .exceptions import (ConvergenceError, FactorizationError, InputError,
                         MatrixMarketError, RankDeficientError, SingularMatrixError,
                         SingularTriangularError, SolverError)
from .preconditioners import PreconditionerSpec
from .solver import ALGORITHMS, SolveReport, SolverConfig, solve
from .sparse_core import (ProblemInstance, SparseMatrix, gen_bidiag, gen_random_sparse,
                          gen_rhs, read_matrix_market, shifted_spmv, spmv)

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS",
    "ConvergenceError",
    "CostCounters",
    "FactorizationError",
    "InputError",
    "MatrixMarketError",
    "PreconditionerSpec",
    "ProblemInstance",
    "RankDeficientError",
    "SingularMatrixError",
    "SingularTriangularError",
    "SolveReport",
    "SolverConfig",
    "SolverError",
    "SparseMatrix",
    "gen_bidiag",
    "gen_random_sparse",
    "gen_rhs",
    "read_matrix_market",
    "shifted_spmv",
    "solve",
    "spmv",
]
