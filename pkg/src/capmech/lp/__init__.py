from capmech.lp.backends import available_backends, get_backend, register_backend, solve
from capmech.lp.mps import export_interchange, import_interchange, read_mps, write_mps
from capmech.lp.problem import (INF, BackendError, LpError, LpProblem, LpSolution, Sense, Status,
                                ToleranceError, check_solution, solution_metrics)
from capmech.lp.simplex import NumericalBreakdown, SizeGuardError, reference_simplex

__all__ = [
    "INF", "BackendError", "LpError", "LpProblem", "LpSolution", "NumericalBreakdown", "Sense",
    "SizeGuardError", "Status", "ToleranceError", "available_backends", "check_solution",
    "export_interchange", "get_backend", "import_interchange", "read_mps", "reference_simplex",
    "register_backend", "solution_metrics", "solve", "write_mps",
]
