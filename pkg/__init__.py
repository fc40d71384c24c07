from .src.ocp_ import OcpProblem, Dims, get_benchmark, list_benchmarks
from .src.rk_ import Integrator, IntegratorConfig
from .src.ms_ import Trajectory, CmonConfig, generate_qp
from .src.cond_ import Condenser, CondensingMode
from .src.qp_ import QpSolver, QpSolverConfig, QpPath, solve_dense, solve_sparse
from .src.sqp_ import NmpcSolver, NmpcOptions, SqpConfig, SqpMode
from .src.nmpc_ import ClosedLoop, SimConfig, run_closed_loop

__all__ = [
    "OcpProblem",
    "Dims",
    "get_benchmark",
    "list_benchmarks",
    "Integrator",
    "IntegratorConfig",
    "Trajectory",
    "CmonConfig",
    "generate_qp",
    "Condenser",
    "CondensingMode",
    "QpSolver",
    "QpSolverConfig",
    "QpPath",
    "solve_dense",
    "solve_sparse",
    "NmpcSolver",
    "NmpcOptions",
    "SqpConfig",
    "SqpMode",
    "ClosedLoop",
    "SimConfig",
    "run_closed_loop",
]
