import logging
import time
from enum import Enum
from typing import NamedTuple, Optional

from ..cond_ import Condenser, CondensingMode
from ..ms_ import StageQpData, StageStep
from ..ocp_.errors import ConfigurationError
from .dense import DenseBackend, solve_dense
from .ipm import QpSolution, QpSolverConfig, QpStatus, interior_point
from .kkt import KktCheck, check_kkt
from .sparse import RiccatiBackend, solve_sparse, stage_step

__all__ = [
    "QpSolver",
    "QpPath",
    "QpResult",
    "QpSolution",
    "QpSolverConfig",
    "QpStatus",
    "KktCheck",
    "DenseBackend",
    "RiccatiBackend",
    "interior_point",
    "solve_dense",
    "solve_sparse",
    "stage_step",
    "check_kkt",
]

logger = logging.getLogger(__name__)


class QpPath(str, Enum):
    DENSE = "dense"
    SPARSE = "sparse"


class QpResult(NamedTuple):
    step: StageStep
    solution: QpSolution
    t_condensing: float
    t_qp: float


class QpSolver:
    """
    Stage QP in, stage step out.

    The dense path condenses, runs the dense interior-point solver and expands;
    the sparse path runs the Riccati-based solver on the stage QP directly.
    """

    def __init__(
        self,
        config: Optional[QpSolverConfig] = None,
        path: QpPath = QpPath.DENSE,
        condensing: CondensingMode = CondensingMode.FULL,
    ) -> None:
        self.config = config or QpSolverConfig()
        self.path = QpPath(path)
        self.condenser = Condenser(condensing)
        if (self.path is QpPath.DENSE) != self.condenser.enabled:
            raise ConfigurationError(
                f"qp.path={self.path.value} requires condensing.mode="
                f"{'full' if self.path is QpPath.DENSE else 'none'}"
            )

    def solve(self, qp: StageQpData) -> QpResult:
        t0 = time.perf_counter()
        if self.path is QpPath.SPARSE:
            sol = solve_sparse(qp, config=self.config)
            t1 = time.perf_counter()
            result = QpResult(stage_step(qp, sol), sol, 0.0, t1 - t0)
        else:
            cond = self.condenser.condense(qp)
            t1 = time.perf_counter()
            sol = solve_dense(cond.H, cond.g, cond.C, cond.lb, cond.ub, self.config)
            step = self.condenser.expand(qp, cond, sol.primal, sol.ineq_duals)
            t2 = time.perf_counter()
            result = QpResult(step, sol, t1 - t0, t2 - t1)
        if not sol.ok:
            logger.warning("QP %s path returned %s after %d iterations", self.path.value, sol.status.value, sol.iters)
        return result
