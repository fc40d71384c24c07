from concurrent.futures import Executor
from typing import Optional, Tuple

import numpy as np

from ..ocp_ import OcpProblem
from ..rk_ import Integrator, IntegratorConfig
from .cmon import CmonConfig, CmonFlags, cmon_measures
from .generation import Linearization, StageQpData, generate_qp
from .trajectory import StageStep, Trajectory

__all__ = [
    "MultipleShooting",
    "Trajectory",
    "StageStep",
    "StageQpData",
    "Linearization",
    "CmonConfig",
    "CmonFlags",
    "generate_qp",
    "cmon_measures",
]


class MultipleShooting:
    """
    QP generation for one problem, remembering the last linearization so CMoN
    can compare consecutive iterates (SQP iterations or RTI samples alike).
    """

    def __init__(
        self,
        problem: OcpProblem,
        integrator: Optional[IntegratorConfig] = None,
        cmon: Optional[CmonConfig] = None,
        executor: Optional[Executor] = None,
    ) -> None:
        self.problem = problem
        self.integrator = Integrator(problem, integrator)
        self.cmon = cmon or CmonConfig()
        self.executor = executor
        self.last: Optional[Linearization] = None

    def reset(self) -> None:
        self.last = None

    def generate(
        self,
        traj: Trajectory,
        x0_hat: np.ndarray,
        params: Optional[np.ndarray] = None,
        remember: bool = True,
    ) -> Tuple[StageQpData, CmonFlags]:
        qp, flags = generate_qp(
            self.problem,
            self.integrator,
            traj,
            x0_hat,
            params,
            prev=self.last if self.cmon.enabled else None,
            cmon=self.cmon,
            executor=self.executor,
        )
        if remember:
            self.last = Linearization(qp, traj.copy())
        return qp, flags

    def exact(
        self, traj: Trajectory, x0_hat: np.ndarray, params: Optional[np.ndarray] = None
    ) -> StageQpData:
        """Linearization with every sensitivity evaluated, leaving CMoN state alone."""
        qp, _ = generate_qp(
            self.problem, self.integrator, traj, x0_hat, params, executor=self.executor
        )
        return qp
