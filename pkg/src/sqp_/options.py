import os
from dataclasses import dataclass, field
from enum import Enum

from ..cond_ import CondensingMode
from ..ms_ import CmonConfig
from ..ocp_.errors import ConfigurationError
from ..qp_ import QpPath, QpSolverConfig
from ..rk_ import IntegratorConfig


class SqpMode(str, Enum):
    CONVERGE = "converge"
    RTI = "rti"


@dataclass(frozen=True)
class SqpConfig:
    """
    Attributes:
        mode: iterate to convergence or one real-time iteration per call
        max_iters: SQP iteration cap
        kkt_tol: stopping tolerance on every KKT residual
        armijo_eta: sufficient-decrease factor
        backtrack_factor: step-length reduction per rejected trial
        min_alpha: smallest trial step
        merit_rho, merit_sigma: penalty-update parameters
    """

    mode: SqpMode = SqpMode.CONVERGE
    max_iters: int = 30
    kkt_tol: float = 1e-6
    armijo_eta: float = 1e-4
    backtrack_factor: float = 0.5
    min_alpha: float = 1e-4
    merit_rho: float = 0.5
    merit_sigma: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", SqpMode(self.mode))
        if self.max_iters < 1:
            raise ConfigurationError("sqp.max_iters must be >= 1")
        if not self.kkt_tol > 0:
            raise ConfigurationError("sqp.kkt_tol must be > 0")
        if not 0 < self.armijo_eta < 0.5:
            raise ConfigurationError("sqp.armijo_eta must lie in (0, 0.5)")
        if not 0 < self.backtrack_factor < 1:
            raise ConfigurationError("sqp.backtrack_factor must lie in (0, 1)")
        if not 0 < self.min_alpha <= 1:
            raise ConfigurationError("sqp.min_alpha must lie in (0, 1]")
        if not 0 < self.merit_rho < 1:
            raise ConfigurationError("sqp.merit_rho must lie in (0, 1)")
        if self.merit_sigma < 0:
            raise ConfigurationError("sqp.merit_sigma must be >= 0")


@dataclass(frozen=True)
class NmpcOptions:
    """Every solver option in one place; `workers` > 1 maps the stage loop on a thread pool (default: one per CPU)."""

    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    condensing: CondensingMode = CondensingMode.FULL
    qp: QpSolverConfig = field(default_factory=QpSolverConfig)
    qp_path: QpPath = QpPath.DENSE
    sqp: SqpConfig = field(default_factory=SqpConfig)
    cmon: CmonConfig = field(default_factory=CmonConfig)
    workers: int = field(default_factory=lambda: os.cpu_count() or 1)

    def __post_init__(self) -> None:
        object.__setattr__(self, "condensing", CondensingMode(self.condensing))
        object.__setattr__(self, "qp_path", QpPath(self.qp_path))
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")
        if self.qp_path is QpPath.DENSE and self.condensing is not CondensingMode.FULL:
            raise ConfigurationError("the dense QP path requires condensing.mode = full")
        if self.qp_path is QpPath.SPARSE and self.condensing is not CondensingMode.NONE:
            raise ConfigurationError("the sparse QP path requires condensing.mode = none")
