from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional

from .solution_info import KktResidual

PHASES = ("generation", "condensing", "qp", "line_search")


class SolveStatus(str, Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"
    QP_FAILURE = "qp_failure"
    RTI = "rti"
    RTI_FALLBACK = "rti_fallback"


@dataclass
class SolveReport:
    """
    Outcome of one `solve` or `rti_step` call.

    Attributes:
        status: how the call ended
        iters: QP subproblems solved
        kkt: residuals at the returned iterate (RTI: at the linearization point)
        alpha_history: accepted step lengths
        cmon_update_fraction: share of exactly evaluated sensitivities per generation
        timings: accumulated wall time per phase in seconds
        mu_history: penalty parameter per iteration
        merit_history: merit value after each accepted step
        armijo_ok: whether each accepted step satisfied sufficient decrease
        line_search_failed: any step fell back to min_alpha
        qp_iters: interior-point iterations per QP
        rows: one record per iteration, ready for CSV
    """

    status: SolveStatus = SolveStatus.MAX_ITERS
    iters: int = 0
    kkt: Optional[KktResidual] = None
    alpha_history: List[float] = field(default_factory=list)
    cmon_update_fraction: List[float] = field(default_factory=list)
    timings: Dict[str, float] = field(default_factory=lambda: dict.fromkeys(PHASES, 0.0))
    mu_history: List[float] = field(default_factory=list)
    merit_history: List[float] = field(default_factory=list)
    armijo_ok: List[bool] = field(default_factory=list)
    line_search_failed: bool = False
    qp_iters: List[int] = field(default_factory=list)
    rows: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status is SolveStatus.CONVERGED

    @property
    def total_time(self) -> float:
        return sum(self.timings.values())

    def add_time(self, phase: str, seconds: float) -> None:
        self.timings[phase] += seconds
