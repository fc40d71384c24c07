from dataclasses import dataclass, field
from typing import Any, Dict, List

import numpy as np

from ..sqp_ import PHASES, SolveReport


@dataclass
class SimLog:
    """
    One record per control sample.

    Attributes:
        t: sample times
        x: plant state at each sample (before the input is applied)
        u: applied input
        kkt: KKT residual triple reported by the solver
        sqp_iters, qp_iters: QP solves and interior-point iterations per sample
        update_fraction: mean share of exactly updated sensitivities per sample
        status: solver status per sample
        prediction_error: |plant state - controller prediction|_inf after the sample
        tracking_error: |h_N(x, p)|_inf at the sample
        timings: per-phase solver wall time per sample
        solver_rows: per-iteration solver records tagged with the sample index
    """

    t: List[float] = field(default_factory=list)
    x: List[np.ndarray] = field(default_factory=list)
    u: List[np.ndarray] = field(default_factory=list)
    kkt: List[tuple] = field(default_factory=list)
    sqp_iters: List[int] = field(default_factory=list)
    qp_iters: List[int] = field(default_factory=list)
    update_fraction: List[float] = field(default_factory=list)
    status: List[str] = field(default_factory=list)
    prediction_error: List[float] = field(default_factory=list)
    tracking_error: List[float] = field(default_factory=list)
    timings: Dict[str, List[float]] = field(default_factory=lambda: {p: [] for p in PHASES})
    solver_rows: List[Dict[str, Any]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.t)

    def record(
        self,
        t: float,
        x: np.ndarray,
        u: np.ndarray,
        report: SolveReport,
        status: str,
        prediction_error: float,
        tracking_error: float,
    ) -> None:
        sample = len(self.t)
        self.t.append(t)
        self.x.append(np.array(x, dtype=float))
        self.u.append(np.array(u, dtype=float))
        kkt = report.kkt
        self.kkt.append(tuple(kkt) if kkt is not None else (np.nan, np.nan, np.nan))
        self.sqp_iters.append(report.iters)
        self.qp_iters.append(int(sum(report.qp_iters)))
        fractions = report.cmon_update_fraction
        self.update_fraction.append(float(np.mean(fractions)) if fractions else 1.0)
        self.status.append(status)
        self.prediction_error.append(prediction_error)
        self.tracking_error.append(tracking_error)
        for phase in PHASES:
            self.timings[phase].append(report.timings[phase])
        for row in report.rows:
            self.solver_rows.append({"sample": sample, **row, **{f"t_{p}": report.timings[p] for p in PHASES}})

    @property
    def states(self) -> np.ndarray:
        return np.array(self.x)

    @property
    def inputs(self) -> np.ndarray:
        return np.array(self.u)

    @property
    def solve_times(self) -> np.ndarray:
        return np.sum([self.timings[p] for p in PHASES], axis=0)

    def to_rows(self) -> List[Dict[str, Any]]:
        """Per-sample records without wall-clock timings (reproducible output)."""
        rows = []
        for i in range(len(self)):
            row: Dict[str, Any] = {"sample": i, "t": self.t[i]}
            row.update({f"x{j}": v for j, v in enumerate(self.x[i])})
            row.update({f"u{j}": v for j, v in enumerate(self.u[i])})
            stat, eq, ineq = self.kkt[i]
            row.update(
                stationarity=stat,
                eq_violation=eq,
                ineq_violation=ineq,
                sqp_iters=self.sqp_iters[i],
                qp_iters=self.qp_iters[i],
                update_fraction=self.update_fraction[i],
                status=self.status[i],
                prediction_error=self.prediction_error[i],
                tracking_error=self.tracking_error[i],
            )
            rows.append(row)
        return rows

    def summary(self) -> Dict[str, Any]:
        """Timing statistics, final KKT, tracking statistics and CMoN update fractions."""
        if not len(self):
            return {"samples": 0}
        times = self.solve_times
        tracking = np.array(self.tracking_error)
        fractions = np.array(self.update_fraction)
        out: Dict[str, Any] = {
            "samples": len(self),
            "solve_time_mean": float(np.mean(times)),
            "solve_time_max": float(np.max(times)),
        }
        for phase in PHASES:
            out[f"{phase}_time_mean"] = float(np.mean(self.timings[phase]))
            out[f"{phase}_time_max"] = float(np.max(self.timings[phase]))
        out.update(
            final_kkt=dict(zip(("stationarity", "eq_violation", "ineq_violation"), map(float, self.kkt[-1]))),
            tracking_error_final=float(tracking[-1]),
            tracking_error_max=float(np.max(tracking)),
            tracking_error_rms=float(np.sqrt(np.mean(tracking**2))),
            update_fraction_mean=float(np.mean(fractions)),
            update_fraction_max=float(np.max(fractions)),
            failures=sum(s not in ("converged", "rti", "max_iters") for s in self.status),
        )
        return out
