import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from tqdm import tqdm

from ..ms_ import Trajectory
from ..ocp_ import OcpProblem
from ..ocp_.errors import ConfigurationError, IntegrationError, QpFailure
from ..rk_ import Integrator, IntegratorConfig, Scheme
from ..sqp_ import NmpcOptions, NmpcSolver, SolveReport, SqpMode
from .log import SimLog

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimConfig:
    """
    Attributes:
        t_end: simulated time
        plant_substeps: plant integration steps per sample
        noise_std: standard deviation of additive state-measurement noise
        seed: noise generator seed
        warm_start_sqp: solve the first sample to convergence before RTI takes over
        plant_scheme: plant integrator (None: the controller's scheme)
    """

    t_end: float = 5.0
    plant_substeps: int = 2
    noise_std: float = 0.0
    seed: int = 0
    warm_start_sqp: bool = True
    plant_scheme: Optional[Scheme] = None

    def __post_init__(self) -> None:
        if not self.t_end > 0:
            raise ConfigurationError("sim.t_end must be > 0")
        if self.plant_substeps < 1:
            raise ConfigurationError("sim.plant_substeps must be >= 1")
        if self.noise_std < 0:
            raise ConfigurationError("sim.noise_std must be >= 0")
        if self.plant_scheme is not None:
            object.__setattr__(self, "plant_scheme", Scheme(self.plant_scheme))


def shift_warm_start(
    traj: Trajectory,
    integrator: Optional[Integrator] = None,
    params: Optional[np.ndarray] = None,
) -> Trajectory:
    """
    Advance a trajectory by one stage.

    Nodes, inputs and multipliers move one stage forward; the last input and
    multipliers are duplicated. With an integrator, the new last node is
    x_N propagated under the duplicated input, otherwise x_N is duplicated.
    """
    x = np.vstack([traj.x[1:], traj.x[-1:]])
    u = np.vstack([traj.u[1:], traj.u[-1:]])
    if integrator is not None:
        problem = integrator.problem
        p = problem.stage_params(params)[-2]
        x[-1] = integrator.simulate(traj.x[-1], u[-1], p).x_next
    return Trajectory(
        x=x,
        u=u,
        lam=np.vstack([traj.lam[1:], traj.lam[-1:]]),
        mu=np.vstack([traj.mu[1:], traj.mu[-1:]]),
        muN=traj.muN.copy(),
    )


class ClosedLoop:
    """
    Closed-loop NMPC simulation.

    Each sample: measure (with optional noise), compute the feedback, apply u_0
    to the plant over one sample period, shift the trajectory. A failed solve
    holds the previous input.
    """

    def __init__(
        self,
        problem: OcpProblem,
        options: Optional[NmpcOptions] = None,
        sim: Optional[SimConfig] = None,
        plant: Optional[OcpProblem] = None,
    ) -> None:
        self.problem = problem
        self.options = options or NmpcOptions()
        self.sim = sim or SimConfig()
        self.plant = plant or problem
        self.log = SimLog()
        if self.plant.dims.nx != problem.dims.nx or self.plant.dims.nu != problem.dims.nu:
            raise ConfigurationError("plant and controller must share state and input dimensions")
        self.n_samples = int(round(self.sim.t_end / problem.dims.Ts))
        if self.n_samples < 1:
            raise ConfigurationError("sim.t_end is shorter than one sample")
        integ = self.options.integrator
        self.plant_integrator = Integrator(
            self.plant,
            IntegratorConfig(
                scheme=self.sim.plant_scheme or integ.scheme,
                steps_per_interval=self.sim.plant_substeps,
                newton_tol=integ.newton_tol,
                newton_max_iters=integ.newton_max_iters,
            ),
            interval=problem.dims.Ts,
        )

    def references(self, references: Optional[np.ndarray]) -> np.ndarray:
        """Validate a reference series into one parameter row per sample."""
        d = self.problem.dims
        if references is None:
            return np.tile(self.problem.p_default, (self.n_samples, 1))
        ref = np.asarray(references, dtype=float)
        if ref.ndim == 1:
            if ref.shape != (d.npar,):
                raise ConfigurationError(f"reference must have length {d.npar}")
            return np.tile(ref, (self.n_samples, 1))
        if ref.ndim != 2 or ref.shape[1] != d.npar:
            raise ConfigurationError(f"reference series must be (samples, {d.npar})")
        if ref.shape[0] < self.n_samples:
            raise ConfigurationError(
                f"reference series has {ref.shape[0]} samples, simulation needs {self.n_samples}"
            )
        return ref[: self.n_samples]

    def _horizon(self, ref: np.ndarray, i: int) -> np.ndarray:
        idx = np.minimum(i + np.arange(self.problem.dims.N + 1), len(ref) - 1)
        return ref[idx]

    def run(
        self,
        x_init: Optional[np.ndarray] = None,
        references: Optional[np.ndarray] = None,
        progress: bool = True,
    ) -> SimLog:
        problem, d = self.problem, self.problem.dims
        ref = self.references(references)
        x = problem.x_init.copy() if x_init is None else np.asarray(x_init, dtype=float)
        if x.shape != (d.nx,) or not np.all(np.isfinite(x)):
            raise ConfigurationError(f"x_init must be a finite vector of length {d.nx}")

        rng = np.random.default_rng(self.sim.seed)
        log = self.log = SimLog()
        traj = Trajectory.initial(problem, x)
        u_prev = np.zeros(d.nu)
        rti = self.options.sqp.mode is SqpMode.RTI

        with NmpcSolver(problem, self.options) as solver:
            bar = tqdm(range(self.n_samples), desc="Closed loop", disable=not progress)
            for i in bar:
                params = self._horizon(ref, i)
                y = x + self.sim.noise_std * rng.standard_normal(d.nx) if self.sim.noise_std > 0 else x
                try:
                    if i == 0 and rti and self.sim.warm_start_sqp:
                        new, report = solver.solve(traj, y, params)
                    else:
                        new, report = solver.feedback(traj, y, params)
                    status = report.status.value
                except (QpFailure, IntegrationError) as err:
                    logger.warning("sample %d: solver failed (%s), holding previous input", i, err)
                    report = getattr(err, "report", None) or SolveReport()
                    new, status = traj, "failed"

                u = u_prev if status in ("failed", "rti_fallback") else new.u[0].copy()
                p_plant = params[0] if self.plant.dims.npar == d.npar else self.plant.p_default
                x_next = self.plant_integrator.simulate(x, u, p_plant).x_next
                x_pred = solver.integrator.simulate(x, u, params[0]).x_next
                tracking = problem.eval_residual(x, None, params[0], terminal=True)

                log.record(
                    t=i * d.Ts,
                    x=x,
                    u=u,
                    report=report,
                    status=status,
                    prediction_error=float(np.max(np.abs(x_next - x_pred))),
                    tracking_error=float(np.max(np.abs(tracking))) if tracking.size else 0.0,
                )
                kkt = report.kkt.max if report.kkt is not None else np.nan
                bar.set_description(f"Closed loop | kkt {kkt:.1e} | qp iters {log.qp_iters[-1]}")

                traj = shift_warm_start(new, solver.integrator, params)
                u_prev = u
                x = x_next
        return log


def run_closed_loop(
    problem: OcpProblem,
    options: Optional[NmpcOptions] = None,
    sim: Optional[SimConfig] = None,
    x_init: Optional[np.ndarray] = None,
    references: Optional[np.ndarray] = None,
    plant: Optional[OcpProblem] = None,
    progress: bool = False,
) -> SimLog:
    return ClosedLoop(problem, options, sim, plant).run(x_init, references, progress)
