import logging
from concurrent.futures import Executor
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np

from ..ocp_ import OcpProblem
from ..ocp_.errors import GenerationError, IntegrationError
from ..rk_ import Integrator
from .cmon import CmonConfig, CmonFlags, dual_measure, primal_measure, should_skip
from .trajectory import Trajectory

logger = logging.getLogger(__name__)


@dataclass
class StageQpData:
    """
    Stage-sparse QP in the increments (dx, du):

        min  sum_k 1/2 [dx; du]^T H_k [dx; du] + g_k^T [dx; du] + 1/2 dx_N^T H_N dx_N + g_N^T dx_N
        s.t. dx_0 = dx0
             dx_{k+1} = A_k dx_k + B_k du_k + d_k
             lbc_k <= C_k dx_k + D_k du_k <= ubc_k
             lbcN <= C_N dx_N <= ubcN

    Stage arrays are stacked along a leading axis of length N. `phi` keeps the
    interval-map values the data was built from.
    """

    H: np.ndarray
    g: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    d: np.ndarray
    lbc: np.ndarray
    ubc: np.ndarray
    HN: np.ndarray
    gN: np.ndarray
    CN: np.ndarray
    lbcN: np.ndarray
    ubcN: np.ndarray
    dx0: np.ndarray
    phi: np.ndarray

    @property
    def N(self) -> int:
        return self.A.shape[0]

    @property
    def nx(self) -> int:
        return self.A.shape[1]

    @property
    def nu(self) -> int:
        return self.B.shape[2]

    @property
    def nc(self) -> int:
        return self.C.shape[1]

    @property
    def ncN(self) -> int:
        return self.CN.shape[0]

    def with_dx0(self, dx0: np.ndarray) -> "StageQpData":
        fields = dict(self.__dict__)
        fields["dx0"] = np.asarray(dx0, dtype=float)
        return StageQpData(**fields)


class Linearization(NamedTuple):
    """A previous QP together with the iterate it was generated at."""

    qp: StageQpData
    traj: Trajectory


class _StageData(NamedTuple):
    H: np.ndarray
    g: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    phi: np.ndarray
    lbc: np.ndarray
    ubc: np.ndarray
    updated: bool
    kappa: float
    kappa_tilde: float
    degenerate: bool


def _gauss_newton(J: np.ndarray, W: np.ndarray, h: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    WJ = W @ J
    H = J.T @ WJ
    return 0.5 * (H + H.T), WJ.T @ h


def _stage(
    problem: OcpProblem,
    integrator: Integrator,
    k: int,
    traj: Trajectory,
    params: np.ndarray,
    prev: Optional[Linearization],
    cmon: Optional[CmonConfig],
) -> _StageData:
    x, u, p = traj.x[k], traj.u[k], params[k]
    h, J = problem.eval_residual_and_jac(x, u, p)
    H, g = _gauss_newton(J, problem.stage_weight(k), h)
    r, C, D = problem.eval_constraint_and_jac(x, u, p)

    kappa = kappa_tilde = np.nan
    degenerate = False
    updated = True
    try:
        if prev is None or cmon is None or not cmon.enabled:
            res = integrator.simulate(x, u, p, with_sens=True)
            phi, A, B = res.x_next, res.A, res.B
        else:
            A_prev, B_prev = prev.qp.A[k], prev.qp.B[k]
            dx, du = x - prev.traj.x[k], u - prev.traj.u[k]
            if cmon.eta_pri <= 0:
                res = integrator.simulate(x, u, p, with_sens=True)
                phi, A, B = res.x_next, res.A, res.B
                kappa, degenerate = primal_measure(phi, prev.qp.phi[k], A_prev, B_prev, dx, du)
            else:
                phi = integrator.simulate(x, u, p).x_next
                kappa, degenerate = primal_measure(phi, prev.qp.phi[k], A_prev, B_prev, dx, du)
                if cmon.dual_test and not degenerate and kappa <= cmon.eta_pri:
                    jvp = integrator.directional(x, u, p, dx, du, phi)
                    dlam = traj.lam[k + 1] - prev.traj.lam[k + 1]
                    kappa_tilde = dual_measure(dlam, A_prev, B_prev, dx, du, jvp)
                if should_skip(cmon, kappa, degenerate, kappa_tilde):
                    A, B = A_prev, B_prev
                    updated = False
                else:
                    res = integrator.simulate(x, u, p, with_sens=True)
                    A, B = res.A, res.B
            if degenerate:
                logger.debug("CMoN stage %d: vanishing denominator, sensitivities updated", k)
    except IntegrationError as err:
        raise GenerationError.from_integration(err, k) from err

    return _StageData(
        H, g, A, B, C, D, phi, problem.lb - r, problem.ub - r, updated, kappa, kappa_tilde, degenerate
    )


def generate_qp(
    problem: OcpProblem,
    integrator: Integrator,
    traj: Trajectory,
    x0_hat: np.ndarray,
    params: Optional[np.ndarray] = None,
    prev: Optional[Linearization] = None,
    cmon: Optional[CmonConfig] = None,
    executor: Optional[Executor] = None,
) -> Tuple[StageQpData, CmonFlags]:
    """
    Linearize the multiple-shooting NLP at `traj`.

    Residuals, constraints, d_k and the Gauss-Newton blocks are always evaluated;
    with CMoN enabled and a previous linearization given, a stage whose
    measures pass the thresholds keeps the previous (A_k, B_k).

    Args:
        problem: the OCP
        integrator: interval map
        traj: current iterate
        x0_hat: measured initial state
        params: (np,) or (N+1, np) online parameters
        prev: previous linearization for CMoN
        cmon: CMoN configuration
        executor: optional pool mapping the stage loop

    Raises:
        GenerationError: integration failure, carrying the shooting interval
    """
    d = problem.dims
    traj.validate(d)
    params = problem.stage_params(params)
    x0_hat = np.asarray(x0_hat, dtype=float)

    def run(k: int) -> _StageData:
        return _stage(problem, integrator, k, traj, params, prev, cmon)

    stages = list(executor.map(run, range(d.N))) if executor is not None else [run(k) for k in range(d.N)]

    hN, JN = problem.eval_residual_and_jac(traj.x[-1], None, params[-1], terminal=True)
    HN, gN = _gauss_newton(JN, problem.WN, hN)
    rN, CN, _ = problem.eval_constraint_and_jac(traj.x[-1], None, params[-1], terminal=True)

    phi = np.array([s.phi for s in stages]).reshape(d.N, d.nx)
    qp = StageQpData(
        H=np.array([s.H for s in stages]).reshape(d.N, d.nz, d.nz),
        g=np.array([s.g for s in stages]).reshape(d.N, d.nz),
        A=np.array([s.A for s in stages]).reshape(d.N, d.nx, d.nx),
        B=np.array([s.B for s in stages]).reshape(d.N, d.nx, d.nu),
        C=np.array([s.C for s in stages]).reshape(d.N, d.nc, d.nx),
        D=np.array([s.D for s in stages]).reshape(d.N, d.nc, d.nu),
        d=phi - traj.x[1:],
        lbc=np.array([s.lbc for s in stages]).reshape(d.N, d.nc),
        ubc=np.array([s.ubc for s in stages]).reshape(d.N, d.nc),
        HN=HN,
        gN=gN,
        CN=CN,
        lbcN=problem.lbN - rN,
        ubcN=problem.ubN - rN,
        dx0=x0_hat - traj.x[0],
        phi=phi,
    )
    if prev is None or cmon is None or not cmon.enabled:
        flags = CmonFlags.full_update(d.N)
    else:
        flags = CmonFlags(
            update_mask=np.array([s.updated for s in stages], dtype=bool),
            kappa=np.array([s.kappa for s in stages]),
            kappa_tilde=np.array([s.kappa_tilde for s in stages]),
            degenerate=np.array([s.degenerate for s in stages], dtype=bool),
        )
    return qp, flags
