from typing import NamedTuple, Optional

import numpy as np

from ..ms_ import StageQpData, Trajectory, generate_qp
from ..ocp_ import OcpProblem
from ..rk_ import Integrator, IntegratorConfig


class KktResidual(NamedTuple):
    """Infinity norms of the Lagrangian gradient, equality and inequality violation."""

    stationarity: float
    eq_violation: float
    ineq_violation: float

    @property
    def max(self) -> float:
        return max(self.stationarity, self.eq_violation, self.ineq_violation)


def _inf(v: np.ndarray) -> float:
    return float(np.max(np.abs(v))) if v.size else 0.0


def kkt_from_qp(qp: StageQpData, traj: Trajectory) -> KktResidual:
    """
    KKT residuals of the NLP at the iterate `qp` was generated at.

    Lagrangian gradient, with lam the continuity and mu the signed path multipliers:
        d/dx_k: g_x,k - lam_k + A_k^T lam_{k+1} + C_k^T mu_k
        d/du_k: g_u,k + B_k^T lam_{k+1} + D_k^T mu_k
        d/dx_N: g_N - lam_N + C_N^T mu_N
    """
    nx = qp.nx
    gx = (
        qp.g[:, :nx]
        - traj.lam[:-1]
        + np.einsum("kji,kj->ki", qp.A, traj.lam[1:])
        + np.einsum("kji,kj->ki", qp.C, traj.mu)
    )
    gu = (
        qp.g[:, nx:]
        + np.einsum("kji,kj->ki", qp.B, traj.lam[1:])
        + np.einsum("kji,kj->ki", qp.D, traj.mu)
    )
    gN = qp.gN - traj.lam[-1] + qp.CN.T @ traj.muN
    stationarity = max(_inf(gx), _inf(gu), _inf(gN))

    eq = max(_inf(qp.dx0), _inf(qp.d))
    ineq = 0.0
    for lbc, ubc in ((qp.lbc, qp.ubc), (qp.lbcN, qp.ubcN)):
        if lbc.size:
            ineq = max(ineq, float(np.max(np.maximum(lbc, -ubc))))
    return KktResidual(stationarity, eq, max(0.0, ineq))


def kkt_residual(
    problem: OcpProblem,
    integrator_config: Optional[IntegratorConfig],
    traj: Trajectory,
    x0_hat: Optional[np.ndarray] = None,
    params: Optional[np.ndarray] = None,
) -> KktResidual:
    """Recompute the KKT residuals from scratch with exact sensitivities."""
    x0_hat = traj.x[0] if x0_hat is None else x0_hat
    qp, _ = generate_qp(problem, Integrator(problem, integrator_config), traj, x0_hat, params)
    return kkt_from_qp(qp, traj)
