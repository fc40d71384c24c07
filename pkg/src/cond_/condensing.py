from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ..ms_ import StageQpData
from ..ocp_.errors import ConfigurationError


@dataclass
class CondensedQp:
    """
    Dense QP in the stacked input increments du = (du_0, ..., du_{N-1}):

        min 1/2 du^T H du + g^T du   s.t.  lb <= C du <= ub

    with the state response dx_k = G[k] du + e[k].

    Attributes:
        H: (N nu, N nu)
        g: (N nu,)
        C: (N nc + ncN, N nu)
        lb, ub: stacked bounds
        G: (N+1, nx, N nu) state-transition prefix matrices
        e: (N+1, nx) affine state response
    """

    H: np.ndarray
    g: np.ndarray
    C: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    G: np.ndarray
    e: np.ndarray

    def objective(self, du: np.ndarray) -> float:
        return float(0.5 * du @ self.H @ du + self.g @ du)


def condense(qp: StageQpData, dx0: Optional[np.ndarray] = None) -> CondensedQp:
    """
    Eliminate the state increments with dx_{k+1} = A_k dx_k + B_k du_k + d_k.

    e_0 = dx0, e_{k+1} = A_k e_k + d_k; G_0 = 0, G_{k+1} = A_k G_k with B_k in
    column block k. Constant objective terms are dropped.
    """
    N, nx, nu, nc = qp.N, qp.nx, qp.nu, qp.nc
    dx0 = qp.dx0 if dx0 is None else np.asarray(dx0, dtype=float)
    if dx0.shape != (nx,):
        raise ConfigurationError(f"dx0 must have length {nx}, got {dx0.shape}")
    n = N * nu

    e = np.zeros((N + 1, nx))
    G = np.zeros((N + 1, nx, n))
    e[0] = dx0
    for k in range(N):
        e[k + 1] = qp.A[k] @ e[k] + qp.d[k]
        G[k + 1] = qp.A[k] @ G[k]
        G[k + 1][:, k * nu : (k + 1) * nu] += qp.B[k]

    H = np.zeros((n, n))
    g = np.zeros(n)
    C = np.zeros((N * nc + qp.ncN, n))
    lb = np.zeros(N * nc + qp.ncN)
    ub = np.zeros(N * nc + qp.ncN)
    for k in range(N):
        # z_k = M_k du + [e_k; 0]
        M = np.zeros((nx + nu, n))
        M[:nx] = G[k]
        M[nx:, k * nu : (k + 1) * nu] = np.eye(nu)
        Hk = qp.H[k]
        H += M.T @ Hk @ M
        g += M.T @ (Hk[:, :nx] @ e[k] + qp.g[k])

        rows = slice(k * nc, (k + 1) * nc)
        C[rows] = qp.C[k] @ G[k]
        C[rows, k * nu : (k + 1) * nu] += qp.D[k]
        shift = qp.C[k] @ e[k]
        lb[rows] = qp.lbc[k] - shift
        ub[rows] = qp.ubc[k] - shift

    H += G[N].T @ qp.HN @ G[N]
    g += G[N].T @ (qp.HN @ e[N] + qp.gN)
    rows = slice(N * nc, N * nc + qp.ncN)
    C[rows] = qp.CN @ G[N]
    shift = qp.CN @ e[N]
    lb[rows] = qp.lbcN - shift
    ub[rows] = qp.ubcN - shift
    return CondensedQp(0.5 * (H + H.T), g, C, lb, ub, G, e)


def expand(
    qp: StageQpData,
    cond: CondensedQp,
    du: np.ndarray,
    cond_duals: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Recover the stage variables and multipliers of the sparse QP.

    Args:
        qp: stage data the condensed QP was built from
        cond: condensed QP
        du: (N nu,) solution of the condensed QP
        cond_duals: (N nc + ncN,) signed constraint multipliers (upper minus lower)

    Returns:
        dx: (N+1, nx), lam: (N+1, nx), mu: (N, nc), muN: (ncN,)
    """
    N, nx, nu, nc = qp.N, qp.nx, qp.nu, qp.nc
    du = np.asarray(du, dtype=float)
    dx = np.einsum("kij,j->ki", cond.G, du) + cond.e
    du_stages = du.reshape(N, nu)
    mu = np.asarray(cond_duals[: N * nc], dtype=float).reshape(N, nc)
    muN = np.asarray(cond_duals[N * nc :], dtype=float)

    # Backward sweep of the stage stationarity conditions for dx_k
    lam = np.zeros((N + 1, nx))
    lam[N] = qp.HN @ dx[N] + qp.gN + qp.CN.T @ muN
    for k in range(N - 1, -1, -1):
        Hk = qp.H[k]
        lam[k] = (
            Hk[:nx, :nx] @ dx[k]
            + Hk[:nx, nx:] @ du_stages[k]
            + qp.g[k][:nx]
            + qp.A[k].T @ lam[k + 1]
            + qp.C[k].T @ mu[k]
        )
    return dx, lam, mu, muN
