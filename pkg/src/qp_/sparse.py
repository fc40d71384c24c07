from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from ..ms_ import StageQpData, StageStep
from .ipm import QpSolution, QpSolverConfig, interior_point


class RiccatiBackend:
    """
    Stage-structured linear algebra: w = (dx_0, ..., dx_N, du_0, ..., du_{N-1}).

    Each reduced Newton system is an equality-constrained LQ problem

        min sum 1/2 z_k^T K_k z_k + q_k^T z_k + 1/2 dx_N^T K_N dx_N + q_N^T dx_N
        s.t. dx_0 = c_init, dx_{k+1} = A_k dx_k + B_k du_k + c_k

    with K_k = H_k + [C_k D_k]^T Sigma_k [C_k D_k], solved by a backward Riccati
    sweep and a forward rollout. Multipliers follow as lam_k = P_k dx_k + p_k.
    """

    def __init__(self, qp: StageQpData, dx0: Optional[np.ndarray] = None, reg_eps: float = 1e-9) -> None:
        self.qp = qp
        self.N, self.nx, self.nu, self.nc = qp.N, qp.nx, qp.nu, qp.nc
        self.dx0 = qp.dx0 if dx0 is None else np.asarray(dx0, dtype=float)
        self.reg_eps = reg_eps
        self.nX = (self.N + 1) * self.nx
        self.n = self.nX + self.N * self.nu
        self.n_eq = self.nX
        self.lb = np.concatenate([qp.lbc.reshape(-1), qp.lbcN])
        self.ub = np.concatenate([qp.ubc.reshape(-1), qp.ubcN])
        nx = self.nx
        self._g = np.concatenate(
            [qp.g[:, :nx].reshape(-1), qp.gN, qp.g[:, nx:].reshape(-1)]
        )

    @property
    def g(self) -> np.ndarray:
        return self._g

    def split(self, w: np.ndarray):
        return w[: self.nX].reshape(self.N + 1, self.nx), w[self.nX :].reshape(self.N, self.nu)

    def join(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return np.concatenate([x.reshape(-1), u.reshape(-1)])

    def hess_grad(self, w):
        qp, nx = self.qp, self.nx
        x, u = self.split(w)
        z = np.concatenate([x[:-1], u], axis=1)
        Hz = np.einsum("kij,kj->ki", qp.H, z)
        return self.join(np.vstack([Hz[:, :nx], qp.HN @ x[-1]]), Hz[:, nx:]) + self._g

    def C_mul(self, w):
        qp = self.qp
        x, u = self.split(w)
        rows = np.einsum("kij,kj->ki", qp.C, x[:-1]) + np.einsum("kij,kj->ki", qp.D, u)
        return np.concatenate([rows.reshape(-1), qp.CN @ x[-1]])

    def CT_mul(self, v):
        qp, N, nc = self.qp, self.N, self.nc
        v_k = v[: N * nc].reshape(N, nc)
        vx = np.einsum("kji,kj->ki", qp.C, v_k)
        vu = np.einsum("kji,kj->ki", qp.D, v_k)
        return self.join(np.vstack([vx, qp.CN.T @ v[N * nc :]]), vu)

    def eq_residual(self, w):
        qp = self.qp
        x, u = self.split(w)
        nxt = np.einsum("kij,kj->ki", qp.A, x[:-1]) + np.einsum("kij,kj->ki", qp.B, u) + qp.d
        return np.concatenate([x[0] - self.dx0, (x[1:] - nxt).reshape(-1)])

    def eq_term(self, lam):
        qp = self.qp
        lam = lam.reshape(self.N + 1, self.nx)
        tx = -lam.copy()
        tx[:-1] += np.einsum("kji,kj->ki", qp.A, lam[1:])
        tu = np.einsum("kji,kj->ki", qp.B, lam[1:])
        return self.join(tx, tu)

    def _chol(self, Q: np.ndarray):
        try:
            return cho_factor(Q)
        except LinAlgError:
            return cho_factor(Q + self.reg_eps * np.eye(Q.shape[0]))

    def factorize(self, sigma):
        qp, N, nx, nc = self.qp, self.N, self.nx, self.nc
        s_k = sigma[: N * nc].reshape(N, nc)
        KN = qp.HN + qp.CN.T @ (sigma[N * nc :][:, None] * qp.CN)
        P = [None] * (N + 1)
        P[N] = 0.5 * (KN + KN.T)
        self.Quu, self.Qux, self.Kfb = [None] * N, [None] * N, [None] * N
        for k in range(N - 1, -1, -1):
            A, B = qp.A[k], qp.B[k]
            CD = np.hstack([qp.C[k], qp.D[k]])
            K = qp.H[k] + CD.T @ (s_k[k][:, None] * CD)
            PA, PB = P[k + 1] @ A, P[k + 1] @ B
            Qxx = K[:nx, :nx] + A.T @ PA
            Quu = K[nx:, nx:] + B.T @ PB
            Qux = K[nx:, :nx] + B.T @ PA
            factor = self._chol(0.5 * (Quu + Quu.T))
            Kfb = -cho_solve(factor, Qux)
            Pk = Qxx + Qux.T @ Kfb
            if not np.all(np.isfinite(Pk)):
                raise LinAlgError(f"Riccati recursion diverged at stage {k}")
            P[k] = 0.5 * (Pk + Pk.T)
            self.Quu[k], self.Qux[k], self.Kfb[k] = factor, Qux, Kfb
        self.P = P

    def solve(self, rhs, r_e):
        qp, N, nx = self.qp, self.N, self.nx
        qx, qu = self.split(-rhs)
        c_init = -r_e[:nx]
        c = -r_e[nx:].reshape(N, nx)
        p = [None] * (N + 1)
        kff = [None] * N
        p[N] = qx[N]
        for k in range(N - 1, -1, -1):
            A, B = qp.A[k], qp.B[k]
            tmp = self.P[k + 1] @ c[k] + p[k + 1]
            qxt = qx[k] + A.T @ tmp
            qut = qu[k] + B.T @ tmp
            kff[k] = -cho_solve(self.Quu[k], qut)
            p[k] = qxt + self.Qux[k].T @ kff[k]

        dx = np.zeros((N + 1, nx))
        du = np.zeros((N, self.nu))
        dx[0] = c_init
        for k in range(N):
            du[k] = self.Kfb[k] @ dx[k] + kff[k]
            dx[k + 1] = qp.A[k] @ dx[k] + qp.B[k] @ du[k] + c[k]
        lam = np.array([self.P[k] @ dx[k] + p[k] for k in range(N + 1)])
        return self.join(dx, du), lam.reshape(-1)


def solve_sparse(
    qp: StageQpData, dx0: Optional[np.ndarray] = None, config: QpSolverConfig = QpSolverConfig()
) -> QpSolution:
    """
    Solve the stage QP directly; each interior-point Newton system costs one
    Riccati sweep, linear in N.

    `primal` is laid out as (dx_0, ..., dx_N, du_0, ..., du_{N-1}) and `eq_duals`
    as (lam_0, ..., lam_N); use `stage_step` for the stage form.
    """
    return interior_point(RiccatiBackend(qp, dx0, config.reg_eps), config)


def stage_step(qp: StageQpData, sol: QpSolution) -> StageStep:
    nX = (qp.N + 1) * qp.nx
    nu_rows = qp.N * qp.nc
    duals = sol.ineq_duals
    return StageStep(
        dx=sol.primal[:nX].reshape(qp.N + 1, qp.nx),
        du=sol.primal[nX:].reshape(qp.N, qp.nu),
        lam=sol.eq_duals.reshape(qp.N + 1, qp.nx),
        mu=duals[:nu_rows].reshape(qp.N, qp.nc),
        muN=duals[nu_rows:],
    )
