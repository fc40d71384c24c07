import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, lu_factor, lu_solve

from ..ocp_.errors import ConfigurationError
from .ipm import QpSolution, QpSolverConfig, interior_point


class DenseBackend:
    """
    Cholesky factorization of H + C^T Sigma C; no equality constraints.

    Near the optimum Sigma spans many orders of magnitude and the Cholesky
    factorization can break down on the rounded matrix. The augmented system

        [H   C_a^T       ] [x]   [rhs]
        [C_a -Sigma_a^-1 ] [y] = [ 0 ]

    over the rows with Sigma > 0 is then LU-factorized instead; it holds
    Sigma^-1, which stays bounded on the active rows.
    """

    n_eq = 0

    def __init__(self, H, g, C, lb, ub, reg_eps: float = 0.0) -> None:
        H = np.asarray(H, dtype=float)
        self.n = H.shape[0]
        self._g = np.asarray(g, dtype=float).reshape(-1)
        self.C = np.asarray(C, dtype=float).reshape(-1, self.n)
        self.lb = np.asarray(lb, dtype=float).reshape(-1)
        self.ub = np.asarray(ub, dtype=float).reshape(-1)
        if H.shape != (self.n, self.n) or self._g.shape != (self.n,):
            raise ConfigurationError("H must be n x n and g of length n")
        if self.lb.shape != (self.C.shape[0],) or self.ub.shape != self.lb.shape:
            raise ConfigurationError("bounds must have one entry per constraint row")
        if np.any(self.lb > self.ub):
            raise ConfigurationError("bounds must satisfy lb <= ub")
        H = 0.5 * (H + H.T)
        if self.n and np.linalg.eigvalsh(H).min() < reg_eps:
            H = H + reg_eps * np.eye(self.n)
        self.H = H
        self._factor = None
        self._cholesky = True

    @property
    def g(self) -> np.ndarray:
        return self._g

    def hess_grad(self, x):
        return self.H @ x + self._g

    def C_mul(self, x):
        return self.C @ x

    def CT_mul(self, v):
        return self.C.T @ v

    def eq_residual(self, x):
        return np.zeros(0)

    def eq_term(self, lam):
        return np.zeros(self.n)

    def factorize(self, sigma):
        M = self.H + self.C.T @ (sigma[:, None] * self.C)
        try:
            self._factor, self._cholesky = cho_factor(0.5 * (M + M.T)), True
            return
        except LinAlgError:
            pass
        rows = sigma > 0
        Ca = self.C[rows]
        K = np.block([[self.H, Ca.T], [Ca, -np.diag(1.0 / sigma[rows])]])
        self._factor, self._cholesky = lu_factor(K), False

    @property
    def cholesky(self) -> bool:
        """False when the last factorization fell back to the augmented system."""
        return self._cholesky

    def solve(self, rhs, r_e):
        if self._cholesky:
            return cho_solve(self._factor, rhs), np.zeros(0)
        m = self._factor[0].shape[0] - self.n
        sol = lu_solve(self._factor, np.concatenate([rhs, np.zeros(m)]))
        return sol[: self.n], np.zeros(0)


def solve_dense(H, g, C, lb, ub, config: QpSolverConfig = QpSolverConfig()) -> QpSolution:
    """
    Solve min 1/2 x^T H x + g^T x s.t. lb <= C x <= ub by the interior-point method.

    H is shifted by reg_eps * I when its smallest eigenvalue is below reg_eps.
    Infinite bounds are allowed per side.
    """
    return interior_point(DenseBackend(H, g, C, lb, ub, config.reg_eps), config)
