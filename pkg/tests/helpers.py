import numpy as np

from src.ms_ import StageQpData
from src.ocp_ import Dims, OcpProblem, dual


def random_stage_qp(
    rng: np.random.Generator,
    N: int = 5,
    nx: int = 3,
    nu: int = 2,
    nc: int = 2,
    ncN: int = 1,
) -> StageQpData:
    """Random convex stage QP, feasible by construction around a random rollout."""
    nz = nx + nu
    H = np.zeros((N, nz, nz))
    for k in range(N):
        L = rng.standard_normal((nz, nz))
        H[k] = L @ L.T / nz + 0.1 * np.eye(nz)
    LN = rng.standard_normal((nx, nx))
    HN = LN @ LN.T / nx + 0.1 * np.eye(nx)
    A = np.eye(nx) + 0.3 * rng.standard_normal((N, nx, nx)) / np.sqrt(nx)
    B = rng.standard_normal((N, nx, nu))
    d = 0.1 * rng.standard_normal((N, nx))
    dx0 = rng.standard_normal(nx)

    # Feasible reference rollout
    x_ref = np.zeros((N + 1, nx))
    u_ref = 0.3 * rng.standard_normal((N, nu))
    x_ref[0] = dx0
    for k in range(N):
        x_ref[k + 1] = A[k] @ x_ref[k] + B[k] @ u_ref[k] + d[k]

    C = rng.standard_normal((N, nc, nx))
    D = rng.standard_normal((N, nc, nu))
    CN = rng.standard_normal((ncN, nx))
    r = np.einsum("kij,kj->ki", C, x_ref[:-1]) + np.einsum("kij,kj->ki", D, u_ref)
    rN = CN @ x_ref[-1]
    return StageQpData(
        H=H,
        g=rng.standard_normal((N, nz)),
        A=A,
        B=B,
        C=C,
        D=D,
        d=d,
        lbc=r - rng.uniform(0.05, 0.5, (N, nc)),
        ubc=r + rng.uniform(0.05, 0.5, (N, nc)),
        HN=HN,
        gN=rng.standard_normal(nx),
        CN=CN,
        lbcN=rN - rng.uniform(0.05, 0.5, ncN),
        ubcN=rN + rng.uniform(0.05, 0.5, ncN),
        dx0=dx0,
        phi=np.zeros((N, nx)),
    )


def _full_stage_qp(qp: StageQpData):
    """Objective, dynamics and inequality rows of the stage QP over w = (dx_0..dx_N, du_0..du_{N-1})."""
    N, nx, nu, nc = qp.N, qp.nx, qp.nu, qp.nc
    nX = (N + 1) * nx
    n = nX + N * nu
    Hf = np.zeros((n, n))
    gf = np.zeros(n)
    E = np.zeros((nX, n))
    e = np.zeros(nX)
    Cf = np.zeros((N * nc + qp.ncN, n))

    def xs(k):
        return slice(k * nx, (k + 1) * nx)

    def us(k):
        return slice(nX + k * nu, nX + (k + 1) * nu)

    for k in range(N):
        idx = np.r_[xs(k), us(k)]
        Hf[np.ix_(idx, idx)] += qp.H[k]
        gf[idx] += qp.g[k]
        rows = xs(k + 1)
        E[rows, xs(k + 1)] = np.eye(nx)
        E[rows, xs(k)] = -qp.A[k]
        E[rows, us(k)] = -qp.B[k]
        e[rows] = qp.d[k]
        Cf[k * nc : (k + 1) * nc, xs(k)] = qp.C[k]
        Cf[k * nc : (k + 1) * nc, us(k)] = qp.D[k]
    Hf[xs(N), xs(N)] += qp.HN
    gf[xs(N)] += qp.gN
    E[xs(0), xs(0)] = np.eye(nx)
    e[xs(0)] = qp.dx0
    Cf[N * nc :, xs(N)] = qp.CN
    lb = np.concatenate([qp.lbc.reshape(-1), qp.lbcN])
    ub = np.concatenate([qp.ubc.reshape(-1), qp.ubcN])
    return Hf, gf, E, e, Cf, lb, ub


def equality_kkt_solve(qp: StageQpData):
    """
    Direct solve of the unconstrained stage QP through its full KKT system.

    Returns (dx, du, lam) with lam the costate convention:
    stationarity in dx_k reads H dx + g - lam_k + A_k^T lam_{k+1} = 0.
    """
    dx, du, lam, _, _ = active_set_kkt_solve(qp, np.zeros(qp.N * qp.nc + qp.ncN, dtype=int))
    return dx, du, lam


def active_set_kkt_solve(qp: StageQpData, active: np.ndarray, tol: float = 1e-9):
    """
    Stage QP solution for a given active set, certified as the optimum.

    `active` holds one entry per stacked inequality row (stages, then terminal):
    -1 lower bound active, +1 upper bound active, 0 inactive. The active rows are
    imposed as equalities in the full KKT system; the result is then checked for
    primal feasibility and multiplier signs, which makes it the unique optimum of
    the strictly convex QP. Returns (dx, du, lam, mu, muN) with mu signed upper
    minus lower.
    """
    N, nx, nu, nc = qp.N, qp.nx, qp.nu, qp.nc
    Hf, gf, E, e, Cf, lb, ub = _full_stage_qp(qp)
    nX, n = E.shape
    act = np.flatnonzero(active)
    Ca = Cf[act]
    b = np.where(active[act] < 0, lb[act], ub[act])
    m_eq, m_a = nX, len(act)
    K = np.block(
        [
            [Hf, -E.T, Ca.T],
            [E, np.zeros((m_eq, m_eq)), np.zeros((m_eq, m_a))],
            [Ca, np.zeros((m_a, m_eq)), np.zeros((m_a, m_a))],
        ]
    )
    sol = np.linalg.solve(K, np.concatenate([-gf, e, b]))
    w, lam, nu_a = sol[:n], sol[n : n + m_eq], sol[n + m_eq :]

    r = Cf @ w
    if np.any(r < lb - tol) or np.any(r > ub + tol):
        raise AssertionError("active set gives an infeasible point")
    if np.any(active[act] * nu_a < -tol):
        raise AssertionError("active set gives a multiplier of the wrong sign")
    mu_all = np.zeros(len(lb))
    mu_all[act] = nu_a
    return (
        w[:nX].reshape(N + 1, nx),
        w[nX:].reshape(N, nu),
        lam.reshape(N + 1, nx),
        mu_all[: N * nc].reshape(N, nc),
        mu_all[N * nc :],
    )



def van_der_pol(mu: float = 1.0) -> OcpProblem:
    """Forced Van der Pol oscillator with a trivial least-squares cost."""

    def dynamics(x, u, p):
        return [x[1], mu * (1.0 - x[0] * x[0]) * x[1] - x[0] + u[0]]

    return OcpProblem(
        name="van_der_pol",
        dims=Dims(nx=2, nu=1, nr=3, nrN=2, N=10, Ts=0.1),
        dynamics=dynamics,
        stage_residual=lambda x, u, p: [x[0], x[1], u[0]],
        terminal_residual=lambda x, p: [x[0], x[1]],
        W=np.eye(3),
        WN=np.eye(2),
        x_init=np.array([2.0, 0.0]),
    )


def sqrt_plant() -> OcpProblem:
    """x' = -sqrt(x): integration fails once the state turns negative."""
    return OcpProblem(
        name="sqrt_plant",
        dims=Dims(nx=1, nu=1, nr=2, nrN=1, N=5, Ts=0.1),
        dynamics=lambda x, u, p: [-dual.sqrt(x[0]) + u[0]],
        stage_residual=lambda x, u, p: [x[0], u[0]],
        terminal_residual=lambda x, p: [x[0]],
        W=np.eye(2),
        WN=np.eye(1),
        x_init=np.array([1.0]),
    )
