"""
Mehrotra predictor-corrector interior-point method for

    min 1/2 x^T H x + g^T x   s.t.  E x = e,  lb <= C x <= ub

with paired slacks C x - s_l = lb, C x + s_u = ub and multipliers z_l, z_u >= 0.
Sides with an infinite bound are masked out. The Newton system is reduced to

    (H + C^T Sigma C) dx + E-term(dlam) = -r_d - C^T rho,   E dx = -r_e

and handed to a backend, which owns the structure of H, C and E.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Protocol, Tuple

import numpy as np

from ..ocp_.errors import ConfigurationError

logger = logging.getLogger(__name__)

STEP_TO_BOUNDARY = 0.995
MAX_HALVINGS = 30
DIVERGENCE = 1e12


class QpStatus(str, Enum):
    OPTIMAL = "optimal"
    MAX_ITERS = "max_iters"
    INFEASIBLE = "infeasible"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass(frozen=True)
class QpSolverConfig:
    """
    Attributes:
        tol: KKT tolerance
        max_iters: interior-point iteration cap
        reg_eps: Hessian regularization floor
    """

    tol: float = 1e-8
    max_iters: int = 100
    reg_eps: float = 1e-9

    def __post_init__(self) -> None:
        if not self.tol > 0:
            raise ConfigurationError("qp.tol must be > 0")
        if self.max_iters < 1:
            raise ConfigurationError("qp.max_iters must be >= 1")
        if self.reg_eps < 0:
            raise ConfigurationError("qp.reg_eps must be >= 0")


@dataclass
class QpSolution:
    """
    Attributes:
        primal: solution vector
        duals_lower, duals_upper: inequality multipliers per row, >= 0
        eq_duals: equality multipliers (empty without equality constraints)
        status: solver outcome
        iters: interior-point iterations
        kkt_residual: largest scaled KKT residual at the returned iterate
        mu_history: complementarity measure at the start of each iteration
    """

    primal: np.ndarray
    duals_lower: np.ndarray
    duals_upper: np.ndarray
    eq_duals: np.ndarray
    status: QpStatus
    iters: int
    kkt_residual: float
    mu_history: List[float] = field(default_factory=list)

    @property
    def ineq_duals(self) -> np.ndarray:
        """Signed multipliers, upper minus lower."""
        return self.duals_upper - self.duals_lower

    @property
    def ok(self) -> bool:
        return self.status is QpStatus.OPTIMAL


class KktBackend(Protocol):
    """Structure-specific linear algebra used by `interior_point`."""

    n: int
    n_eq: int
    lb: np.ndarray
    ub: np.ndarray

    @property
    def g(self) -> np.ndarray: ...

    def hess_grad(self, x: np.ndarray) -> np.ndarray:
        """H x + g."""

    def C_mul(self, x: np.ndarray) -> np.ndarray: ...

    def CT_mul(self, v: np.ndarray) -> np.ndarray: ...

    def eq_residual(self, x: np.ndarray) -> np.ndarray:
        """E x - e."""

    def eq_term(self, lam: np.ndarray) -> np.ndarray:
        """Contribution of the equality multipliers to the Lagrangian gradient."""

    def factorize(self, sigma: np.ndarray) -> None:
        """Prepare solves with H + C^T diag(sigma) C; raise LinAlgError on failure."""

    def solve(self, rhs: np.ndarray, r_e: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Return (dx, dlam) of the reduced Newton system."""


def _max_step(v: np.ndarray, dv: np.ndarray) -> float:
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    return float(min(1.0, np.min(-v[neg] / dv[neg])))


class _Iterate:
    __slots__ = ("x", "lam", "sl", "su", "zl", "zu")

    def __init__(self, x, lam, sl, su, zl, zu) -> None:
        self.x, self.lam, self.sl, self.su, self.zl, self.zu = x, lam, sl, su, zl, zu

    def moved(self, d: "_Iterate", alpha: float) -> "_Iterate":
        return _Iterate(
            self.x + alpha * d.x,
            self.lam + alpha * d.lam,
            self.sl + alpha * d.sl,
            self.su + alpha * d.su,
            self.zl + alpha * d.zl,
            self.zu + alpha * d.zu,
        )


def interior_point(
    backend: KktBackend, config: QpSolverConfig, x0: Optional[np.ndarray] = None
) -> QpSolution:
    lb, ub = backend.lb, backend.ub
    has_l, has_u = np.isfinite(lb), np.isfinite(ub)
    ml, mu_ = has_l.astype(float), has_u.astype(float)
    n_comp = int(has_l.sum() + has_u.sum())
    lb_f = np.where(has_l, lb, 0.0)
    ub_f = np.where(has_u, ub, 0.0)
    finite_bounds = np.concatenate([lb[has_l], ub[has_u]])

    tol = config.tol
    g_scale = max(1.0, float(np.max(np.abs(backend.g))) if backend.g.size else 1.0)
    b_scale = max(1.0, float(np.max(np.abs(finite_bounds))) if finite_bounds.size else 1.0)

    def residuals(it: _Iterate):
        Cx = backend.C_mul(it.x)
        r_d = backend.hess_grad(it.x) + backend.eq_term(it.lam) + backend.CT_mul(it.zu - it.zl)
        r_e = backend.eq_residual(it.x)
        r_pl = ml * (Cx - it.sl - lb_f)
        r_pu = mu_ * (Cx + it.su - ub_f)
        return r_d, r_e, r_pl, r_pu

    def direction(it: _Iterate, r_d, r_e, r_pl, r_pu, r_cl, r_cu) -> _Iterate:
        rho = (r_cl + it.zl * r_pl) / it.sl + (-r_cu + it.zu * r_pu) / it.su
        dx, dlam = backend.solve(-r_d - backend.CT_mul(rho), r_e)
        Cdx = backend.C_mul(dx)
        dsl = ml * (Cdx + r_pl)
        dsu = mu_ * (-Cdx - r_pu)
        dzl = ml * (-(r_cl + it.zl * dsl) / it.sl)
        dzu = mu_ * (-(r_cu + it.zu * dsu) / it.su)
        return _Iterate(dx, dlam, dsl, dsu, dzl, dzu)

    def comp(it: _Iterate) -> float:
        if not n_comp:
            return 0.0
        return float((np.sum(it.sl * it.zl) + np.sum(it.su * it.zu)) / n_comp)

    def step_length(it: _Iterate, d: _Iterate) -> float:
        a_p = min(_max_step(it.sl[has_l], d.sl[has_l]), _max_step(it.su[has_u], d.su[has_u]))
        a_d = min(_max_step(it.zl[has_l], d.zl[has_l]), _max_step(it.zu[has_u], d.zu[has_u]))
        return min(1.0, STEP_TO_BOUNDARY * min(a_p, a_d)) if n_comp else 1.0

    def measures(it: _Iterate):
        r_d, r_e, r_pl, r_pu = residuals(it)
        stat = float(np.max(np.abs(r_d))) if r_d.size else 0.0
        eq = float(np.max(np.abs(r_e))) if r_e.size else 0.0
        prim = float(max(np.max(np.abs(r_pl), initial=0.0), np.max(np.abs(r_pu), initial=0.0)))
        cmax = float(max(np.max(it.sl * it.zl, initial=0.0), np.max(it.su * it.zu, initial=0.0)))
        kkt = max(stat / g_scale, eq / g_scale, prim / b_scale, cmax)
        ok = stat <= tol * g_scale and eq <= tol * g_scale and prim <= tol * b_scale and cmax <= tol
        return (r_d, r_e, r_pl, r_pu), kkt, ok

    def finish(it: _Iterate, status: QpStatus, iters: int, kkt: float, history) -> QpSolution:
        return QpSolution(
            primal=it.x,
            duals_lower=ml * it.zl,
            duals_upper=mu_ * it.zu,
            eq_duals=it.lam,
            status=status,
            iters=iters,
            kkt_residual=kkt,
            mu_history=history,
        )

    m = lb.size
    ones = np.ones(m)
    start = _Iterate(
        np.zeros(backend.n) if x0 is None else np.asarray(x0, dtype=float),
        np.zeros(backend.n_eq),
        ones.copy(),
        ones.copy(),
        ml.copy(),
        mu_.copy(),
    )
    history: List[float] = []
    it = start
    try:
        # Starting point: one affine Newton step, slacks and multipliers pushed to >= 1
        backend.factorize(start.zl / start.sl + start.zu / start.su)
        r_d, r_e, r_pl, r_pu = residuals(start)
        d = direction(start, r_d, r_e, r_pl, r_pu, start.sl * start.zl, start.su * start.zu)
        it = start.moved(d, 1.0)
        it.sl = np.where(has_l, np.maximum(np.abs(it.sl), 1.0), 1.0)
        it.su = np.where(has_u, np.maximum(np.abs(it.su), 1.0), 1.0)
        it.zl = np.where(has_l, np.maximum(np.abs(it.zl), 1.0), 0.0)
        it.zu = np.where(has_u, np.maximum(np.abs(it.zu), 1.0), 0.0)

        for k in range(config.max_iters + 1):
            (r_d, r_e, r_pl, r_pu), kkt, ok = measures(it)
            mu = comp(it)
            history.append(mu)
            if not np.isfinite(kkt):
                return finish(it, QpStatus.NUMERICAL_FAILURE, k, kkt, history)
            if ok:
                return finish(it, QpStatus.OPTIMAL, k, kkt, history)
            if max(np.max(np.abs(it.zl), initial=0.0), np.max(np.abs(it.zu), initial=0.0)) > DIVERGENCE:
                logger.debug("QP multipliers diverged, treating problem as infeasible")
                return finish(it, QpStatus.INFEASIBLE, k, kkt, history)
            if k == config.max_iters:
                return finish(it, QpStatus.MAX_ITERS, k, kkt, history)

            backend.factorize(it.zl / it.sl + it.zu / it.su)
            # Predictor
            aff = direction(it, r_d, r_e, r_pl, r_pu, ml * it.sl * it.zl, mu_ * it.su * it.zu)
            a_aff = step_length(it, aff)
            if n_comp:
                sigma = (comp(it.moved(aff, a_aff)) / mu) ** 3 if mu > 0 else 0.0
                # Corrector
                r_cl = ml * (it.sl * it.zl + aff.sl * aff.zl - sigma * mu)
                r_cu = mu_ * (it.su * it.zu + aff.su * aff.zu - sigma * mu)
                d = direction(it, r_d, r_e, r_pl, r_pu, r_cl, r_cu)
            else:
                d = aff

            nxt = _monotone_step(it, d, step_length(it, d), mu, comp)
            if nxt is None:
                nxt = _monotone_step(it, aff, a_aff, mu, comp)
            if nxt is None:
                logger.debug("QP complementarity could not be decreased")
                return finish(it, QpStatus.NUMERICAL_FAILURE, k, kkt, history)
            it = nxt
    except np.linalg.LinAlgError as err:
        logger.debug("QP factorization failed: %s", err)
        return finish(it, QpStatus.NUMERICAL_FAILURE, len(history), np.inf, history)


def _monotone_step(it: _Iterate, d: _Iterate, alpha: float, mu: float, comp) -> Optional[_Iterate]:
    """Largest alpha / 2^j whose complementarity measure does not exceed `mu`."""
    for _ in range(MAX_HALVINGS):
        nxt = it.moved(d, alpha)
        if comp(nxt) <= mu:
            return nxt
        alpha *= 0.5
    return None
