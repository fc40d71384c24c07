from typing import NamedTuple

import numpy as np


class KktCheck(NamedTuple):
    stationarity: float
    primal: float
    complementarity: float
    dual_sign: float
    ok: bool


def _inf_norm(v: np.ndarray) -> float:
    return float(np.max(np.abs(v))) if v.size else 0.0


def check_kkt(H, g, C, lb, ub, x, duals_lower, duals_upper, tol: float = 1e-8) -> KktCheck:
    """
    Verify a solution of min 1/2 x^T H x + g^T x s.t. lb <= C x <= ub from scratch.

    Tolerances are scaled like the solver's stopping test: stationarity by
    max(1, |g|_inf), primal violation by max(1, |finite bounds|_inf), and
    complementarity z (C x - bound) additionally by the multiplier size, since a
    primal residual of tol may remain on the slack.
    """
    H, g, C = np.asarray(H, float), np.asarray(g, float), np.asarray(C, float).reshape(-1, len(g))
    lb, ub, x = np.asarray(lb, float), np.asarray(ub, float), np.asarray(x, float)
    zl, zu = np.asarray(duals_lower, float), np.asarray(duals_upper, float)
    has_l, has_u = np.isfinite(lb), np.isfinite(ub)

    Cx = C @ x
    stat = _inf_norm(H @ x + g + C.T @ (zu - zl))
    viol = np.concatenate([(lb - Cx)[has_l], (Cx - ub)[has_u]])
    primal = float(max(0.0, np.max(viol, initial=0.0)))
    comp = _inf_norm(np.concatenate([zl[has_l] * (Cx - lb)[has_l], zu[has_u] * (ub - Cx)[has_u]]))
    dual_sign = float(max(0.0, -min(np.min(zl, initial=0.0), np.min(zu, initial=0.0))))

    bounds = np.concatenate([lb[has_l], ub[has_u]])
    g_scale = max(1.0, _inf_norm(g))
    b_scale = max(1.0, _inf_norm(bounds))
    z_scale = max(1.0, _inf_norm(np.concatenate([zl, zu])))
    ok = (
        stat <= tol * g_scale
        and primal <= tol * b_scale
        and comp <= tol * (1.0 + z_scale * b_scale)
        and dual_sign <= tol
    )
    return KktCheck(stat, primal, comp, dual_sign, ok)
