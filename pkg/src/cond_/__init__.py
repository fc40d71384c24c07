from enum import Enum

import numpy as np

from ..ms_ import StageQpData, StageStep
from .condensing import CondensedQp, condense, expand

__all__ = [
    "Condenser",
    "CondensingMode",
    "CondensedQp",
    "condense",
    "expand",
]


class CondensingMode(str, Enum):
    NONE = "none"
    FULL = "full"


class Condenser:
    """Full condensing of the stage QP and expansion of the dense solution."""

    def __init__(self, mode: CondensingMode = CondensingMode.FULL) -> None:
        self.mode = CondensingMode(mode)

    @property
    def enabled(self) -> bool:
        return self.mode is CondensingMode.FULL

    def condense(self, qp: StageQpData) -> CondensedQp:
        return condense(qp)

    def expand(
        self, qp: StageQpData, cond: CondensedQp, du: np.ndarray, duals: np.ndarray
    ) -> StageStep:
        dx, lam, mu, muN = expand(qp, cond, du, duals)
        return StageStep(dx, np.asarray(du, dtype=float).reshape(qp.N, qp.nu), lam, mu, muN)
