from .harness import ClosedLoop, SimConfig, run_closed_loop, shift_warm_start
from .log import SimLog

__all__ = [
    "ClosedLoop",
    "SimConfig",
    "SimLog",
    "run_closed_loop",
    "shift_warm_start",
]
