from . import dual
from .benchmarks import BENCHMARKS, get_benchmark, list_benchmarks, load_problem
from .dual import TangentBundle
from .errors import (
    ConfigurationError,
    GenerationError,
    IntegrationError,
    NmpcError,
    QpFailure,
)
from .model import Dims, OcpProblem

__all__ = [
    "OcpProblem",
    "Dims",
    "TangentBundle",
    "dual",
    "BENCHMARKS",
    "get_benchmark",
    "list_benchmarks",
    "load_problem",
    "NmpcError",
    "ConfigurationError",
    "IntegrationError",
    "GenerationError",
    "QpFailure",
]
