from typing import Optional


class NmpcError(Exception):
    """Base class of every error raised by the toolkit."""


class ConfigurationError(NmpcError, ValueError):
    """Invalid dimensions, options, weights, bounds or run specs."""


class IntegrationError(NmpcError, RuntimeError):
    def __init__(
        self,
        message: str,
        rk_stage: Optional[int] = None,
        residual: Optional[float] = None,
        stage: Optional[int] = None,
    ) -> None:
        super().__init__(message)
        self.rk_stage = rk_stage
        self.residual = residual
        self.stage = stage


class GenerationError(IntegrationError):
    """Integration failure on one shooting interval during QP generation."""

    @classmethod
    def from_integration(cls, err: IntegrationError, stage: int) -> "GenerationError":
        return cls(
            f"shooting interval {stage}: {err}",
            rk_stage=err.rk_stage,
            residual=err.residual,
            stage=stage,
        )


class QpFailure(NmpcError):
    def __init__(self, message: str, report=None) -> None:
        super().__init__(message)
        self.report = report
