from typing import Optional, Sequence


class GreyboxError(Exception):
    """
    Base class for every error raised by greybox_gp.
    """


class InvalidArgument(GreyboxError, ValueError):
    pass


class DegenerateData(GreyboxError, ValueError):
    pass


class NumericError(GreyboxError, ArithmeticError):
    pass


class IllConditionedKernel(NumericError):
    def __init__(self, message: str, jitter_ladder: Sequence[float] = ()) -> None:
        super().__init__(message)
        self.jitter_ladder = tuple(jitter_ladder)


class OptimizationFailed(NumericError):
    def __init__(self, message: str, traces: Sequence = ()) -> None:
        super().__init__(message)
        self.traces = list(traces)


class ParseError(GreyboxError, ValueError):
    def __init__(
        self, message: str, line: Optional[int] = None, column: Optional[str] = None
    ) -> None:
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
        self.column = column


class ConfigError(GreyboxError):
    pass


class PipelineError(GreyboxError):
    """
    A constituent error, tagged with the experiment stage it came from.

    The original exception is chained as ``__cause__``.
    """

    def __init__(self, stage: str, message: str) -> None:
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
