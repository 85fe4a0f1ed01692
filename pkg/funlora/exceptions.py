"""
Error hierarchy shared by every layer of the package

Each error carries a human-readable ``detail`` and an ``exit_code`` that the
CLI returns.
"""
from typing import Optional


class FunLoRAError(Exception):
    """Base error for the package"""

    exit_code = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class ShapeError(FunLoRAError):
    """Operand shapes are incompatible"""

    exit_code = 2


class AutodiffError(FunLoRAError):
    """Backward pass or gradient check cannot proceed"""

    exit_code = 2


class NumericalError(FunLoRAError):
    """Non-finite values where finite ones are required"""

    exit_code = 2


class ConfigError(FunLoRAError):
    """Invalid experiment configuration"""

    exit_code = 3

    def __init__(self, detail: str, key_path: Optional[str] = None):
        if key_path:
            detail = f"{key_path}: {detail}"
        super().__init__(detail)
        self.key_path = key_path


class UnknownLabelError(FunLoRAError):
    """Label has no adapter, no embedding, or no classifier output"""

    exit_code = 4


class FrozenParameterError(FunLoRAError):
    """Attempt to train or modify a frozen parameter"""

    exit_code = 5


class ForgettingError(FrozenParameterError):
    """Parameters outside the current task changed between consecutive tasks"""

    def __init__(self, detail: str, reports: Optional[list] = None):
        super().__init__(detail)
        self.reports = list(reports or [])


class CheckpointError(FunLoRAError):
    """Checkpoint unreadable or written by an incompatible format version"""

    exit_code = 6


class SolverError(FunLoRAError):
    """ODE integration failed"""

    exit_code = 7


class SelectionError(FunLoRAError):
    """Layer selection produced no layer"""

    exit_code = 8


class StreamError(FunLoRAError):
    """Task stream is malformed"""

    exit_code = 9


class DataError(FunLoRAError):
    """Dataset is empty or inconsistent"""

    exit_code = 9


class ConventionError(FunLoRAError):
    """Adapter does not follow the initialization convention a metric assumes"""

    exit_code = 10
