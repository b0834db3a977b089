from __future__ import annotations

from typing import Any, Dict, List, Optional, Sequence


class LabError(Exception):
    """Base class for failures raised by the laboratory."""


class ConfigError(LabError):
    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None, path: Optional[str] = None) -> None:
        self.field = field
        self.line = line
        self.path = path
        where = ":".join(str(p) for p in (path, line) if p is not None)
        prefix = f"{where}: " if where else ""
        loc = f"{field}: " if field else ""
        super().__init__(f"{prefix}{loc}{message}")


class NotHermitianError(LabError):
    pass


class LinalgConvergenceError(LabError):
    def __init__(self, message: str, index: int) -> None:
        self.index = index
        super().__init__(f"{message} (index {index})")


class BranchSelectionError(LabError):
    pass


class CharacteristicsError(LabError):
    def __init__(self, message: str, crossing_time: Optional[float] = None) -> None:
        self.crossing_time = crossing_time
        super().__init__(message)


class StabilityOperatorError(LabError):
    def __init__(self, message: str, condition: float) -> None:
        self.condition = condition
        super().__init__(f"{message} (condition estimate {condition:.3e})")


class FreeConvolutionError(LabError):
    def __init__(self, message: str, trace: Optional[List[complex]] = None) -> None:
        self.trace = list(trace or [])
        super().__init__(message)


class QuadratureError(LabError):
    pass


class KernelMismatchError(LabError):
    def __init__(self, message: str, values: Dict[str, float]) -> None:
        self.values = dict(values)
        super().__init__(f"{message}: {self.values}")


class PositivityError(LabError):
    def __init__(self, message: str, lambda_min: float, trace: float) -> None:
        self.lambda_min = lambda_min
        self.trace = trace
        super().__init__(f"{message} (lambda_min={lambda_min:.3e}, trace={trace:.3e})")


class StieltjesBoundError(LabError):
    def __init__(self, message: str, points: Sequence[complex]) -> None:
        self.points = list(points)
        super().__init__(f"{message}: {len(self.points)} point(s)")


class DBMCollisionError(LabError):
    def __init__(self, message: str, diagnostics: Dict[str, Any]) -> None:
        self.diagnostics = dict(diagnostics)
        super().__init__(f"{message}: {self.diagnostics}")


class ReplicaShortfallError(LabError):
    def __init__(self, stage: str, usable: int, minimum: int, failures: Dict[int, str]) -> None:
        self.stage = stage
        self.usable = usable
        self.failures = dict(failures)
        kinds = sorted({msg.split(":", 1)[0] for msg in self.failures.values()})
        super().__init__(f"{stage}: {usable} usable replicas, need {minimum} ({len(self.failures)} excluded: {', '.join(kinds) or 'none'})")
