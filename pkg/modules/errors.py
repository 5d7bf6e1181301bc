from dataclasses import dataclass
from typing import List


class CryoChannelError(Exception):
    """Base class for every error raised by the simulator"""


class InvalidArgumentError(CryoChannelError, ValueError):
    pass


class SceneConstructionError(CryoChannelError, ValueError):
    """Scene parameters describe an impossible geometry"""

    def __init__(self, message: str, surfaces: List[str]):
        self.surfaces = list(surfaces)
        super().__init__(f"{message}: {', '.join(self.surfaces)}")


class UnsupportedSceneError(CryoChannelError):
    pass


class TruncationError(CryoChannelError, ValueError):
    """A path pulse falls outside the synthesized record"""

    def __init__(self, path_index: int, delay: float, message: str):
        self.path_index = path_index
        self.delay = delay
        super().__init__(f"path {path_index} at {delay:.6e} s: {message}")


class UndefinedMetricError(CryoChannelError, ValueError):
    pass


class TracerError(CryoChannelError, RuntimeError):
    pass


@dataclass(frozen=True)
class Diagnostic:
    location: str
    message: str

    def __str__(self) -> str:
        return f"{self.location}: {self.message}"


class ScenarioError(CryoChannelError):
    """Scenario file failed schema or invariant checks"""

    def __init__(self, diagnostics: List[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))
