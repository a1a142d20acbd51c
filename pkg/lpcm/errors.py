"""
Exception hierarchy for lpcm
"""

from typing import Optional


class LpcmError(Exception):
    """Base class for every error raised by lpcm"""


class MeshError(LpcmError, ValueError):
    """Mesh could not be parsed or violates a validation rule"""


class TopologyError(MeshError):
    """Genus came out non-integral or negative"""


class OperatorError(LpcmError, ValueError):
    """Discrete operator assembly failed"""


class ConfigError(LpcmError, ValueError):
    """Invalid solver or command-line configuration"""


class SolverError(LpcmError, RuntimeError):
    """Numerical solve failed"""


class RankDeficiencyError(SolverError):
    """Y^T D Y is numerically singular; the caller should reperturb and retry"""

    def __init__(self, message: str, ratio: float):
        super().__init__(message)
        self.ratio = ratio


class FactorizationError(SolverError):
    """The SPD E-system could not be factorized"""


class SpectralError(SolverError):
    """Eigensolver did not converge"""

    def __init__(self, message: str, achieved: Optional[int] = None):
        super().__init__(message)
        self.achieved = achieved


class CoverageError(LpcmError):
    """Mode supports do not cover every vertex"""

    def __init__(self, message: str, uncovered_count: int = 0):
        super().__init__(message)
        self.uncovered_count = uncovered_count


class SegmentationError(LpcmError, ValueError):
    """Seed selection or partition construction failed"""
