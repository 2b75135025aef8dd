"""Exception taxonomy shared by the library and the CLI.

Every class carries the process exit code the CLI uses when the error
escapes a command.
"""


class HelmkitError(Exception):
    """Base class for all helmkit errors"""

    exit_code = 1


class ConfigError(HelmkitError):
    """Invalid or incomplete run configuration"""

    exit_code = 2


class DomainError(HelmkitError, ValueError):
    """Argument outside the documented range of an operation"""

    exit_code = 2


class NearResonance(HelmkitError):
    """k is (numerically) a Neumann resonance of K - k^2 M_q"""

    exit_code = 3

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class BackgroundResonance(HelmkitError):
    """J_j'(k sqrt(q0)) vanishes, so the analytic background field is undefined"""

    exit_code = 3


class DataFormatError(HelmkitError):
    """A data artifact on disk does not match its documented layout"""

    exit_code = 4


class DimensionMismatch(HelmkitError):
    """Inputs disagree on N, M or pixel count"""

    exit_code = 4


class EmptySupport(HelmkitError):
    """Reconstruction produced no pixel above the support threshold"""

    exit_code = 5


class NotPositiveDefinite(HelmkitError):
    """Cholesky factorization met a non-positive pivot"""

    def __init__(self, message, pivot_index):
        super().__init__(message)
        self.pivot_index = pivot_index


class SingularFactor(HelmkitError):
    """Triangular factor with a (numerically) zero diagonal entry"""


class SemidefiniteSensitivity(HelmkitError):
    """Sensitivity block is only semidefinite; closed-form beta is undefined"""


class DegenerateTriangle(HelmkitError):
    """Mesh contains a triangle of (numerically) zero area"""

    def __init__(self, message, triangle_index):
        super().__init__(message)
        self.triangle_index = triangle_index


class AsymmetryTooLarge(HelmkitError):
    """Forward data is too far from symmetric to trust the solve"""
