"""Engine-level exceptions, mapped to CLI exit codes."""


class GeorstError(Exception):
    """Base class for engine errors."""


class InvalidInputError(GeorstError):
    """Bad configuration, malformed data file, or domain violation. Exit code 2."""


class InfeasibleError(GeorstError):
    """No capital-breaching scenario exists within the admissible bounds. Exit code 3."""


class NonConvergenceError(GeorstError):
    """Solver exhausted its iteration budget without meeting tolerances. Exit code 4."""
