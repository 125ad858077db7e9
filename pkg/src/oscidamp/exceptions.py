"""Exception hierarchy.

Errors fall in three families that the CLI maps to exit codes:
validation problems (bad config, bad shapes), numerical failures
(singularity, divergence, non-convergence) and I/O.
"""


class OscidampError(Exception):
    """Base class for every error raised by this package."""


class NumericalError(OscidampError):
    pass


class SingularMatrix(NumericalError):
    pass


class NotSymmetric(NumericalError, ValueError):
    pass


class InconsistentRegularity(NumericalError):
    pass


class NotStabilizable(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class SingularA(NumericalError):
    """Assumption (i) fails: the state matrix is singular."""


class SingularClosedLoop(NumericalError):
    """Assumption (ii) fails: ``A - B Ks`` is singular."""


class SingularLoop(NumericalError):
    """``I + Kn B`` is singular, so the derivative loop has no solution."""


class Diverged(NumericalError):
    def __init__(self, message, time=None, trajectory=None):
        super().__init__(message)
        self.time = time
        self.trajectory = trajectory


class EmptySeries(OscidampError, ValueError):
    pass


class GridMismatch(OscidampError, ValueError):
    pass


class ConfigError(OscidampError):
    pass


class ParseError(ConfigError):
    def __init__(self, message, line=None, column=None):
        loc = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{loc}")
        self.line = line
        self.column = column


class ValidationError(ConfigError, ValueError):
    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
