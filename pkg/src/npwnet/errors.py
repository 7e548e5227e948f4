"""Exception and warning types raised across npwnet."""


class NpwnetError(Exception):
    """Base class for all npwnet errors."""


# network construction

class NetworkError(NpwnetError, ValueError):
    pass


class DuplicateEdge(NetworkError):
    pass


class SelfLoop(NetworkError):
    pass


class IndexOutOfRange(NetworkError, IndexError):
    pass


# simulation

class InvalidSimplex(NpwnetError, ValueError):
    pass


class InvalidConfig(NpwnetError, ValueError):
    pass


# density estimation

class DegenerateSample(NpwnetError, ValueError):
    pass


class NonFiniteObjective(NpwnetError, FloatingPointError):
    pass


class LocalFitDiverged(NpwnetError):
    def __init__(self, w, reason=""):
        self.w = w
        msg = f"local likelihood fit diverged at w={w!r}"
        if reason:
            msg += f" ({reason})"
        super().__init__(msg)


class ZeroMassDensity(NpwnetError, FloatingPointError):
    pass


# variational EM

class ShapeMismatch(NpwnetError, ValueError):
    pass


class NonPositiveGammaHat(NpwnetError, ValueError):
    pass


class InfeasibleCoefficients(NpwnetError, ValueError):
    pass


class NonFiniteTheta(NpwnetError, FloatingPointError):
    pass


class AllRestartsFailed(NpwnetError, RuntimeError):
    pass


class TooLargeToEnumerate(NpwnetError, ValueError):
    pass


class MissingDensities(NpwnetError, ValueError):
    pass


# metrics

class LengthMismatch(NpwnetError, ValueError):
    pass


class KTooLargeForExactMatch(NpwnetError, ValueError):
    pass


# io

class MalformedEdgeList(NpwnetError, ValueError):
    def __init__(self, path, line, detail):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {detail}")


class MissingTruth(NpwnetError, FileNotFoundError):
    pass


# warnings

class SaturationWarning(RuntimeWarning):
    """A sparsity parameter hit the |theta| cap."""


class EmptyBlockWarning(RuntimeWarning):
    """A block pair carried (almost) no responsibility mass; pooled estimate used."""
