"""Exception types raised by the numerical routines.

Each class corresponds to one distinct failure signal.  Experiments catch
some of them on purpose (``NonFinite`` marks blow-up, for instance), so
they are kept small and carry their diagnostic payload as attributes.
"""


class NLKGError(Exception):
    """Base class for all package errors."""


class ConfigError(NLKGError):
    """Malformed or inconsistent configuration."""


class NoConvergence(NLKGError):
    def __init__(self, msg, residual=None, iterations=None):
        super().__init__(msg)
        self.residual = residual
        self.iterations = iterations


class UnderResolved(NLKGError):
    """A boosted profile is too narrow for the grid."""


class KernelMismatch(NLKGError):
    """The near-zero eigenvector of L+ is not parallel to grad Q."""


class NegativeQuadraticForm(NLKGError):
    """<L gamma|gamma> came out negative; the frame is broken."""

    def __init__(self, msg, value=None):
        super().__init__(msg)
        self.value = value


class NonFinite(NLKGError):
    """Samples left the finite range (blow-up signal)."""

    def __init__(self, msg, time=None):
        super().__init__(msg)
        self.time = time


class SingularModulationMatrix(NLKGError):
    def __init__(self, msg, cond=None):
        super().__init__(msg)
        self.cond = cond


class BracketFailure(NLKGError):
    def __init__(self, msg, exits=None):
        super().__init__(msg)
        self.exits = exits


class PreimageNotFound(NLKGError):
    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


class NoDecay(NLKGError):
    def __init__(self, msg, ratio=None):
        super().__init__(msg)
        self.ratio = ratio


class NoContraction(NLKGError):
    def __init__(self, msg, ratio=None):
        super().__init__(msg)
        self.ratio = ratio


class SmallnessWarning(UserWarning):
    """A smallness condition between delta, ell and the spectrum is not met
    with the required margin."""
