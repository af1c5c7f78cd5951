"""Exception types raised by orecov."""


class OrecovError(Exception):
    """Base class for all library errors."""


class ResourceLimitError(OrecovError):
    """A requested object would exceed a configured size cap."""


class EigensolverError(OrecovError):
    """The Hermitian eigensolver failed on a Gram matrix."""


class DiscretizationNotAchieved(OrecovError):
    """No sample set met the requested lower frame bound.

    The best certificate seen is attached as ``best``.
    """

    def __init__(self, message, best=None, sample_set=None):
        super().__init__(message)
        self.best = best
        self.sample_set = sample_set


class BarrierStuck(OrecovError):
    """The barrier greedy found no candidate with an admissible weight."""

    def __init__(self, message, step, upper, lower, phi_upper, phi_lower):
        super().__init__(message)
        self.step = step
        self.upper = upper
        self.lower = lower
        self.phi_upper = phi_upper
        self.phi_lower = phi_lower


class SingularSystemError(OrecovError):
    """Least-squares system is singular or too ill-conditioned to solve."""

    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate
