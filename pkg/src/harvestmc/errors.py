"""Exception types raised across the package."""


class HarvestMCError(Exception):
    """Base class for all package errors."""


class ReducibleGenerator(HarvestMCError):
    """The switching generator's rate graph is not strongly connected."""


class NotPerCapitaModel(HarvestMCError):
    """Operation needs regime-wise per-capita parameters (mu, sigma)."""


class UnknownModel(HarvestMCError):
    """Requested population model is not in the catalog."""


class UnknownCost(HarvestMCError):
    """Requested cost function is not in the catalog."""


class InvalidParams(HarvestMCError):
    """Catalog or grid parameters fail validation."""


class DomainError(HarvestMCError):
    """A cost evaluator was called outside its domain (log1p with u <= -scale)."""


class EmptyAdmissibleSet(HarvestMCError):
    """Boundary handling removed every control at some state."""


class CflViolation(HarvestMCError):
    """Explicit periodic scheme has a negative self-probability.

    Carries the worst offending (gamma, x, regime, control) and the largest
    admissible time step h1.
    """

    def __init__(self, message, gamma=None, x=None, regime=None, control=None,
                 h1_max=None):
        super().__init__(message)
        self.gamma = gamma
        self.x = x
        self.regime = regime
        self.control = control
        self.h1_max = h1_max


class NonContraction(HarvestMCError):
    """Kernel has a non-positive interpolation interval; iteration cannot contract."""


class MaxIterations(HarvestMCError):
    """Iteration budget exhausted before the tolerance was met.

    The partial result is attached: ``value``, ``policy``, ``report``.
    """

    def __init__(self, message, value=None, policy=None, report=None):
        super().__init__(message)
        self.value = value
        self.policy = policy
        self.report = report


class ConfigError(HarvestMCError):
    """Experiment configuration failed validation."""
