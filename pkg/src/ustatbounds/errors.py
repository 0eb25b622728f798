"""Exception hierarchy shared by all modules.

The CLI maps :class:`ConfigError` (and ``ValueError`` subclasses raised while
validating inputs) to exit code 1 and every other :class:`UStatError` to
exit code 2.
"""


class UStatError(Exception):
    """Base class for all library errors."""


class ConfigError(UStatError, ValueError):
    """Malformed configuration or invalid parameter combination."""


class DomainError(UStatError, ValueError):
    """An argument lies outside the domain of a formula (e.g. ``p < 2``)."""


class ParamError(UStatError, ValueError):
    """Invalid parameters for a tail/moment family conversion."""


class ArityMismatch(UStatError, ValueError):
    pass


class SampleTooShort(UStatError, ValueError):
    pass


class CapExceeded(UStatError):
    """Enumeration would visit more terms than the configured cap."""


class NonSymmetric(UStatError):
    pass


class DegenerateKernel(UStatError):
    """Kernel has (numerically) zero variance under the attached law."""


class TrivialKernel(UStatError):
    """Every Hoeffding projection has zero variance."""


class DegenerateVariance(UStatError):
    pass


class NotReady(UStatError):
    """Streaming evaluator has seen fewer points than the kernel arity."""


class DivergentNorm(UStatError):
    """A sup over the p-grid kept growing at the truncated boundary."""


class Unbounded(UStatError):
    """A conjugate objective grows without bound toward an infinite endpoint."""


class QuadratureFailure(UStatError):
    pass
