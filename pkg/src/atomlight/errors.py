"""Exception taxonomy shared by all solvers.

The CLI maps these classes onto distinct process exit codes, so new failure
modes should subclass one of the categories below rather than raising bare
ValueError/RuntimeError.
"""


class AtomLightError(Exception):
    """Base class for all package errors."""


class InvalidArgument(AtomLightError, ValueError):
    """Caller passed an argument violating a documented precondition."""


class CapabilityError(AtomLightError):
    """Requested solver/scenario combination is not supported (e.g. exact N > 12)."""


class SingularityError(AtomLightError):
    """Geometry puts two atoms close enough that the dipole kernel diverges."""


class NumericalFailure(AtomLightError):
    """A numerical procedure failed to produce a trustworthy result."""


class IntegrationFailure(NumericalFailure):
    """Time stepping broke down (NaN state or step-size underflow)."""


class SteadyStateFailure(NumericalFailure):
    """Steady-state criterion not met before t_max."""


class ProjectionDegenerateError(NumericalFailure):
    """Detection projection has (numerically) zero norm; g2 is undefined."""


class ConsistencyError(NumericalFailure):
    """An internally real quantity acquired an imaginary part beyond tolerance."""


class FitFailure(NumericalFailure):
    """Least-squares fit did not converge within the iteration budget."""
