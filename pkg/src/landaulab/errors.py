"""Exception types raised by the laboratory modules."""


class LandauLabError(Exception):
    """Base class for all package errors."""


class ProfileRangeError(LandauLabError):
    """Tabulated equilibrium queried outside its tabulation range."""


class ZeroModeError(LandauLabError):
    """An operation that requires k != 0 was called on the zero mode."""


class AbscissaError(LandauLabError):
    """Laplace integral evaluated left of its abscissa of convergence."""


class MarginalStabilityError(LandauLabError):
    """Nyquist contour passes too close to the origin; verdict withheld."""


class RootIsolationError(LandauLabError):
    """Winding count and polished roots disagree after maximal box refinement."""

    def __init__(self, message, box=None):
        super().__init__(message)
        self.box = box


class StepSizeError(LandauLabError):
    """Volterra time step too large for a stable marching solve."""


class GridTooSmallError(LandauLabError):
    """State grid cannot hold the drifting Fourier support of the run."""

    def __init__(self, message, required_j=None):
        super().__init__(message)
        self.required_j = required_j


class AlignmentError(LandauLabError):
    """A frequency lookup eta - l*t does not land on the state grid."""


class BlowUpError(LandauLabError):
    """Coefficients left the representable range during time stepping."""

    def __init__(self, message, time=None, mode=None):
        super().__init__(message)
        self.time = time
        self.mode = mode


class WeightOverflowError(LandauLabError):
    """exp(z<k,eta>) overflows double precision at the grid edge."""


class MissingSampleError(LandauLabError):
    """Requested time is not a stored sample of the field history."""


class GridMismatchError(LandauLabError):
    """Two time series or states live on incompatible grids."""


class QuadratureError(LandauLabError):
    """Adaptive quadrature failed to reach the requested tolerance."""

    def __init__(self, message, worst=None):
        super().__init__(message)
        self.worst = worst


class ConfigError(LandauLabError):
    """Run configuration failed validation; carries the full error list."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class OutputLockError(LandauLabError):
    """Another run holds the lock on the requested output directory."""
