"""Spatially homogeneous analytic equilibria and their velocity Fourier transforms.

Every other module consumes the background distribution mu(v) only through
mu_hat(eta) = int mu(v) exp(-i eta v) dv, so profiles are defined by closed-form
transforms.  Sign convention: f_hat(eta) = int f(v) exp(-i eta v) dv, which puts
the critical time of a datum concentrated at eta0 in spatial mode k at
t = eta0 / k.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ProfileRangeError

GAUSSIAN = "gaussian"
TWO_STREAM = "two-stream"
CUSTOM = "custom-tabulated"

_FAMILIES = (GAUSSIAN, TWO_STREAM, CUSTOM)


def _default_theta0(width: float) -> float:
    # Effective exponential rate used in bound checks.  The envelope constant
    # C = exp(theta0^2 w^2 eta^2 ... ) = exp(theta0^2/(2 w^2)) must stay <= 10,
    # which requires theta0 <= w*sqrt(2 ln 10) ~ 2.146 w.
    return min(1.0, 2.0 * width)


@dataclass
class EquilibriumProfile:
    """Homogeneous background mu(v) from a named analytic family.

    Parameters
    ----------
    family : one of "gaussian", "two-stream", "custom-tabulated"
    v0 : stream drift (two-stream only; the profile is the symmetric
         half-sum of Maxwellians centred at +-v0)
    width : thermal width of each Maxwellian component
    mass : total integral of mu, conventionally 1
    theta0 : stored exponential decay rate of |mu_hat|, used by bound checks
    eta_table, mu_hat_table : tabulation for the custom family
    """

    family: str = GAUSSIAN
    v0: float = 0.0
    width: float = 1.0
    mass: float = 1.0
    theta0: float | None = None
    eta_table: np.ndarray | None = field(default=None, repr=False)
    mu_hat_table: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown equilibrium family {self.family!r}")
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        if self.width <= 0:
            raise ValueError("thermal width must be positive")
        if self.family == CUSTOM:
            if self.eta_table is None or self.mu_hat_table is None:
                raise ValueError("custom-tabulated profile needs eta_table and mu_hat_table")
            self.eta_table = np.asarray(self.eta_table, dtype=float)
            self.mu_hat_table = np.asarray(self.mu_hat_table, dtype=complex)
            if self.eta_table.ndim != 1 or self.eta_table.shape != self.mu_hat_table.shape:
                raise ValueError("tabulation arrays must be 1D and of equal length")
            if not np.all(np.diff(self.eta_table) > 0):
                raise ValueError("eta_table must be strictly increasing")
        if self.theta0 is None:
            self.theta0 = _default_theta0(self.width)
        if self.theta0 <= 0:
            raise ValueError("theta0 must be positive")

    @property
    def is_analytic_family(self) -> bool:
        """True when mu_hat decays super-exponentially (entire Laplace symbol)."""
        return self.family in (GAUSSIAN, TWO_STREAM)


def gaussian(width: float = 1.0, mass: float = 1.0, theta0: float | None = None) -> EquilibriumProfile:
    return EquilibriumProfile(family=GAUSSIAN, width=width, mass=mass, theta0=theta0)


def two_stream(v0: float, width: float = 1.0, mass: float = 1.0,
               theta0: float | None = None) -> EquilibriumProfile:
    return EquilibriumProfile(family=TWO_STREAM, v0=v0, width=width, mass=mass, theta0=theta0)


def mu_hat(profile: EquilibriumProfile, eta):
    """Velocity Fourier transform mu_hat(eta); vectorised over eta.

    Real for the even built-in families; satisfies mu_hat(-eta) = conj(mu_hat(eta)).
    """
    eta = np.asarray(eta, dtype=float)
    w = profile.width
    if profile.family == GAUSSIAN:
        out = profile.mass * np.exp(-0.5 * (w * eta) ** 2)
    elif profile.family == TWO_STREAM:
        out = profile.mass * np.cos(profile.v0 * eta) * np.exp(-0.5 * (w * eta) ** 2)
    else:
        lo, hi = profile.eta_table[0], profile.eta_table[-1]
        if np.any(eta < lo) or np.any(eta > hi):
            raise ProfileRangeError(
                f"eta outside tabulation range [{lo}, {hi}]")
        re = np.interp(eta, profile.eta_table, profile.mu_hat_table.real)
        im = np.interp(eta, profile.eta_table, profile.mu_hat_table.imag)
        out = re + 1j * im
    return out if out.ndim else out[()]


def grad_mu_hat(profile: EquilibriumProfile, eta):
    """Transform of dv mu at eta, equal to i*eta*mu_hat(eta)."""
    eta = np.asarray(eta, dtype=float)
    out = 1j * eta * mu_hat(profile, eta)
    return out if out.ndim else out[()]


def mu_value(profile: EquilibriumProfile, v):
    """Pointwise mu(v) for the closed-form families."""
    v = np.asarray(v, dtype=float)
    w = profile.width
    norm = profile.mass / (w * np.sqrt(2.0 * np.pi))
    if profile.family == GAUSSIAN:
        out = norm * np.exp(-0.5 * (v / w) ** 2)
    elif profile.family == TWO_STREAM:
        out = 0.5 * norm * (np.exp(-0.5 * ((v - profile.v0) / w) ** 2)
                            + np.exp(-0.5 * ((v + profile.v0) / w) ** 2))
    else:
        raise ProfileRangeError("custom-tabulated profiles carry no value-space form")
    return out if out.ndim else out[()]


def grad_mu_value(profile: EquilibriumProfile, v):
    """Pointwise dv mu(v) for the closed-form families."""
    v = np.asarray(v, dtype=float)
    w = profile.width
    norm = profile.mass / (w * np.sqrt(2.0 * np.pi))
    if profile.family == GAUSSIAN:
        out = norm * np.exp(-0.5 * (v / w) ** 2) * (-v / w ** 2)
    elif profile.family == TWO_STREAM:
        out = 0.5 * norm * (
            np.exp(-0.5 * ((v - profile.v0) / w) ** 2) * (-(v - profile.v0) / w ** 2)
            + np.exp(-0.5 * ((v + profile.v0) / w) ** 2) * (-(v + profile.v0) / w ** 2))
    else:
        raise ProfileRangeError("custom-tabulated profiles carry no value-space form")
    return out if out.ndim else out[()]


def laplace_abscissa(profile: EquilibriumProfile, k: float) -> float:
    """Abscissa of convergence of int_0^inf exp(-lam*tau) tau mu_hat(k tau) dtau.

    The built-in families have Gaussian-dominated transforms, so the integral
    converges for every lam (abscissa -inf).  Tabulated profiles only certify
    the stored exponential rate theta0.
    """
    if profile.is_analytic_family:
        return -np.inf
    return -profile.theta0 * abs(k)
