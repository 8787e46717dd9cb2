"""Analytic-Sobolev weights, generator norms, and the shrinking-radius bookkeeping.

The weight A_{k,eta}(z) = exp(z<k,eta>) <eta>^sigma with <x> = sqrt(1+|x|^2)
measures analytic regularity at radius z.  The generator norm of a spectral
state sums A-weighted L1 masses of the coefficients and their eta-derivatives;
the field norm F does the same along the moving frequency eta = k t.  Both are
pure diagnostics: the solver never feeds them back into the dynamics.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MissingSampleError, WeightOverflowError

# exp() overflows just above this exponent in IEEE double
_EXP_LIMIT = 700.0


@dataclass(frozen=True)
class WeightParams:
    """Parameters of the weight family and of the shrinking analyticity radius.

    sigma   : Sobolev exponent (>= 1 for dynamics runs, >= 0 for diagnostics)
    lambda0 : terminal analyticity radius, > 0
    delta   : shrink exponent, 0 < delta < 1/2
    theta1  : bootstrap field-decay rate, 0 < theta1 <= theta2
    theta2  : radius-shrink gain rate
    """

    sigma: float = 1.0
    lambda0: float = 0.3
    delta: float = 0.3
    theta1: float = 0.1
    theta2: float = 0.15

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.lambda0 <= 0:
            raise ValueError("lambda0 must be positive")
        if not 0.0 < self.delta < 0.5:
            raise ValueError("delta must lie in (0, 1/2)")
        if not 0.0 < self.theta1 <= self.theta2:
            raise ValueError("need 0 < theta1 <= theta2")


@dataclass
class GeneratorSample:
    """One evaluation of the generator norm, with the per-derivative-order split."""

    time: float
    z: float
    value: float
    breakdown: list[float]

    def __post_init__(self):
        if abs(self.value - sum(self.breakdown)) > 1e-9 * max(1.0, abs(self.value)):
            raise ValueError("value must equal the sum of the breakdown entries")


def bracket(x):
    """Japanese bracket <x> = sqrt(1 + x^2); vectorised."""
    x = np.asarray(x, dtype=float)
    return np.sqrt(1.0 + x * x)


def bracket2(k, eta):
    """<k,eta> = sqrt(1 + k^2 + eta^2); vectorised, broadcasting."""
    k = np.asarray(k, dtype=float)
    eta = np.asarray(eta, dtype=float)
    return np.sqrt(1.0 + k * k + eta * eta)


def weight(params: WeightParams, z: float, k, eta):
    """A_{k,eta}(z) = exp(z <k,eta>) <eta>^sigma, vectorised over k and eta."""
    if z < 0:
        raise ValueError("radius z must be nonnegative")
    return np.exp(z * bracket2(k, eta)) * bracket(eta) ** params.sigma


def radius(params: WeightParams, t):
    """Slowly shrinking analyticity radius lambda(t) = lambda0 (1 + (1+t)^(-delta))."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be nonnegative")
    out = params.lambda0 * (1.0 + (1.0 + t) ** (-params.delta))
    return out if out.ndim else out[()]


def radius_derivative(params: WeightParams, t):
    """d/dt of the shrinking radius (negative)."""
    t = np.asarray(t, dtype=float)
    out = -params.lambda0 * params.delta * (1.0 + t) ** (-params.delta - 1.0)
    return out if out.ndim else out[()]


def gen_norm(state, params: WeightParams, z: float, max_alpha: int = 1) -> GeneratorSample:
    """Generator norm of a spectral state at radius z.

    Sums over retained spatial modes k and integrates over eta (trapezoid at
    the state's grid spacing) the weighted moduli of the coefficients and,
    for max_alpha = 1, of their eta-derivative approximated by second-order
    central differences.  The state must expose k_values, eta_values,
    coefficients (shape (n_k, n_eta)), delta_eta and time.

    Raises WeightOverflowError when exp(z <k,eta>) cannot be represented at
    the grid edge, naming the offending (k, eta).
    """
    if max_alpha not in (0, 1):
        raise ValueError("max_alpha must be 0 or 1 in one dimension")
    if z < 0:
        raise ValueError("radius z must be nonnegative")
    ks = np.asarray(state.k_values, dtype=float)
    etas = np.asarray(state.eta_values, dtype=float)
    kmax = np.max(np.abs(ks))
    emax = np.max(np.abs(etas))
    if z * bracket2(kmax, emax) > _EXP_LIMIT:
        raise WeightOverflowError(
            f"exp(z<k,eta>) overflows at grid edge (k={kmax:g}, eta={emax:g}, z={z:g})")

    a = weight(params, z, ks[:, None], etas[None, :])
    coeffs = np.asarray(state.coefficients)
    d_eta = state.delta_eta

    alpha0 = float(np.sum(a * np.abs(coeffs), axis=1).sum() * d_eta
                   - 0.5 * d_eta * np.sum(a[:, 0] * np.abs(coeffs[:, 0])
                                          + a[:, -1] * np.abs(coeffs[:, -1])))
    breakdown = [alpha0]
    if max_alpha == 1:
        deriv = np.gradient(coeffs, d_eta, axis=1)
        alpha1 = float(np.sum(a * np.abs(deriv), axis=1).sum() * d_eta
                       - 0.5 * d_eta * np.sum(a[:, 0] * np.abs(deriv[:, 0])
                                              + a[:, -1] * np.abs(deriv[:, -1])))
        breakdown.append(alpha1)
    return GeneratorSample(time=float(getattr(state, "time", 0.0)), z=float(z),
                           value=float(sum(breakdown)), breakdown=breakdown)


def f_norm(field, params: WeightParams, t: float, z: float) -> float:
    """Shifted-field norm F[E](t,z) = sum_{k != 0} A_{k,kt}(z) |E_hat_k(t)|.

    The field history must expose times, modes and a row of complex mode
    amplitudes per stored time; t must match a stored sample.
    """
    times = np.asarray(field.times, dtype=float)
    idx = np.flatnonzero(np.isclose(times, t, rtol=0.0, atol=1e-12 * max(1.0, abs(t))))
    if idx.size == 0:
        raise MissingSampleError(f"t={t} is not a stored sample time")
    return f_norm_from_modes(np.asarray(field.modes), field.amplitudes(idx[0]), params, t, z)


def f_norm_from_modes(ks, e_hat, params: WeightParams, t: float, z: float) -> float:
    """F-norm from raw mode arrays; used internally by the run loop."""
    ks = np.asarray(ks, dtype=float)
    e_hat = np.asarray(e_hat)
    nz = ks != 0
    a = weight(params, z, ks[nz], ks[nz] * t)
    return float(np.sum(a * np.abs(e_hat[nz])))


def check_gronwall(times, zs, gen_values, field_values, c0: float):
    """Residuals of the transport inequality for the generator norm.

    gen_values[i, j] = Gen at (times[i], zs[j]); field_values[i, j] = F at the
    same points.  Returns r[i] = max over interior z of
    (dt Gen - c0 F - (1+t) F dz Gen) with second-order central differences
    (one-sided at the time endpoints).  A run passes when r(t) stays below a
    quadrature tolerance; the inequality slack makes healthy runs negative.
    """
    times = np.asarray(times, dtype=float)
    zs = np.asarray(zs, dtype=float)
    gen = np.asarray(gen_values, dtype=float)
    fld = np.asarray(field_values, dtype=float)
    if times.size < 3 or zs.size < 3:
        raise ValueError("need at least 3 points per axis for finite differencing")
    if gen.shape != (times.size, zs.size) or fld.shape != gen.shape:
        raise ValueError("gen_values and field_values must have shape (n_t, n_z)")

    d_t = np.gradient(gen, times, axis=0)
    d_z = np.gradient(gen, zs, axis=1)
    resid = d_t - c0 * fld - (1.0 + times[:, None]) * fld * d_z
    # the inequality is pointwise in z; report the worst interior column
    return np.max(resid[:, 1:-1], axis=1)
