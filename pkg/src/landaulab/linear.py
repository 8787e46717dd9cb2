"""Linear response theory: dispersion function, Landau roots, Nyquist stability,
and the resolvent Green kernel of the density Volterra equation.

The linearised field of a mode k obeys the scalar Volterra equation

    E_k(t) + int_0^t K_k(t-s) E_k(s) ds = source,   K_k(tau) = |k|^(2-alpha) tau mu_hat(k tau),

whose Laplace symbol D(k,lam) = 1 + int_0^inf exp(-lam tau) K_k(tau) dtau is the
dielectric function.  Zeros of D in the half-plane Re(lam) > 0 are growing modes;
their absence for every retained k is the stability verdict.  The resolvent
kernel G^r solves G^r = -K - K * G^r so that E = (delta + G^r) * source.
"""
from __future__ import annotations

import numpy as np
from dataclasses import dataclass, field
from scipy.integrate import quad

from . import equilibria as eq
from .errors import (AbscissaError, GridMismatchError, MarginalStabilityError,
                     QuadratureError, RootIsolationError, StepSizeError,
                     ZeroModeError)

_EXPO = 60.0  # kernel tail cut: envelope below exp(-_EXPO)
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def volterra_kernel(profile: eq.EquilibriumProfile, alpha: float, k: float, tau):
    """Memory kernel K_k(tau) = |k|^(2-alpha) tau mu_hat(k tau); real for even profiles."""
    if k == 0:
        raise ZeroModeError("the zero mode carries no field")
    tau = np.asarray(tau, dtype=float)
    out = abs(k) ** (2.0 - alpha) * tau * np.real(eq.mu_hat(profile, k * tau))
    return out if out.ndim else out[()]


def _tau_cutoff(profile: eq.EquilibriumProfile, k: float, re_min: float) -> float:
    """Upper integration limit beyond which the kernel times exp(-lam tau) is negligible."""
    if profile.is_analytic_family:
        a = profile.width * abs(k)
        r = min(re_min, 0.0)
        return 1.2 * (abs(r) + np.sqrt(r * r + 2.0 * _EXPO * a * a)) / (a * a)
    # tabulated transform: integrable only over the table
    return profile.eta_table[-1] / abs(k)


def _check_abscissa(profile, k, re_min):
    ab = eq.laplace_abscissa(profile, k)
    if re_min <= ab:
        raise AbscissaError(
            f"Re(lambda)={re_min:g} is not right of the abscissa {ab:g} for k={k:g}")


def _log_kernel(profile, k, taus, moment):
    """(sign, log|tau^moment mu_hat(k tau)|): fused so exp never meets inf*0."""
    taus = np.asarray(taus, dtype=float)
    w = profile.width
    with np.errstate(divide="ignore"):
        log_tau = moment * np.log(np.where(taus > 0, taus, 1.0))
        log_tau = np.where(taus > 0, log_tau, -np.inf if moment else 0.0)
        if profile.family == eq.GAUSSIAN:
            sign = np.ones_like(taus)
            log_mu = np.log(profile.mass) - 0.5 * (w * k * taus) ** 2
        elif profile.family == eq.TWO_STREAM:
            c = np.cos(profile.v0 * k * taus)
            sign = np.sign(c)
            log_mu = np.log(profile.mass) - 0.5 * (w * k * taus) ** 2 \
                + np.log(np.abs(c))
        else:
            mu = np.real(eq.mu_hat(profile, k * taus))
            sign = np.sign(mu)
            log_mu = np.log(np.abs(mu))
    return sign, log_tau + log_mu


def _kernel_times_exp(profile, k, taus, lam, moment):
    """tau^moment mu_hat(k tau) exp(-lam tau), overflow-safe for deep-left lam."""
    sign, log_abs = _log_kernel(profile, k, taus, moment)
    expo = log_abs - lam * np.asarray(taus, dtype=float)
    if np.any(expo.real > 700.0):
        raise QuadratureError(
            f"Laplace integrand exceeds double range at k={k:g}, lam={lam:g}")
    return sign * np.exp(expo)


def dispersion(profile: eq.EquilibriumProfile, alpha: float, k: float, lam: complex,
               rel_tol: float = 1e-10) -> complex:
    """Dielectric function D(k, lam) by adaptive quadrature of the Laplace integral.

    Requires k != 0 and Re(lam) right of the abscissa of convergence.
    D -> 1 as Re(lam) -> +inf and D(k, conj lam) = conj D(k, lam).
    """
    if k == 0:
        raise ZeroModeError("the zero mode carries no field")
    lam = complex(lam)
    _check_abscissa(profile, k, lam.real)
    tmax = _tau_cutoff(profile, k, lam.real)
    pref = abs(k) ** (2.0 - alpha)

    def f(t):
        return _kernel_times_exp(profile, k, np.asarray([t]), lam, 1)[0]

    re, re_err = quad(lambda t: f(t).real, 0.0, tmax, epsabs=1e-11, epsrel=rel_tol, limit=800)
    im, im_err = quad(lambda t: f(t).imag, 0.0, tmax, epsabs=1e-11, epsrel=rel_tol, limit=800)
    if max(re_err, im_err) > 1e-6 * max(1.0, abs(re) + abs(im)):
        raise QuadratureError(f"Laplace quadrature did not converge at k={k}, lam={lam}")
    return 1.0 + pref * (re + 1j * im)


def _laplace_batch(profile, alpha, k, lams, moment: int = 1):
    """int_0^inf tau^moment mu_hat(k tau) exp(-lam tau) dtau for an array of lam.

    Composite 16-point Gauss-Legendre with panels short enough to resolve the
    fastest oscillation in the batch; exact to near machine precision for the
    smooth kernels used here.
    """
    lams = np.atleast_1d(np.asarray(lams, dtype=complex))
    re_min = float(np.min(lams.real))
    _check_abscissa(profile, k, re_min)
    tmax = _tau_cutoff(profile, k, re_min)
    om_max = float(np.max(np.abs(lams.imag)))
    h = min(tmax / 8.0, np.pi / (2.0 * om_max) if om_max > 0 else np.inf)
    n_panels = int(np.ceil(tmax / h))
    if n_panels * 16 > 4_000_000:
        raise QuadratureError(f"oscillatory quadrature too large ({n_panels} panels)")
    edges = np.linspace(0.0, tmax, n_panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    taus = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    wts = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    sign, log_abs = _log_kernel(profile, k, taus, moment)
    with np.errstate(divide="ignore"):
        log_wk = log_abs + np.log(wts)
    worst = float(np.max(log_wk + np.maximum(0.0, -re_min) * taus))
    if worst > 700.0:
        raise QuadratureError(
            f"Laplace integrand exceeds double range at k={k:g} (exponent {worst:.0f})")

    out = np.empty(lams.shape, dtype=complex)
    chunk = max(1, 4_000_000 // taus.size)
    for i in range(0, lams.size, chunk):
        lam_c = lams[i:i + chunk]
        out[i:i + chunk] = np.exp(log_wk[None, :] - np.outer(lam_c, taus)) @ sign
    return out


def dispersion_many(profile, alpha, k, lams):
    """Vectorised D(k, lam) over an array of lam (panel Gauss-Legendre path)."""
    pref = abs(k) ** (2.0 - alpha)
    return 1.0 + pref * _laplace_batch(profile, alpha, k, lams, moment=1)


def dispersion_derivative(profile, alpha, k, lams):
    """d/dlam D(k, lam), vectorised: minus the tau-weighted Laplace integral."""
    pref = abs(k) ** (2.0 - alpha)
    return -pref * _laplace_batch(profile, alpha, k, lams, moment=2)


@dataclass
class DispersionRoot:
    """A zero lam = gamma + i omega of D(k, .), with its Newton trace."""

    k: float
    lam: complex
    residual: float
    iterations: int

    @property
    def growth_rate(self) -> float:
        return self.lam.real

    @property
    def frequency(self) -> float:
        return -self.lam.imag


def newton_root(profile, alpha, k, lam0, tol: float = 1e-12, max_iter: int = 60) -> DispersionRoot:
    """Polish a root of D(k, .) by damped Newton iteration from lam0.

    Divergence (non-finite values, runaway steps, or integrand overflow) ends
    the iteration with an infinite residual rather than raising, so callers
    can fall back to subdivision.
    """
    lam = complex(lam0)
    it = 0
    for it in range(1, max_iter + 1):
        try:
            d = dispersion_many(profile, alpha, k, [lam])[0]
            dp = dispersion_derivative(profile, alpha, k, [lam])[0]
        except QuadratureError:
            return DispersionRoot(k=float(k), lam=lam, residual=np.inf, iterations=it)
        if not (np.isfinite(d) and np.isfinite(dp)) or dp == 0:
            return DispersionRoot(k=float(k), lam=lam, residual=np.inf, iterations=it)
        step = d / dp
        cap = 0.5 * (1.0 + abs(lam))
        if abs(step) > cap:
            step *= cap / abs(step)
        lam = lam - step
        if abs(step) < tol * max(1.0, abs(lam)):
            break
    try:
        resid = abs(dispersion(profile, alpha, k, lam))
    except (QuadratureError, AbscissaError):
        resid = np.inf
    return DispersionRoot(k=float(k), lam=lam, residual=float(resid), iterations=it)


@dataclass
class _Box:
    re_min: float
    re_max: float
    im_min: float
    im_max: float

    def corners(self):
        return [complex(self.re_min, self.im_min), complex(self.re_max, self.im_min),
                complex(self.re_max, self.im_max), complex(self.re_min, self.im_max)]

    def center(self):
        return complex(0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max))

    def contains(self, lam, pad=0.0):
        return (self.re_min - pad <= lam.real <= self.re_max + pad
                and self.im_min - pad <= lam.imag <= self.im_max + pad)

    def split(self):
        # offset the cut slightly so a root sitting on the midline is unlikely
        rm = 0.5 * (self.re_min + self.re_max) + 1e-3 * (self.re_max - self.re_min)
        im = 0.5 * (self.im_min + self.im_max) + 1e-3 * (self.im_max - self.im_min)
        return [_Box(self.re_min, rm, self.im_min, im), _Box(rm, self.re_max, self.im_min, im),
                _Box(self.re_min, rm, im, self.im_max), _Box(rm, self.re_max, im, self.im_max)]


def _boundary_winding(profile, alpha, k, box, n_per_side=48, max_refine=14,
                      origin_tol=1e-9):
    """Winding number of D(k, .) around 0 along the box boundary.

    Adaptively refines the polyline until consecutive argument jumps are below
    pi/2; raises RootIsolationError when refinement saturates and
    MarginalStabilityError when the image passes within origin_tol of 0.
    """
    cs = box.corners()
    pts = []
    for a, b in zip(cs, cs[1:] + cs[:1]):
        seg = a + (b - a) * np.linspace(0.0, 1.0, n_per_side, endpoint=False)
        pts.extend(seg.tolist())
    pts.append(pts[0])
    pts = np.asarray(pts, dtype=complex)
    vals = dispersion_many(profile, alpha, k, pts)

    for _ in range(max_refine):
        if np.min(np.abs(vals)) < origin_tol:
            raise MarginalStabilityError(
                f"dispersion boundary value within {origin_tol:g} of 0 at k={k:g}")
        dphi = np.angle(vals[1:] / vals[:-1])
        bad = np.flatnonzero(np.abs(dphi) > 0.5 * np.pi)
        if bad.size == 0:
            total = float(np.sum(dphi))
            w = total / (2.0 * np.pi)
            if abs(w - round(w)) > 0.2:
                raise RootIsolationError(
                    f"winding estimate {w:.3f} did not settle on an integer", box=box)
            return int(round(w))
        mids = 0.5 * (pts[bad] + pts[bad + 1])
        mvals = dispersion_many(profile, alpha, k, mids)
        pts = np.insert(pts, bad + 1, mids)
        vals = np.insert(vals, bad + 1, mvals)
    raise RootIsolationError("argument tracking failed to resolve the boundary", box=box)


def find_roots(profile, alpha, k, re_range, im_range, residual_tol: float = 1e-8,
               max_depth: int = 12) -> list[DispersionRoot]:
    """All zeros of D(k, .) inside the rectangle re_range x im_range.

    Counts zeros by the argument principle on the boundary, isolates them by
    quadtree subdivision, polishes each with Newton, and verifies that the
    polished roots reproduce the boundary count.
    """
    if k == 0:
        raise ZeroModeError("the zero mode carries no field")
    box = _Box(float(re_range[0]), float(re_range[1]), float(im_range[0]), float(im_range[1]))
    _check_abscissa(profile, k, box.re_min)
    total = _boundary_winding(profile, alpha, k, box)
    roots = _roots_in_box(profile, alpha, k, box, total, residual_tol, max_depth)
    uniq: list[DispersionRoot] = []
    for r in roots:
        if all(abs(r.lam - u.lam) > 1e-8 * max(1.0, abs(r.lam)) for u in uniq):
            uniq.append(r)
    if len(uniq) != total:
        raise RootIsolationError(
            f"found {len(uniq)} distinct roots but boundary winding is {total}", box=box)
    uniq.sort(key=lambda r: (-r.lam.real, abs(r.lam.imag)))
    return uniq


def _roots_in_box(profile, alpha, k, box, count, residual_tol, depth):
    if count == 0:
        return []
    if count == 1:
        root = newton_root(profile, alpha, k, box.center())
        pad = 1e-9 * (1.0 + abs(root.lam))
        if root.residual < residual_tol and box.contains(root.lam, pad=pad):
            return [root]
    if depth == 0:
        raise RootIsolationError("subdivision depth exhausted", box=box)
    out = []
    found = 0
    for sub in box.split():
        w = _boundary_winding(profile, alpha, k, sub)
        found += w
        out.extend(_roots_in_box(profile, alpha, k, sub, w, residual_tol, depth - 1))
    if found != count:
        raise RootIsolationError(
            f"subdivision winding {found} != parent winding {count}", box=box)
    return out


def _tail_constant(profile, alpha, k) -> float:
    """Constant C with |D(k, lam) - 1| <= C/|lam|^2 for Re(lam) >= 0.

    Two integrations by parts of the Laplace integral of h(tau) = tau mu_hat(k tau)
    give C = |k|^(2-alpha) (|h'(0)| + int |h''|);  h'(0) = mu_hat(0) and the
    integral of |h''| is k-independent after substituting u = k tau.
    """
    u = np.linspace(0.0, _tau_cutoff(profile, 1.0, 0.0) * 1.5, 20001)
    mu0, mu1, mu2 = _mu_hat_derivs(profile, u)
    integrand = np.abs(2.0 * mu1 + u * mu2)
    c_prof = float(np.trapezoid(integrand, u))
    return abs(k) ** (2.0 - alpha) * (profile.mass + c_prof)


def _mu_hat_derivs(profile, u):
    """mu_hat and its first two eta-derivatives on the closed-form families."""
    a = profile.width ** 2
    g = np.exp(-0.5 * a * u * u)
    if profile.family == eq.GAUSSIAN:
        m0 = profile.mass * g
        m1 = profile.mass * g * (-a * u)
        m2 = profile.mass * g * a * (a * u * u - 1.0)
        return m0, m1, m2
    if profile.family == eq.TWO_STREAM:
        v0 = profile.v0
        c, s = np.cos(v0 * u), np.sin(v0 * u)
        m0 = profile.mass * g * c
        m1 = profile.mass * g * (-v0 * s - a * u * c)
        m2 = profile.mass * g * (2.0 * a * u * v0 * s + (a * a * u * u - v0 * v0 - a) * c)
        return m0, m1, m2
    # tabulated: finite differences on the table resolution
    m0 = np.real(eq.mu_hat(profile, u))
    m1 = np.gradient(m0, u)
    m2 = np.gradient(m1, u)
    return m0, m1, m2


@dataclass
class NyquistSweep:
    k: float
    winding: int
    xi_endpoint: float
    min_abs: float


def nyquist_winding(profile, alpha, k, endpoint_tol: float = 1e-6,
                    origin_tol: float = 1e-8, n_dense: int = 1201) -> NyquistSweep:
    """Zeros of D(k, .) in the open right half-plane, counted along the imaginary axis.

    The sweep is dense on |xi| <= xi_far where the curve can approach the
    origin; beyond that |D - 1| <= C/xi^2 keeps the image inside a small disk
    around 1, so only the branch endpoints contribute.  The endpoint Xi is
    chosen from the same tail constant so that |D - 1| < endpoint_tol there.
    """
    c_tail = _tail_constant(profile, alpha, k)
    xi_far = max(np.sqrt(c_tail / 0.05), 1.0)
    xi_end = max(np.sqrt(c_tail / endpoint_tol), 2.0 * xi_far)
    xis = np.linspace(-xi_far, xi_far, n_dense)
    pts = 1j * xis
    vals = dispersion_many(profile, alpha, k, pts)
    for _ in range(14):
        if np.min(np.abs(vals)) < origin_tol:
            raise MarginalStabilityError(
                f"Nyquist contour within {origin_tol:g} of the origin at k={k:g}")
        dphi = np.angle(vals[1:] / vals[:-1])
        bad = np.flatnonzero(np.abs(dphi) > 0.5 * np.pi)
        if bad.size == 0:
            break
        mids = 0.5 * (pts[bad] + pts[bad + 1])
        vals = np.insert(vals, bad + 1, dispersion_many(profile, alpha, k, mids))
        pts = np.insert(pts, bad + 1, mids)
    else:
        raise QuadratureError(f"Nyquist sweep failed to resolve at k={k:g}")

    ends = dispersion_many(profile, alpha, k, [1j * xi_end, -1j * xi_end])
    worst_end = float(np.max(np.abs(ends - 1.0)))
    if worst_end > endpoint_tol:
        raise QuadratureError(
            f"|D-1|={worst_end:.2e} at xi=+-{xi_end:g} exceeds the endpoint tolerance")

    # walking DOWN the axis keeps Re > 0 on the left; with the near-constant
    # closure through the right semicircle the zero count is the negative of
    # the upward sweep's argument change
    d_dense = float(np.sum(np.angle(vals[1:] / vals[:-1])))
    d_junctions = (float(np.angle(vals[0] / ends[1]))     # -Xi -> -xi_far
                   + float(np.angle(ends[0] / vals[-1])))  # xi_far -> Xi
    w = -(d_dense + d_junctions) / (2.0 * np.pi)
    if abs(w - round(w)) > 0.2:
        raise QuadratureError(f"Nyquist winding {w:.3f} did not settle on an integer")
    return NyquistSweep(k=float(k), winding=int(round(w)), xi_endpoint=float(xi_end),
                        min_abs=float(np.min(np.abs(vals))))


@dataclass
class PenroseVerdict:
    stable: bool
    windings: dict
    unstable_k: float | None = None
    root: DispersionRoot | None = None

    def __str__(self):
        if self.stable:
            return "stable"
        return f"unstable(k={self.unstable_k:g}, lam={self.root.lam:.6g})"


def penrose_verdict(profile, alpha, k_list) -> PenroseVerdict:
    """Nyquist stability verdict over a list of nonzero wavenumbers.

    Stable iff the winding of D(k, i xi) about the origin vanishes for every k;
    otherwise returns the first unstable k together with its fastest-growing root.
    """
    k_list = list(k_list)
    if not k_list:
        raise ValueError("k-list must be nonempty")
    if any(k == 0 for k in k_list):
        raise ZeroModeError("the zero mode carries no field")
    windings = {}
    first_unstable = None
    for k in k_list:
        sweep = nyquist_winding(profile, alpha, k)
        windings[k] = sweep.winding
        if sweep.winding != 0 and first_unstable is None:
            first_unstable = k
    if first_unstable is None:
        return PenroseVerdict(stable=True, windings=windings)
    k = first_unstable
    gamma_max = _growth_bound(profile, alpha, k)
    omega_max = np.sqrt(_tail_constant(profile, alpha, k)) + 1.0
    roots = find_roots(profile, alpha, k, (1e-9, gamma_max), (-omega_max, omega_max))
    roots.sort(key=lambda r: -r.lam.real)
    return PenroseVerdict(stable=False, windings=windings, unstable_k=float(k), root=roots[0])


def _growth_bound(profile, alpha, k) -> float:
    """gamma with |D-1| < 1 for all Re(lam) >= gamma: no roots grow faster."""
    tmax = _tau_cutoff(profile, k, 0.0)
    t = np.linspace(0.0, tmax, 8001)
    kern = abs(k) ** (2.0 - alpha) * t * np.abs(eq.mu_hat(profile, k * t))
    gamma = 0.0
    for _ in range(60):
        val = np.trapezoid(kern * np.exp(-gamma * t), t)
        if val < 0.95:
            return max(gamma, 1e-6) * 1.05 + 0.05
        gamma = 2.0 * gamma + 0.1
    raise QuadratureError("failed to bound the growth rate")


def landau_rate_asymptotic(profile, k) -> float:
    """Small-k damping-rate scaling |k|^(-2) dv_mu(1/|k|).

    A resonant-particle order-of-magnitude estimate only: for Maxwellian
    backgrounds the true rate is smaller by a factor approaching
    (pi/2) e^(-3/2) ~ 0.35 as |k| -> 0.
    """
    if k == 0:
        raise ZeroModeError("the zero mode carries no field")
    return float(eq.grad_mu_value(profile, 1.0 / abs(k)) / k ** 2)


@dataclass
class GreenKernel:
    """Discrete resolvent kernel G^r_k on a uniform time grid with its decay fit."""

    k: float
    times: np.ndarray
    values: np.ndarray
    fit_c: float
    fit_theta: float  # envelope exponent per unit |k| t
    residual: float = field(default=0.0)

    @property
    def decay_rate(self) -> float:
        """Fitted envelope decay rate in absolute time units."""
        return self.fit_theta * abs(self.k)

    def envelope(self, t):
        return self.fit_c * np.exp(-self.fit_theta * abs(self.k) * np.asarray(t))


def green_kernel(profile, alpha: float, k: float, times) -> GreenKernel:
    """Solve the resolvent equation G^r = -K - K * G^r by product trapezoid.

    The uniform grid must start at 0.  The returned kernel satisfies the
    resolvent equation on the same quadrature to near machine precision
    (residual recorded) and carries an exponential envelope fit (C, theta).
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 3 or times[0] != 0.0:
        raise GridMismatchError("times must be a uniform grid starting at 0")
    dt = times[1] - times[0]
    if not np.allclose(np.diff(times), dt, rtol=1e-10, atol=1e-12):
        raise GridMismatchError("times must be uniformly spaced")
    kern = volterra_kernel(profile, alpha, k, times)
    if dt * float(np.max(np.abs(kern))) >= 1.0:
        raise StepSizeError(
            f"dt*max|K| = {dt * np.max(np.abs(kern)):.3g} >= 1; shrink the step")

    n = times.size
    g = np.zeros(n, dtype=float)
    g[0] = -kern[0]
    diag = 1.0 + 0.5 * dt * kern[0]
    for i in range(1, n):
        acc = 0.5 * kern[i] * g[0] + float(kern[i - 1:0:-1] @ g[1:i])
        g[i] = (-kern[i] - dt * acc) / diag

    resid = _resolvent_residual(kern, g, dt)
    c_fit, theta = _fit_envelope(times, g, abs(k))
    return GreenKernel(k=float(k), times=times, values=g.astype(complex),
                       fit_c=c_fit, fit_theta=theta, residual=resid)


def _resolvent_residual(kern, g, dt):
    n = kern.size
    conv = np.zeros(n)
    for i in range(1, n):
        w = np.full(i + 1, dt)
        w[0] = w[-1] = 0.5 * dt
        conv[i] = float(np.sum(w * kern[i::-1] * g[:i + 1]))
    return float(np.max(np.abs(g + kern + conv)))


def _fit_envelope(times, values, absk):
    """Exponential hull |G| <= C exp(-theta |k| t) with theta from the peak decay."""
    mag = np.abs(values)
    top = float(np.max(mag))
    if top == 0.0:
        return 0.0, 1.0
    interior = (mag[1:-1] > mag[:-2]) & (mag[1:-1] >= mag[2:])
    idx = np.flatnonzero(interior) + 1
    idx = idx[mag[idx] > 1e-10 * top]
    start = int(np.argmax(mag))
    idx = idx[idx >= start]
    if idx.size >= 3:
        slope, _ = np.polyfit(times[idx], np.log(mag[idx]), 1)
        theta = max(-slope, 1e-12) / absk
    else:
        # too few oscillation peaks: fit the decaying stretch directly
        sel = np.flatnonzero(mag > 1e-10 * top)
        sel = sel[sel >= start]
        slope, _ = np.polyfit(times[sel], np.log(mag[sel]), 1)
        theta = max(-slope, 1e-12) / absk
    keep = mag > 1e-300
    c_fit = float(np.max(mag[keep] * np.exp(theta * absk * times[keep])))
    return c_fit, float(theta)


def convolve_green(kernel: GreenKernel, times, source):
    """Apply E = (delta + G^r) * S on the kernel's own grid (trapezoid in s)."""
    times = np.asarray(times, dtype=float)
    source = np.asarray(source)
    if times.shape != kernel.times.shape or not np.allclose(times, kernel.times,
                                                            rtol=1e-10, atol=1e-12):
        raise GridMismatchError("source grid does not match the kernel grid")
    n = times.size
    dt = times[1] - times[0]
    g = kernel.values
    out = np.array(source, dtype=complex)
    for i in range(1, n):
        w = np.full(i + 1, dt)
        w[0] = w[-1] = 0.5 * dt
        out[i] += np.sum(w * g[i::-1] * source[:i + 1])
    return out
