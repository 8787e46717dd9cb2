"""Plasma-echo experiments and numerical certification of echo-suppression bounds.

A pair of spectral spikes at (k1, eta1) and (k2, eta2) mixes into a density
resurgence in mode k1+k2 at the critical time t3 = (eta1+eta2)/(k1+k2), long
after the individual pulses have phase-mixed away.  The lab both reproduces the
echo with the nonlinear solver and certifies, by exhaustive sweep, the weighted
kernel bounds that control the cascade: the growth factor (t-s) against the
exponential gain of the shrinking analyticity radius and the Sobolev weights.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.integrate import quad

from .dynamics import InitialData, SimulationConfig, SpikeMode, simulate
from .errors import QuadratureError, ZeroModeError
from .norms import WeightParams, bracket, bracket2, radius

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


# ----------------------------------------------------------------------------
# echo prediction and measurement
# ----------------------------------------------------------------------------

@dataclass
class EchoPrediction:
    t1: float
    t2: float
    t3: float
    causal: bool


def predict_echo(k1: int, eta1: float, k2: int, eta2: float) -> EchoPrediction:
    """Critical times of the two-pulse interaction; flags non-causal setups.

    t1 = eta1/k1 and t2 = eta2/k2 are the mixing times of the bare pulses;
    the quadratic interaction echoes in mode k1+k2 at t3 = (eta1+eta2)/(k1+k2).
    """
    if k1 == 0 or k2 == 0:
        raise ZeroModeError("pulses must sit on nonzero spatial modes")
    if k1 + k2 == 0:
        raise ZeroModeError("k1 + k2 = 0 carries no field; no echo mode")
    t1 = eta1 / k1
    t2 = eta2 / k2
    t3 = (eta1 + eta2) / (k1 + k2)
    causal = (t3 > max(t1, t2)) and (t1 >= 0) and (t2 >= 0) and (t3 >= 0)
    return EchoPrediction(t1=t1, t2=t2, t3=t3, causal=causal)


@dataclass
class EchoExperiment:
    """A measured two-pulse echo against its predicted critical times."""

    pulses: list
    t1: float
    t2: float
    t3: float
    resolution: float
    echo_mode: int
    found: bool
    peak_time: float | None = None
    peak_amplitude: float | None = None
    rel_timing_error: float | None = None
    dominance_ratio: float | None = None   # peak vs cubic-order scale; >> 1 when quadratic dominates
    times: np.ndarray | None = None
    series: np.ndarray | None = None


def run_echo(profile, pulses, alpha: float = 2.0, k_max: int = 8, t_final: float = 20.0,
             dt: float = 0.05, mu_coupling: bool = True) -> EchoExperiment:
    """Run the two-spike experiment and measure the echo peak in mode k1+k2.

    The peak of |rho_hat_{k1+k2}| is searched strictly after both pulse times;
    a missing interior maximum yields a no-echo report carrying the trace.
    Setting mu_coupling=False removes the linear response, leaving the pure
    free-streaming interaction (sharper echo timing).
    """
    if len(pulses) != 2:
        raise ValueError("an echo experiment takes exactly two pulses")
    (k1, eta1, a1), (k2, eta2, a2) = pulses
    pred = predict_echo(k1, eta1, k2, eta2)
    if not pred.causal:
        raise ValueError(
            f"non-causal echo setup: t1={pred.t1:g}, t2={pred.t2:g}, t3={pred.t3:g}")
    data = InitialData(spikes=(SpikeMode(k1, eta1, a1), SpikeMode(k2, eta2, a2)))
    cfg = SimulationConfig(profile=profile, data=data, alpha=alpha, k_max=k_max,
                           t_final=t_final, dt=dt, mu_coupling=mu_coupling)
    out = simulate(cfg)
    k_echo = k1 + k2
    series = np.abs(out.field.density_series(k_echo))
    times = out.field.times

    window = times > max(pred.t1, pred.t2) + 2 * dt
    idx = np.flatnonzero(window)
    exp = EchoExperiment(pulses=list(pulses), t1=pred.t1, t2=pred.t2, t3=pred.t3,
                         resolution=dt, echo_mode=k_echo, found=False,
                         times=times, series=series)
    if idx.size < 3:
        return exp
    sub = series[idx]
    rel = int(np.argmax(sub))
    if rel == 0 or rel == sub.size - 1 or sub[rel] == 0.0:
        return exp  # no interior maximum: no echo detected
    i_peak = idx[rel]
    exp.found = True
    exp.peak_time = float(times[i_peak])
    exp.peak_amplitude = float(series[i_peak])
    exp.rel_timing_error = abs(exp.peak_time - pred.t3) / pred.t3
    cubic_scale = (abs(a1) + abs(a2)) ** 3
    exp.dominance_ratio = exp.peak_amplitude / cubic_scale if cubic_scale > 0 else np.inf
    return exp


# ----------------------------------------------------------------------------
# weighted kernel ratio and bound certificates
# ----------------------------------------------------------------------------

def c_ratio(params: WeightParams, k: int, l: int, t: float, s: float) -> float:
    """Echo amplification ratio (t-s) A_{k,kt}(lam(t)) / (A_{l,ls}(lam(s)) A_{k-l,kt-ls}(lam(s))).

    Evaluated in log space: the exponents reach thousands over certification
    sweeps while the ratio itself stays of order one or below.
    """
    if not 0 <= s <= t:
        raise ValueError("need 0 <= s <= t")
    if k == 0 or l == 0:
        raise ZeroModeError("the ratio is defined for k, l != 0")
    if s == t:
        return 0.0
    lam_t = float(radius(params, t))
    lam_s = float(radius(params, s))
    log_val = (np.log(t - s)
               + lam_t * bracket2(k, k * t)
               - lam_s * bracket2(l, l * s)
               - lam_s * bracket2(k - l, k * t - l * s)
               + params.sigma * (np.log(bracket(k * t))
                                 - np.log(bracket(l * s))
                                 - np.log(bracket(k * t - l * s))))
    return float(np.exp(log_val))


@dataclass(frozen=True)
class SweepSpec:
    """Ranges of the certification sweep: all integer k, l with 1 <= |.| <= k_max
    and a geometric time grid up to t_max."""

    k_max: int = 32
    t_max: float = 1e3
    t_points: int = 13
    t_min: float = 0.5

    def t_grid(self):
        return np.geomspace(self.t_min, self.t_max, self.t_points)

    def kl_pairs(self):
        # (k,l) -> (-k,-l) leaves every certified integrand invariant
        ks = np.arange(1, self.k_max + 1)
        ls = np.concatenate([np.arange(-self.k_max, 0), np.arange(1, self.k_max + 1)])
        return [(int(k), int(l)) for k in ks for l in ls]


@dataclass
class BoundCertificate:
    bound_id: str
    params: WeightParams
    sweep: SweepSpec
    sup: float
    argmax: tuple
    passed: bool
    case_sups: dict = dc_field(default_factory=dict)
    tolerance: float = 0.0


_CASES = ("early", "late_far", "late_resonant", "diagonal")


def _case_intervals(k, l, t, case):
    """Partition of [0, t] mirroring the proof's case split.

    early: s <= t/2.  The late half splits on the resonance |kt - ls| <= t/4,
    which for k != l is beaten by the exponential gain and for k = l by the
    Sobolev weight; late_far is the complement.
    """
    half = (0.0, 0.5 * t)
    if case == "early":
        return [half]
    res_lo = (k * t - 0.25 * t) / l
    res_hi = (k * t + 0.25 * t) / l
    if l < 0:
        res_lo, res_hi = res_hi, res_lo
    res_lo = max(res_lo, 0.5 * t)
    res_hi = min(res_hi, t)
    resonant = (res_lo, res_hi) if res_lo < res_hi else None
    if case == "late_far":
        out = []
        if resonant is None:
            return [(0.5 * t, t)]
        if resonant[0] > 0.5 * t:
            out.append((0.5 * t, resonant[0]))
        if resonant[1] < t:
            out.append((resonant[1], t))
        return out
    if case == "late_resonant":
        return [resonant] if (resonant and k != l) else []
    if case == "diagonal":
        return [resonant] if (resonant and k == l) else []
    raise ValueError(case)


def _feature_edges(a, b, features, base=16, finest=None):
    """Panel edges on [a, b]: a uniform backbone plus geometric clusters that
    shrink toward each feature point (integrand scale ~ finest there)."""
    if b <= a:
        return None
    length = b - a
    edges = set(np.linspace(a, b, base + 1))
    finest = finest if finest else length / base
    for p in features:
        if p < a - length or p > b + length:
            continue
        w = finest
        while w < 2.0 * length:
            for q in (p - w, p + w):
                if a < q < b:
                    edges.add(q)
            w *= 2.0
        if a < p < b:
            edges.add(p)
    return np.array(sorted(edges))


def _gl_integral(f, a, b, features=(), finest=None):
    edges = _feature_edges(a, b, features, finest=finest)
    if edges is None:
        return 0.0
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    s = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    w = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    return float(np.dot(w, f(s)))


def _cr1_integrand(params, k, l, t, scalar_brackets, exp_factor):
    th2, sig, dlt = params.theta2, params.sigma, params.delta

    def f(s):
        gain = np.exp(-exp_factor * th2 * np.abs(k * (t - s)) / bracket(t) ** dlt)
        if scalar_brackets:
            m = np.minimum(bracket(k * t - l * s), bracket(l * s))
        else:
            m = np.minimum(bracket2(l, l * s), bracket2(k - l, k * t - l * s))
        return (t - s) * gain * m ** (-sig)

    return f


def _adaptive_check(f, intervals, kink_points, tol=1e-8):
    """scipy adaptive re-integration of the scanned value; the refinement contract."""
    total = 0.0
    for a, b in intervals:
        pts = sorted({p for p in kink_points if a < p < b})
        val, err = quad(f, a, b, points=pts or None, epsabs=tol, epsrel=tol, limit=500)
        if not np.isfinite(val):
            raise QuadratureError("adaptive s-integral did not converge", worst=(a, b))
        total += val
    return total


def certify_bound(bound_id: str, params: WeightParams, sweep: SweepSpec | None = None,
                  refine_top: int = 16) -> BoundCertificate:
    """Empirical sup of one of the proof's kernel bounds over a finite sweep.

    bound_id:
      exp-bd    : the triple exponential product; must stay <= 1 when theta1 <= theta2
      CR1       : growth-factor integral with scalar Sobolev brackets
      CR1-riesz : |k|^2 times the integral with full phase-space brackets
      CR2       : <t>^(2 delta)-scaled sup of the pointwise resonance factor

    Integrals are scanned with vectorised panel quadrature over the whole sweep
    and the leading tuples re-integrated adaptively (tolerance 1e-8); a scan vs
    adaptive mismatch raises QuadratureError naming the worst tuple.
    """
    sweep = sweep or SweepSpec()
    if bound_id == "exp-bd":
        return _certify_exp_bd(params, sweep)
    if bound_id in ("CR1", "CR1-riesz"):
        return _certify_cr1(params, sweep, riesz=(bound_id == "CR1-riesz"),
                            refine_top=refine_top)
    if bound_id == "CR2":
        return _certify_cr2(params, sweep)
    raise ValueError(f"unknown bound id {bound_id!r}")


def _certify_exp_bd(params, sweep):
    th1, th2, dlt = params.theta1, params.theta2, params.delta
    ts = np.concatenate([[0.0], np.geomspace(1e-3, max(200.0, sweep.t_max), 600)])
    sup, arg = -np.inf, (0.0, 0.0)
    for t in ts:
        s = np.linspace(0.0, t, 1200) if t > 0 else np.array([0.0])
        expo = (th1 * bracket(t) ** (1 - dlt)
                - th2 * (t - s) / bracket(t) ** dlt
                - th1 * bracket(s) ** (1 - dlt))
        i = int(np.argmax(expo))
        if expo[i] > sup:
            sup, arg = float(expo[i]), (float(t), float(s[i]))
    sup = float(np.exp(sup))
    return BoundCertificate(bound_id="exp-bd", params=params, sweep=sweep,
                            sup=sup, argmax=arg, passed=sup <= 1.0 + 1e-9,
                            tolerance=1e-9)


def _sharp_points(k, l, t):
    """s-locations where the integrand varies on the fine 1/|l| scale:
    the resonance kt = l s, the Sobolev peak at s = 0, and the gain-free end s = t."""
    pts = [0.0, t]
    s_res = k * t / l
    if -t <= s_res <= 2 * t:
        pts.append(s_res)
    return pts


def _certify_cr1(params, sweep, riesz, refine_top):
    exp_factor = 0.5 if riesz else 1.0
    records = []  # (value, (k,l,t), per-case dict)
    for (k, l) in sweep.kl_pairs():
        for t in sweep.t_grid():
            f = _cr1_integrand(params, k, l, t, scalar_brackets=not riesz,
                               exp_factor=exp_factor)
            feats = _sharp_points(k, l, t)
            fine = 1.0 / (16.0 * abs(l))
            per_case = {}
            for case in _CASES:
                v = sum(_gl_integral(f, a, b, features=feats, finest=fine)
                        for a, b in _case_intervals(k, l, t, case))
                per_case[case] = v
            total = sum(per_case.values())
            if riesz:
                total *= k * k
                per_case = {c: v * k * k for c, v in per_case.items()}
            records.append((total, (k, l, float(t)), per_case))

    records.sort(key=lambda r: -r[0])
    case_sups = {c: max(r[2][c] for r in records) for c in _CASES}

    # adaptive (tolerance 1e-8) refinement of the scan leaders; the reported
    # sup is the refined value
    best_val, best_arg = -np.inf, records[0][1]
    for val, (k, l, t), _ in records[:refine_top]:
        f = _cr1_integrand(params, k, l, t, scalar_brackets=not riesz,
                           exp_factor=exp_factor)
        kinks = [k * t / (2.0 * l), k * t / l, (k * t - 0.25 * t) / l,
                 (k * t + 0.25 * t) / l, 0.5 * t]
        if riesz:
            kinks += _riesz_switch(k, l, t)
        ref = _adaptive_check(f, [(0.0, t)], kinks)
        if riesz:
            ref *= k * k
        if abs(ref - val) > 1e-4 * (1.0 + abs(ref)):
            raise QuadratureError("sweep scan disagrees with adaptive quadrature",
                                  worst=(k, l, t))
        if ref > best_val:
            best_val, best_arg = ref, (k, l, t)
    bound_id = "CR1-riesz" if riesz else "CR1"
    return BoundCertificate(bound_id=bound_id, params=params, sweep=sweep,
                            sup=float(best_val), argmax=best_arg,
                            passed=bool(np.isfinite(best_val)), case_sups=case_sups,
                            tolerance=1e-8)


def _riesz_switch(k, l, t):
    # <l, ls> = <k-l, kt-ls> reduces to (2ls - kt) kt = (k-l)^2 - l^2
    if k * t == 0:
        return []
    s = (((k - l) ** 2 - l ** 2) / (k * t) + k * t) / (2.0 * l)
    return [s] if 0 < s < t else []


def _certify_cr2(params, sweep):
    # the diagonal k = l has no resonance decay at s = t (the min bracket is
    # <0, k(t-s)> -> 1) and is controlled by the Sobolev weight instead; the
    # scaled-sup claim applies off the diagonal
    th2, sig, dlt = params.theta2, params.sigma, params.delta
    sup, arg = -np.inf, None
    for (k, l) in sweep.kl_pairs():
        if k == l:
            continue
        for t in sweep.t_grid():

            def vals_at(s):
                return (np.exp(-0.25 * th2 * np.abs(k * (t - s)) / bracket(t) ** dlt)
                        * np.minimum(bracket2(l, l * s),
                                     bracket2(k - l, k * t - l * s)) ** (-sig))

            # candidate grid: uniform backbone plus clusters at the sharp spots
            s = _feature_edges(0.0, t, _sharp_points(k, l, t), base=512,
                               finest=1.0 / (16.0 * abs(l)))
            vals = vals_at(s)
            i = int(np.argmax(vals))
            lo = s[max(i - 1, 0)]
            hi = s[min(i + 1, s.size - 1)]
            s2 = np.linspace(lo, hi, 301)
            vals2 = vals_at(s2)
            v = float(np.max(vals2)) * bracket(t) ** (2 * dlt)
            if v > sup:
                sup, arg = v, (k, l, float(t), float(s2[int(np.argmax(vals2))]))
    return BoundCertificate(bound_id="CR2", params=params, sweep=sweep, sup=float(sup),
                            argmax=arg, passed=bool(np.isfinite(sup)))
