"""Acceptance suite: one test per shipped criterion, each printing a verdict line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion lines.
"""
import time

import numpy as np

from landaulab import (WeightParams, certify_bound, find_roots, gaussian,
                       gen_norm, green_kernel, newton_root, penrose_verdict,
                       run_echo, two_stream, volterra_kernel, weight)
from landaulab.dynamics import (CosineData, InitialData, SimulationConfig,
                                fixed_point_field_solve, simulate)
from landaulab.echoes import SweepSpec

GAUSS = gaussian()

# analyticity radius and shrink parameters used by the damping certificates;
# 2*lambda0 = 0.6 stays below the stored transform decay rate theta0 = 1 and
# below the k=1 damping rate, so the weighted norms track the true decay
CERT_WEIGHTS = WeightParams(sigma=1.0, lambda0=0.3, delta=0.3,
                            theta1=0.1, theta2=0.15)


def report(num, name, ok, detail):
    print(f"\nACCEPTANCE {num} {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"criterion {num} failed: {detail}"


# ----------------------------------------------------------------------------
# 1. exact phase mixing
# ----------------------------------------------------------------------------

def test_criterion_1_exact_phase_mixing():
    t0 = time.perf_counter()
    data = InitialData(cosine=CosineData(k=1, amplitude=1e-3, width=1.0))
    cfg = SimulationConfig(profile=GAUSS, data=data, alpha=2.0, k_max=4,
                           t_final=20.0, dt=0.05, mu_coupling=False,
                           quadratic_coupling=False)
    out = simulate(cfg)
    t = out.field.times
    err = np.max(np.abs(out.field.density_series(1) - 0.5e-3 * np.exp(-0.5 * t ** 2)))
    elapsed = time.perf_counter() - t0
    report(1, "exact phase mixing", err <= 1e-12 and elapsed < 1.0,
           f"max |rho1 - closed form| = {err:.2e}, {elapsed:.2f}s")


# ----------------------------------------------------------------------------
# 2. Landau root golden value
# ----------------------------------------------------------------------------

def test_criterion_2_landau_root_golden_value():
    t0 = time.perf_counter()
    golden = -0.1533 + 1.4156j
    newton = newton_root(GAUSS, 2.0, 0.5, -0.3 + 1.2j)       # quadrature+Newton path
    boxed = find_roots(GAUSS, 2.0, 0.5, (-0.5, 0.3), (0.5, 2.5))  # argument-principle path
    elapsed = time.perf_counter() - t0
    ok = (len(boxed) == 1
          and abs(boxed[0].lam - newton.lam) < 1e-3
          and abs(newton.lam - golden) < 1e-3
          and abs(boxed[0].lam - golden) < 1e-3
          and elapsed < 1.0)
    report(2, "Landau root golden value", ok,
           f"newton {newton.lam:.6f}, argument principle {boxed[0].lam:.6f}, {elapsed:.2f}s")


# ----------------------------------------------------------------------------
# 3. Green-kernel decay
# ----------------------------------------------------------------------------

def test_criterion_3_green_kernel_decay():
    t0 = time.perf_counter()
    details = []
    ok = True
    horizons = {1: 16.0, 2: 9.0, 3: 6.0}
    for k in (1, 2, 3):
        times = np.arange(0, int(round(horizons[k] / 0.01)) + 1) * 0.01
        kern = green_kernel(GAUSS, 2.0, k, times)
        rate = kern.decay_rate
        box_re = (-1.6 * rate, -0.4 * rate)
        box_im = (0.3, 2.0 * k + 2.5)
        roots = find_roots(GAUSS, 2.0, k, box_re, box_im)
        k_scale = np.max(np.abs(volterra_kernel(GAUSS, 2.0, k, times)))
        rel = abs(rate - abs(roots[0].lam.real)) / abs(roots[0].lam.real)
        ok &= len(roots) == 1 and rel <= 0.05 and kern.residual < 1e-8 * k_scale
        details.append(f"k={k}: rate {rate:.3f} vs |Re lam| {abs(roots[0].lam.real):.3f} "
                       f"({100 * rel:.1f}%), resid {kern.residual:.1e}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 10.0
    report(3, "Green-kernel decay", ok, "; ".join(details) + f", {elapsed:.1f}s")


# ----------------------------------------------------------------------------
# 4. Penrose verdicts and the unstable growth rate
# ----------------------------------------------------------------------------

def test_criterion_4_penrose_verdicts():
    t0 = time.perf_counter()
    stable_ok = True
    for alpha in (0.0, 1.0, 2.0):
        verdict = penrose_verdict(GAUSS, alpha, list(range(1, 9)))
        stable_ok &= verdict.stable

    # drifting streams at v0 = 3 on a torus of length 10 pi: integer modes
    # probe k = 0.2 n; the verdict finds the first unstable one
    streams = two_stream(3.0)
    verdict = penrose_verdict(streams, 2.0, [0.2 * n for n in range(1, 9)])
    unstable_ok = (not verdict.stable) and verdict.root.lam.real > 0
    gamma = verdict.root.lam.real

    # the same physics rescaled to the unit torus: streams at +-0.6, width 0.2
    data = InitialData(cosine=CosineData(k=1, amplitude=1e-6, width=0.2))
    cfg = SimulationConfig(profile=two_stream(0.6, width=0.2), data=data,
                           alpha=2.0, k_max=8, t_final=35.0, dt=0.05)
    out = simulate(cfg)
    e1 = np.abs(out.field.mode_series(1))
    t = out.field.times
    window = (e1 >= 1e-6) & (e1 <= 1e-3) & (t > 5.0)
    slope = np.polyfit(t[window], np.log(e1[window]), 1)[0]
    rate_ok = abs(slope - gamma) / gamma <= 0.05
    elapsed = time.perf_counter() - t0
    report(4, "Penrose verdicts", stable_ok and unstable_ok and rate_ok and elapsed < 60.0,
           f"gaussian stable at alpha 0/1/2; streams unstable k={verdict.unstable_k:g} "
           f"gamma={gamma:.4f}, measured {slope:.4f}, {elapsed:.0f}s")


# ----------------------------------------------------------------------------
# 5. echo reproduction
# ----------------------------------------------------------------------------

def test_criterion_5_echo_reproduction():
    t0 = time.perf_counter()
    base = run_echo(GAUSS, [(-4, -4.0, 1e-3), (5, 15.0, 1e-3)], alpha=2.0,
                    k_max=8, t_final=20.0, dt=0.05)
    up1 = run_echo(GAUSS, [(-4, -4.0, 2e-3), (5, 15.0, 1e-3)], alpha=2.0,
                   k_max=8, t_final=20.0, dt=0.05)
    up2 = run_echo(GAUSS, [(-4, -4.0, 1e-3), (5, 15.0, 2e-3)], alpha=2.0,
                   k_max=8, t_final=20.0, dt=0.05)
    r1 = up1.peak_amplitude / base.peak_amplitude
    r2 = up2.peak_amplitude / base.peak_amplitude
    elapsed = time.perf_counter() - t0
    ok = (base.found and base.rel_timing_error <= 0.05
          and abs(r1 / 2.0 - 1.0) <= 0.05 and abs(r2 / 2.0 - 1.0) <= 0.05
          and elapsed < 120.0)
    report(5, "echo reproduction", ok,
           f"peak at t={base.peak_time:g} (t3=11, err {100 * base.rel_timing_error:.1f}%), "
           f"pulse-amplitude ratios {r1:.3f}/{r2:.3f}, {elapsed:.0f}s")


# ----------------------------------------------------------------------------
# 6/7. nonlinear damping certificate at alpha = 2, 1, 0
# ----------------------------------------------------------------------------

def damping_certificate(alpha):
    """Run the smallness-certified damping experiment; returns check results."""
    # amplitude chosen so the weighted datum norm Gen[f0](2 lambda0) <= 1e-3
    data = InitialData(cosine=CosineData(k=1, amplitude=4e-5, width=1.0))
    cfg = SimulationConfig(profile=GAUSS, data=data, alpha=alpha, k_max=8,
                           t_final=50.0, dt=0.05, weights=CERT_WEIGHTS,
                           checkpoint_every=20)
    out = simulate(cfg)
    gamma1 = abs(newton_root(GAUSS, alpha, 1.0, -0.8 + 2.0j).lam.real)

    weighted = np.exp(0.9 * gamma1 * out.field.times) * out.field.sup_e
    sup_weighted = float(np.max(weighted))
    finite_ok = np.isfinite(sup_weighted) and sup_weighted <= 3.0 * out.field.sup_e[0]

    f_vals = out.field.f_values
    cum = np.concatenate([[0.0], np.cumsum(
        0.5 * (f_vals[1:] + f_vals[:-1]) * np.diff(out.field.times))])
    gen0 = out.gen_samples[0].value
    budget_ok = all(
        s.value <= gen0 + out.c0 * cum[out.field.index_of(s.time)]
        + 1e-3 * gen0
        for s in out.gen_samples)

    cond_ok = bool(np.all(out.field.cond_lambda <= 1e-12))
    return out, sup_weighted, finite_ok, budget_ok, cond_ok


def test_criterion_6_nonlinear_damping_certificate():
    t0 = time.perf_counter()
    out, sup_w, finite_ok, budget_ok, cond_ok = damping_certificate(2.0)
    eps_ok = out.epsilon0 <= 1e-3
    elapsed = time.perf_counter() - t0
    ok = eps_ok and finite_ok and budget_ok and cond_ok and elapsed < 600.0
    report(6, "nonlinear damping certificate", ok,
           f"eps0={out.epsilon0:.2e}, weighted sup {sup_w:.2e}, "
           f"generator budget {'ok' if budget_ok else 'violated'}, "
           f"radius condition {'ok' if cond_ok else 'violated'}, {elapsed:.0f}s")


def test_criterion_7_riesz_sweep():
    t0 = time.perf_counter()
    details = []
    ok = True
    for alpha in (0.0, 1.0):
        out, sup_w, finite_ok, budget_ok, cond_ok = damping_certificate(alpha)
        clean = np.all(np.isfinite(out.final_state.coefficients))  # blow-up monitor
        ok &= out.epsilon0 <= 1e-3 and finite_ok and budget_ok and cond_ok and bool(clean)
        details.append(f"alpha={alpha:g}: sup {sup_w:.2e}, monitor clean={bool(clean)}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 1200.0
    report(7, "Riesz sweep", ok, "; ".join(details) + f", {elapsed:.0f}s")


# ----------------------------------------------------------------------------
# 8. formulation equivalence
# ----------------------------------------------------------------------------

def test_criterion_8_formulation_equivalence():
    t0 = time.perf_counter()
    data = InitialData(cosine=CosineData(k=1, amplitude=1e-3, width=1.0))
    cfg = SimulationConfig(profile=GAUSS, data=data, alpha=2.0, k_max=2,
                           t_final=8.0, dt=0.01, scheme="rk4", keep_history=True)
    out = simulate(cfg)
    res = fixed_point_field_solve(cfg, history=out.history)
    diff = float(np.max(np.abs(res.field.e_hat - out.field.e_hat)))
    scale = float(np.max(np.abs(out.field.e_hat)))
    rel = diff / scale
    elapsed = time.perf_counter() - t0
    ok = res.converged and rel <= 1e-5 and elapsed < 900.0
    report(8, "formulation equivalence", ok,
           f"relative sup difference {rel:.2e} in {res.iterations} Picard iterations, "
           f"{elapsed:.0f}s")


# ----------------------------------------------------------------------------
# 9. bound certificates
# ----------------------------------------------------------------------------

def test_criterion_9_bound_certificates():
    t0 = time.perf_counter()
    params = WeightParams(sigma=3.0, lambda0=0.3, delta=0.3, theta1=0.1, theta2=0.1)
    sweep = SweepSpec(k_max=32, t_max=1e3, t_points=13)

    exp_bd = certify_bound("exp-bd", params)
    cr1 = certify_bound("CR1", params, sweep)
    riesz = certify_bound("CR1-riesz", params, sweep)
    cr2 = certify_bound("CR2", params, sweep)

    # uniform boundedness of |k|^2 * integral: the certified chain
    # (moment integral) x (scaled resonance sup) is k-independent
    chain = (16.0 / params.theta2 ** 2) * cr2.sup + 1.0
    uniform_ok = (np.isfinite(riesz.sup) and riesz.sup <= chain
                  and riesz.case_sups["diagonal"] <= 1.0 + 1e-6)

    elapsed = time.perf_counter() - t0
    ok = (exp_bd.passed and exp_bd.sup <= 1.0 + 1e-9
          and cr1.passed and np.isfinite(cr1.sup)
          and riesz.passed and uniform_ok and elapsed < 300.0)
    report(9, "bound certificates", ok,
           f"exp-bd sup={exp_bd.sup:.12f}, CR1 sup={cr1.sup:.2f}, "
           f"|k|^2-integral sup={riesz.sup:.2f} <= chain {chain:.0f}, {elapsed:.0f}s")


# ----------------------------------------------------------------------------
# 10. property suites
# ----------------------------------------------------------------------------

def test_criterion_10_property_suites(rng):
    t0 = time.perf_counter()
    checks = {}

    # weight algebra (exact at sigma = 0, 1e4 tuples)
    p0 = WeightParams(sigma=0.0, lambda0=0.3, delta=0.3)
    k = rng.integers(-40, 41, size=10000)
    kp = rng.integers(-40, 41, size=10000)
    eta = rng.uniform(-50, 50, size=10000)
    etap = rng.uniform(-50, 50, size=10000)
    lhs = weight(p0, 0.7, k, eta)
    rhs = weight(p0, 0.7, kp, etap) * weight(p0, 0.7, k - kp, eta - etap)
    checks["weight algebra"] = bool(np.all(lhs <= rhs * (1 + 1e-13)))

    # generator product inequality on random finitely supported states
    from test_norms import P0, discrete_convolution, make_state
    good = True
    for _ in range(4):
        f = make_state(4, 40, 0.25)
        g = make_state(4, 40, 0.25)
        inner = (slice(2, 7), slice(30, 51))
        f.coefficients[inner] = rng.normal(size=(5, 21)) + 1j * rng.normal(size=(5, 21))
        g.coefficients[inner] = rng.normal(size=(5, 21)) + 1j * rng.normal(size=(5, 21))
        prod = make_state(4, 40, 0.25)
        prod.coefficients = discrete_convolution(f.coefficients, g.coefficients, 0.25)
        lhs_v = gen_norm(prod, P0, 0.4, max_alpha=0).value
        rhs_v = gen_norm(f, P0, 0.4, max_alpha=0).value * \
            gen_norm(g, P0, 0.4, max_alpha=0).value
        good &= lhs_v <= rhs_v * (1 + 1e-12)
    checks["generator product"] = bool(good)

    # generator derivative inequality
    from test_norms import P1
    d_eta = 0.02
    state = make_state(3, int(8 / d_eta), d_eta)
    etas = state.eta_values
    for idx, kk in enumerate(state.k_values):
        state.coefficients[idx, :] = np.exp(-etas ** 2) / (1.0 + kk * kk)
    dx_state = make_state(3, int(8 / d_eta), d_eta)
    dx_state.coefficients = 1j * state.k_values[:, None] * state.coefficients
    z, h = 0.4, 1e-4
    dz = (gen_norm(state, P1, z + h).value - gen_norm(state, P1, z - h).value) / (2 * h)
    checks["generator derivative"] = gen_norm(dx_state, P1, z).value <= dz * (1 + 1e-6)

    # reality and zero-mode conservation over a thousand nonlinear steps
    data = InitialData(cosine=CosineData(k=1, amplitude=1e-3, width=1.0))
    cfg = SimulationConfig(profile=GAUSS, data=data, alpha=2.0, k_max=2,
                           t_final=10.0, dt=0.01)
    out = simulate(cfg)
    checks["reality"] = out.final_state.hermitian_defect() < 1e-10
    checks["zero mode"] = abs(out.final_state.coefficient(0, 0)) < 1e-14

    # third-order refinement of the time stepper
    from test_dynamics import terminal_error
    factor = terminal_error(0.1, 0.0125) / terminal_error(0.05, 0.0125)
    checks["AB3 refinement"] = 6.0 <= factor <= 10.0

    # quadratic-remainder scaling of the nonlinear term
    from test_dynamics import small_config
    def residual(amp):
        d = InitialData(cosine=CosineData(k=1, amplitude=amp, width=1.0))
        e_n = simulate(small_config(data=d, t_final=8.0)).field.e_hat
        e_l = simulate(small_config(data=d, t_final=8.0,
                                    quadratic_coupling=False)).field.e_hat
        return float(np.max(np.abs(e_n - e_l)))
    ratio = residual(1e-4) / residual(5e-5)
    checks["quadratic remainder"] = 3.0 <= ratio <= 5.0

    elapsed = time.perf_counter() - t0
    ok = all(checks.values())
    report(10, "property suites", ok,
           ", ".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in checks.items())
           + f"; AB3 factor {factor:.1f}, remainder ratio {ratio:.1f}, {elapsed:.0f}s")
