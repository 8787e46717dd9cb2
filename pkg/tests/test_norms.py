import numpy as np
import pytest

from landaulab import WeightParams, f_norm, gen_norm, radius, weight
from landaulab.dynamics import FieldHistory, SpectralState
from landaulab.errors import MissingSampleError, WeightOverflowError
from landaulab.norms import (GeneratorSample, bracket, check_gronwall,
                             f_norm_from_modes, radius_derivative)

P0 = WeightParams(sigma=0.0, lambda0=0.3, delta=0.3, theta1=0.1, theta2=0.15)
P1 = WeightParams(sigma=1.0, lambda0=0.3, delta=0.3, theta1=0.1, theta2=0.15)


def make_state(k_max, j_max, d_eta, fill=None):
    coeffs = np.zeros((2 * k_max + 1, 2 * j_max + 1), dtype=complex)
    if fill is not None:
        coeffs[:] = fill
    return SpectralState(k_max, j_max, d_eta, 0, coeffs)


# ----------------------------------------------------------------------------
# weights
# ----------------------------------------------------------------------------

def test_weight_identity_case():
    assert weight(P0, 0.0, 0, 0.0) == 1.0


def test_weight_closed_form_value():
    # exp(0.5 sqrt(3)) sqrt(2), evaluated directly
    want = np.exp(0.5 * np.sqrt(3.0)) * np.sqrt(2.0)
    assert want == pytest.approx(3.3622117, abs=1e-6)
    assert weight(P1, 0.5, 1, 1.0) == pytest.approx(want, rel=1e-15)


def test_weight_product_example_tuple():
    z = 0.7
    lhs = weight(P1, z, 2, 3.0)
    rhs = weight(P1, z, 1, 1.0) * weight(P1, z, 1, 2.0)
    assert lhs <= rhs


def test_weight_product_exact_at_sigma_zero(rng):
    # submultiplicativity A_{k,eta} <= A_{k',eta'} A_{k-k',eta-eta'} is exact
    # for pure-exponential weights (triangle inequality of the bracket)
    for _ in range(4):
        z = rng.uniform(0.0, 2.0)
        k = rng.integers(-40, 41, size=2500)
        kp = rng.integers(-40, 41, size=2500)
        eta = rng.uniform(-50, 50, size=2500)
        etap = rng.uniform(-50, 50, size=2500)
        lhs = weight(P0, z, k, eta)
        rhs = weight(P0, z, kp, etap) * weight(P0, z, k - kp, eta - etap)
        assert np.all(lhs <= rhs * (1 + 1e-13))


def test_weight_product_needs_constant_for_sobolev_part(rng):
    # the Sobolev factor is only submultiplicative up to 2^(sigma/2): parallel
    # large modes with small split frequencies violate the bare inequality...
    z, sig = 0.7, 1.0
    params = WeightParams(sigma=sig, lambda0=0.3, delta=0.3, theta1=0.1, theta2=0.15)
    lhs = weight(params, z, 20, np.sqrt(2.0))
    rhs = weight(params, z, 10, np.sqrt(0.5)) * weight(params, z, 10, np.sqrt(0.5))
    assert lhs > rhs
    # ...and with the constant the inequality holds over the whole sweep
    for _ in range(4):
        k = rng.integers(-40, 41, size=2500)
        kp = rng.integers(-40, 41, size=2500)
        eta = rng.uniform(-50, 50, size=2500)
        etap = rng.uniform(-50, 50, size=2500)
        lhs = weight(params, z, k, eta)
        rhs = weight(params, z, kp, etap) * weight(params, z, k - kp, eta - etap)
        assert np.all(lhs <= 2 ** (0.5 * sig) * rhs * (1 + 1e-13))


def test_weight_monotonicity(rng):
    zs = np.linspace(0, 1.5, 7)
    ks = np.arange(0, 9)
    etas = np.linspace(0, 12, 13)
    vals_z = np.array([weight(P1, z, 3, 2.0) for z in zs])
    assert np.all(np.diff(vals_z) > 0)
    vals_k = weight(P1, 0.4, ks, 2.0)
    assert np.all(np.diff(vals_k) > 0)
    vals_e = weight(P1, 0.4, 3, etas)
    assert np.all(np.diff(vals_e) > 0)


# ----------------------------------------------------------------------------
# radius
# ----------------------------------------------------------------------------

def test_radius_at_zero():
    assert radius(WeightParams(lambda0=1.0, delta=0.1), 0.0) == 2.0


def test_radius_limit():
    p = WeightParams(lambda0=1.0, delta=0.1)
    assert radius(p, 1e300) == pytest.approx(1.0, abs=1e-12)


def test_radius_direct_value():
    # 0.5 (1 + 4^{-0.2}), evaluated directly
    p = WeightParams(lambda0=0.5, delta=0.2)
    want = 0.5 * (1.0 + 4.0 ** -0.2)
    assert want == pytest.approx(0.8789291416280, abs=1e-12)
    assert radius(p, 3.0) == pytest.approx(want, rel=1e-15)


def test_radius_decreasing_and_derivative():
    p = WeightParams(lambda0=0.7, delta=0.25)
    ts = np.linspace(0, 50, 200)
    vals = radius(p, ts)
    assert np.all(np.diff(vals) < 0)
    h = 1e-6
    fd = (radius(p, 10 + h) - radius(p, 10 - h)) / (2 * h)
    assert radius_derivative(p, 10.0) == pytest.approx(fd, rel=1e-8)


def test_params_validation():
    with pytest.raises(ValueError):
        WeightParams(delta=0.6)
    with pytest.raises(ValueError):
        WeightParams(lambda0=0.0)
    with pytest.raises(ValueError):
        WeightParams(theta1=0.2, theta2=0.1)
    with pytest.raises(ValueError):
        WeightParams(sigma=-1.0)


# ----------------------------------------------------------------------------
# generator norm
# ----------------------------------------------------------------------------

def test_gen_norm_zero_state():
    state = make_state(2, 50, 0.1)
    assert gen_norm(state, P0, 0.0).value == 0.0


def gaussian_pair_state(d_eta, j_max=None):
    # g_{+-1, eta} = exp(-eta^2), all other modes zero
    if j_max is None:
        j_max = int(np.ceil(8.0 / d_eta))
    state = make_state(1, j_max, d_eta)
    etas = state.eta_values
    state.coefficients[0, :] = np.exp(-etas ** 2)
    state.coefficients[2, :] = np.exp(-etas ** 2)
    return state


def test_gen_norm_gaussian_closed_form():
    # continuum value: 2 int e^{-eta^2} + 2 int |2 eta| e^{-eta^2} = 2 sqrt(pi) + 4
    want = 2.0 * np.sqrt(np.pi) + 4.0
    got = gen_norm(gaussian_pair_state(0.02), P0, 0.0, max_alpha=1)
    assert got.value == pytest.approx(want, abs=5e-3)
    coarse = gen_norm(gaussian_pair_state(0.08), P0, 0.0, max_alpha=1)
    # second-order convergence in the grid spacing
    err_f, err_c = abs(got.value - want), abs(coarse.value - want)
    assert err_f < err_c / 8.0


def test_gen_norm_alpha0_only():
    got = gen_norm(gaussian_pair_state(0.02), P0, 0.0, max_alpha=0)
    assert got.value == pytest.approx(2.0 * np.sqrt(np.pi), abs=1e-4)
    assert len(got.breakdown) == 1


def test_gen_norm_breakdown_sums():
    s = gen_norm(gaussian_pair_state(0.05), P1, 0.3, max_alpha=1)
    assert s.value == pytest.approx(sum(s.breakdown), rel=1e-12)
    assert all(b >= 0 for b in s.breakdown)


def test_gen_norm_overflow_error():
    state = gaussian_pair_state(0.05, j_max=4000)  # eta reaches 200
    with pytest.raises(WeightOverflowError):
        gen_norm(state, P1, 4.0)


def test_generator_sample_invariant():
    with pytest.raises(ValueError):
        GeneratorSample(time=0.0, z=0.0, value=1.0, breakdown=[0.2, 0.2])


def test_gen_norm_reduction_order_independence():
    # reversing the mode summation order must agree to 1e-12 relative
    state = gaussian_pair_state(0.05)
    a = gen_norm(state, P1, 0.2).value
    flipped = SpectralState(state.k_max, state.j_max, state.delta_eta, 0,
                            state.coefficients[::-1, ::-1].copy())
    b = gen_norm(flipped, P1, 0.2).value
    assert abs(a - b) <= 1e-12 * abs(a)


# ----------------------------------------------------------------------------
# product and derivative inequalities for the discrete Gen
# ----------------------------------------------------------------------------

def discrete_convolution(f, g, d_eta):
    kf = f.shape[0] // 2
    kg = g.shape[0] // 2
    jf = f.shape[1] // 2
    out = np.zeros_like(f)
    for dk in range(-kg, kg + 1):
        for dj in range(-f.shape[1] // 8, f.shape[1] // 8 + 1):
            src_k = slice(max(0, -dk), f.shape[0] - max(0, dk))
            dst_k = slice(max(0, dk), f.shape[0] - max(0, -dk))
            src_j = slice(max(0, -dj), f.shape[1] - max(0, dj))
            dst_j = slice(max(0, dj), f.shape[1] - max(0, -dj))
            out[dst_k, dst_j] += g[kg + dk, jf + dj] * f[src_k, src_j] * d_eta
    return out


def test_gen_product_inequality(rng):
    # Gen[f g] <= Gen[f] Gen[g] at sigma = 0 for states supported away from the
    # grid edges (discrete (k, eta) convolution scaled by d_eta)
    d_eta = 0.25
    for _ in range(6):
        f = make_state(4, 40, d_eta)
        g = make_state(4, 40, d_eta)
        inner = (slice(2, 7), slice(30, 51))
        f.coefficients[inner] = rng.normal(size=(5, 21)) + 1j * rng.normal(size=(5, 21))
        g.coefficients[inner] = rng.normal(size=(5, 21)) + 1j * rng.normal(size=(5, 21))
        prod = make_state(4, 40, d_eta)
        prod.coefficients = discrete_convolution(f.coefficients, g.coefficients, d_eta)
        lhs = gen_norm(prod, P0, 0.4, max_alpha=0).value
        rhs = gen_norm(f, P0, 0.4, max_alpha=0).value * \
            gen_norm(g, P0, 0.4, max_alpha=0).value
        assert lhs <= rhs * (1 + 1e-12)


def test_gen_derivative_inequality():
    # Gen[dx g](z) <= dz Gen[g](z) with dx realised as multiplication by ik
    d_eta = 0.02
    state = make_state(3, int(8 / d_eta), d_eta)
    etas = state.eta_values
    for idx, k in enumerate(state.k_values):
        state.coefficients[idx, :] = np.exp(-etas ** 2) / (1.0 + k * k)
    dx_state = make_state(3, int(8 / d_eta), d_eta)
    dx_state.coefficients = 1j * state.k_values[:, None] * state.coefficients
    z, h = 0.4, 1e-4
    lhs = gen_norm(dx_state, P1, z).value
    dz = (gen_norm(state, P1, z + h).value - gen_norm(state, P1, z - h).value) / (2 * h)
    assert lhs <= dz * (1 + 1e-6)


# ----------------------------------------------------------------------------
# field norm
# ----------------------------------------------------------------------------

def make_history(times, modes, e_hat):
    e_hat = np.asarray(e_hat, dtype=complex)
    rho = np.zeros_like(e_hat)
    return FieldHistory(times=np.asarray(times, float), modes=np.asarray(modes),
                        e_hat=e_hat, rho_hat=rho,
                        sup_e=np.sum(np.abs(e_hat), axis=1))


def test_f_norm_zero_field():
    hist = make_history([0.0, 2.0], [-1, 0, 1], np.zeros((2, 3)))
    assert f_norm(hist, P0, 2.0, 0.0) == 0.0


def test_f_norm_two_conjugate_modes():
    eps = 3e-4
    hist = make_history([0.0, 2.0], [-1, 0, 1],
                        [[0, 0, 0], [eps, 0, eps]])
    assert f_norm(hist, P0, 2.0, 0.0) == pytest.approx(2 * eps, rel=1e-15)
    # sigma = 1 adds <kt> = <2> = sqrt(5) per mode
    want = 2 * eps * np.sqrt(5.0)
    assert want == pytest.approx(1.3416407865e-3, rel=1e-9)
    assert f_norm(hist, P1, 2.0, 0.0) == pytest.approx(want, rel=1e-15)


def test_f_norm_missing_sample():
    hist = make_history([0.0, 2.0], [-1, 0, 1], np.zeros((2, 3)))
    with pytest.raises(MissingSampleError):
        f_norm(hist, P0, 1.0, 0.0)


def test_f_norm_zero_mode_excluded():
    hist = make_history([0.0], [-1, 0, 1], [[0.0, 5.0, 0.0]])
    assert f_norm(hist, P1, 0.0, 0.3) == 0.0


# ----------------------------------------------------------------------------
# transport-inequality residuals
# ----------------------------------------------------------------------------

def test_gronwall_zero_field_run():
    times = np.linspace(0, 10, 21)
    zs = np.linspace(0.3, 0.6, 5)
    gen = np.ones((21, 5)) * 1.7  # constant in time: free flow
    fld = np.zeros((21, 5))
    resid = check_gronwall(times, zs, gen, fld, c0=1.0)
    assert np.all(resid <= 1e-12)


def test_gronwall_synthetic_violation():
    times = np.linspace(0, 5, 26)
    zs = np.linspace(0.3, 0.6, 5)
    gen = np.exp(times)[:, None] * np.ones((1, 5))
    fld = np.zeros((26, 5))
    resid = check_gronwall(times, zs, gen, fld, c0=1.0)
    assert np.max(resid) > 1.0


def test_gronwall_grid_too_coarse():
    with pytest.raises(ValueError):
        check_gronwall([0, 1], [0.3, 0.4, 0.5], np.ones((2, 3)), np.zeros((2, 3)), 1.0)


def test_f_norm_reduction_order(rng):
    ks = np.arange(-6, 7)
    e = rng.normal(size=13) + 1j * rng.normal(size=13)
    a = f_norm_from_modes(ks, e, P1, 1.5, 0.3)
    b = f_norm_from_modes(ks[::-1], e[::-1], P1, 1.5, 0.3)
    assert abs(a - b) <= 1e-12 * abs(a)


def test_bracket_helper():
    assert bracket(0.0) == 1.0
    assert bracket(2.0) == pytest.approx(np.sqrt(5.0), rel=1e-15)
