import numpy as np
import pytest
from scipy.integrate import quad

from landaulab import EquilibriumProfile, gaussian, grad_mu_hat, mu_hat, two_stream
from landaulab.equilibria import (CUSTOM, grad_mu_value, laplace_abscissa,
                                  mu_value)
from landaulab.errors import ProfileRangeError


def transform_oracle(profile, eta):
    """High-precision quadrature of int mu(v) exp(-i eta v) dv."""
    lim = 9.0 * profile.width + abs(profile.v0) + 2.0
    re, _ = quad(lambda v: mu_value(profile, v) * np.cos(eta * v), -lim, lim,
                 epsabs=1e-14, epsrel=1e-13, limit=400)
    im, _ = quad(lambda v: -mu_value(profile, v) * np.sin(eta * v), -lim, lim,
                 epsabs=1e-14, epsrel=1e-13, limit=400)
    return re + 1j * im


def grad_transform_oracle(profile, eta):
    """Quadrature of int dv_mu(v) exp(-i eta v) dv."""
    lim = 9.0 * profile.width + abs(profile.v0) + 2.0
    re, _ = quad(lambda v: grad_mu_value(profile, v) * np.cos(eta * v), -lim, lim,
                 epsabs=1e-14, epsrel=1e-13, limit=400)
    im, _ = quad(lambda v: -grad_mu_value(profile, v) * np.sin(eta * v), -lim, lim,
                 epsabs=1e-14, epsrel=1e-13, limit=400)
    return re + 1j * im


def test_gaussian_normalisation(gauss):
    assert mu_hat(gauss, 0.0) == 1.0


def test_gaussian_unit_frequency(gauss):
    assert mu_hat(gauss, 1.0) == pytest.approx(np.exp(-0.5), abs=1e-15)


def test_two_stream_against_quadrature(streams):
    # frozen from the quadrature oracle; cos(2) e^{-1/2} in closed form
    want = transform_oracle(streams, 1.0)
    assert want.real == pytest.approx(-0.2524058153083, abs=1e-12)
    assert mu_hat(streams, 1.0) == pytest.approx(want.real, abs=1e-12)
    assert abs(want.imag) < 1e-12


def test_grad_zero_frequency(gauss):
    assert grad_mu_hat(gauss, 0.0) == 0.0


def test_grad_gaussian_unit(gauss):
    assert grad_mu_hat(gauss, 1.0) == pytest.approx(1j * np.exp(-0.5), abs=1e-15)


def test_grad_two_stream_against_quadrature(streams):
    want = grad_transform_oracle(streams, -1.0)
    assert want == pytest.approx(-1j * np.cos(2.0) * np.exp(-0.5), abs=1e-12)
    assert grad_mu_hat(streams, -1.0) == pytest.approx(want, abs=1e-12)


@pytest.mark.parametrize("profile_name", ["gauss", "streams"])
def test_hermitian_symmetry(profile_name, request, rng):
    profile = request.getfixturevalue(profile_name)
    etas = rng.uniform(-30, 30, size=200)
    assert np.allclose(mu_hat(profile, -etas), np.conj(mu_hat(profile, etas)),
                       rtol=0, atol=1e-15)


@pytest.mark.parametrize("profile_name", ["gauss", "streams"])
def test_grad_consistency(profile_name, request, rng):
    profile = request.getfixturevalue(profile_name)
    etas = rng.uniform(-30, 30, size=200)
    assert np.allclose(grad_mu_hat(profile, etas), 1j * etas * mu_hat(profile, etas),
                       rtol=1e-15, atol=0)


def test_transform_bounded_by_mass(rng):
    for profile in (gaussian(mass=2.5), two_stream(v0=1.3, width=0.7, mass=0.8)):
        etas = rng.uniform(-40, 40, size=500)
        assert np.all(np.abs(mu_hat(profile, etas)) <= profile.mass + 1e-15)
        assert mu_hat(profile, 0.0) == pytest.approx(profile.mass, abs=1e-15)


@pytest.mark.parametrize("profile", [gaussian(), two_stream(v0=2.0),
                                     two_stream(v0=3.0, width=0.2)])
def test_analytic_decay_envelope(profile):
    # |mu_hat| <= C exp(-theta0 |eta|) with C <= 10 over the sampled band
    etas = np.linspace(-40, 40, 4001)
    vals = np.abs(mu_hat(profile, etas))
    log_env = np.where(vals > 0, np.log(np.maximum(vals, 1e-300)), -np.inf) \
        + profile.theta0 * np.abs(etas)
    assert np.max(log_env) <= np.log(10.0)


def test_custom_tabulated_interpolation(gauss):
    etas = np.linspace(-10, 10, 4001)
    profile = EquilibriumProfile(family=CUSTOM, eta_table=etas,
                                 mu_hat_table=mu_hat(gauss, etas), theta0=1.0)
    probe = np.linspace(-9.9, 9.9, 57)
    assert np.allclose(mu_hat(profile, probe), mu_hat(gauss, probe), atol=2e-5)


def test_custom_tabulated_out_of_range():
    profile = EquilibriumProfile(family=CUSTOM, eta_table=np.linspace(-5, 5, 11),
                                 mu_hat_table=np.ones(11, dtype=complex), theta0=1.0)
    with pytest.raises(ProfileRangeError):
        mu_hat(profile, 6.0)


def test_laplace_abscissa_by_family(gauss):
    assert laplace_abscissa(gauss, 2.0) == -np.inf
    profile = EquilibriumProfile(family=CUSTOM, eta_table=np.linspace(-5, 5, 11),
                                 mu_hat_table=np.ones(11, dtype=complex), theta0=0.5)
    assert laplace_abscissa(profile, 2.0) == pytest.approx(-1.0)


def test_invalid_profiles_rejected():
    with pytest.raises(ValueError):
        EquilibriumProfile(family="lorentzian")
    with pytest.raises(ValueError):
        gaussian(width=-1.0)
    with pytest.raises(ValueError):
        gaussian(mass=0.0)
    with pytest.raises(ValueError):
        EquilibriumProfile(family=CUSTOM)


def test_value_space_forms(streams, gauss):
    vs = np.linspace(-12, 12, 601)
    total = np.trapezoid(mu_value(streams, vs), vs)
    assert total == pytest.approx(1.0, abs=1e-9)
    h = 1e-6
    fd = (mu_value(gauss, vs + h) - mu_value(gauss, vs - h)) / (2 * h)
    assert np.allclose(grad_mu_value(gauss, vs), fd, atol=1e-8)
