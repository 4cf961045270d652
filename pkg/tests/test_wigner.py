import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import trapezoid

from homotomo.fock import ideal_projector, oscillator_wavefunctions
from homotomo.maxlik import probability
from homotomo.states import coherent_amplitudes, fock_dm, maximally_mixed, pure_dm, random_density_matrix
from homotomo.wigner import WIGNER_BOUND, WignerGrid, WignerGridSpec, wigner_from_rho, wigner_points


def weyl_oracle(rho, x, p, half_width=8.0, n=4001):
    """W(x, p) = (2/pi) int <x+y|rho|x-y> exp(-4ipy) dy in the position basis."""
    y = np.linspace(-half_width, half_width, n)
    plus = oscillator_wavefunctions(x + y, rho.shape[0] - 1)
    minus = oscillator_wavefunctions(x - y, rho.shape[0] - 1)
    kernel = np.einsum("ym,mn,yn->y", plus, rho, minus)
    return float(np.real(2 / np.pi * trapezoid(kernel * np.exp(-4j * p * y), y)))


def fock_oracle(n, x, p):
    with mpmath.workdps(60):
        r2 = mpmath.mpf(x) ** 2 + mpmath.mpf(p) ** 2
        y = 4 * r2
        lag = mpmath.fsum(mpmath.binomial(n, k) * (-y) ** k / mpmath.factorial(k) for k in range(n + 1))
        return float(2 / mpmath.pi * (-1) ** n * mpmath.exp(-2 * r2) * lag)


def test_vacuum_values():
    assert wigner_points(fock_dm(0, 0), 0.0, 0.0) == pytest.approx(0.63662, abs=1e-5)
    assert wigner_points(fock_dm(0, 3), 0.5, -0.5) == pytest.approx(2 / np.pi * math.exp(-1), rel=1e-14)


def test_single_photon_negative_at_origin():
    assert wigner_points(fock_dm(1, 1), 0.0, 0.0) == pytest.approx(-0.63662, abs=1e-5)


def test_maximally_mixed_is_rotationally_symmetric():
    rho = maximally_mixed(5)
    w = wigner_points(rho, [1.0, 0.0, -0.6], [0.0, 1.0, 0.8])
    np.testing.assert_allclose(w, w[0], rtol=1e-13)


@pytest.mark.parametrize("n", [0, 1, 2, 5, 9])
@pytest.mark.parametrize("x,p", [(0.0, 0.0), (0.3, -0.4), (1.2, 0.7)])
def test_fock_states_match_laguerre(n, x, p):
    assert wigner_points(fock_dm(n, 10), x, p) == pytest.approx(fock_oracle(n, x, p), rel=1e-11, abs=1e-14)


def test_high_fock_number_is_stable():
    for x, p in [(0.1, 0.2), (1.3, -0.9), (2.0, 1.0)]:
        w = wigner_points(fock_dm(60, 60), x, p)
        assert w == pytest.approx(fock_oracle(60, x, p), rel=1e-8, abs=1e-13)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_general_state_matches_weyl_integral(seed):
    rho = random_density_matrix(6, rng=seed)
    for x, p in [(0.0, 0.0), (0.4, -0.7), (-1.1, 0.3)]:
        assert wigner_points(rho, x, p) == pytest.approx(weyl_oracle(rho, x, p), abs=1e-12)


def test_coherent_state_is_displaced_gaussian():
    alpha = 0.8 - 0.5j
    rho = pure_dm(coherent_amplitudes(alpha, 25))
    X, P = np.meshgrid([-0.5, 0.8, 1.4], [-1.0, -0.5, 0.3])
    expected = 2 / np.pi * np.exp(-2 * ((X - alpha.real) ** 2 + (P - alpha.imag) ** 2))
    np.testing.assert_allclose(wigner_points(rho, X, P), expected, atol=1e-10)


def test_normalization_and_linearity():
    spec = WignerGridSpec.square(6.0, 241)
    a, b = random_density_matrix(5, rng=4), fock_dm(2, 4)
    wa, wb = wigner_from_rho(a, spec), wigner_from_rho(b, spec)
    assert wa.integral() == pytest.approx(1.0, abs=1e-6)
    mix = wigner_from_rho(0.3 * a + 0.7 * b, spec)
    np.testing.assert_allclose(mix.values, 0.3 * wa.values + 0.7 * wb.values, atol=1e-14)


@pytest.mark.parametrize("theta", [0.0, np.pi / 2, 1.0])
def test_marginals_reproduce_quadrature_probabilities(theta):
    rho = random_density_matrix(5, rng=7)
    x = np.array([-1.2, -0.3, 0.0, 0.45, 1.7])
    t = np.linspace(-7, 7, 2801)
    # integrate W along the line orthogonal to the quadrature axis
    X = x[:, None] * np.cos(theta) - t[None, :] * np.sin(theta)
    P = x[:, None] * np.sin(theta) + t[None, :] * np.cos(theta)
    marginal = trapezoid(wigner_points(rho, X, P), t, axis=1)
    pr = [probability(rho, ideal_projector(theta, xi, 4)) for xi in x]
    np.testing.assert_allclose(marginal, pr, atol=1e-10)


def test_rotation_covariance():
    theta = 0.77
    rho = random_density_matrix(6, rng=12)
    U = np.diag(np.exp(-1j * theta * np.arange(6)))
    rotated = U @ rho @ U.conj().T
    alpha = np.array([0.3 + 0.4j, -1.0 + 0.2j, 0.9 - 1.1j])
    turned = alpha * np.exp(1j * theta)
    np.testing.assert_allclose(
        wigner_points(rotated, alpha.real, alpha.imag), wigner_points(rho, turned.real, turned.imag), atol=1e-13
    )


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), dim=st.integers(1, 9), x=st.floats(-3, 3), p=st.floats(-3, 3))
def test_wigner_is_bounded(seed, dim, x, p):
    rho = random_density_matrix(dim, rng=np.random.default_rng(seed))
    assert abs(wigner_points(rho, x, p)) <= WIGNER_BOUND + 1e-12


def test_non_hermitian_input_rejected():
    with pytest.raises(ValueError):
        wigner_points(np.array([[0.5, 1.0], [0.0, 0.5]]), 0.3, 0.2)


def test_grid_spec_layout():
    spec = WignerGridSpec(-1.0, 1.0, -2.0, 2.0, 3, 5)
    X, P = spec.mesh()
    assert X.shape == (3, 5)
    assert X[2, 0] == 1.0 and P[0, 4] == 2.0
    assert WignerGridSpec.from_dict(spec.to_dict()) == spec
    grid = wigner_from_rho(fock_dm(0, 2), spec)
    assert grid.provenance == "density_matrix"
    assert grid.values[1, 2] == pytest.approx(2 / np.pi)


@pytest.mark.parametrize("args", [(1.0, -1.0, -1.0, 1.0, 5, 5), (-1.0, 1.0, -1.0, 1.0, 1, 5),
                                  (-np.inf, 1.0, -1.0, 1.0, 5, 5)])
def test_grid_spec_validation(args):
    with pytest.raises(ValueError):
        WignerGridSpec(*args)


def test_grid_shape_checked():
    with pytest.raises(ValueError):
        WignerGrid(np.zeros((3, 3)), WignerGridSpec.square(1.0, 4), "density_matrix")


def test_high_order_off_diagonal_kernels():
    alpha = 2.1 + 2.1j
    rho = pure_dm(coherent_amplitudes(alpha, 70))
    X, P = np.meshgrid([1.5, 2.1, 2.6, 0.0], [2.0, 2.4, -1.0])
    expected = 2 / np.pi * np.exp(-2 * ((X - alpha.real) ** 2 + (P - alpha.imag) ** 2))
    np.testing.assert_allclose(wigner_points(rho, X, P), expected, atol=1e-9)
