import math

import numpy as np
import pytest
from scipy import integrate

from ritzpinn.constructor import (CORPUS, BarronCosine, Curve1D, build_barron_relu_approximant,
                                  build_interpolant_relu, build_taylor_relu2_remainder, certify_h1_error,
                                  corpus_curve, h1_certificate, lift_ridge, relu2_algebra)
from ritzpinn.domain import Hypercube, quadrature_for
from ritzpinn.nets import ShallowNet, zero_net


def Z(z):
    return np.asarray(z, float).reshape(-1, 1)


def test_curve_sup_bound_checked():
    with pytest.raises(ValueError):
        Curve1D(np.cos, np.sin, np.cos, 0.5)


def test_linear_curve_is_exact():
    g = Curve1D(lambda z: 0.5 * z, lambda z: 0.5 + 0 * z, lambda z: 0 * z, 1.0)
    net = build_interpolant_relu(g, 7)
    assert certify_h1_error(net, g) <= 1e-12


def test_interpolates_at_nodes():
    g = Curve1D(lambda z: z ** 2, lambda z: 2 * z, lambda z: 2 + 0 * z, 2.0)
    m = 4
    net = build_interpolant_relu(g, m)
    z = np.linspace(-1, 1, m + 1)
    np.testing.assert_allclose(net.value(Z(z)), z ** 2, atol=1e-12)


def test_cos_certificate_m10():
    assert h1_certificate(1.0, 10) == pytest.approx(0.56569, abs=1e-5)
    g = corpus_curve("cos")
    assert certify_h1_error(build_interpolant_relu(g, 10), g) <= h1_certificate(1.0, 10)


def test_cos_certificate_m512():
    g = corpus_curve("cos")
    assert certify_h1_error(build_interpolant_relu(g, 512), g) <= 4 * math.sqrt(2) / 512


def test_zero_curve_zero_net():
    g = Curve1D(lambda z: 0 * z, lambda z: 0 * z, lambda z: 0 * z, 0.0)
    assert certify_h1_error(zero_net(1), g) == 0.0


def test_certify_needs_nodes():
    g = corpus_curve("cos")
    with pytest.raises(ValueError):
        certify_h1_error(build_interpolant_relu(g, 4), g, nodes=100)


@pytest.mark.parametrize("name", CORPUS)
@pytest.mark.parametrize("m", [4, 8, 16, 32, 64])
def test_corpus_certificates_and_budgets(name, m):
    g = corpus_curve(name)
    net = build_interpolant_relu(g, m)
    B = g.sup_bound
    assert net.is_feasible(1e-12)
    assert net.budget <= 5 * B + 1e-12
    assert np.all(np.abs(net.gamma) <= 2 * B / m + 1e-12)
    assert np.abs(net.gamma).sum() <= 5 * B + 1e-12
    z = np.linspace(-1, 1, m + 1)
    np.testing.assert_allclose(net.value(Z(z)), g.value(z), atol=1e-12)
    assert certify_h1_error(net, g) <= h1_certificate(B, m)


def test_error_halves_on_doubling():
    g = corpus_curve("sin2")
    e8 = certify_h1_error(build_interpolant_relu(g, 8), g)
    e16 = certify_h1_error(build_interpolant_relu(g, 16), g)
    assert 1.6 <= e8 / e16 <= 2.4


def test_certify_matches_scipy_quad():
    g = corpus_curve("cos")
    net = build_interpolant_relu(g, 6)
    def integrand(z):
        x = np.array([[z]])
        return (g.value(z) - net.value(x)[0]) ** 2 + (g.deriv1(z) - net.gradient(x)[0, 0]) ** 2
    brk = np.linspace(-1, 1, 7)
    ref = sum(integrate.quad(integrand, a, b, epsabs=1e-14)[0] for a, b in zip(brk, brk[1:]))
    assert certify_h1_error(net, g) == pytest.approx(math.sqrt(ref), rel=1e-8)


def test_lift_ridge_identity(rng):
    w = rng.normal(size=(5, 1))
    net1d = ShallowNet(1, rng.normal(size=5), np.sign(w), rng.uniform(-1, 0.9, 5), 10.0)
    direction = np.array([0.3, -1.2, 0.5])
    lifted = lift_ridge(net1d, direction)
    X = rng.uniform(size=(100, 3))
    z = X @ direction / np.abs(direction).sum()
    np.testing.assert_allclose(lifted.value(X), net1d.value(Z(z)), atol=1e-14)
    np.testing.assert_allclose(np.abs(lifted.omega).sum(axis=1), 1.0, atol=1e-15)
    assert np.abs(lifted.gamma).sum() == np.abs(net1d.gamma).sum()


def test_lift_ridge_axis_and_zero():
    net1d = build_interpolant_relu(corpus_curve("cos"), 4)
    lifted = lift_ridge(net1d, [0.0, 1.0, 0.0])
    assert np.all(lifted.omega[:, [0, 2]] == 0) and np.all(np.abs(lifted.omega[:, 1]) == 1)
    with pytest.raises(ValueError):
        lift_ridge(net1d, [0.0, 0.0])


def test_barron_cosine_norms():
    c = BarronCosine([np.pi, 0.0], 0.0, 2.0)
    assert c.barron_norm(2) == pytest.approx(2 * (1 + np.pi) ** 2)
    assert c.barron_norm(3) == pytest.approx(2 * (1 + np.pi) ** 3)


def _h1_on_cube(net, term):
    grid = quadrature_for(Hypercube(term.dim), [net])
    e0 = term.value(grid.nodes) - net.value(grid.nodes)
    e1 = term.gradient(grid.nodes) - net.gradient(grid.nodes)
    return math.sqrt(grid.integrate(e0 ** 2 + np.sum(e1 ** 2, axis=1)))


def test_barron_approximant_single_term():
    term = BarronCosine([np.pi, 0.0])
    net = build_barron_relu_approximant([term], 64)
    assert net.is_feasible()
    sup = max(1.0, np.pi, np.pi ** 2)
    assert _h1_on_cube(net, term) <= 4 * math.sqrt(2) * sup / 64


def test_barron_approximant_doubling():
    term = BarronCosine([np.pi, np.pi], 0.3)
    e1 = _h1_on_cube(build_barron_relu_approximant([term], 16), term)
    e2 = _h1_on_cube(build_barron_relu_approximant([term], 32), term)
    assert 1.6 <= e1 / e2 <= 2.4


def test_barron_approximant_empty():
    net = build_barron_relu_approximant([], 8, dim=2)
    assert net.width == 0
    assert net.value(np.array([[0.2, 0.4]]))[0] == 0.0


def test_relu2_algebra():
    z = np.random.default_rng(1).uniform(-1, 1, 100)
    assert relu2_algebra("square").value(Z([0.3]))[0] == pytest.approx(0.09, abs=1e-15)
    assert relu2_algebra("linear").value(Z([-0.7]))[0] == pytest.approx(-0.7, abs=1e-14)
    np.testing.assert_allclose(relu2_algebra("one").value(Z(z)), 1.0, atol=1e-14)
    for k in ("one", "linear", "square"):
        assert relu2_algebra(k).is_feasible()
    with pytest.raises(ValueError):
        relu2_algebra("cube")


def test_taylor_remainder_zero_and_cubic():
    assert not np.any(build_taylor_relu2_remainder(lambda s: 0 * s, 8).gamma)
    net = build_taylor_relu2_remainder(lambda s: 1 + 0 * s, 64)
    assert net.value(Z([0.6]))[0] == pytest.approx(0.072, abs=2e-3)
    assert net.is_feasible()


def test_taylor_remainder_against_direct_integral():
    phi = lambda s: np.cos(3 * s) + s
    net = build_taylor_relu2_remainder(phi, 256)
    z = np.linspace(-0.95, 0.95, 20)
    ref = [integrate.quad(lambda s: phi(s) * (zz - s) ** 2, 0, zz)[0] for zz in z]
    np.testing.assert_allclose(net.value(Z(z)), ref, atol=5e-5)


def test_taylor_remainder_decays():
    phi = lambda s: np.exp(s)
    z = np.linspace(-1, 1, 641)
    ref = np.array([integrate.quad(lambda s: phi(s) * (zz - s) ** 2, 0, zz)[0] for zz in z])
    err = [np.max(np.abs(build_taylor_relu2_remainder(phi, S).value(Z(z)) - ref)) for S in (8, 16, 32)]
    assert err[1] < err[0] and err[2] < err[1]
