import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ritzpinn.analysis.suites import gradient_case, random_net
from ritzpinn.domain import Hypercube, quadrature_for, sample, spawn_seeds
from ritzpinn.losses import (LossKind, PinnBatch, Shifted, drm_poisson_empirical, drm_poisson_population,
                             drm_schrodinger_empirical, drm_schrodinger_population, energy_excess,
                             gamma_quadratic, loss_and_gradient, loss_gradient, pinn_empirical,
                             pinn_population, prepare, solve_gamma)
from ritzpinn.nets import activation, project_l1_ball, zero_net
from ritzpinn.problems import make_elliptic, make_poisson, make_schrodinger


def pinn_batch(d, n, seed):
    si, sb = spawn_seeds(seed, 2)
    c = Hypercube(d)
    return PinnBatch(sample(c, n, si), sample(c, n, sb, "boundary"))


def test_zero_function_losses():
    p, s = make_poisson((1,)), make_schrodinger((1,))
    b = sample(Hypercube(1), 50, 0)
    z = zero_net(1)
    assert drm_poisson_empirical(z, b, p.f) == 0.0
    assert drm_schrodinger_empirical(z, b, s.f, s.V) == 0.0
    assert drm_poisson_population(z, p) == 0.0


def test_constant_function_algebra():
    class Const:
        c = 0.7
        def value(self, x):
            return np.full(len(x), self.c)
        def gradient(self, x):
            return np.zeros_like(x)
    p = make_poisson((1,))
    b = sample(Hypercube(1), 37, 2)
    expect = 0.7 ** 2 - 2 * 0.7 * np.mean(p.f(b.points))
    assert drm_poisson_empirical(Const(), b, p.f) == pytest.approx(expect, abs=1e-14)


def test_population_energy_at_solution():
    p = make_poisson((1,))
    assert drm_poisson_population(p.solution, p) == pytest.approx(-math.pi ** 2 / 2, abs=1e-8)
    s = make_schrodinger((1,), 1.0)
    assert drm_schrodinger_population(s.solution, s) == pytest.approx(-(math.pi ** 2 + 1) / 2, abs=1e-8)


def test_empirical_energy_at_solution_mc():
    # 50 batches of 2^14; tolerance is 3 standard errors of the grand mean
    p = make_poisson((1,))
    vals = [drm_poisson_empirical(p.solution, sample(Hypercube(1), 2 ** 14, s), p.f)
            for s in spawn_seeds(9, 50)]
    se = np.std(vals, ddof=1) / math.sqrt(len(vals))
    assert abs(np.mean(vals) + math.pi ** 2 / 2) <= 3 * se + 0.5 / 2 ** 14


def test_solution_minimizes_energies():
    p, s = make_poisson((1, 1)), make_schrodinger((1, 0), potential="sine")
    for seed in spawn_seeds(3, 50):
        net = random_net(6, 2, 3.0, 1, seed)
        grid = quadrature_for(Hypercube(2), [net])
        assert energy_excess(net, p, grid) >= -1e-9
        assert energy_excess(net, s, grid) >= -1e-9


def test_schrodinger_unbiased():
    s = make_schrodinger((1,), potential="sine")
    net = random_net(5, 1, 2.0, 1, 4)
    pop = drm_schrodinger_population(net, s)
    vals = np.array([drm_schrodinger_empirical(net, sample(Hypercube(1), 64, c), s.f, s.V)
                     for c in spawn_seeds(5, 200)])
    assert abs(vals.mean() - pop) <= 3 * vals.std(ddof=1) / math.sqrt(200)


@pytest.mark.parametrize("n", [64, 256])
def test_poisson_bias_is_variance_over_n(n):
    # E[(P_n u)^2] - (Pu)^2 = Var/n, measured on the squared mean term directly
    p = make_poisson((1,))
    net = random_net(5, 1, 2.0, 1, 11)
    grid = quadrature_for(Hypercube(1), [net])
    u = net.value(grid.nodes)
    Pu = grid.integrate(u)
    var = grid.integrate(u ** 2) - Pu ** 2
    reps = 1000
    sq = np.array([net.value(sample(Hypercube(1), n, c).points).mean() - Pu
                   for c in spawn_seeds([n, 1], reps)]) ** 2
    se = sq.std(ddof=1) / math.sqrt(reps)
    assert abs(sq.mean() - var / n) <= 3 * se
    assert sq.mean() > 3 * se


def test_pinn_zero_at_solution():
    for e in (make_elliptic("laplace_like", (1, 0)), make_elliptic("variable_coeff", (1, 2), b=(0.5, 1), c=1)):
        assert pinn_empirical(e.solution, pinn_batch(2, 100, 3), e) <= 1e-24
        assert pinn_population(e.solution, e) <= 1e-20


@pytest.mark.parametrize("d", [1, 2, 3])
def test_pinn_constant_shift(d):
    e = make_elliptic("laplace_like", (1,) + (0,) * (d - 1))
    eps = 0.1
    val = pinn_empirical(Shifted(e.solution, eps), pinn_batch(d, 64, 1), e)
    assert val == pytest.approx(2 * d * eps ** 2, rel=1e-12)


def test_pinn_rejects_relu():
    e = make_elliptic("laplace_like", (1,))
    with pytest.raises(ValueError):
        pinn_empirical(random_net(3, 1, 1.0, 1, 0), pinn_batch(1, 10, 0), e)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32))
def test_pinn_nonnegative(seed):
    e = make_elliptic("variable_coeff", (1, 1), b=(0.2, 0.1), c=0.3)
    net = random_net(4, 2, 2.0, 2, seed)
    assert pinn_empirical(net, pinn_batch(2, 20, seed), e) >= 0.0


def test_pinn_empirical_mean_matches_population():
    e = make_elliptic("variable_coeff", (1,), b=(0.4,), c=0.5)
    net = random_net(4, 1, 2.0, 2, 8)
    pop = pinn_population(net, e)
    vals = np.array([pinn_empirical(net, pinn_batch(1, 32, s), e) for s in spawn_seeds(12, 400)])
    assert abs(vals.mean() - pop) <= 3 * vals.std(ddof=1) / math.sqrt(400)


def test_gradient_at_zero_gamma():
    p = make_poisson((1, 1))
    net = random_net(4, 2, 1.0, 1, 2).replace(gamma=np.zeros(4))
    b = sample(Hypercube(2), 30, 5)
    g = loss_gradient("drm_poisson", net, b, p)
    s0, _, _ = activation(net.preactivation(b.points), 1)
    np.testing.assert_allclose(g.d_gamma, -2.0 / 30 * (p.f(b.points) @ s0), atol=1e-14)


def test_empty_batch_rejected():
    p = make_poisson((1,))
    with pytest.raises(ValueError):
        drm_poisson_empirical(zero_net(1), np.zeros((0, 1)), p.f)
    with pytest.raises(ValueError):
        loss_gradient("drm_poisson", random_net(2, 1, 1.0, 1, 0), np.zeros((0, 1)), p)


@pytest.mark.parametrize("kind", list(LossKind))
def test_gradient_matches_fd(kind):
    for j, s in enumerate(spawn_seeds([77, list(LossKind).index(kind)], 8)):
        err, _ = gradient_case(kind, 1 + j % 2, s)
        assert err <= 1e-4


@pytest.mark.parametrize("kind", list(LossKind))
def test_gamma_quadratic_reproduces_loss(kind, rng):
    if kind is LossKind.PINN:
        problem, batch, order = make_elliptic("variable_coeff", (1, 1), b=(0.3, 0.2), c=0.4), pinn_batch(2, 40, 1), 2
    elif kind is LossKind.DRM_POISSON:
        problem, batch, order = make_poisson((1, 1)), sample(Hypercube(2), 40, 1), 1
    else:
        problem, batch, order = make_schrodinger((1, 1), potential="sine"), sample(Hypercube(2), 40, 1), 1
    net = random_net(5, 2, 2.0, order, 3)
    pb = prepare(kind, batch, problem)
    A, b = gamma_quadratic(net, pb)
    base = loss_and_gradient(net.replace(gamma=np.zeros(5)), pb)[0]
    for _ in range(3):
        g = rng.normal(size=5)
        expect = loss_and_gradient(net.replace(gamma=g, budget=np.inf), pb)[0]
        assert g @ A @ g - 2 * b @ g + base == pytest.approx(expect, rel=1e-10, abs=1e-12)


def test_solve_gamma_is_constrained_minimizer(rng):
    M = rng.normal(size=(6, 6))
    A = M @ M.T + 0.1 * np.eye(6)
    b = rng.normal(size=6) * 5
    radius = 0.5
    g = solve_gamma(A, b, radius, iters=3000)
    obj = lambda v: v @ A @ v - 2 * b @ v
    assert np.abs(g).sum() <= radius + 1e-12
    for _ in range(200):
        q = project_l1_ball(g + 0.05 * rng.normal(size=6), radius)
        assert obj(g) <= obj(q) + 1e-9
    unconstrained = solve_gamma(A, b, 1e6)
    np.testing.assert_allclose(A @ unconstrained, b, atol=1e-9)
