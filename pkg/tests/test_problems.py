import itertools
import math

import numpy as np
import pytest

from ritzpinn.domain import Hypercube, tensor_quadrature
from ritzpinn.problems import (CosineSolution, exact_fields, make_elliptic, make_poisson, make_schrodinger,
                               parse_problem)


def probe(d, q=5):
    g = np.linspace(0.05, 0.95, q)
    return np.array(list(itertools.product(g, repeat=d)))


def fd_hessian(fun, X, h=1e-4):
    n, d = X.shape
    H = np.empty((n, d, d))
    for i in range(d):
        for j in range(d):
            ei, ej = np.eye(d)[i] * h, np.eye(d)[j] * h
            H[:, i, j] = (fun(X + ei + ej) - fun(X + ei - ej) - fun(X - ei + ej) + fun(X - ei - ej)) / (4 * h * h)
    return H


def test_value_at_origin():
    for k in [(1,), (2, 3), (0, 1, 2)]:
        assert CosineSolution(k).value(np.zeros(len(k)))[0] == 1.0


def test_neumann_faces():
    sol = CosineSolution((2, 1))
    y = np.random.default_rng(0).uniform(0.1, 0.9, 20)
    for axis in (0, 1):
        for v in (0.0, 1.0):
            X = np.column_stack([y, y[::-1]])
            X[:, axis] = v
            assert np.max(np.abs(sol.gradient(X)[:, axis])) <= 1e-12


def test_hessian_trace_and_fd():
    sol = CosineSolution((1, 2))
    X = probe(2)
    H = sol.hessian(X)
    np.testing.assert_allclose(np.einsum("nii->n", H), -math.pi ** 2 * 5 * sol.value(X), atol=1e-12)
    np.testing.assert_allclose(H, fd_hessian(sol.value, X), atol=1e-5)


def test_gradient_fd():
    sol = CosineSolution((1, 1, 2))
    X = probe(3, 3)
    h = 1e-6
    fd = np.column_stack([(sol.value(X + h * e) - sol.value(X - h * e)) / (2 * h) for e in np.eye(3)])
    np.testing.assert_allclose(sol.gradient(X), fd, atol=1e-7)


def test_poisson_closed_forms():
    p = make_poisson((1,))
    X = probe(1, 11)
    np.testing.assert_allclose(p.f(X), math.pi ** 2 * np.cos(math.pi * X[:, 0]), atol=1e-13)
    assert p.exact_energy() == pytest.approx(-math.pi ** 2 / 2)
    g = tensor_quadrature(Hypercube(2), 8)
    p2 = make_poisson((1, 0))
    assert abs(g.integrate(p2.solution.value(g.nodes))) <= 1e-14
    assert abs(g.integrate(p2.f(g.nodes))) <= 1e-12
    X = probe(2)
    np.testing.assert_allclose(-p2.solution.laplacian(X) - p2.f(X), 0.0, atol=1e-12)


def test_poisson_rejects_zero_mode():
    with pytest.raises(ValueError):
        make_poisson((0, 0))


def test_solution_integrals_match_quadrature():
    for k in [(1,), (1, 2), (0, 1), (2, 0, 1)]:
        sol = CosineSolution(k, 1.5)
        g = tensor_quadrature(Hypercube(len(k)), 8, panels=4)
        assert g.integrate(sol.value(g.nodes) ** 2) == pytest.approx(sol.l2_sq(), abs=1e-12)
        assert g.integrate(np.sum(sol.gradient(g.nodes) ** 2, axis=1)) == pytest.approx(sol.grad_sq(), abs=1e-10)
        assert g.integrate(sol.value(g.nodes)) == pytest.approx(sol.mean(), abs=1e-12)


def test_cosine_terms_reassemble():
    sol = CosineSolution((1, 2, 0), 0.7)
    X = probe(3, 4)
    total = sum(t.value(X) for t in sol.cosine_terms())
    np.testing.assert_allclose(total, sol.value(X), atol=1e-13)
    assert sol.barron_norm(2) == pytest.approx(sum(t.barron_norm(2) for t in sol.cosine_terms()))


def test_schrodinger_constant():
    s = make_schrodinger((1,), 1.0)
    X = probe(1, 9)
    np.testing.assert_allclose(s.f(X), (math.pi ** 2 + 1) * np.cos(math.pi * X[:, 0]), atol=1e-13)
    assert max(1, s.v_max) == min(1, s.v_min) == 1
    with pytest.raises(ValueError):
        make_schrodinger((1,), 0.0)


def test_schrodinger_sine_residual():
    s = make_schrodinger((1, 1), potential="sine")
    X = probe(2)
    res = -s.solution.laplacian(X) + s.V(X) * s.solution.value(X) - s.f(X)
    assert np.max(np.abs(res)) <= 1e-12
    v = s.V(probe(2, 101))
    assert s.v_min <= v.min() and v.max() <= s.v_max


def test_elliptic_laplace_like_reduces_to_poisson():
    e = make_elliptic("laplace_like", (1, 0))
    X = probe(2)
    np.testing.assert_allclose(e.f(X), make_poisson((1, 0)).f(X), atol=1e-13)
    np.testing.assert_array_equal(e.g(X), e.solution.value(X))


@pytest.mark.parametrize("kind", ["laplace_like", "variable_coeff"])
def test_elliptic_residual_with_fd(kind):
    e = make_elliptic(kind, (1, 2), b=(0.3, -0.5), c=0.7)
    X = probe(2)
    assert np.max(np.abs(e.operator(e.solution, X) - e.f(X))) <= 1e-9
    # independent route: finite-difference Hessian of u*
    H = fd_hessian(e.solution.value, X)
    Lu = (-np.sum(e.a_diag(X) * np.einsum("nii->ni", H), axis=1)
          + e.solution.gradient(X) @ np.array(e.b) + e.c * e.solution.value(X))
    assert np.max(np.abs(Lu - e.f(X))) <= 1e-5


def test_elliptic_sup_bound():
    assert make_elliptic("variable_coeff", (1,), b=(2.0,), c=0.1).sup_bound == 2.0
    assert make_elliptic("variable_coeff", (1,)).sup_bound == 1.5


def test_exact_fields_shapes():
    v, g, h = exact_fields(make_poisson((1, 1)), probe(2, 3))
    assert v.shape == (9,) and g.shape == (9, 2) and h.shape == (9, 2, 2)


def test_parse_problem():
    p = parse_problem("poisson:d=2,k=1,0")
    assert p.kind == "poisson" and p.solution.wave == (1, 0)
    assert parse_problem("poisson:d=3,k=1").solution.wave == (1, 0, 0)
    s = parse_problem("schrodinger:d=1,k=2,potential=sine")
    assert s.label == "sine" and s.v_max == 3.0
    e = parse_problem("elliptic:d=2,k=1,1,kind=variable_coeff,c=0.5")
    assert e.coeff_kind == "variable_coeff" and e.c == 0.5
    for bad in ("heat:d=1", "poisson:d=1,k=1,zz=3", "poisson:d=2,k=1,2,3"):
        with pytest.raises(ValueError):
            parse_problem(bad)
