"""Invariant suites shared by the ``verify`` command and the test-suite."""
from __future__ import annotations

import math

import numpy as np

from ..domain import Hypercube, SampleBatch, make_rng, quadrature_for, sample, spawn_seeds
from ..losses import LossKind, PinnBatch, as_kind, empirical_loss, loss_gradient
from ..nets import ShallowNet
from ..problems import make_elliptic, make_poisson, make_schrodinger
from ..trainer import init_network
from .complexity import (PiecewiseLinear, concentration_audit, empirical_rademacher, exact_rademacher,
                         random_piecewise_linear_pairs)
from .errors import sandwich_check


def random_net(m: int, d: int, budget: float, order: int = 1, seed=0) -> ShallowNet:
    """Feasible net with a random share of the budget spent (not just the B/m initializer)."""
    rng = make_rng(seed)
    net = init_network(m, d, budget, order, int(rng.integers(2 ** 63)))
    gamma = rng.uniform(0.2, 1.0) * budget * rng.dirichlet(np.ones(m)) * rng.choice((-1.0, 1.0), m)
    return net.replace(gamma=gamma)


def sandwich_problems(d: int):
    k = (1,) + (0,) * (d - 1)
    return {"poisson": make_poisson(k),
            "schrodinger_v1": make_schrodinger((1,) * d, 1.0),
            "schrodinger_sine": make_schrodinger((1,) * d, potential="sine")}


def sandwich_suite(dims=(1, 2), nets: int = 50, width: int = 8, budget: float = 3.0, seed=0,
                   tol: float = 1e-8) -> dict:
    """Energy/H^1 sandwich on random feasible nets; also the exact V = 1 identity."""
    out = {"ok": True, "cases": []}
    seeds = spawn_seeds(seed, len(dims))
    for d, s in zip(dims, seeds):
        probs = sandwich_problems(d)
        worst = {name: -math.inf for name in probs}
        identity_gap = 0.0
        ok = {name: True for name in probs}
        for j, ns in enumerate(spawn_seeds(s, nets)):
            net = random_net(width, d, budget, 1, ns)
            grid = quadrature_for(Hypercube(d), [net])
            for name, prob in probs.items():
                rep = sandwich_check(net, prob, grid, tol)
                ok[name] &= rep.ok
                worst[name] = max(worst[name], -min(rep.lower_slack, rep.upper_slack))
                if name == "schrodinger_v1":
                    identity_gap = max(identity_gap, abs(rep.excess - rep.h1_sq) / (1.0 + rep.h1_sq))
        identity_ok = identity_gap <= tol
        for name in probs:
            out["cases"].append({"d": d, "problem": name, "ok": bool(ok[name]),
                                 "worst_violation": float(worst[name])})
        out["cases"].append({"d": d, "problem": "schrodinger_v1_identity", "ok": bool(identity_ok),
                             "max_relative_gap": float(identity_gap)})
        out["ok"] &= all(ok.values()) and identity_ok
    out["ok"] = bool(out["ok"])
    return out


def off_kink_points(net: ShallowNet, points, distance: float):
    """Rows of ``points`` whose preactivations all stay at least ``distance`` from 0."""
    Z = net.preactivation(points)
    return points[np.all(np.abs(Z) >= distance, axis=1)]


def _params(net):
    return np.concatenate([net.gamma, net.omega.ravel(), net.t])


def _with_params(net, p):
    m, d = net.width, net.dim
    return ShallowNet(net.order, p[:m], p[m:m + m * d].reshape(m, d), p[m + m * d:], math.inf)


def fd_gradient(kind, net, batch, problem, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of the empirical loss in (gamma, omega, t)."""
    p = _params(net)
    g = np.empty_like(p)
    for i in range(p.size):
        e = np.zeros_like(p)
        e[i] = h
        g[i] = (empirical_loss(kind, _with_params(net, p + e), batch, problem)
                - empirical_loss(kind, _with_params(net, p - e), batch, problem)) / (2 * h)
    return g


def gradient_case(kind, d: int, seed, n: int = 40, width: int = 5, h: float = 1e-5,
                  kink_distance: float = 1e-3):
    """Relative error (2-norm) between loss_gradient and finite differences for one random case."""
    kind = as_kind(kind)
    rng = make_rng(seed)
    order = 2 if kind is LossKind.PINN else int(rng.integers(1, 3))
    k = tuple(int(v) for v in rng.integers(0, 3, size=d))
    if not any(k):
        k = (1,) + k[1:]
    if kind is LossKind.DRM_POISSON:
        problem = make_poisson(k)
    elif kind is LossKind.DRM_SCHRODINGER:
        problem = make_schrodinger(k, potential="sine") if rng.random() < 0.5 else make_schrodinger(k, 1.5)
    else:
        problem = make_elliptic(("laplace_like", "variable_coeff")[int(rng.integers(2))], k,
                                b=rng.uniform(-1, 1, d), c=float(rng.uniform(0, 1)))
    net = random_net(width, d, 2.0, order, int(rng.integers(2 ** 63)))
    cube = Hypercube(d)
    s1, s2 = spawn_seeds(int(rng.integers(2 ** 63)), 2)
    # a kink crossing inside the FD stencil would break the comparison (the
    # ReLU gradient and the ReLU^2 Hessian both jump there)
    margin = kink_distance
    pts = off_kink_points(net, sample(cube, 4 * n, s1).points, margin)[:n]
    interior = SampleBatch(pts, s1, "interior")
    if kind is LossKind.PINN:
        bpts = off_kink_points(net, sample(cube, 4 * n, s2, "boundary").points, margin)[:n]
        batch = PinnBatch(interior, SampleBatch(bpts, s2, "boundary"))
    else:
        batch = interior
    g = loss_gradient(kind, net, batch, problem).flat()
    fd = fd_gradient(kind, net, batch, problem, h)
    return float(np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-300)), order


def gradient_suite(cases: int = 50, dims=(1, 2), tol: float = 1e-4, seed=0) -> dict:
    out = {"ok": True, "kinds": []}
    for kind in LossKind:
        errs = []
        for j, s in enumerate(spawn_seeds([seed, list(LossKind).index(kind)], cases)):
            err, _ = gradient_case(kind, dims[j % len(dims)], s)
            errs.append(err)
        ok = max(errs) <= tol
        out["kinds"].append({"kind": kind.value, "max_rel_error": max(errs), "ok": bool(ok)})
        out["ok"] &= ok
    out["ok"] = bool(out["ok"])
    return out


def rademacher_suite(n: int = 10, sign_draws: int = 4000, seed=0) -> dict:
    """Monte Carlo estimate against exhaustive enumeration for a small class."""
    s_cls, s_x, s_mc = spawn_seeds(seed, 3)
    base = random_piecewise_linear_pairs(3, 1.0, dims=(1,), seed=s_cls)
    members = []
    for (f,) in base:
        members.append(f)
        members.append(PiecewiseLinear(f.knots, tuple(-v for v in f.values)))
    batch = sample(Hypercube(1), n, s_x)
    est, err = empirical_rademacher(members, batch, sign_draws, s_mc)
    exact = exact_rademacher(members, batch)
    return {"estimate": est, "stderr": err, "exact": exact,
            "z": (est - exact) / err if err > 0 else 0.0,
            "ok": bool(abs(est - exact) <= 3 * err)}


def concentration_suite(xs=(1.0, 2.0, 3.0), n: int = 200, trials: int = 2000, class_size: int = 8,
                        seed=0, rademacher_draws: int = 400) -> dict:
    s_cls, s_run = spawn_seeds(seed, 2)
    cls = random_piecewise_linear_pairs(class_size, 1.0, seed=s_cls)
    out = {"ok": True, "audits": []}
    for x in xs:
        a = concentration_audit(cls, n, x, trials, seed=s_run, rademacher_draws=rademacher_draws)
        out["audits"].append(a.to_dict())
        out["ok"] &= a.ok
    out["ok"] = bool(out["ok"])
    return out
