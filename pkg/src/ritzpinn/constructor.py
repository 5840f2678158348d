"""Explicit network constructions for Barron-type targets.

* ReLU: the nodal P1 interpolant of a C^2 curve on [-1, 1] written exactly
  as a two-layer ReLU net, lifted to ridge functions x -> g(w.x / |w|_1),
  and summed over the cosine terms of a finite Fourier expansion.
* ReLU^2: exact representations of 1, z, z^2 and a midpoint-rule network
  for the Taylor remainder integral int_0^z phi(s) (z - s)^2 ds.

Every net produced here satisfies the class constraints of
:class:`ritzpinn.nets.ShallowNet`, in particular t_i in [-1, 1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .nets import ShallowNet, concatenate, zero_net

# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Curve1D:
    """A C^2 curve on [-1, 1] with a common sup bound for g, g' and g''."""

    value: Callable
    deriv1: Callable
    deriv2: Callable
    sup_bound: float
    name: str = "curve"

    def __post_init__(self):
        z = np.linspace(-1.0, 1.0, 1001)
        worst = max(float(np.max(np.abs(f(z)))) for f in (self.value, self.deriv1, self.deriv2))
        if worst > self.sup_bound * (1 + 1e-12) + 1e-15:
            raise ValueError(f"sup_bound {self.sup_bound} is below sampled max {worst:.6g} "
                             f"for curve {self.name!r}")


def corpus_curve(name: str) -> Curve1D:
    """Named test curves, each with sup bound 1."""
    if name == "cos":
        return Curve1D(np.cos, lambda z: -np.sin(z), lambda z: -np.cos(z), 1.0, "cos")
    if name == "sin2":
        return Curve1D(lambda z: np.sin(2 * z) / 4, lambda z: np.cos(2 * z) / 2,
                       lambda z: -np.sin(2 * z), 1.0, "sin2")
    if name == "cubic":
        return Curve1D(lambda z: z ** 3 / 6, lambda z: z ** 2 / 2, lambda z: np.asarray(z, float),
                       1.0, "cubic")
    raise KeyError(f"unknown corpus curve {name!r}; known: cos, sin2, cubic")


CORPUS = ("cos", "sin2", "cubic")


def h1_certificate(sup_bound: float, m: int) -> float:
    """Interpolation error certificate 4*sqrt(2)*B/m on [-1, 1]."""
    return 4.0 * math.sqrt(2.0) * sup_bound / m


@dataclass(frozen=True)
class BarronCosine:
    """x -> A cos(w.x + theta)."""

    frequency: np.ndarray
    phase: float = 0.0
    amplitude: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "frequency", np.asarray(self.frequency, dtype=float).ravel())

    @property
    def dim(self) -> int:
        return self.frequency.size

    @property
    def l1(self) -> float:
        return float(np.abs(self.frequency).sum())

    def barron_norm(self, s: int = 2) -> float:
        """Declared B^s norm |A| (1 + |w|_1)^s (an upper bound on the true norm)."""
        return abs(self.amplitude) * (1.0 + self.l1) ** s

    def _arg(self, x):
        return np.atleast_2d(np.asarray(x, dtype=float)) @ self.frequency + self.phase

    def value(self, x):
        return self.amplitude * np.cos(self._arg(x))

    def gradient(self, x):
        return -self.amplitude * np.sin(self._arg(x))[:, None] * self.frequency

    def hessian(self, x):
        c = -self.amplitude * np.cos(self._arg(x))
        return c[:, None, None] * np.outer(self.frequency, self.frequency)


# --- ReLU interpolant ------------------------------------------------------

def _split_units(gamma, eps, t, cap):
    """Split each unit into equal copies so that every |coefficient| <= cap."""
    out_g, out_e, out_t = [], [], []
    for g, e, b in zip(gamma, eps, t):
        if g == 0.0:
            continue
        k = max(1, math.ceil(abs(g) / cap - 1e-12)) if cap > 0 else 1
        out_g += [g / k] * k
        out_e += [e] * k
        out_t += [b] * k
    return np.array(out_g), np.array(out_e), np.array(out_t)


def build_interpolant_relu(g: Curve1D, m: int) -> ShallowNet:
    """ReLU net equal to the nodal interpolant of ``g`` on the uniform m-mesh of [-1, 1].

    Interior slope changes c_i = (g(z_{i-1}) - 2 g(z_i) + g(z_{i+1})) / h
    become units relu(z - z_i) to the right of a central cell [z_j, z_{j+1}]
    and relu(z_i - z) to its left, so the remainder is the affine function
    alpha + beta z of that cell.  The affine part is written with biases
    +-kappa, kappa = 1 - h/4, which keeps every t_i strictly below 1:

        alpha + beta z = a (relu(z + k) - relu(-z - k)) + c (relu(z - k) - relu(k - z))

    with a + c = beta and k (a - c) = alpha.  Coefficients are then split
    into equal copies of size <= 2B/m; sum |gamma| stays below 5B.
    """
    if m < 1:
        raise ValueError("mesh size m must be >= 1")
    B = float(g.sup_bound)
    h = 2.0 / m
    z = -1.0 + h * np.arange(m + 1)
    v = np.asarray(g.value(z), dtype=float)
    slopes = np.diff(v) / h
    kinks = np.diff(slopes)                     # c_1 .. c_{m-1}
    j = m // 2                                  # central cell [z_j, z_{j+1}]
    idx = np.arange(1, m)
    right = idx > j
    gamma = list(kinks)
    eps = list(np.where(right, 1.0, -1.0))
    bias = list(np.where(right, -z[idx], z[idx]))

    beta = slopes[j]
    alpha = v[j] - beta * z[j]
    kap = 1.0 - h / 4.0
    a = 0.5 * (beta + alpha / kap)
    c = 0.5 * (beta - alpha / kap)
    gamma += [a, -a, c, -c]
    eps += [1.0, -1.0, 1.0, -1.0]
    bias += [kap, -kap, -kap, kap]

    gm, em, tm = _split_units(np.array(gamma), np.array(eps), np.array(bias), 2.0 * B / m)
    if gm.size == 0:
        return zero_net(1, 1, 5.0 * B)
    return ShallowNet(1, gm, em[:, None], tm, 5.0 * B)


def kink_points_1d(net: ShallowNet) -> np.ndarray:
    w = net.omega[:, 0]
    ok = w != 0
    return np.unique(-net.t[ok] / w[ok])


def certify_h1_error(net: ShallowNet, g: Curve1D, nodes: int = 2048, per_panel: int = 8) -> float:
    """H^1([-1, 1]) distance between ``g`` and a 1-D net.

    Gauss-Legendre panels are split at the kinks of the net, so the
    integrand is smooth on every piece.
    """
    if nodes < 256:
        raise ValueError("use at least 256 quadrature nodes")
    if net.dim != 1:
        raise ValueError("certify_h1_error expects a 1-D network")
    panels = max(1, nodes // per_panel)
    edges = np.linspace(-1.0, 1.0, panels + 1)
    br = kink_points_1d(net)
    edges = np.unique(np.concatenate([edges, br[(br > -1) & (br < 1)]]))
    xi, wi = np.polynomial.legendre.leggauss(per_panel)
    a, b = edges[:-1, None], edges[1:, None]
    zq = (0.5 * (a + b) + 0.5 * (b - a) * xi).ravel()
    wq = (0.5 * (b - a) * wi).ravel()
    X = zq[:, None]
    e0 = np.asarray(g.value(zq), float) - net.value(X)
    e1 = np.asarray(g.deriv1(zq), float) - net.gradient(X)[:, 0]
    return float(np.sqrt(wq @ (e0 ** 2 + e1 ** 2)))


def lift_ridge(net1d: ShallowNet, direction) -> ShallowNet:
    """Turn z -> net1d(z) into x -> net1d(w.x / |w|_1) on R^d."""
    w = np.asarray(direction, dtype=float).ravel()
    l1 = float(np.abs(w).sum())
    if not l1 > 0:
        raise ValueError("ridge direction must be nonzero")
    if net1d.dim != 1:
        raise ValueError("lift_ridge expects a 1-D network")
    omega = net1d.omega[:, :1] * (w / l1)[None, :]
    return ShallowNet(net1d.order, net1d.gamma, omega, net1d.t, net1d.budget)


def build_barron_relu_approximant(terms: Sequence[BarronCosine], m_per_term: int,
                                  dim: int | None = None) -> ShallowNet:
    """ReLU approximant of sum_j A_j cos(w_j.x + theta_j) on (0, 1)^d.

    Each term is the ridge function g_j(z) = A_j cos(|w_j|_1 z + theta_j)
    evaluated at z = w_j.x / |w_j|_1 in [-1, 1]; its sup bound for g, g', g''
    is |A_j| max(1, |w_j|_1)^2 <= A_j (1 + |w_j|_1)^2.  The budget is five
    times the declared Barron-2 norm of the sum.
    """
    terms = list(terms)
    if not terms:
        if dim is None:
            raise ValueError("dimension needed for an empty term list")
        return zero_net(dim, 1, 0.0)
    d = terms[0].dim
    parts = []
    for term in terms:
        if term.dim != d:
            raise ValueError("all terms must share one dimension")
        ell, A, th = term.l1, term.amplitude, term.phase
        curve = Curve1D(lambda z, ell=ell, A=A, th=th: A * np.cos(ell * z + th),
                        lambda z, ell=ell, A=A, th=th: -A * ell * np.sin(ell * z + th),
                        lambda z, ell=ell, A=A, th=th: -A * ell ** 2 * np.cos(ell * z + th),
                        abs(A) * max(1.0, ell, ell ** 2), "ridge")
        direction = term.frequency if ell > 0 else np.eye(d)[0]
        parts.append(lift_ridge(build_interpolant_relu(curve, m_per_term), direction))
    budget = 5.0 * sum(term.barron_norm(2) for term in terms)
    return concatenate(parts, budget=budget)


# --- ReLU^2 constructions ----------------------------------------------------

_ALGEBRA_SHIFT = 0.5


def relu2_algebra(kind: str) -> ShallowNet:
    """Exact ReLU^2 nets on [-1, 1] for the monomials 1, z and z^2.

    Uses z^2 = s(z) + s(-z) and (z + a)^2 = s(z + a) + s(-z - a) with
    a = 1/2 (a = 1 would need the excluded bias t = 1):

        z = ((z + a)^2 - (z - a)^2) / (4a)
        1 = ((z + a)^2 + (z - a)^2 - 2 z^2) / (2 a^2)
    """
    a = _ALGEBRA_SHIFT
    sq = ([1.0, 1.0], [1.0, -1.0], [0.0, 0.0])           # z^2
    plus = ([1.0, 1.0], [1.0, -1.0], [a, -a])            # (z + a)^2
    minus = ([1.0, 1.0], [1.0, -1.0], [-a, a])           # (z - a)^2
    if kind == "square":
        parts = [(1.0, sq)]
    elif kind == "linear":
        parts = [(1 / (4 * a), plus), (-1 / (4 * a), minus)]
    elif kind == "one":
        parts = [(1 / (2 * a * a), plus), (1 / (2 * a * a), minus), (-1 / (a * a), sq)]
    else:
        raise ValueError(f"kind must be 'one', 'linear' or 'square', got {kind!r}")
    gamma, eps, t = [], [], []
    for scale, (gs, es, ts) in parts:
        gamma += [scale * v for v in gs]
        eps += es
        t += ts
    gamma = np.array(gamma)
    return ShallowNet(2, gamma, np.array(eps)[:, None], t, float(np.abs(gamma).sum()))


def build_taylor_relu2_remainder(phi: Callable, grid: int) -> ShallowNet:
    """ReLU^2 net for h(z) = int_0^z phi(s) (z - s)^2 ds on [-1, 1].

    Uses h(z) = int_0^1 phi(s) s2(z - s) ds - int_0^1 phi(-s) s2(-z - s) ds
    and the midpoint rule with ``grid`` nodes on each integral (2*grid units).
    """
    if grid < 2:
        raise ValueError("grid must be >= 2")
    s = (np.arange(1, grid + 1) - 0.5) / grid
    left = np.asarray(phi(s), dtype=float) * np.ones_like(s) / grid
    right = -np.asarray(phi(-s), dtype=float) * np.ones_like(s) / grid
    gamma = np.concatenate([left, right])
    eps = np.concatenate([np.ones(grid), -np.ones(grid)])
    t = np.concatenate([-s, -s])
    return ShallowNet(2, gamma, eps[:, None], t, float(np.abs(gamma).sum()))
