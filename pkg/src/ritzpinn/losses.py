"""Empirical and population losses for the Ritz energies and the PINN residual.

Every function accepts an *evaluable*: any object with batched
``value(x)``, ``gradient(x)`` and (for PINN) ``hessian(x)``.  Networks,
exact solutions and small wrappers such as :class:`Shifted` all qualify, so
exact solutions are scored through the same code as trained networks.

Reductions go through ``np.sum``/``np.mean`` (pairwise summation), which is
deterministic for a fixed batch.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .domain import QuadratureGrid, SampleBatch, quadrature_for
from .nets import ParamCotangent, ShallowNet, activation, backprop, project_l1_ball


class LossKind(str, enum.Enum):
    DRM_POISSON = "drm_poisson"
    DRM_SCHRODINGER = "drm_schrodinger"
    PINN = "pinn"


_FAMILY = {"poisson": LossKind.DRM_POISSON, "schrodinger": LossKind.DRM_SCHRODINGER,
           "elliptic": LossKind.PINN}


def kind_for(problem) -> LossKind:
    """The loss that matches a problem family."""
    return _FAMILY[problem.kind]


def as_kind(kind) -> LossKind:
    return kind if isinstance(kind, LossKind) else LossKind(str(kind))


@dataclass(frozen=True)
class PinnBatch:
    interior: SampleBatch
    boundary: SampleBatch

    def __post_init__(self):
        if self.interior.n < 1 or self.boundary.n < 1:
            raise ValueError("PINN batches need at least one interior and one boundary point")
        if self.interior.region != "interior" or self.boundary.region != "boundary":
            raise ValueError("PinnBatch expects (interior, boundary) sample batches")

    @property
    def n(self) -> int:
        return min(self.interior.n, self.boundary.n)

    @property
    def sizes(self) -> tuple:
        return self.interior.n, self.boundary.n


@dataclass(frozen=True)
class Shifted:
    """u + c for an evaluable u and a constant c."""
    base: object
    shift: float

    def value(self, x):
        return self.base.value(x) + self.shift

    def gradient(self, x):
        return self.base.gradient(x)

    def hessian(self, x):
        return self.base.hessian(x)

    def kinks(self):
        k = getattr(self.base, "kinks", None)
        return k() if k is not None else (np.zeros((0, 0)), np.zeros(0))


@dataclass(frozen=True)
class Difference:
    """u - v for two evaluables."""
    u: object
    v: object

    def value(self, x):
        return self.u.value(x) - self.v.value(x)

    def gradient(self, x):
        return self.u.gradient(x) - self.v.gradient(x)

    def hessian(self, x):
        return self.u.hessian(x) - self.v.hessian(x)


def _points(batch) -> np.ndarray:
    pts = batch.points if isinstance(batch, SampleBatch) else np.asarray(batch, dtype=float)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ValueError("loss needs a nonempty (n, d) batch")
    return pts


def _require_order2(u):
    if isinstance(u, ShallowNet) and u.order != 2:
        raise ValueError("the PINN loss needs second derivatives: use an order-2 (ReLU^2) network")


# --- Ritz energies -----------------------------------------------------------

def drm_poisson_empirical(u, batch, f) -> float:
    """mean(|grad u|^2 - 2 f u) + mean(u)^2 over the batch."""
    X = _points(batch)
    val, grad = u.value(X), u.gradient(X)
    return float(np.mean(np.sum(grad ** 2, axis=1) - 2.0 * f(X) * val) + np.mean(val) ** 2)


def drm_poisson_population(u, problem, grid: QuadratureGrid | None = None) -> float:
    """int |grad u|^2 + (int u)^2 - 2 int f u by quadrature."""
    grid = grid or quadrature_for(problem.cube, [u])
    X = grid.nodes
    val, grad = u.value(X), u.gradient(X)
    return (grid.integrate(np.sum(grad ** 2, axis=1) - 2.0 * problem.f(X) * val)
            + grid.integrate(val) ** 2)


def drm_schrodinger_empirical(u, batch, f, V) -> float:
    """mean(|grad u|^2 + V u^2 - 2 f u) over the batch."""
    X = _points(batch)
    val, grad = u.value(X), u.gradient(X)
    return float(np.mean(np.sum(grad ** 2, axis=1) + V(X) * val ** 2 - 2.0 * f(X) * val))


def drm_schrodinger_population(u, problem, grid: QuadratureGrid | None = None) -> float:
    grid = grid or quadrature_for(problem.cube, [u])
    X = grid.nodes
    val, grad = u.value(X), u.gradient(X)
    return grid.integrate(np.sum(grad ** 2, axis=1) + problem.V(X) * val ** 2
                          - 2.0 * problem.f(X) * val)


# --- PINN --------------------------------------------------------------------

def pinn_residual(u, problem, X) -> np.ndarray:
    return problem.operator(u, X) - problem.f(X)


def pinn_empirical(u, batch: PinnBatch, problem) -> float:
    """(|Omega|/N1) sum residual^2 + (|dOmega|/N2) sum (u - g)^2."""
    _require_order2(u)
    Xi, Xb = _points(batch.interior), _points(batch.boundary)
    cube = problem.cube
    r = pinn_residual(u, problem, Xi)
    e = u.value(Xb) - problem.g(Xb)
    return float(cube.volume * np.mean(r ** 2) + cube.boundary_measure * np.mean(e ** 2))


def pinn_population(u, problem, grids=None) -> float:
    """int_Omega residual^2 + int_dOmega (u - g)^2; ``grids`` is (interior, boundary)."""
    _require_order2(u)
    if grids is None:
        grids = (quadrature_for(problem.cube, [u], "interior"),
                 quadrature_for(problem.cube, [u], "boundary"))
    gi, gb = grids
    r = pinn_residual(u, problem, gi.nodes)
    e = u.value(gb.nodes) - problem.g(gb.nodes)
    return gi.integrate(r ** 2) + gb.integrate(e ** 2)


# --- dispatch ----------------------------------------------------------------

def empirical_loss(kind, u, batch, problem) -> float:
    kind = as_kind(kind)
    if kind is LossKind.DRM_POISSON:
        return drm_poisson_empirical(u, batch, problem.f)
    if kind is LossKind.DRM_SCHRODINGER:
        return drm_schrodinger_empirical(u, batch, problem.f, problem.V)
    return pinn_empirical(u, batch, problem)


def population_loss(kind, u, problem, grid=None) -> float:
    kind = as_kind(kind)
    if kind is LossKind.DRM_POISSON:
        return drm_poisson_population(u, problem, grid)
    if kind is LossKind.DRM_SCHRODINGER:
        return drm_schrodinger_population(u, problem, grid)
    return pinn_population(u, problem, grid)


def energy_excess(u, problem, grid=None) -> float:
    """Population loss of u minus that of the exact solution, on one shared grid.

    For PINN the exact solution has loss zero, so this is the population loss.
    """
    kind = kind_for(problem)
    if kind is LossKind.PINN:
        return pinn_population(u, problem, grid)
    grid = grid or quadrature_for(problem.cube, [u])
    return population_loss(kind, u, problem, grid) - population_loss(kind, problem.solution, problem, grid)


# --- gradients ---------------------------------------------------------------

@dataclass(frozen=True)
class PreparedBatch:
    """A batch with the problem data it needs evaluated once (for training loops)."""
    kind: LossKind
    points: np.ndarray
    f: np.ndarray
    V: np.ndarray | None = None
    a: np.ndarray | None = None
    b: np.ndarray | None = None
    c: float = 0.0
    boundary: np.ndarray | None = None
    g: np.ndarray | None = None
    volume: float = 1.0
    boundary_measure: float = 0.0


def prepare(kind, batch, problem) -> PreparedBatch:
    kind = as_kind(kind)
    if kind is LossKind.PINN:
        if not isinstance(batch, PinnBatch):
            raise TypeError("the PINN loss needs a PinnBatch")
        Xi, Xb = _points(batch.interior), _points(batch.boundary)
        return PreparedBatch(kind, Xi, problem.f(Xi), a=problem.a(Xi), b=np.asarray(problem.b),
                             c=problem.c, boundary=Xb, g=problem.g(Xb),
                             volume=problem.cube.volume,
                             boundary_measure=problem.cube.boundary_measure)
    X = _points(batch)
    V = problem.V(X) if kind is LossKind.DRM_SCHRODINGER else None
    return PreparedBatch(kind, X, problem.f(X), V=V)


def loss_and_gradient(net: ShallowNet, pb: PreparedBatch):
    """(empirical loss, ParamCotangent) for a prepared batch."""
    X = pb.points
    n = X.shape[0]
    val, grad = net.value(X), net.gradient(X)
    if pb.kind is LossKind.DRM_POISSON:
        mean_u = np.mean(val)
        loss = float(np.mean(np.sum(grad ** 2, axis=1) - 2.0 * pb.f * val) + mean_u ** 2)
        # the squared mean couples all samples: d/du_j of mean(u)^2 is 2 mean(u) / n
        cot = backprop(net, X, (2.0 * mean_u - 2.0 * pb.f) / n, 2.0 * grad / n)
        return loss, cot
    if pb.kind is LossKind.DRM_SCHRODINGER:
        loss = float(np.mean(np.sum(grad ** 2, axis=1) + pb.V * val ** 2 - 2.0 * pb.f * val))
        cot = backprop(net, X, (2.0 * pb.V * val - 2.0 * pb.f) / n, 2.0 * grad / n)
        return loss, cot
    _require_order2(net)
    H = net.hessian(X)
    r = -np.einsum("nij,nij->n", pb.a, H) + grad @ pb.b + pb.c * val - pb.f
    Xb = pb.boundary
    nb = Xb.shape[0]
    e = net.value(Xb) - pb.g
    loss = float(pb.volume * np.mean(r ** 2) + pb.boundary_measure * np.mean(e ** 2))
    w = 2.0 * pb.volume * r / n
    cot = backprop(net, X, w * pb.c, w[:, None] * pb.b[None, :], -w[:, None, None] * pb.a)
    cot = cot + backprop(net, Xb, 2.0 * pb.boundary_measure * e / nb)
    return loss, cot


def loss_gradient(kind, net: ShallowNet, batch, problem) -> ParamCotangent:
    """Exact parameter gradient of the empirical loss (subgradient 0 at ReLU kinks)."""
    return loss_and_gradient(net, prepare(kind, batch, problem))[1]


# --- the loss as a quadratic in the outer coefficients --------------------------

def unit_features(net: ShallowNet, X, hessian: bool = False):
    """Per-unit value, gradient (and Hessian) fields with gamma stripped off."""
    Z = net.preactivation(X)
    s0, s1, s2 = activation(Z, net.order)
    grad = s1[:, :, None] * net.omega[None, :, :]
    if not hessian:
        return s0, grad, None
    hess = s2[:, :, None, None] * np.einsum("mi,mj->mij", net.omega, net.omega)[None]
    return s0, grad, hess


def gamma_quadratic(net: ShallowNet, pb: PreparedBatch):
    """(A, b) with empirical loss(gamma) = gamma' A gamma - 2 b' gamma + const.

    Every loss here is a quadratic form in gamma once the inner parameters
    are fixed, so the outer layer can be solved for exactly.
    """
    X = pb.points
    n = X.shape[0]
    if pb.kind is LossKind.PINN:
        _require_order2(net)
        s0, grad, hess = unit_features(net, X, hessian=True)
        R = -np.einsum("nij,nmij->nm", pb.a, hess) + grad @ pb.b + pb.c * s0
        sb, _, _ = unit_features(net, pb.boundary)
        nb = pb.boundary.shape[0]
        A = pb.volume * R.T @ R / n + pb.boundary_measure * sb.T @ sb / nb
        b = pb.volume * R.T @ pb.f / n + pb.boundary_measure * sb.T @ pb.g / nb
        return A, b
    s0, grad, _ = unit_features(net, X)
    G = grad.reshape(n, net.width, -1)
    A = np.einsum("nmi,nki->mk", G, G) / n
    if pb.kind is LossKind.DRM_POISSON:
        mean = s0.mean(axis=0)
        A = A + np.outer(mean, mean)
    else:
        A = A + (s0 * pb.V[:, None]).T @ s0 / n
    b = s0.T @ pb.f / n
    return A, b


def solve_gamma(A, b, radius: float, iters: int = 500, start=None) -> np.ndarray:
    """Minimize g'Ag - 2b'g over the l1 ball of the given radius (accelerated projected gradient)."""
    A = 0.5 * (A + A.T)
    g, *_ = np.linalg.lstsq(A, b, rcond=None)
    if np.abs(g).sum() <= radius:
        return g
    lip = 2.0 * max(np.linalg.eigvalsh(A)[-1], 1e-300)
    x = project_l1_ball(np.zeros_like(b) if start is None else start, radius)
    y, tk = x.copy(), 1.0
    for _ in range(iters):
        x_new = project_l1_ball(y - (2.0 * (A @ y) - 2.0 * b) / lip, radius)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tk * tk))
        y = x_new + (tk - 1.0) / t_new * (x_new - x)
        x, tk = x_new, t_new
    return x


def kink_crossing_term(net: ShallowNet, pb: PreparedBatch, bandwidth: float) -> ParamCotangent:
    """Smoothed estimate of the loss change from samples crossing a ReLU kink.

    For k = 1 the gradient of u jumps by gamma_i w_i across the kink of
    unit i, so the Ritz energies jump whenever a kink sweeps over a sample.
    The a.e. gradient ignores these jumps.  Here the crossing rate is
    estimated with a Gaussian kernel of the given bandwidth in the
    preactivation, which approximates the population derivative of the
    gradient term.  Adding this to the a.e. gradient gives a descent
    direction that tracks kink placement; it is not part of the exact
    empirical gradient.
    """
    if pb.kind is LossKind.PINN or net.order != 1 or bandwidth <= 0:
        return ParamCotangent(np.zeros(net.width), np.zeros_like(net.omega), np.zeros(net.width))
    X = pb.points
    n = X.shape[0]
    Z = net.preactivation(X)
    grad = net.gradient(X)
    side = (Z >= 0.0).astype(float) - 0.5
    # gradient of u averaged across each unit's kink: grad u - gamma_i w_i (1{z>=0} - 1/2)
    wg = grad @ net.omega.T - side * net.gamma * np.sum(net.omega ** 2, axis=1)
    jump = 2.0 * net.gamma * wg
    kern = np.exp(-0.5 * (Z / bandwidth) ** 2) / (np.sqrt(2.0 * np.pi) * bandwidth)
    rate = kern * jump / n
    return ParamCotangent(np.zeros(net.width), rate.T @ X, rate.sum(axis=0))
