"""Complexity estimators for finite function classes and a concentration audit.

All estimators operate on *finite* samples of a class, so they are lower
bounds on the complexity of the continuous class they come from.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..domain import Hypercube, make_rng, quadrature_for, sample, spawn_seeds
from ..nets import ShallowNet


def evaluate(f, X) -> np.ndarray:
    """Values of an evaluable (``.value``) or a plain callable at points X."""
    fn = getattr(f, "value", f)
    return np.asarray(fn(X), dtype=float).reshape(-1)


def _as_tasks(members, batches):
    """Normalize to (list of per-task point arrays, list of per-task member tuples)."""
    if not isinstance(batches, (list, tuple)):
        batches = [batches]
    X = [getattr(b, "points", b) for b in batches]
    T = len(X)
    vec = []
    for f in members:
        if T == 1 and not isinstance(f, (list, tuple)):
            f = (f,)
        if len(f) != T:
            raise ValueError(f"class member has {len(f)} components but there are {T} tasks")
        vec.append(tuple(f))
    return X, vec


def value_tensors(members, batches):
    """Per-task value matrices F_t with shape (class size, N_t)."""
    X, vec = _as_tasks(members, batches)
    return [np.stack([evaluate(f[t], X[t]) for f in vec]) for t in range(len(X))]


def _sup_signed_means(F, signs):
    """sup_f (1/T) sum_t (1/N_t) sum_i sigma_t^i f_t(X_t^i) for stacked sign draws.

    ``signs`` is a list over tasks of arrays (draws, N_t); returns (draws,).
    """
    T = len(F)
    total = sum(s @ Ft.T / Ft.shape[1] for s, Ft in zip(signs, F))
    return total.max(axis=1) / T


def empirical_rademacher(members, batches, sign_draws: int = 1000, seed=0,
                         scale: float = 1.0, return_draws: bool = False):
    """Monte Carlo estimate of the (multi-task) empirical Rademacher complexity.

    ``members`` is a finite list of evaluables (one task) or of T-tuples of
    evaluables; ``batches`` the matching task batches.  Returns
    ``(estimate, stderr)`` conditional on the batches.  ``scale`` multiplies
    every member (used to check positive homogeneity on paired signs).
    """
    if sign_draws < 100:
        raise ValueError("use at least 100 sign draws")
    members = list(members)
    if not members:
        raise ValueError("empty class")
    F = [scale * Ft for Ft in value_tensors(members, batches)]
    rng = make_rng(seed)
    signs = [rng.choice((-1.0, 1.0), size=(sign_draws, Ft.shape[1])) for Ft in F]
    sups = _sup_signed_means(F, signs)
    est = float(sups.mean())
    err = float(sups.std(ddof=1) / math.sqrt(sign_draws))
    if return_draws:
        return est, err, sups
    return est, err


def exact_rademacher(members, batches, max_points: int = 20) -> float:
    """Exact conditional Rademacher complexity by enumerating all sign patterns."""
    F = value_tensors(list(members), batches)
    sizes = [Ft.shape[1] for Ft in F]
    total = sum(sizes)
    if total > max_points:
        raise ValueError(f"2^{total} sign patterns is too many to enumerate")
    patterns = np.array(list(itertools.product((-1.0, 1.0), repeat=total)))
    signs, start = [], 0
    for n in sizes:
        signs.append(patterns[:, start:start + n])
        start += n
    return float(_sup_signed_means(F, signs).mean())


# --- concentration audit -------------------------------------------------------

@dataclass(frozen=True)
class UniformTask:
    """Uniform distribution on the interior or boundary of the unit cube."""
    dim: int = 1
    region: str = "interior"

    def sample(self, n, seed):
        return sample(Hypercube(self.dim), n, seed, self.region).points

    def grid(self, evaluables=()):
        return quadrature_for(Hypercube(self.dim), evaluables, self.region, nodes_per_piece=16, panels=4)


@dataclass(frozen=True)
class PiecewiseLinear:
    """x -> interpolation of (knots, values) along the first coordinate."""
    knots: tuple
    values: tuple
    dim: int = 1

    def value(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.interp(X[:, 0], self.knots, self.values)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def kinks(self):
        k = np.asarray(self.knots[1:-1], dtype=float)
        normals = np.zeros((k.size, self.dim))
        normals[:, 0] = 1.0
        return normals, -k


def random_piecewise_linear_pairs(count: int, b: float = 1.0, knots: int = 6, dims=(1, 2), seed=0):
    """``count`` vector-valued functions with random piecewise-linear components, range in [0, b].

    Component t lives on a cube of dimension ``dims[t]`` (matching the
    default interior/boundary audit tasks).
    """
    rng = make_rng(seed)
    grid = tuple(np.linspace(0.0, 1.0, knots))
    return [tuple(PiecewiseLinear(grid, tuple(rng.uniform(0.0, b, knots)), d) for d in dims)
            for _ in range(count)]


@dataclass
class ConcentrationAudit:
    class_size: int
    T: int
    n: int
    sizes: list
    x: float
    trials: int
    b: float
    r: float
    rademacher: float
    rademacher_stderr: float
    bound: float
    violations: int
    violation_rate: float
    max_deviation: float
    mean_deviation: float
    components: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.violation_rate <= math.exp(-self.x)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["threshold"] = math.exp(-self.x)
        d["ok"] = self.ok
        return d


def concentration_bound(R: float, r: float, b: float, x: float, n: int, T: int) -> dict:
    """Components of 4R + 2 sqrt(x r / (n T)) + 5 b x / (n T)."""
    comp = {"rademacher_term": 4.0 * R,
            "variance_term": 2.0 * math.sqrt(x * r / (n * T)),
            "range_term": 5.0 * b * x / (n * T)}
    comp["total"] = sum(comp.values())
    return comp


def _task_moments(members, tasks):
    """Population means and variances of every component, by quadrature."""
    means = np.zeros((len(members), len(tasks)))
    var = np.zeros_like(means)
    for t, task in enumerate(tasks):
        g = task.grid([f[t] for f in members])
        mass = g.weights.sum()
        for k, f in enumerate(members):
            v = evaluate(f[t], g.nodes)
            mu = g.integrate(v) / mass
            means[k, t] = mu
            var[k, t] = max(g.integrate((v - mu) ** 2) / mass, 0.0)
    return means, var


def _range_bound(members, tasks):
    b = 0.0
    for t, task in enumerate(tasks):
        g = task.grid()
        for f in members:
            comp = f[t]
            sup = comp.sup() if hasattr(comp, "sup") else float(np.max(np.abs(evaluate(comp, g.nodes))))
            b = max(b, sup)
    return b


def concentration_audit(members, n: int | list = 200, x: float = 3.0, trials: int = 2000,
                        tasks=None, seed=0, rademacher_draws: int = 400, b: float | None = None):
    """Frequency with which sup_f (P f - P_N f) exceeds the alpha = 1 concentration bound.

    R is estimated by joint (X, sigma) draws, then inflated by 3 standard
    errors; r is the exact (quadrature) variance proxy.  ``b`` defaults to
    the measured sup of the class and a larger measured range is rejected.
    """
    members = [tuple(f) if isinstance(f, (list, tuple)) else (f,) for f in members]
    if not members:
        raise ValueError("empty class")
    tasks = list(tasks) if tasks is not None else [UniformTask(1, "interior"), UniformTask(2, "boundary")]
    T = len(tasks)
    if any(len(f) != T for f in members):
        raise ValueError("every class member needs one component per task")
    sizes = list(n) if isinstance(n, (list, tuple)) else [int(n)] * T
    n_min = min(sizes)
    measured_b = _range_bound(members, tasks)
    if not math.isfinite(measured_b):
        raise ValueError("class has an unbounded range")
    if b is None:
        b = measured_b
    elif measured_b > b + 1e-12:
        raise ValueError(f"class range {measured_b:.6g} exceeds the declared b={b:.6g}")
    means, var = _task_moments(members, tasks)
    r = float(var.sum(axis=1).max() / T)
    Pf = means.mean(axis=1)

    seeds = spawn_seeds(seed, 2)
    # R = E_{X, sigma} sup ..., estimated with fresh samples per draw
    rng_r = make_rng(seeds[0])
    sups = np.empty(rademacher_draws)
    for j in range(rademacher_draws):
        Xs = [task.sample(N, int(rng_r.integers(2 ** 63))) for task, N in zip(tasks, sizes)]
        F = value_tensors(members, Xs)
        signs = [rng_r.choice((-1.0, 1.0), size=(1, N)) for N in sizes]
        sups[j] = _sup_signed_means(F, signs)[0]
    R = float(sups.mean())
    R_err = float(sups.std(ddof=1) / math.sqrt(rademacher_draws))
    comp = concentration_bound(R + 3.0 * R_err, r, b, x, n_min, T)

    rng_t = make_rng(seeds[1])
    dev = np.empty(trials)
    for j in range(trials):
        Xs = [task.sample(N, int(rng_t.integers(2 ** 63))) for task, N in zip(tasks, sizes)]
        F = value_tensors(members, Xs)
        PN = sum(Ft.mean(axis=1) for Ft in F) / T
        dev[j] = np.max(Pf - PN)
    viol = int(np.sum(dev > comp["total"]))
    return ConcentrationAudit(len(members), T, n_min, sizes, float(x), trials, float(b), r, R, R_err,
                              comp["total"], viol, viol / trials, float(dev.max()), float(dev.mean()),
                              comp)


# --- covering numbers --------------------------------------------------------------

def sample_class_nets(count: int, m: int, d: int, budget: float, order: int = 1, seed=0):
    """Random members of F_{m,k}(B) using the full outer budget.

    Directions are uniform on the l1 sphere, biases uniform in [-1, 1) and
    gamma = B * (Dirichlet(1,...,1) weights) with random signs.
    """
    rng = make_rng(seed)
    nets = []
    for _ in range(count):
        w = rng.dirichlet(np.ones(d), size=m) * rng.choice((-1.0, 1.0), size=(m, d))
        w /= np.abs(w).sum(axis=1, keepdims=True)
        t = rng.uniform(-1.0, 1.0, size=m)
        gamma = budget * rng.dirichlet(np.ones(m)) * rng.choice((-1.0, 1.0), size=m)
        nets.append(ShallowNet(order, gamma, w, t, budget))
    return nets


def empirical_distances(members, batch) -> np.ndarray:
    """Pairwise L^2(P_n) distances between members on a batch."""
    V = np.stack([evaluate(f, getattr(batch, "points", batch)) for f in members])
    sq = np.sum(V ** 2, axis=1)
    G = V @ V.T
    D2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * G, 0.0) / V.shape[1]
    np.fill_diagonal(D2, 0.0)
    return np.sqrt(D2)


def greedy_cover(D: np.ndarray, epsilon: float) -> list[int]:
    """Farthest-point greedy epsilon-net on a distance matrix (centers by index)."""
    s = D.shape[0]
    if s == 0:
        return []
    centers = [0]
    dist = D[0].copy()
    dist[0] = 0.0
    while True:
        j = int(np.argmax(dist))
        if dist[j] <= epsilon:
            return centers
        centers.append(j)
        dist = np.minimum(dist, D[j])
        # rounding can leave a tiny self-distance; a center never needs covering again
        dist[centers] = 0.0


def empirical_covering(members, batch, epsilon: float) -> int:
    """Size of a greedy epsilon-net of the members in the empirical L^2(P_n) metric."""
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    return len(greedy_cover(empirical_distances(list(members), batch), epsilon))
