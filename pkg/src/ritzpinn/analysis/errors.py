"""Sobolev-norm errors and the energy/H^1 sandwich checks."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..domain import QuadratureGrid, quadrature_for
from ..losses import Difference, energy_excess, kind_for, LossKind


def _grid(u, problem, grid):
    return grid if grid is not None else quadrature_for(problem.cube, [u])


def h1_error_sq(u, problem, grid: QuadratureGrid | None = None, reference=None) -> float:
    grid = _grid(u, problem, grid)
    e = Difference(u, problem.solution if reference is None else reference)
    X = grid.nodes
    return grid.integrate(e.value(X) ** 2 + np.sum(e.gradient(X) ** 2, axis=1))


def h1_error(u, problem, grid: QuadratureGrid | None = None, reference=None) -> float:
    """||u - u*||_{H^1} by quadrature (``reference`` replaces u* when given)."""
    return float(np.sqrt(max(h1_error_sq(u, problem, grid, reference), 0.0)))


def h2_error(u, problem, grid: QuadratureGrid | None = None, reference=None) -> float:
    """H^1 error plus the Frobenius norm of the Hessian difference under the integral."""
    grid = _grid(u, problem, grid)
    e = Difference(u, problem.solution if reference is None else reference)
    X = grid.nodes
    dens = e.value(X) ** 2 + np.sum(e.gradient(X) ** 2, axis=1) + np.sum(e.hessian(X) ** 2, axis=(1, 2))
    return float(np.sqrt(max(grid.integrate(dens), 0.0)))


def solution_h1_norm(problem) -> float:
    sol = problem.solution
    return float(np.sqrt(sol.l2_sq() + sol.grad_sq()))


def relative_h1_error(u, problem, grid=None) -> float:
    return h1_error(u, problem, grid) / solution_h1_norm(problem)


@dataclass
class SandwichReport:
    kind: str
    excess: float
    h1_sq: float
    lower: float
    upper: float
    lower_slack: float
    upper_slack: float
    lower_ok: bool
    upper_ok: bool

    @property
    def ok(self) -> bool:
        return self.lower_ok and self.upper_ok

    def to_dict(self) -> dict:
        return asdict(self)


def sandwich_check(u, problem, grid: QuadratureGrid | None = None, tol: float = 1e-8) -> SandwichReport:
    """Compare the energy excess with the squared H^1 distance.

    Poisson:     excess <= ||u - u*||^2  (only the constant-free side is checked)
    Schroedinger: excess / max(1, Vmax) <= ||u - u*||^2 <= excess / min(1, Vmin)

    Slacks are positive when the inequality holds with room to spare.  A
    Poisson check passes when its slack is >= -tol; a Schroedinger check
    when its slack is >= -tol * (1 + ||u - u*||^2).
    """
    kind = kind_for(problem)
    grid = _grid(u, problem, grid)
    ex = energy_excess(u, problem, grid)
    h1 = h1_error_sq(u, problem, grid)
    scale = tol * (1.0 + h1)
    if kind is LossKind.DRM_POISSON:
        lower, upper = -np.inf, np.inf
        # excess <= h1  <=>  h1 - excess >= 0
        lower_slack, upper_slack = h1 - ex, np.inf
        scale = tol
    elif kind is LossKind.DRM_SCHRODINGER:
        lower = ex / max(1.0, problem.v_max)
        upper = ex / min(1.0, problem.v_min)
        lower_slack, upper_slack = h1 - lower, upper - h1
    else:
        raise ValueError("sandwich bounds are defined for the Ritz energies only")
    return SandwichReport(kind.value, float(ex), float(h1), float(lower), float(upper),
                          float(lower_slack), float(upper_slack),
                          bool(lower_slack >= -scale), bool(upper_slack >= -scale))
