"""Sample-size sweeps: trained-estimator error rates and fixed-function Monte Carlo gaps."""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy import stats

from ..domain import sample, spawn_seeds
from ..losses import LossKind, PinnBatch, as_kind, empirical_loss, energy_excess, population_loss
from ..trainer import TrainConfig, train_erm, width_rule
from .errors import h1_error


def reference_exponent(d: int) -> float:
    """Theoretical exponent -(3d+2)/(2(3d+1)) of the squared-H^1 rate in n."""
    return -(3 * d + 2) / (2 * (3 * d + 1))


def make_batch(kind, problem, n: int, seed):
    """Fresh batch for a loss kind; PINN batches get n interior and n boundary points."""
    kind = as_kind(kind)
    cube = problem.cube
    if kind is LossKind.PINN:
        si, sb = spawn_seeds(seed, 2)
        return PinnBatch(sample(cube, n, si, "interior"), sample(cube, n, sb, "boundary"))
    return sample(cube, n, seed, "interior")


@dataclass
class Fit:
    slope: float
    stderr: float
    intercept: float
    pvalue: float
    rvalue: float


def loglog_fit(x, y) -> Fit:
    """Least-squares line through (log x, log y)."""
    res = stats.linregress(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)))
    return Fit(float(res.slope), float(res.stderr), float(res.intercept), float(res.pvalue),
               float(res.rvalue))


@dataclass
class RateReport:
    kind: str
    problem: str
    n_grid: list
    repeats: int
    widths: list
    per_n: list
    cells: list
    fitted_slope: float
    slope_stderr: float
    pvalue: float
    mean_slope: float
    reference_exponent: float
    master_seed: object = None
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ValueError("n_grid must be strictly increasing")
        if self.repeats < 3:
            raise ValueError("use at least 3 repeats per sample size")

    @property
    def means(self) -> list:
        return [row["mean_excess"] for row in self.per_n]

    @property
    def strictly_decreasing(self) -> bool:
        m = self.means
        return all(b < a for a, b in zip(m, m[1:]))

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def cells_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "repeat", "m", "seed", "energy_excess", "h1_error", "best_loss"])
        for c in self.cells:
            w.writerow([c["n"], c["repeat"], c["m"], c["seed"], format(c["energy_excess"], ".17g"),
                        format(c["h1_error"], ".17g"), format(c["best_loss"], ".17g")])
        return buf.getvalue()


def _run_cell(args):
    kind, problem, n, r, seed, template = args
    batch_seed, init_seed = spawn_seeds(seed, 2)
    m = width_rule(n, problem.dim)
    cfg = replace(template, m=m, seed=init_seed)
    batch = make_batch(kind, problem, n, batch_seed)
    rep = train_erm(kind, problem, batch, cfg, record_every=max(1, cfg.steps))
    net = rep.final_net
    return {"n": n, "repeat": r, "m": m, "seed": seed,
            "energy_excess": float(energy_excess(net, problem)),
            "h1_error": float(h1_error(net, problem)),
            "best_loss": float(rep.best_loss)}


def rate_sweep(kind, problem, n_grid, repeats: int, template: TrainConfig, seed=0,
               jobs: int = 1, label: str = "") -> RateReport:
    """Train a fresh estimator for every (n, repeat) cell and fit the excess-vs-n slope.

    Cells get independent child seeds of ``seed`` and are aggregated in
    (n, repeat) order, so the report does not depend on ``jobs``.  The
    reported slope and p-value come from a regression on all per-cell
    log-excess values; ``mean_slope`` fits the log of the per-n means.
    """
    kind = as_kind(kind)
    n_grid = [int(n) for n in n_grid]
    if repeats < 3:
        raise ValueError("use at least 3 repeats per sample size")
    seeds = spawn_seeds(seed, len(n_grid) * repeats)
    tasks = [(kind, problem, n, r, seeds[i * repeats + r], template)
             for i, n in enumerate(n_grid) for r in range(repeats)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cells = list(pool.map(_run_cell, tasks))
    else:
        cells = [_run_cell(t) for t in tasks]
    per_n = []
    for n in n_grid:
        ex = np.array([c["energy_excess"] for c in cells if c["n"] == n])
        h1 = np.array([c["h1_error"] for c in cells if c["n"] == n])
        per_n.append({"n": n, "mean_excess": float(ex.mean()), "std_excess": float(ex.std(ddof=1)),
                      "mean_h1_error": float(h1.mean())})
    excess = np.maximum([c["energy_excess"] for c in cells], np.finfo(float).tiny)
    cell_fit = loglog_fit([c["n"] for c in cells], excess)
    mean_fit = loglog_fit(n_grid, [row["mean_excess"] for row in per_n])
    return RateReport(kind.value, label, n_grid, repeats,
                      [width_rule(n, problem.dim) for n in n_grid], per_n, cells,
                      cell_fit.slope, cell_fit.stderr, cell_fit.pvalue, mean_fit.slope,
                      reference_exponent(problem.dim), seed,
                      {"template": asdict(template)})


@dataclass
class GapReport:
    n_grid: list
    mean_gap: list
    slope: float
    stderr: float
    pvalue: float
    population: float


def mc_gap_slope(u, problem, kind, n_grid, repeats: int = 100, seed=0, grid=None) -> GapReport:
    """Slope of log E|empirical - population| against log n for a fixed function u."""
    kind = as_kind(kind)
    pop = population_loss(kind, u, problem, grid)
    seeds = spawn_seeds(seed, len(n_grid))
    gaps = []
    for n, s in zip(n_grid, seeds):
        child = spawn_seeds(s, repeats)
        vals = np.array([empirical_loss(kind, u, make_batch(kind, problem, int(n), c), problem)
                         for c in child])
        gaps.append(float(np.mean(np.abs(vals - pop))))
    if np.all(np.asarray(gaps) == 0.0):
        return GapReport(list(n_grid), gaps, 0.0, 0.0, 1.0, pop)
    fit = loglog_fit(n_grid, np.maximum(gaps, np.finfo(float).tiny))
    return GapReport(list(n_grid), gaps, fit.slope, fit.stderr, fit.pvalue, pop)
