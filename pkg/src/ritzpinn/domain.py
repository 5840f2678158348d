"""Unit hypercube geometry, uniform samplers and deterministic quadrature.

Quadrature grids play the role of the "population" integral throughout the
package.  Two flavours exist:

* :func:`tensor_quadrature` - composite Gauss-Legendre on a tensor grid, fine
  for smooth integrands (manufactured cosine solutions).
* :func:`fitted_quadrature` - the same rule, but with panels split along the
  kink hyperplanes of ReLU-type networks so that piecewise-smooth integrands
  are integrated to near machine precision (d <= 2).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

REGIONS = ("interior", "boundary")

# guards memory on tensor grids
MAX_QUADRATURE_POINTS = 4_000_000


@dataclass(frozen=True)
class Hypercube:
    """The open unit cube (0, 1)^dim."""

    dim: int

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.dim!r}")

    @property
    def volume(self) -> float:
        return 1.0

    @property
    def boundary_measure(self) -> float:
        return 2.0 * self.dim

    def measure(self, region: str) -> float:
        _check_region(region)
        return self.volume if region == "interior" else self.boundary_measure


def _check_region(region):
    if region not in REGIONS:
        raise ValueError(f"region must be one of {REGIONS}, got {region!r}")


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class SampleBatch:
    points: np.ndarray
    seed: int | None
    region: str = "interior"

    def __post_init__(self):
        _check_region(self.region)
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2:
            raise ValueError("points must be an (n, d) array")
        object.__setattr__(self, "points", _frozen(pts))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.n


@dataclass(frozen=True)
class QuadratureGrid:
    nodes: np.ndarray
    weights: np.ndarray
    region: str = "interior"

    def __post_init__(self):
        _check_region(self.region)
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.ndim != 2 or weights.shape != (nodes.shape[0],):
            raise ValueError("nodes must be (q, d) and weights (q,)")
        object.__setattr__(self, "nodes", _frozen(nodes))
        object.__setattr__(self, "weights", _frozen(weights))

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    def integrate(self, values) -> float:
        values = np.asarray(values, dtype=float)
        return float(self.weights @ values)


def make_rng(seed) -> np.random.Generator:
    """PCG64 generator keyed through a SeedSequence (splittable, reproducible)."""
    return np.random.default_rng(np.random.SeedSequence(seed))


def spawn_seeds(master_seed, count: int) -> list[int]:
    """Independent 64-bit child seeds for parallel jobs."""
    children = np.random.SeedSequence(master_seed).spawn(count)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


def sample_interior(cube: Hypercube, n: int, seed: int) -> SampleBatch:
    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n}")
    rng = make_rng(seed)
    return SampleBatch(rng.random((n, cube.dim)), seed, "interior")


def sample_boundary(cube: Hypercube, n: int, seed: int) -> SampleBatch:
    """Uniform points on the boundary: pick one of the 2d faces, then uniform in it."""
    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n}")
    d = cube.dim
    rng = make_rng(seed)
    faces = rng.integers(0, 2 * d, size=n)
    pts = rng.random((n, d))
    axis, side = faces // 2, faces % 2
    pts[np.arange(n), axis] = side
    return SampleBatch(pts, seed, "boundary")


def sample(cube: Hypercube, n: int, seed: int, region: str = "interior") -> SampleBatch:
    _check_region(region)
    if region == "interior":
        return sample_interior(cube, n, seed)
    return sample_boundary(cube, n, seed)


# --- one-dimensional building blocks -------------------------------------

def _gauss_on_segments(edges: np.ndarray, q: int):
    """Gauss-Legendre nodes/weights on consecutive segments of ``edges``.

    ``edges`` has shape (..., K) sorted along the last axis; the result has
    shape (..., (K - 1) * q).
    """
    xi, wi = np.polynomial.legendre.leggauss(q)
    a = edges[..., :-1, None]
    b = edges[..., 1:, None]
    half = 0.5 * (b - a)
    nodes = 0.5 * (a + b) + half * xi
    weights = half * wi
    shape = edges.shape[:-1] + (-1,)
    return nodes.reshape(shape), weights.reshape(shape)


def _panel_edges(panels: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, panels + 1)


def composite_gauss_1d(nodes_per_panel: int, panels: int = 8, breaks=()):
    """Composite rule on [0, 1]; extra ``breaks`` inside (0, 1) split panels."""
    if nodes_per_panel < 1 or panels < 1:
        raise ValueError("need at least one node and one panel")
    edges = _panel_edges(panels)
    breaks = np.asarray(breaks, dtype=float).ravel()
    breaks = breaks[(breaks > 0.0) & (breaks < 1.0)]
    if breaks.size:
        edges = np.unique(np.concatenate([edges, breaks]))
    x, w = _gauss_on_segments(edges, nodes_per_panel)
    keep = w > 0
    return x[keep], w[keep]


def _tensor(nodes_1d, weights_1d, k):
    if k == 0:
        return np.zeros((1, 0)), np.ones(1)
    grids = np.meshgrid(*([nodes_1d] * k), indexing="ij")
    wgrids = np.meshgrid(*([weights_1d] * k), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    w = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    return pts, w


def _with_fixed_coordinate(face_pts, axis, value):
    n = face_pts.shape[0]
    return np.insert(face_pts, axis, np.full(n, float(value)), axis=1)


def tensor_quadrature(cube: Hypercube, nodes_per_axis: int, region: str = "interior",
                      panels: int = 8, max_points: int = MAX_QUADRATURE_POINTS) -> QuadratureGrid:
    """Composite Gauss-Legendre grid.

    ``nodes_per_axis`` Gauss points are used on each of ``panels`` equal
    panels per axis, so polynomials of per-axis degree up to
    ``2 * nodes_per_axis - 1`` are integrated exactly.  Interior weights sum
    to 1 and boundary weights to 2d.
    """
    _check_region(region)
    if nodes_per_axis < 1:
        raise ValueError("nodes_per_axis must be >= 1")
    d = cube.dim
    per_axis = nodes_per_axis * panels
    k = d if region == "interior" else d - 1
    count = per_axis ** k * (1 if region == "interior" else 2 * d)
    if count > max_points:
        raise ValueError(
            f"quadrature would need {count} points (> cap {max_points}); "
            "reduce nodes_per_axis or panels")
    x1, w1 = composite_gauss_1d(nodes_per_axis, panels)
    if region == "interior":
        pts, w = _tensor(x1, w1, d)
        return QuadratureGrid(pts, w, "interior")
    face_pts, face_w = _tensor(x1, w1, d - 1)
    nodes, weights = [], []
    for axis in range(d):
        for side in (0.0, 1.0):
            nodes.append(_with_fixed_coordinate(face_pts, axis, side))
            weights.append(face_w)
    return QuadratureGrid(np.concatenate(nodes), np.concatenate(weights), "boundary")


# --- kink-fitted quadrature ----------------------------------------------

_TINY = 1e-12


def _line_breaks_1d(normals, offsets):
    """Zeros of w * x + t on (0, 1) for a set of 1-D affine maps."""
    w = normals.ravel()
    ok = np.abs(w) > _TINY
    return -offsets[ok] / w[ok]


def _interior_2d(normals, offsets, q, panels):
    w1, w2, t = normals[:, 0], normals[:, 1], offsets
    edges = _panel_edges(panels)
    events = [edges]
    # kink lines against the horizontal panel lines x2 = c (c includes 0 and 1)
    ok = np.abs(w1) > _TINY
    if ok.any():
        events.append((-(t[ok, None] + w2[ok, None] * edges[None, :]) / w1[ok, None]).ravel())
    # pairwise kink-line intersections
    if len(t) > 1:
        i, j = np.triu_indices(len(t), k=1)
        det = w1[i] * w2[j] - w1[j] * w2[i]
        nz = np.abs(det) > _TINY
        x = (-t[i][nz] * w2[j][nz] + t[j][nz] * w2[i][nz]) / det[nz]
        events.append(x)
    ev = np.concatenate(events)
    ev = np.unique(np.clip(ev[np.isfinite(ev)], 0.0, 1.0))
    xo, wo = _gauss_on_segments(ev, q)
    keep = wo > 0
    xo, wo = xo[keep], wo[keep]

    ok2 = np.abs(w2) > _TINY
    inner = [np.broadcast_to(edges, (xo.size, edges.size))]
    if ok2.any():
        b = -(t[None, ok2] + w1[None, ok2] * xo[:, None]) / w2[None, ok2]
        inner.append(np.clip(b, 0.0, 1.0))
    inner = np.sort(np.concatenate(inner, axis=1), axis=1)
    xi, wi = _gauss_on_segments(inner, q)
    pts = np.stack([np.broadcast_to(xo[:, None], xi.shape).ravel(), xi.ravel()], axis=1)
    w = (wo[:, None] * wi).ravel()
    keep = w > 0
    return pts[keep], w[keep]


def fitted_quadrature(cube: Hypercube, normals=None, offsets=None, region: str = "interior",
                      nodes_per_piece: int = 8, panels: int = 8) -> QuadratureGrid:
    """Composite Gauss rule whose pieces never straddle a hyperplane ``w.x + t = 0``.

    On each piece a network with kinks on those hyperplanes is smooth, so
    the rule keeps spectral accuracy.  Exact fitting is implemented for
    d <= 2; higher dimensions fall back to :func:`tensor_quadrature`.
    """
    _check_region(region)
    d = cube.dim
    if normals is None or len(np.atleast_1d(offsets)) == 0 or d > 2:
        return tensor_quadrature(cube, nodes_per_piece, region, panels)
    normals = np.asarray(normals, dtype=float).reshape(-1, d)
    offsets = np.asarray(offsets, dtype=float).ravel()
    if region == "interior":
        if d == 1:
            x, w = composite_gauss_1d(nodes_per_piece, panels, _line_breaks_1d(normals, offsets))
            return QuadratureGrid(x[:, None], w, "interior")
        pts, w = _interior_2d(normals, offsets, nodes_per_piece, panels)
        return QuadratureGrid(pts, w, "interior")
    if d == 1:
        return tensor_quadrature(cube, nodes_per_piece, "boundary", panels)
    nodes, weights = [], []
    for axis in range(2):
        other = 1 - axis
        for side in (0.0, 1.0):
            # restriction of w.x + t to the face is w_other * s + (t + w_axis * side)
            brk = _line_breaks_1d(normals[:, other], offsets + normals[:, axis] * side)
            x, w = composite_gauss_1d(nodes_per_piece, panels, brk)
            nodes.append(_with_fixed_coordinate(x[:, None], axis, side))
            weights.append(w)
    return QuadratureGrid(np.concatenate(nodes), np.concatenate(weights), "boundary")


def collect_kinks(evaluables: Iterable, dim: int):
    """Stack the kink hyperplanes of every evaluable exposing ``kinks()``."""
    normals, offsets = [np.zeros((0, dim))], [np.zeros(0)]
    for u in evaluables:
        kinks = getattr(u, "kinks", None)
        if kinks is None:
            continue
        w, t = kinks()
        normals.append(np.asarray(w, dtype=float).reshape(-1, dim))
        offsets.append(np.asarray(t, dtype=float).ravel())
    return np.concatenate(normals), np.concatenate(offsets)


def quadrature_for(cube: Hypercube, evaluables: Sequence = (), region: str = "interior",
                   nodes_per_piece: int = 8, panels: int = 8) -> QuadratureGrid:
    """Population grid suited to integrands built from ``evaluables``."""
    normals, offsets = collect_kinks(evaluables, cube.dim)
    if offsets.size == 0:
        return tensor_quadrature(cube, nodes_per_piece, region, panels)
    return fitted_quadrature(cube, normals, offsets, region, nodes_per_piece, panels)


def batch_to_csv_rows(batch: SampleBatch):
    """Rows for the debug CSV dump of a batch (index, region, x1..xd)."""
    header = ["index", "region"] + [f"x{i + 1}" for i in range(batch.dim)]
    rows = [[i, batch.region] + [format(v, ".17g") for v in p] for i, p in enumerate(batch.points)]
    return header, rows
