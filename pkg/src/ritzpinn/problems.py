"""Manufactured problems on the unit cube with closed-form exact solutions.

Three families:

* Poisson, Neumann:       -Lap u = f,          du/dn = 0
* Schroedinger, Neumann:  -Lap u + V u = f,    du/dn = 0
* elliptic, Dirichlet:    -sum a_ij d_ij u + b.grad u + c u = f,  u = g

Exact solutions are cosine products u*(x) = A prod_i cos(pi k_i x_i), which
have zero normal derivative on every face for integer k.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .constructor import BarronCosine
from .domain import Hypercube

PI = math.pi


def _pts(x, d):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.shape[1] != d:
        raise ValueError(f"expected points of dimension {d}, got {x.shape[1]}")
    return x


@dataclass(frozen=True)
class CosineSolution:
    wave: tuple
    amplitude: float = 1.0

    def __post_init__(self):
        k = tuple(int(v) for v in self.wave)
        if any(v < 0 for v in k) or any(v != w for v, w in zip(k, self.wave)):
            raise ValueError("wave numbers must be nonnegative integers")
        object.__setattr__(self, "wave", k)

    @property
    def dim(self) -> int:
        return len(self.wave)

    @property
    def k(self) -> np.ndarray:
        return np.array(self.wave, dtype=float)

    @property
    def k_sq(self) -> float:
        return float(np.sum(self.k ** 2))

    @property
    def active(self) -> int:
        return int(np.count_nonzero(self.k))

    def _cs(self, x):
        arg = PI * _pts(x, self.dim) * self.k
        return np.cos(arg), np.sin(arg)

    def value(self, x):
        c, _ = self._cs(x)
        return self.amplitude * np.prod(c, axis=1)

    def gradient(self, x):
        c, s = self._cs(x)
        out = np.empty_like(c)
        for i in range(self.dim):
            others = np.prod(np.delete(c, i, axis=1), axis=1)
            out[:, i] = -PI * self.k[i] * s[:, i] * others
        return self.amplitude * out

    def hessian(self, x):
        c, s = self._cs(x)
        n, d = c.shape
        H = np.empty((n, d, d))
        full = np.prod(c, axis=1)
        for i in range(d):
            H[:, i, i] = -(PI * self.k[i]) ** 2 * full
            for j in range(i + 1, d):
                others = np.prod(np.delete(c, [i, j], axis=1), axis=1)
                H[:, i, j] = H[:, j, i] = PI ** 2 * self.k[i] * self.k[j] * s[:, i] * s[:, j] * others
        return self.amplitude * H

    def laplacian(self, x):
        return -PI ** 2 * self.k_sq * self.value(x)

    def mean(self) -> float:
        return self.amplitude if self.active == 0 else 0.0

    def l2_sq(self) -> float:
        """int_Omega u*^2."""
        return self.amplitude ** 2 * 2.0 ** (-self.active)

    def grad_sq(self) -> float:
        """int_Omega |grad u*|^2."""
        return PI ** 2 * self.k_sq * self.l2_sq()

    def cosine_terms(self) -> list[BarronCosine]:
        """Expansion of the product into 2^(r-1) pure cosines (r = # nonzero k_i)."""
        nz = [i for i, v in enumerate(self.wave) if v]
        d = self.dim
        if not nz:
            return [BarronCosine(np.zeros(d), 0.0, self.amplitude)]
        amp = self.amplitude / 2.0 ** (len(nz) - 1)
        terms = []
        for signs in itertools.product((1.0, -1.0), repeat=len(nz) - 1):
            freq = np.zeros(d)
            for i, sgn in zip(nz, (1.0,) + signs):
                freq[i] = sgn * PI * self.wave[i]
            terms.append(BarronCosine(freq, 0.0, amp))
        return terms

    def barron_norm(self, s: int = 2) -> float:
        """Declared B^s norm of the cosine expansion: |A| (1 + pi |k|_1)^s."""
        return sum(t.barron_norm(s) for t in self.cosine_terms())


@dataclass(frozen=True)
class PoissonProblem:
    solution: CosineSolution
    kind: str = field(default="poisson", init=False)

    @property
    def dim(self) -> int:
        return self.solution.dim

    @property
    def cube(self) -> Hypercube:
        return Hypercube(self.dim)

    def f(self, x):
        return PI ** 2 * self.solution.k_sq * self.solution.value(x)

    def exact_energy(self) -> float:
        """E_P(u*) = -int |grad u*|^2 (closed form)."""
        return -self.solution.grad_sq()

    @property
    def barron_norm(self) -> float:
        return self.solution.barron_norm(2)


def constant_potential(v0):
    return lambda x: np.full(np.atleast_2d(x).shape[0], float(v0))


def sine_potential(x):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return 2.0 + np.sin(PI * x[:, 0])


@dataclass(frozen=True)
class SchrodingerProblem:
    solution: CosineSolution
    potential: Callable
    v_min: float
    v_max: float
    label: str = "constant"
    kind: str = field(default="schrodinger", init=False)

    def __post_init__(self):
        if not 0 < self.v_min <= self.v_max:
            raise ValueError("need 0 < V_min <= V_max")

    @property
    def dim(self) -> int:
        return self.solution.dim

    @property
    def cube(self) -> Hypercube:
        return Hypercube(self.dim)

    def V(self, x):
        return self.potential(_pts(x, self.dim))

    def f(self, x):
        x = _pts(x, self.dim)
        return (PI ** 2 * self.solution.k_sq + self.V(x)) * self.solution.value(x)

    @property
    def barron_norm(self) -> float:
        return self.solution.barron_norm(2)


@dataclass(frozen=True)
class EllipticDirichletProblem:
    """-sum_ij a_ij d_ij u + b . grad u + c u = f in Omega, u = g on the boundary.

    ``a`` is diagonal: a_ii(x) = 1, except a_11 = 1 + sin(pi x_1)/2 for the
    variable-coefficient family; b is a constant vector and c a constant.
    """

    solution: CosineSolution
    coeff_kind: str = "laplace_like"
    b: tuple = ()
    c: float = 0.0
    kind: str = field(default="elliptic", init=False)

    def __post_init__(self):
        if self.coeff_kind not in ("laplace_like", "variable_coeff"):
            raise ValueError(f"unknown coefficient family {self.coeff_kind!r}")
        b = tuple(float(v) for v in self.b) if self.b else (0.0,) * self.dim
        if len(b) != self.dim:
            raise ValueError("b must have one entry per dimension")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", float(self.c))

    @property
    def dim(self) -> int:
        return self.solution.dim

    @property
    def cube(self) -> Hypercube:
        return Hypercube(self.dim)

    def a_diag(self, x):
        x = _pts(x, self.dim)
        a = np.ones_like(x)
        if self.coeff_kind == "variable_coeff":
            a[:, 0] += 0.5 * np.sin(PI * x[:, 0])
        return a

    def a(self, x):
        ad = self.a_diag(x)
        n, d = ad.shape
        A = np.zeros((n, d, d))
        A[:, np.arange(d), np.arange(d)] = ad
        return A

    def operator(self, u, x):
        """L u at the points, for any evaluable u."""
        x = _pts(x, self.dim)
        H = u.hessian(x)
        diag = np.einsum("nii->ni", H)
        return (-np.sum(self.a_diag(x) * diag, axis=1)
                + u.gradient(x) @ np.asarray(self.b) + self.c * u.value(x))

    def f(self, x):
        x = _pts(x, self.dim)
        sol = self.solution
        u = sol.value(x)
        second = PI ** 2 * (self.a_diag(x) @ sol.k ** 2) * u
        return second + sol.gradient(x) @ np.asarray(self.b) + self.c * u

    def g(self, y):
        return self.solution.value(y)

    @property
    def sup_bound(self) -> float:
        """M bounding |a_ij|, |b_i|, |c|."""
        amax = 1.5 if self.coeff_kind == "variable_coeff" else 1.0
        return max(amax, max((abs(v) for v in self.b), default=0.0), abs(self.c))

    @property
    def barron_norm(self) -> float:
        return self.solution.barron_norm(3)


# --- constructors ------------------------------------------------------------

def make_poisson(k, amplitude: float = 1.0) -> PoissonProblem:
    sol = CosineSolution(tuple(k), amplitude)
    if sol.active == 0:
        raise ValueError("k = 0 gives a constant solution; the Neumann problem needs zero mean")
    return PoissonProblem(sol)


def make_schrodinger(k, v0: float = 1.0, potential: str = "constant",
                     amplitude: float = 1.0) -> SchrodingerProblem:
    sol = CosineSolution(tuple(k), amplitude)
    if potential == "constant":
        if not v0 > 0:
            raise ValueError("v0 must be positive")
        return SchrodingerProblem(sol, constant_potential(v0), float(v0), float(v0), "constant")
    if potential == "sine":
        # V = 2 + sin(pi x_1) ranges over [2, 3] on the unit cube
        return SchrodingerProblem(sol, sine_potential, 2.0, 3.0, "sine")
    raise ValueError(f"unknown potential {potential!r}")


def make_elliptic(kind: str = "laplace_like", k=(1,), b=None, c: float = 0.0,
                  amplitude: float = 1.0) -> EllipticDirichletProblem:
    sol = CosineSolution(tuple(k), amplitude)
    return EllipticDirichletProblem(sol, kind, tuple(b) if b is not None else (), c)


def exact_fields(problem, points):
    """(values, gradients, hessians) of the exact solution at ``points``."""
    sol = problem.solution
    return sol.value(points), sol.gradient(points), sol.hessian(points)


# --- string ids ----------------------------------------------------------------

def _parse_params(text: str) -> dict:
    params: dict[str, list[str]] = {}
    key = None
    for tok in filter(None, (s.strip() for s in text.split(","))):
        if "=" in tok:
            key, val = tok.split("=", 1)
            key = key.strip()
            params[key] = [val.strip()]
        elif key is None:
            raise ValueError(f"value {tok!r} has no key")
        else:
            params[key].append(tok)
    return params


def parse_problem(text: str):
    """Build a problem from ids such as ``poisson:d=2,k=1,0``.

    Families and keys:
      poisson:d,k[,amp]
      schrodinger:d,k[,v0][,potential=constant|sine][,amp]
      elliptic:d,k[,kind=laplace_like|variable_coeff][,b][,c][,amp]
    """
    family, _, rest = text.partition(":")
    family = family.strip().lower()
    p = _parse_params(rest)
    allowed = {"poisson": {"d", "k", "amp"},
               "schrodinger": {"d", "k", "v0", "potential", "amp"},
               "elliptic": {"d", "k", "kind", "b", "c", "amp"}}
    if family not in allowed:
        raise ValueError(f"unknown problem family {family!r}")
    unknown = set(p) - allowed[family]
    if unknown:
        raise ValueError(f"unknown keys for {family}: {sorted(unknown)}")
    k = [int(v) for v in p.get("k", ["1"])]
    d = int(p["d"][0]) if "d" in p else len(k)
    if len(k) == 1 and d > 1:
        k = k + [0] * (d - 1)
    if len(k) != d:
        raise ValueError(f"k has {len(k)} entries but d={d}")
    amp = float(p.get("amp", ["1"])[0])
    if family == "poisson":
        return make_poisson(k, amp)
    if family == "schrodinger":
        return make_schrodinger(k, float(p.get("v0", ["1"])[0]),
                                p.get("potential", ["constant"])[0], amp)
    b = [float(v) for v in p["b"]] if "b" in p else None
    return make_elliptic(p.get("kind", ["laplace_like"])[0], k, b,
                         float(p.get("c", ["0"])[0]), amp)
