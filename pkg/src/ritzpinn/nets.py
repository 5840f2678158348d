"""Constrained two-layer networks ``sum_i gamma_i * relu(w_i . x + t_i)**k``.

The hypothesis classes are

    F_{m,k}(B) = { sum_i gamma_i sigma_k(w_i . x + t_i) :
                   |w_i|_1 = 1, t_i in [-1, 1), sum_i |gamma_i| <= B }

for k = 1 (ReLU) and k = 2 (squared ReLU).  Derivatives follow the
convention sigma'(0) = 0 for k = 1, i.e. the indicator 1{z >= 0} is treated
as locally constant; tests stay away from kink surfaces.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

T_MARGIN = 1e-9
ORDERS = (1, 2)


class InactiveHessianWarning(UserWarning):
    """Hessian requested from a ReLU (k=1) net; it is zero almost everywhere."""


class ProjectionWarning(UserWarning):
    """A degenerate direction row had to be reset during projection."""


def _readonly(a):
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ShallowNet:
    order: int
    gamma: np.ndarray
    omega: np.ndarray
    t: np.ndarray
    budget: float

    def __post_init__(self):
        if self.order not in ORDERS:
            raise ValueError(f"activation order must be 1 or 2, got {self.order!r}")
        gamma = np.asarray(self.gamma, dtype=float).ravel()
        omega = np.asarray(self.omega, dtype=float)
        t = np.asarray(self.t, dtype=float).ravel()
        if omega.ndim != 2:
            raise ValueError("omega must be an (m, d) matrix")
        m = omega.shape[0]
        if gamma.shape != (m,) or t.shape != (m,):
            raise ValueError(f"gamma and t must have length {m}")
        if self.budget < 0:
            raise ValueError("budget must be nonnegative")
        object.__setattr__(self, "gamma", _readonly(gamma))
        object.__setattr__(self, "omega", _readonly(omega))
        object.__setattr__(self, "t", _readonly(t))
        object.__setattr__(self, "budget", float(self.budget))

    @property
    def width(self) -> int:
        return self.gamma.shape[0]

    @property
    def dim(self) -> int:
        return self.omega.shape[1]

    def replace(self, **changes) -> "ShallowNet":
        fields = dict(order=self.order, gamma=self.gamma, omega=self.omega, t=self.t,
                      budget=self.budget)
        fields.update(changes)
        return ShallowNet(**fields)

    def kinks(self):
        """Hyperplanes ``omega_i . x + t_i = 0`` on which derivatives jump."""
        return self.omega, self.t

    def preactivation(self, x):
        x = self._points(x)
        return x @ self.omega.T + self.t

    def _points(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[-1] != self.dim:
            raise ValueError(f"expected points of dimension {self.dim}, got {x.shape[-1]}")
        return x

    def value(self, x) -> np.ndarray:
        s0, _, _ = activation(self.preactivation(x), self.order)
        return s0 @ self.gamma

    def gradient(self, x) -> np.ndarray:
        _, s1, _ = activation(self.preactivation(x), self.order)
        return (s1 * self.gamma) @ self.omega

    def hessian(self, x) -> np.ndarray:
        z = self.preactivation(x)
        if self.order == 1:
            warnings.warn("ReLU network Hessian is zero almost everywhere",
                          InactiveHessianWarning, stacklevel=2)
            return np.zeros((z.shape[0], self.dim, self.dim))
        _, _, s2 = activation(z, self.order)
        return np.einsum("nm,mi,mj->nij", s2 * self.gamma, self.omega, self.omega)

    def violations(self, tol: float = 1e-12) -> list[str]:
        """Human readable list of broken class constraints (empty when feasible)."""
        out = []
        if self.width:
            row = np.abs(self.omega).sum(axis=1)
            if np.any(np.abs(row - 1.0) > tol):
                out.append(f"|omega_i|_1 != 1 (max dev {np.max(np.abs(row - 1.0)):.3g})")
            if np.any(self.t < -1.0) or np.any(self.t >= 1.0):
                out.append("t_i outside [-1, 1)")
        l1 = float(np.abs(self.gamma).sum())
        if l1 > self.budget + tol:
            out.append(f"sum|gamma| = {l1:.17g} exceeds budget {self.budget:.17g}")
        return out

    def is_feasible(self, tol: float = 1e-12) -> bool:
        return not self.violations(tol)


def activation(z, order):
    """sigma_k and its first two derivatives (subgradient 0 at the kink for k=1)."""
    pos = z >= 0.0
    if order == 1:
        return np.maximum(z, 0.0), pos.astype(float), np.zeros_like(z)
    r = np.maximum(z, 0.0)
    return r * r, 2.0 * r, 2.0 * pos


def zero_net(dim: int, order: int = 1, budget: float = 0.0) -> ShallowNet:
    return ShallowNet(order, np.zeros(0), np.zeros((0, dim)), np.zeros(0), budget)


def concatenate(nets, budget: float | None = None) -> ShallowNet:
    nets = list(nets)
    if not nets:
        raise ValueError("nothing to concatenate")
    orders = {n.order for n in nets}
    dims = {n.dim for n in nets}
    if len(orders) != 1 or len(dims) != 1:
        raise ValueError("nets must share activation order and dimension")
    if budget is None:
        budget = sum(n.budget for n in nets)
    return ShallowNet(nets[0].order,
                      np.concatenate([n.gamma for n in nets]),
                      np.concatenate([n.omega for n in nets]),
                      np.concatenate([n.t for n in nets]),
                      budget)


# --- single-point convenience wrappers -----------------------------------

def eval_value(net: ShallowNet, x) -> float:
    return float(net.value(np.asarray(x, dtype=float).reshape(1, -1))[0])


def eval_gradient(net: ShallowNet, x) -> np.ndarray:
    return net.gradient(np.asarray(x, dtype=float).reshape(1, -1))[0]


def eval_hessian(net: ShallowNet, x) -> np.ndarray:
    return net.hessian(np.asarray(x, dtype=float).reshape(1, -1))[0]


# --- reverse mode --------------------------------------------------------

@dataclass(frozen=True)
class ParamCotangent:
    d_gamma: np.ndarray
    d_directions: np.ndarray
    d_biases: np.ndarray

    def __add__(self, other: "ParamCotangent") -> "ParamCotangent":
        return ParamCotangent(self.d_gamma + other.d_gamma,
                              self.d_directions + other.d_directions,
                              self.d_biases + other.d_biases)

    def flat(self) -> np.ndarray:
        return np.concatenate([self.d_gamma, self.d_directions.ravel(), self.d_biases])


def backprop(net: ShallowNet, x, cot_value=None, cot_gradient=None, cot_hessian=None) -> ParamCotangent:
    """Parameter gradient of <cotangents, (value, gradient, hessian)> summed over points.

    ``x`` is one point (d,) or a batch (n, d); cotangents are per point,
    shaped (n,), (n, d) and (n, d, d).  Missing cotangents count as zero.
    """
    single = np.asarray(x).ndim == 1
    X = net._points(x)
    n, d = X.shape
    m = net.width

    def _cot(c, shape):
        if c is None:
            return None
        c = np.asarray(c, dtype=float)
        if single:
            c = c.reshape((1,) + shape)
        if c.shape != (n,) + shape:
            raise ValueError(f"cotangent has shape {c.shape}, expected {(n,) + shape}")
        return c

    a = _cot(cot_value, ())
    b = _cot(cot_gradient, (d,))
    C = _cot(cot_hessian, (d, d))
    if C is not None and net.order != 2:
        raise ValueError("Hessian cotangents need an order-2 network")

    Z = X @ net.omega.T + net.t
    s0, s1, s2 = activation(Z, net.order)
    W = net.omega
    g_gamma = np.zeros(m)
    coef = np.zeros((n, m))      # multiplies x in d/d omega and 1 in d/d t
    g_omega = np.zeros((m, d))
    if a is not None:
        g_gamma += a @ s0
        coef += a[:, None] * s1
    if b is not None:
        bw = b @ W.T
        g_gamma += np.sum(s1 * bw, axis=0)
        coef += s2 * bw
        g_omega += s1.T @ b
    if C is not None:
        sym = C + np.swapaxes(C, 1, 2)
        wCw = np.einsum("nij,mi,mj->nm", C, W, W)
        g_gamma += np.sum(s2 * wCw, axis=0)
        g_omega += np.einsum("nm,nij,mj->mi", s2, sym, W)
    g_omega += coef.T @ X
    return ParamCotangent(g_gamma,
                          net.gamma[:, None] * g_omega,
                          net.gamma * coef.sum(axis=0))


# --- projection onto the class --------------------------------------------

def project_l1_ball(v, radius: float) -> np.ndarray:
    """Euclidean projection onto {x : |x|_1 <= radius} by sorted soft thresholding."""
    v = np.asarray(v, dtype=float)
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    if np.abs(v).sum() <= radius:
        return v.copy()
    if radius == 0:
        return np.zeros_like(v)
    u = np.sort(np.abs(v))[::-1]
    css = np.cumsum(u)
    j = np.arange(1, u.size + 1)
    active = np.nonzero(u - (css - radius) / j > 0)[0]
    # index 0 always qualifies in exact arithmetic; rounding can hide it for tiny radii
    rho = active[-1] if active.size else 0
    theta = (css[rho] - radius) / (rho + 1.0)
    return np.sign(v) * np.maximum(np.abs(v) - theta, 0.0)


def project(net: ShallowNet, eps_t: float = T_MARGIN, default_direction=None) -> ShallowNet:
    """Map arbitrary parameters back into F_{m,k}(B).

    Rows of omega are rescaled to unit l1 norm (signs kept), t is clamped
    into [-1, 1 - eps_t] and gamma is projected onto the l1 ball of radius B.
    """
    W = np.array(net.omega, dtype=float)
    norms = np.abs(W).sum(axis=1)
    dead = ~(norms > 0) | ~np.isfinite(norms)
    if np.any(dead):
        e = np.zeros(net.dim)
        e[0] = 1.0
        direction = e if default_direction is None else np.asarray(default_direction, float)
        direction = direction / np.abs(direction).sum()
        warnings.warn(f"reset {int(dead.sum())} zero direction row(s) to {direction.tolist()}",
                      ProjectionWarning, stacklevel=2)
        W[dead] = direction
        norms[dead] = 1.0
    W = W / norms[:, None]
    t = np.clip(net.t, -1.0, 1.0 - eps_t)
    gamma = project_l1_ball(net.gamma, net.budget)
    return net.replace(gamma=gamma, omega=W, t=t)


# --- serialization ---------------------------------------------------------

def _enc(v):
    return float(v).hex()


def _dec(v):
    if isinstance(v, str):
        return float.fromhex(v)
    return float(v)


def to_dict(net: ShallowNet) -> dict:
    """Flat JSON-ready document; floats are hex strings so round trips are exact."""
    return {
        "order": net.order,
        "width": net.width,
        "dim": net.dim,
        "budget": _enc(net.budget),
        "gamma": [_enc(v) for v in net.gamma],
        "omega": [[_enc(v) for v in row] for row in net.omega],
        "t": [_enc(v) for v in net.t],
    }


def from_dict(doc: dict) -> ShallowNet:
    width = int(doc["width"])
    omega = [[_dec(v) for v in row] for row in doc["omega"]]
    dim = int(doc.get("dim", len(omega[0]) if omega else 0))
    omega = np.array(omega, dtype=float).reshape(width, dim)
    net = ShallowNet(int(doc["order"]), [_dec(v) for v in doc["gamma"]], omega,
                     [_dec(v) for v in doc["t"]], _dec(doc["budget"]))
    if net.width != width:
        raise ValueError("width does not match parameter arrays")
    return net


def to_json(net: ShallowNet) -> str:
    return json.dumps(to_dict(net))


def from_json(text: str) -> ShallowNet:
    return from_dict(json.loads(text))
