"""Empirical risk minimization over a constrained shallow network.

The batch is fixed for the whole run.  Each step takes a first-order update
(Adam or plain gradient descent) and projects back onto F_{m,k}(B); the
returned network is the best iterate seen, measured by the empirical loss.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .domain import make_rng
from .losses import (as_kind, gamma_quadratic, kink_crossing_term, loss_and_gradient, prepare,
                     solve_gamma)
from .nets import ShallowNet, project, to_dict

OPTIMIZERS = ("adam", "plain_gd")
SCHEDULES = ("constant", "cosine")

# a run aborts when the loss exceeds L0 + DIVERGENCE_FACTOR * max(|L0|, 1)
DIVERGENCE_FACTOR = 9.0


class DivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    m: int
    budget: float
    steps: int = 1000
    optimizer: str = "adam"
    step_size: float = 1e-2
    schedule: str = "constant"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    project_every: int = 1
    refit_every: int = 0
    backtrack: bool = False
    kink_bandwidth: float = 0.0
    min_scale: float = 1e-3
    order: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.step_size < 0 or not math.isfinite(self.step_size):
            raise ValueError("step_size must be a finite nonnegative number")
        if self.project_every < 1:
            raise ValueError("project_every must be >= 1")
        if self.refit_every < 0:
            raise ValueError("refit_every must be >= 0 (0 disables refits)")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"schedule must be one of {SCHEDULES}")
        if self.m < 1:
            raise ValueError("width m must be >= 1")
        if self.budget <= 0:
            raise ValueError("budget must be positive")

    def rate(self, step: int) -> float:
        if self.schedule == "constant":
            return self.step_size
        return 0.5 * self.step_size * (1.0 + math.cos(math.pi * step / self.steps))


@dataclass
class TrainReport:
    final_net: ShallowNet
    loss_trace: list
    best_trace: list
    wall_time: float
    config: TrainConfig
    sample_seed: object = None
    best_step: int = 0
    last_net: ShallowNet | None = None
    extra: dict = field(default_factory=dict)

    @property
    def best_loss(self) -> float:
        return self.best_trace[-1]

    def to_dict(self, include_timing: bool = True) -> dict:
        out = {
            "config": asdict(self.config),
            "sample_seed": self.sample_seed,
            "best_step": self.best_step,
            "best_loss": self.best_loss,
            "initial_loss": self.loss_trace[0],
            "loss_trace": self.loss_trace,
            "net": to_dict(self.final_net),
        }
        if include_timing:
            out["wall_time"] = self.wall_time
        out.update(self.extra)
        return out

    def to_json(self, include_timing: bool = True) -> str:
        return json.dumps(self.to_dict(include_timing), indent=2)

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "loss", "best_loss"])
        for i, (a, b) in enumerate(zip(self.loss_trace, self.best_trace)):
            w.writerow([i, format(a, ".17g"), format(b, ".17g")])
        return buf.getvalue()


def width_rule(n: int, d: int) -> int:
    """m = round((n/d)^(3d / (2(3d+1)))), at least 1."""
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    return max(1, int(round((n / d) ** (3 * d / (2 * (3 * d + 1))))))


def init_network(m: int, d: int, budget: float, order: int = 1, seed=0) -> ShallowNet:
    """Feasible random net: omega uniform on the l1 sphere, t ~ U[-1,1), gamma ~ U[-B/m, B/m]."""
    rng = make_rng(seed)
    w = rng.dirichlet(np.ones(d), size=m) * rng.choice((-1.0, 1.0), size=(m, d))
    w /= np.abs(w).sum(axis=1, keepdims=True)
    t = rng.uniform(-1.0, 1.0, size=m)
    gamma = rng.uniform(-budget / m, budget / m, size=m)
    return ShallowNet(order, gamma, w, t, budget)


def _unflatten(net, p):
    m, d = net.width, net.dim
    return net.replace(gamma=p[:m], omega=p[m:m + m * d].reshape(m, d), t=p[m + m * d:])


def _keep_better(net, candidate, pb):
    return candidate if loss_and_gradient(candidate, pb)[0] <= loss_and_gradient(net, pb)[0] else net


def _flatten(net):
    return np.concatenate([net.gamma, net.omega.ravel(), net.t])


def _batch_seed(batch):
    if hasattr(batch, "interior"):
        return [batch.interior.seed, batch.boundary.seed]
    return getattr(batch, "seed", None)


def refit_gamma(net: ShallowNet, pb) -> ShallowNet:
    """Exact minimizer of the empirical loss over gamma in the l1 ball, inner units fixed."""
    A, b = gamma_quadratic(net, pb)
    return net.replace(gamma=solve_gamma(A, b, net.budget, start=net.gamma))


def train_erm(kind, problem, batch, config: TrainConfig, init: ShallowNet | None = None,
              record_every: int = 1) -> TrainReport:
    """Minimize the empirical loss on a fixed batch; return the best feasible iterate."""
    kind = as_kind(kind)
    if kind.value == "pinn" and config.order != 2:
        raise ValueError("the PINN loss needs order-2 networks")
    start = time.perf_counter()
    net = init if init is not None else init_network(config.m, problem.dim, config.budget,
                                                     config.order, config.seed)
    net = project(net)
    pb = prepare(kind, batch, problem)
    if config.refit_every:
        net = _keep_better(net, refit_gamma(net, pb), pb)
    p = _flatten(net)
    mom = np.zeros_like(p)
    vel = np.zeros_like(p)
    loss, cot = loss_and_gradient(net, pb)
    if not math.isfinite(loss):
        raise DivergenceError(f"initial loss is not finite ({loss})")
    l0 = loss
    limit = l0 + DIVERGENCE_FACTOR * max(abs(l0), 1.0)
    best_net, best_loss, best_step = net, loss, 0
    trace, best_trace = [loss], [loss]
    scale = 1.0
    for step in range(1, config.steps + 1):
        g = cot.flat()
        if config.kink_bandwidth > 0:
            g = g + kink_crossing_term(net, pb, config.kink_bandwidth).flat()
        lr = scale * config.rate(step - 1)
        if config.optimizer == "adam":
            mom = config.beta1 * mom + (1 - config.beta1) * g
            vel = config.beta2 * vel + (1 - config.beta2) * g * g
            mhat = mom / (1 - config.beta1 ** step)
            vhat = vel / (1 - config.beta2 ** step)
            p = p - lr * mhat / (np.sqrt(vhat) + config.eps)
        else:
            p = p - lr * g
        net = _unflatten(net, p)
        if step % config.project_every == 0 or step == config.steps:
            net = project(net)
        if config.refit_every and step % config.refit_every == 0:
            net = _keep_better(net, refit_gamma(net, pb), pb)
            # moments of the outer layer are stale after an exact solve
            mom[:net.width] = 0.0
            vel[:net.width] = 0.0
        p = _flatten(net)
        loss, cot = loss_and_gradient(net, pb)
        if not math.isfinite(loss) or loss > limit:
            raise DivergenceError(f"loss {loss:.6g} at step {step} exceeds divergence limit "
                                  f"{limit:.6g} (initial {l0:.6g})")
        # only feasible iterates may become the returned estimator
        if loss < best_loss and net.is_feasible(1e-9):
            best_net, best_loss, best_step = net, loss, step
        elif config.backtrack and loss > best_loss:
            # the a.e. gradient misses jumps of grad u across samples, so a step
            # can raise the loss; restart from the best iterate with a shorter step
            net = best_net
            p = _flatten(net)
            mom[:] = 0.0
            vel[:] = 0.0
            scale *= 0.5
            if scale < config.min_scale:
                scale = 1.0
            loss, cot = loss_and_gradient(net, pb)
        if step % record_every == 0 or step == config.steps:
            trace.append(loss)
            best_trace.append(best_loss)
    return TrainReport(best_net, trace, best_trace, time.perf_counter() - start, config,
                       _batch_seed(batch), best_step, last_net=net)
