"""Hierarchical local-GD / edge / cloud averaging on synthetic quadratics.

Each UE holds ``F_n(w) = 0.5 (w - c_n)^T A_n (w - c_n)``, so the weighted
global minimiser is available in closed form and the relative optimality gap
can be tracked exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.stats import ortho_group


@dataclass(frozen=True)
class QuadraticTask:
    curvature: np.ndarray
    center: np.ndarray
    weight: float = 1.0

    def __post_init__(self):
        a = np.asarray(self.curvature, dtype=float)
        c = np.asarray(self.center, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or c.shape != (a.shape[0],):
            raise ValueError("curvature must be (d, d) and center (d,)")
        if not np.allclose(a, a.T, rtol=0, atol=1e-12 * max(1.0, np.abs(a).max())):
            raise ValueError("curvature must be symmetric")
        if np.linalg.eigvalsh(a)[0] <= 0:
            raise ValueError("curvature must be positive definite")
        if not self.weight > 0:
            raise ValueError("weight must be positive")
        object.__setattr__(self, "curvature", a)
        object.__setattr__(self, "center", c)

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @cached_property
    def eig_range(self) -> tuple[float, float]:
        ev = np.linalg.eigvalsh(self.curvature)
        return float(ev[0]), float(ev[-1])

    def gradient(self, w) -> np.ndarray:
        return self.curvature @ (_check_dim(self, w) - self.center)


def _check_dim(task: QuadraticTask, w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != task.center.shape:
        raise ValueError(f"model has shape {w.shape}, task expects {task.center.shape}")
    return w


def local_loss(task: QuadraticTask, w) -> float:
    r = _check_dim(task, w) - task.center
    return 0.5 * float(r @ task.curvature @ r)


@dataclass(frozen=True)
class TaskSet:
    """UE tasks plus the cached global minimiser."""

    tasks: tuple[QuadraticTask, ...]

    def __post_init__(self):
        if not self.tasks:
            raise ValueError("need at least one task")
        if len({t.dim for t in self.tasks}) != 1:
            raise ValueError("tasks disagree on dimension")
        object.__setattr__(self, "tasks", tuple(self.tasks))

    @property
    def weights(self) -> np.ndarray:
        return np.array([t.weight for t in self.tasks])

    @property
    def smoothness(self) -> float:
        return max(t.eig_range[1] for t in self.tasks)

    @cached_property
    def optimum(self) -> np.ndarray:
        h = sum(t.weight * t.curvature for t in self.tasks)
        rhs = sum(t.weight * t.curvature @ t.center for t in self.tasks)
        try:
            return np.linalg.solve(h, rhs)
        except np.linalg.LinAlgError:
            raise ValueError("aggregate curvature is singular") from None

    @cached_property
    def optimal_loss(self) -> float:
        return self.loss(self.optimum)

    def loss(self, w) -> float:
        """Sample-weighted mean of the local losses."""
        w_sum = self.weights.sum()
        return sum(t.weight * local_loss(t, w) for t in self.tasks) / w_sum


def global_loss(tasks: TaskSet | Sequence[QuadraticTask], w) -> float:
    if not isinstance(tasks, TaskSet):
        tasks = TaskSet(tuple(tasks))
    return tasks.loss(w)


def make_tasks(
    seed: int,
    dim: int,
    num_ues: int,
    beta: float = 0.01,
    smoothness: float = 1.0,
    heterogeneity: float = 0.05,
    center_scale: float = 1.0,
    offset: float = 30.0,
) -> TaskSet:
    """Random quadratics with every curvature spectrum inside ``[beta, smoothness]``.

    Spectra are geometric between the bounds. ``A_n = (1 - h) A + h A'_n`` mixes a shared matrix with a per-UE one;
    both have eigenvalues in the interval, hence so does the mix. Weights are
    integer sample counts in [200, 800].
    """
    if not 1 <= dim <= 50:
        raise ValueError("dim must lie in [1, 50]")
    if not 0 < beta <= smoothness:
        raise ValueError("need 0 < beta <= smoothness")
    if not 0 <= heterogeneity <= 1:
        raise ValueError("heterogeneity must lie in [0, 1]")
    rng = np.random.default_rng(seed)

    def spd():
        q = ortho_group.rvs(dim, random_state=rng) if dim > 1 else np.ones((1, 1))
        return (q * np.geomspace(beta, smoothness, dim)) @ q.T, q

    shared, q = spd()
    # common offset along the flattest shared direction, so the slowest mode
    # dominates the gap and rounds-to-target grow like ln(1/eps)
    base = offset * q[:, 0]
    tasks = []
    for _ in range(num_ues):
        a = (1 - heterogeneity) * shared + heterogeneity * spd()[0]
        a = 0.5 * (a + a.T)
        tasks.append(
            QuadraticTask(a, base + rng.normal(0.0, center_scale, size=dim), float(rng.integers(200, 801)))
        )
    return TaskSet(tuple(tasks))


def local_gd(task: QuadraticTask, w, steps: int, step_size: float) -> np.ndarray:
    lip = task.eig_range[1]
    if not 0 < step_size < 2.0 / lip:
        raise ValueError(f"step_size must lie in (0, 2/L) = (0, {2.0 / lip:g})")
    w = _check_dim(task, w).copy()
    for _ in range(steps):
        w -= step_size * task.gradient(w)
    return w


def _weighted_mean(models, weights) -> np.ndarray:
    models = np.asarray(models, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if models.shape[0] == 0:
        raise ValueError("cannot aggregate an empty set")
    if models.shape[0] != weights.shape[0]:
        raise ValueError("one weight per model required")
    return weights @ models / weights.sum()


def edge_aggregate(models, weights) -> np.ndarray:
    return _weighted_mean(models, weights)


def cloud_aggregate(edge_models, edge_weights) -> np.ndarray:
    """``edge_weights`` are each edge's total sample count."""
    return _weighted_mean(edge_models, edge_weights)


@dataclass
class TrainState:
    model: np.ndarray
    ue_models: np.ndarray
    step: int = 0
    losses: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class SimReport:
    rounds: int
    converged: bool
    times: np.ndarray
    losses: np.ndarray
    gaps: np.ndarray
    local_steps: int

    def rows(self):
        """``(round, simulated_time_s, global_loss, gap)`` per cloud round, round 0 first."""
        return [
            (r, float(self.times[r]), float(self.losses[r]), float(self.gaps[r]))
            for r in range(len(self.losses))
        ]


def run(
    tasks: TaskSet,
    edge_of,
    a: int,
    b: int,
    step_size: float | None = None,
    epsilon: float = 0.1,
    max_rounds: int = 10_000,
    round_time: float = 1.0,
    init=None,
) -> SimReport:
    """Train until the relative gap drops to ``epsilon`` or ``max_rounds`` pass.

    Every UE takes ``a`` GD steps between edge averages; the cloud averages
    after every ``b`` edge rounds and then broadcasts. The gap is measured at
    cloud rounds; each round advances the clock by ``round_time`` seconds.
    """
    if int(a) != a or int(b) != b or a < 1 or b < 1:
        raise ValueError("a and b must be integers >= 1")
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    a, b = int(a), int(b)
    edge_of = np.asarray(edge_of)
    n = len(tasks.tasks)
    if edge_of.shape != (n,):
        raise ValueError("edge_of must give one edge per task")
    eta = 1.0 / tasks.smoothness if step_size is None else step_size
    w0 = np.zeros(tasks.tasks[0].dim) if init is None else np.asarray(init, dtype=float)

    weights = tasks.weights
    edges = [np.flatnonzero(edge_of == m) for m in np.unique(edge_of)]
    edge_weights = np.array([weights[idx].sum() for idx in edges])
    f_opt = tasks.optimal_loss
    f_init = tasks.loss(w0)

    state = TrainState(w0.copy(), np.tile(w0, (n, 1)), losses=[f_init])
    gaps = [1.0]
    converged = False
    while len(state.losses) - 1 < max_rounds:
        edge_models = []
        for idx in edges:
            w_edge = state.model
            for _ in range(b):
                for k in idx:
                    state.ue_models[k] = local_gd(tasks.tasks[k], w_edge, a, eta)
                w_edge = edge_aggregate(state.ue_models[idx], weights[idx])
            edge_models.append(w_edge)
        state.step += a * b
        state.model = cloud_aggregate(edge_models, edge_weights)
        f = tasks.loss(state.model)
        state.losses.append(f)
        gaps.append((f - f_opt) / (f_init - f_opt))
        if gaps[-1] <= epsilon:
            converged = True
            break

    rounds = len(state.losses) - 1
    return SimReport(
        rounds=rounds,
        converged=converged,
        times=round_time * np.arange(rounds + 1, dtype=float),
        losses=np.array(state.losses),
        gaps=np.array(gaps),
        local_steps=state.step,
    )
