"""Optimal local/edge iteration counts for a fixed UE-to-edge association.

The relaxed problem ``min_{a,b} R(a, b) * T(a, b)`` is solved by a primal-dual
loop over the slack formulation::

    min R(a, b) T   s.t.  b tau_m + t_edge_m <= T          (multiplier lam_m)
                          a t_cmp_n + t_up_n <= tau_m(n)   (multiplier mu_n)

Each iteration updates ``(a, b)`` from the Lagrangian stationarity conditions,
recovers ``tau``/``T`` by their max formulas, takes a projected subgradient
step on the multipliers, and re-imposes the stationarity in ``T`` and ``tau``
(``sum(lam) = R``, ``lam_m b = sum_{n in m} mu_n``). The relaxed solution is
rounded by checking its four integer neighbours. :func:`grid_oracle` is the
exhaustive integer reference.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from hflopt.accuracy import AccuracyParams, progress
from hflopt.scenario import (
    Association,
    DelayTable,
    Resources,
    Scenario,
    delay_table,
    edge_taus,
    max_resources,
)

log = logging.getLogger(__name__)

A_MIN = 1e-9
# consecutive sub-tolerance primal moves required to declare convergence
_STALL_ITERS = 500
_QUIET_ITERS = 3


class DegenerateDuals(ArithmeticError):
    pass


class DualOvershoot(ArithmeticError):
    """No positive stationary ``b`` exists for the current multipliers."""


@dataclass
class DualState:
    lam: np.ndarray
    mu: np.ndarray
    step_size: float = 0.01
    iteration: int = 0

    def __post_init__(self):
        self.lam = np.asarray(self.lam, dtype=float)
        self.mu = np.asarray(self.mu, dtype=float)
        if np.any(self.lam < 0) or np.any(self.mu < 0):
            raise ValueError("multipliers must be nonnegative")

    @classmethod
    def initial(cls, num_edges: int, num_ues: int, step_size: float = 0.01) -> DualState:
        return cls(np.full(num_edges, 1.0 / num_edges), np.full(num_ues, 1.0 / num_ues), step_size)


@dataclass(frozen=True)
class Plan:
    a_real: float
    b_real: float
    a_int: int
    b_int: int
    tau: np.ndarray
    big_t: float
    cpu: np.ndarray
    power: np.ndarray
    objective: float
    rounds: float
    relaxed_objective: float
    converged: bool = True
    iterations: int = 0
    dual: DualState | None = field(default=None, compare=False)


def optimal_resources(scenario: Scenario) -> Resources:
    """Full CPU frequency and full transmit power for every UE.

    Both only appear in delay terms that shrink as they grow, so the box
    constraints are always active at the optimum.
    """
    return max_resources(scenario)


# --- stationarity -------------------------------------------------------------


def lagrangian_partials(
    a: float, b: float, big_t: float, sum_lam_tau: float, sum_mu_tcmp: float, params: AccuracyParams
) -> tuple[float, float]:
    """``(dL/da, dL/db)`` of the Lagrangian at fixed multipliers, ``tau`` and ``T``."""
    zeta, gamma = params.zeta, params.gamma
    big_a = params.big_c * big_t * params.log_inv_epsilon
    y = -math.expm1(-a / zeta)
    f = -math.expm1(-(b / gamma) * y)
    common = big_a * (1.0 - f) / (gamma * f * f)
    d_a = -common * b * math.exp(-a / zeta) / zeta + sum_mu_tcmp
    d_b = -common * y + sum_lam_tau
    return d_a, d_b


def _sums(dual: DualState, t_cmp, tau) -> tuple[float, float]:
    return float(np.dot(dual.lam, tau)), float(np.dot(dual.mu, t_cmp))


def a_star(dual: DualState, t_cmp, tau, zeta: float, b: float = 1.0) -> float:
    """Local iteration count balancing the two stationarity conditions.

    Dividing ``dL/da = 0`` by ``dL/db = 0`` gives
    ``exp(a/zeta) = 1 + b sum(lam tau) / (zeta sum(mu t_cmp))``.
    """
    s_lam, s_mu = _sums(dual, t_cmp, tau)
    return _a_of_b(b, s_lam, s_mu, zeta)


def _a_of_b(b, s_lam, s_mu, zeta):
    if s_mu <= 0:
        raise DegenerateDuals("sum(mu * t_cmp) must be positive")
    return zeta * math.log1p(b * s_lam / (zeta * s_mu))


def _bracket_increasing(fn, lo, hi, max_doublings=200):
    """Widen ``[lo, hi]`` until ``fn(lo) < 0 < fn(hi)`` for an increasing ``fn``."""
    for _ in range(max_doublings):
        if fn(lo) < 0:
            break
        lo *= 0.5
    else:
        return None
    for _ in range(max_doublings):
        if fn(hi) > 0:
            return lo, hi
        lo, hi = hi, hi * 2.0
    return None


def b_star(dual: DualState, a: float, tau, params: AccuracyParams, big_t: float) -> float:
    """Root of ``dL/db = 0`` in ``b`` for fixed ``a`` (the residual increases in ``b``)."""
    if a <= 0:
        raise ValueError("a must be positive")
    s_lam = float(np.dot(dual.lam, tau))
    if s_lam <= 0:
        raise DualOvershoot("sum(lam * tau) must be positive")

    def resid(b):
        return lagrangian_partials(a, b, big_t, s_lam, 0.0, params)[1]

    def safe(b):
        try:
            return resid(b)
        except ZeroDivisionError:
            return -math.inf

    br = _bracket_increasing(safe, params.gamma, params.gamma)
    if br is None:
        raise DualOvershoot("no positive stationary b for these multipliers")
    return brentq(safe, *br, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


def b_closed_form(dual: DualState, a: float, tau, params: AccuracyParams, big_t: float):
    """Closed-form stationary ``b`` at fixed ``a``, or ``None`` if undefined.

    With ``z = exp(-b Y / gamma)``, ``A = C T ln(1/eps)``, ``S = sum(lam tau)``,
    stationarity is ``S gamma (1 - z)^2 = A Y z``; the root in (0, 1) is
    ``z = 1 + (A Y - sqrt(A^2 Y^2 + 4 gamma S A Y)) / (2 gamma S)``.
    """
    s = float(np.dot(dual.lam, tau))
    big_a = params.big_c * big_t * params.log_inv_epsilon
    y = -math.expm1(-a / params.zeta)
    if s <= 0 or big_a <= 0 or y <= 0:
        return None
    ay = big_a * y
    disc = math.sqrt(ay * ay + 4.0 * params.gamma * s * ay)
    # (AY - disc) / (2 gamma S) rewritten without cancellation
    step = -2.0 * ay / (ay + disc)
    if not -1.0 < step < 0.0:
        return None
    return -params.gamma * math.log1p(step) / y


def stationary_ab(
    s_lam: float, s_mu: float, big_t: float, params: AccuracyParams
) -> tuple[float, float]:
    """Joint ``(a, b)`` with ``dL/da = dL/db = 0`` for given multiplier sums."""
    if s_lam <= 0 or s_mu <= 0:
        raise DegenerateDuals("multiplier sums must be positive")
    zeta, gamma = params.zeta, params.gamma
    big_a = params.big_c * big_t * params.log_inv_epsilon

    def resid(b):
        q = b * s_lam / (zeta * s_mu)
        y = q / (1.0 + q)
        f = -math.expm1(-(b / gamma) * y)
        if f <= 0:
            return -math.inf
        return s_lam - big_a * (1.0 - f) * y / (gamma * f * f)

    br = _bracket_increasing(resid, gamma, gamma)
    if br is None:
        raise DualOvershoot("no positive stationary (a, b) for these multipliers")
    b = brentq(resid, *br, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    return _a_of_b(b, s_lam, s_mu, zeta), b


# --- primal recovery and dual updates ----------------------------------------


def _recover(table: DelayTable, edge_of, a, b, num_edges):
    tau = edge_taus(table, edge_of, a, num_edges)
    return tau, float(np.max(b * tau + table.t_edge))


def recover_tau_T(
    scenario: Scenario,
    association: Association,
    a: float,
    b: float,
    resources: Resources | None = None,
) -> tuple[np.ndarray, float]:
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    table = delay_table(scenario, resources)
    return _recover(table, association.edge_indices(scenario), a, b, scenario.num_edges)


def _subgradients(table, edge_of, tau, big_t, a, b):
    g_lam = b * tau + table.t_edge - big_t
    g_mu = a * table.t_cmp + table.assigned_uplink(edge_of) - tau[edge_of]
    return g_lam, g_mu


def subgradients(
    scenario: Scenario,
    association: Association,
    tau,
    big_t: float,
    a: float,
    b: float,
    resources: Resources | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Constraint residuals: per edge ``b tau_m + t_edge_m - T`` and per UE
    ``a t_cmp_n + t_up_n - tau_m``. Both are <= 0 for recovered ``tau``/``T``."""
    table = delay_table(scenario, resources)
    return _subgradients(table, association.edge_indices(scenario), np.asarray(tau), big_t, a, b)


def dual_step(dual: DualState, grads, eta: float) -> DualState:
    """Projected subgradient ascent: ``x <- max(0, x + eta * g)``.

    Residuals of slack constraints are negative, so their multipliers shrink
    toward zero (complementary slackness); binding ones (residual 0) are kept.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    g_lam, g_mu = grads
    return DualState(
        np.maximum(0.0, dual.lam + eta * np.asarray(g_lam)),
        np.maximum(0.0, dual.mu + eta * np.asarray(g_mu)),
        dual.step_size,
        dual.iteration + 1,
    )


def project_stationary(
    dual: DualState, rounds: float, b: float, edge_of, g_lam, g_mu
) -> DualState:
    """Rescale so that ``sum(lam) = R`` and ``lam_m b = sum_{n in m} mu_n``.

    These are the Lagrangian's stationarity conditions in ``T`` and ``tau_m``.
    Mass that was clipped away entirely is restored on binding elements.
    """
    lam = dual.lam.copy()
    if lam.sum() <= 0:
        lam = (np.asarray(g_lam) >= 0).astype(float)
    lam *= rounds / lam.sum()

    num_edges = len(lam)
    mu = dual.mu.copy()
    per_edge = np.bincount(edge_of, weights=mu, minlength=num_edges)
    starved = (per_edge <= 0) & (np.bincount(edge_of, minlength=num_edges) > 0)
    if starved.any():
        binding = np.asarray(g_mu) >= 0
        fill = starved[edge_of] & binding
        mu[fill] = 1.0
        per_edge = np.bincount(edge_of, weights=mu, minlength=num_edges)
    target = lam * b
    scale = np.divide(target, per_edge, out=np.zeros(num_edges), where=per_edge > 0)
    mu *= scale[edge_of]
    return DualState(lam, mu, dual.step_size, dual.iteration)


# --- rounding and exhaustive reference ----------------------------------------


@dataclass(frozen=True)
class _Problem:
    table: DelayTable
    edge_of: np.ndarray
    params: AccuracyParams
    num_edges: int

    @classmethod
    def build(cls, scenario, association, resources=None, table=None):
        association.validate(scenario)
        table = table or delay_table(scenario, resources)
        return cls(table, association.edge_indices(scenario), scenario.accuracy, scenario.num_edges)

    @property
    def scale(self) -> float:
        return self.params.big_c * self.params.log_inv_epsilon

    def rounds(self, a, b):
        return self.scale / progress(a, b, self.params.zeta, self.params.gamma)

    def total(self, a, b) -> float:
        tau, big_t = _recover(self.table, self.edge_of, a, b, self.num_edges)
        return float(self.rounds(a, b)) * big_t


def _round(prob: _Problem, a_real: float, b_real: float) -> tuple[int, int]:
    a_cands = sorted({max(1, math.floor(a_real)), max(1, math.ceil(a_real))})
    b_cands = sorted({max(1, math.floor(b_real)), max(1, math.ceil(b_real))})
    best = None
    for a in a_cands:
        for b in b_cands:
            val = prob.total(a, b)
            if best is None or val < best[0]:
                best = (val, a, b)
    return best[1], best[2]


def round_plan(
    a_real: float,
    b_real: float,
    scenario: Scenario,
    association: Association,
    resources: Resources | None = None,
) -> tuple[int, int]:
    """Best of the (up to) four integer neighbours, each clamped to >= 1."""
    if a_real <= 0 or b_real <= 0:
        raise ValueError("a_real and b_real must be positive")
    return _round(_Problem.build(scenario, association, resources), a_real, b_real)


def _plan_at(prob: _Problem, resources: Resources, a_int, b_int, a_real, b_real, **kw) -> Plan:
    tau, big_t = _recover(prob.table, prob.edge_of, a_int, b_int, prob.num_edges)
    rounds = float(prob.rounds(a_int, b_int))
    relaxed = kw.pop("relaxed_objective", None)
    if relaxed is None:
        relaxed = prob.total(a_real, b_real)
    return Plan(
        a_real=float(a_real),
        b_real=float(b_real),
        a_int=int(a_int),
        b_int=int(b_int),
        tau=tau,
        big_t=big_t,
        cpu=resources.cpu,
        power=resources.power,
        objective=rounds * big_t,
        rounds=rounds,
        relaxed_objective=relaxed,
        **kw,
    )


def objective_grid(prob: _Problem, a_vals: np.ndarray, b_vals: np.ndarray) -> np.ndarray:
    """``R(a, b) * T(a, b)`` on the outer grid, shape (len(a_vals), len(b_vals))."""
    t = prob.table
    per_ue = a_vals[:, None] * t.t_cmp[None, :] + t.assigned_uplink(prob.edge_of)[None, :]
    tau = np.zeros((len(a_vals), prob.num_edges))
    for m in range(prob.num_edges):
        members = prob.edge_of == m
        if members.any():
            tau[:, m] = per_ue[:, members].max(axis=1)
    big_t = (b_vals[None, :, None] * tau[:, None, :] + t.t_edge[None, None, :]).max(axis=2)
    return prob.rounds(a_vals[:, None], b_vals[None, :]) * big_t


def grid_oracle(
    scenario: Scenario,
    association: Association,
    a_range: tuple[int, int] = (1, 200),
    b_range: tuple[int, int] = (1, 200),
    resources: Resources | None = None,
) -> Plan:
    """Exhaustive integer minimisation over inclusive ranges; ties go to the
    lexicographically smallest ``(a, b)``."""
    a_vals = np.arange(a_range[0], a_range[1] + 1, dtype=float)
    b_vals = np.arange(b_range[0], b_range[1] + 1, dtype=float)
    if len(a_vals) == 0 or len(b_vals) == 0:
        raise ValueError("empty search range")
    if a_vals[0] < 1 or b_vals[0] < 1:
        raise ValueError("a and b ranges must start at >= 1")
    resources = resources or optimal_resources(scenario)
    prob = _Problem.build(scenario, association, resources)
    obj = objective_grid(prob, a_vals, b_vals)
    i, j = np.unravel_index(int(np.argmin(obj)), obj.shape)
    a, b = int(a_vals[i]), int(b_vals[j])
    return _plan_at(prob, resources, a, b, a, b)


# --- Algorithm: primal-dual iteration -----------------------------------------


def _solve_problem(prob: _Problem, eta: float, tol: float, max_iters: int):
    """Run the loop in units where ``C ln(1/eps) = 1`` so the iterates do not
    depend on the accuracy target; multipliers are rescaled on return."""
    unit = replace(prob.params, big_c=1.0, epsilon=math.exp(-1.0))
    t_cmp = prob.table.t_cmp
    edge_of, num_edges = prob.edge_of, prob.num_edges

    a, b = unit.zeta, unit.gamma
    tau, big_t = _recover(prob.table, edge_of, a, b, num_edges)
    dual = DualState.initial(num_edges, len(t_cmp), eta)
    converged = False
    quiet = it = 0
    for it in range(1, max_iters + 1):
        s_lam, s_mu = _sums(dual, t_cmp, tau)
        try:
            a_new, b_new = stationary_ab(s_lam, s_mu, big_t, unit)
        except DualOvershoot:
            dual.step_size *= 0.5
            log.debug("dual overshoot at iteration %d, step size now %g", it, dual.step_size)
            continue
        a_new = max(a_new, A_MIN)
        tau, big_t = _recover(prob.table, edge_of, a_new, b_new, num_edges)
        g_lam, g_mu = _subgradients(prob.table, edge_of, tau, big_t, a_new, b_new)

        r = float(1.0 / progress(a_new, b_new, unit.zeta, unit.gamma))
        # residuals made relative so the iteration is invariant to time units
        mu_mass = (dual.lam * b_new)[edge_of]
        tau_n = np.where(tau[edge_of] > 0, tau[edge_of], 1.0)
        stepped = dual_step(
            dual, (r * g_lam / big_t, mu_mass * g_mu / tau_n), dual.step_size
        )
        new_dual = project_stationary(stepped, r, b_new, edge_of, g_lam, g_mu)

        d_primal = max(abs(a_new - a), abs(b_new - b)) / max(1.0, a_new)
        a, b, dual = a_new, b_new, new_dual
        quiet = quiet + 1 if d_primal < tol else 0
        if quiet >= _QUIET_ITERS:
            converged = True
            break
        if it % _STALL_ITERS == 0:
            # a constant step keeps circling a kink of the max terms
            dual.step_size *= 0.5

    # Polish: with the multiplier pattern frozen, iterate (a, b) <-> (tau, T)
    # to a joint fixed point so the returned point is stationary to round-off.
    for _ in range(200):
        s_lam, s_mu = _sums(dual, t_cmp, tau)
        try:
            a_new, b_new = stationary_ab(s_lam, s_mu, big_t, unit)
        except DualOvershoot:
            break
        a_new = max(a_new, A_MIN)
        tau, big_t = _recover(prob.table, edge_of, a_new, b_new, num_edges)
        g_lam, g_mu = _subgradients(prob.table, edge_of, tau, big_t, a_new, b_new)
        r = float(1.0 / progress(a_new, b_new, unit.zeta, unit.gamma))
        dual = project_stationary(dual, r, b_new, edge_of, g_lam, g_mu)
        done = max(abs(a_new - a), abs(b_new - b)) <= 1e-14 * max(1.0, a_new, b_new)
        a, b = a_new, b_new
        if done:
            break

    dual.lam = dual.lam * prob.scale
    dual.mu = dual.mu * prob.scale
    return a, b, dual, converged, it


def solve(
    scenario: Scenario,
    association: Association,
    eta: float = 0.01,
    tol: float = 1e-6,
    max_iters: int = 10_000,
    resources: Resources | None = None,
) -> Plan:
    """Relaxed optimum by the primal-dual loop, then integer rounding."""
    resources = resources or optimal_resources(scenario)
    prob = _Problem.build(scenario, association, resources)
    return _solve_built(prob, resources, eta, tol, max_iters)


def _solve_built(prob, resources, eta, tol, max_iters) -> Plan:
    a, b, dual, converged, iters = _solve_problem(prob, eta, tol, max_iters)
    if not converged:
        log.warning("solver hit max_iters=%d without converging", max_iters)
    a_int, b_int = _round(prob, a, b)
    return _plan_at(prob, resources, a_int, b_int, a, b, converged=converged, iterations=iters, dual=dual)


def solve_delays(
    table: DelayTable,
    edge_of,
    params: AccuracyParams,
    eta: float = 0.01,
    tol: float = 1e-6,
    max_iters: int = 10_000,
) -> Plan:
    """:func:`solve` on a raw delay table (used for scaling experiments)."""
    edge_of = np.asarray(edge_of, dtype=int)
    prob = _Problem(table, edge_of, params, len(table.t_edge))
    n = len(table.t_cmp)
    return _solve_built(prob, Resources(np.full(n, np.nan), np.full(n, np.nan)), eta, tol, max_iters)


def grid_delays(table: DelayTable, edge_of, params: AccuracyParams, a_max=200, b_max=200):
    """``(a, b, objective)`` of the exhaustive integer minimum on a raw table."""
    prob = _Problem(table, np.asarray(edge_of, dtype=int), params, len(table.t_edge))
    a_vals = np.arange(1, a_max + 1, dtype=float)
    b_vals = np.arange(1, b_max + 1, dtype=float)
    obj = objective_grid(prob, a_vals, b_vals)
    i, j = np.unravel_index(int(np.argmin(obj)), obj.shape)
    return int(a_vals[i]), int(b_vals[j]), float(obj[i, j])


@dataclass(frozen=True)
class KKTReport:
    rounds: float
    sum_lam: float
    t_residual: float
    tau_residual: np.ndarray
    d_a: float
    d_b: float

    @property
    def t_ok(self) -> bool:
        return abs(self.t_residual) <= 1e-3 * self.rounds


def kkt_residuals(
    scenario: Scenario, association: Association, plan: Plan, resources: Resources | None = None
) -> KKTReport:
    """Stationarity residuals of the Lagrangian at a relaxed plan."""
    if plan.dual is None:
        raise ValueError("plan carries no multipliers")
    prob = _Problem.build(scenario, association, resources)
    tau, big_t = _recover(prob.table, prob.edge_of, plan.a_real, plan.b_real, prob.num_edges)
    r = float(prob.rounds(plan.a_real, plan.b_real))
    lam, mu = plan.dual.lam, plan.dual.mu
    per_edge = np.bincount(prob.edge_of, weights=mu, minlength=prob.num_edges)
    s_lam, s_mu = float(lam @ tau), float(mu @ prob.table.t_cmp)
    d_a, d_b = lagrangian_partials(plan.a_real, plan.b_real, big_t, s_lam, s_mu, prob.params)
    return KKTReport(
        rounds=r,
        sum_lam=float(lam.sum()),
        t_residual=float(lam.sum() - r),
        tau_residual=lam * plan.b_real - per_edge,
        d_a=d_a / max(s_mu, 1e-300),
        d_b=d_b / max(s_lam, 1e-300),
    )
