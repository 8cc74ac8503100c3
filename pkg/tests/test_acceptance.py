"""End-to-end acceptance checks, one group per criterion.

Every check records a PASS/FAIL line (shown in the terminal summary) before
asserting, so a failing criterion is reported rather than hidden.
"""

from __future__ import annotations

import itertools
import json
import time

import numpy as np
import pytest
from scipy.stats import spearmanr

from hflopt import flsim
from hflopt.association import associate, exhaustive_oracle, propose
from hflopt.cli import main
from hflopt.concavity import concavity_check
from hflopt.experiments import SweepSpec, generate_scenario, run_sweep
from hflopt.optimizer import grid_oracle, kkt_residuals, solve

from conftest import record

SEEDS = range(5)

# tolerances
ORACLE_GAP = 0.02
KKT_RTOL = 1e-3
FD_RTOL = 1e-4
DET_ATOL = 1e-12
SPEARMAN_MAX = 0.5
ASSOC_ORACLE_GAP = 0.05
GRAD_RTOL = 1e-6
R2_MIN = 0.95


@pytest.fixture(scope="module")
def small_suite():
    out = []
    for seed in SEEDS:
        sc = generate_scenario(seed, 8, 2)
        assoc = propose(sc).association
        out.append((sc, assoc, solve(sc, assoc)))
    return out


# 1 ------------------------------------------------------------------------------------


def test_c1_solver_matches_grid_oracle():
    start = time.perf_counter()
    worst = 0.0
    ok = True
    for seed in SEEDS:
        sc = generate_scenario(seed, 8, 2)
        assoc = propose(sc).association
        plan = solve(sc, assoc)
        ref = grid_oracle(sc, assoc, (1, 200), (1, 200))
        gap = plan.objective / ref.objective - 1.0
        worst = max(worst, gap)
        ok &= gap <= ORACLE_GAP
    elapsed = time.perf_counter() - start
    ok &= elapsed < 10.0
    assert record(1, ok, f"worst gap to grid {worst:.3%} (<= 2%), {elapsed:.2f} s (< 10 s)")


# 2 ------------------------------------------------------------------------------------


def test_c2_kkt_residuals(small_suite):
    worst_t, worst_tau = 0.0, 0.0
    ok = True
    for sc, assoc, plan in small_suite:
        rep = kkt_residuals(sc, assoc, plan)
        t_rel = abs(rep.t_residual) / rep.rounds
        lam = plan.dual.lam
        active = lam > 0
        tau_rel = np.abs(rep.tau_residual[active]) / (lam[active] * plan.b_real)
        worst_t = max(worst_t, t_rel)
        worst_tau = max(worst_tau, float(tau_rel.max(initial=0.0)))
        ok &= plan.converged and t_rel <= KKT_RTOL and bool(np.all(tau_rel <= KKT_RTOL))
    assert record(2, ok, f"max |sum(lam)-R|/R = {worst_t:.1e}, max edge residual = {worst_tau:.1e} (<= 1e-3)")


# 3 ------------------------------------------------------------------------------------


def test_c3_concavity_suite():
    grid = np.linspace(0.1, 100.0, 50)
    bad = []
    worst_fd = 0.0
    f_aa_max = -np.inf
    for zeta, gamma in itertools.product(range(1, 11), repeat=2):
        rep = concavity_check(zeta, gamma, grid, grid, fd_stride=5, fd_rtol=FD_RTOL, det_atol=DET_ATOL)
        worst_fd = max(worst_fd, rep.fd_max_rel_err)
        f_aa_max = max(f_aa_max, rep.f_aa_max)
        if not rep.ok:
            bad.append((zeta, gamma))
    assert record(
        3, not bad, f"100 (zeta, gamma) pairs, max f_aa = {f_aa_max:.2e}, worst FD error {worst_fd:.1e}, failures {bad}"
    )


# 4 ------------------------------------------------------------------------------------


def test_c4_epsilon_trend():
    spec = SweepSpec("epsilon", (0.5, 0.25, 0.1, 0.05), (0,), num_ues=100, num_edges=5)
    rows = run_sweep(spec)
    rounds = [r.rounds for r in rows]
    ab = [r.a_int * r.b_int for r in rows]
    ok = all(x < y for x, y in zip(rounds, rounds[1:])) and all(x <= y for x, y in zip(ab, ab[1:]))
    ok &= all(r.converged for r in rows)
    assert record(4, ok, f"R = {[round(r, 3) for r in rounds]}, a*b = {ab}")


# 5 ------------------------------------------------------------------------------------


def test_c5_no_trend_in_ue_count():
    spec = SweepSpec("ues_per_edge", tuple(range(10, 101, 10)), tuple(range(10)), num_edges=5)
    rows = run_sweep(spec)
    assert all(not r.error for r in rows)
    n = [r.axis_value * spec.num_edges for r in rows]
    rho_a = spearmanr(n, [r.a_int for r in rows]).statistic
    rho_b = spearmanr(n, [r.b_int for r in rows]).statistic
    ok = abs(rho_a) < SPEARMAN_MAX and abs(rho_b) < SPEARMAN_MAX
    assert record(5, ok, f"Spearman a* {rho_a:+.3f}, b* {rho_b:+.3f} over {len(rows)} points (|rho| < 0.5)")


# 6 ------------------------------------------------------------------------------------


@pytest.fixture(scope="module")
def fig5_means():
    spec = SweepSpec("num_edges", (2, 5, 10), tuple(range(20)), strategies=("proposed", "greedy", "random"))
    means = {}
    for m in spec.values:
        for strategy in spec.strategies:
            vals = []
            for seed in spec.seeds:
                sc = spec.cell(m, seed)
                vals.append(associate(sc, strategy, a=spec.latency_a, seed=seed).max_latency)
            means[int(m), strategy] = float(np.mean(vals))
    return means


def _fmt(means, m):
    return "/".join(f"{means[m, s]:.3f}" for s in ("proposed", "greedy", "random"))


def test_c6_proposed_not_worse_than_greedy(fig5_means):
    ok = all(fig5_means[m, "proposed"] <= fig5_means[m, "greedy"] for m in (2, 5, 10))
    detail = ", ".join(f"M={m}: {_fmt(fig5_means, m)}" for m in (2, 5, 10))
    assert record(6, ok, f"proposed <= greedy [proposed/greedy/random means {detail}]")


def test_c6_greedy_not_worse_than_random(fig5_means):
    bad = [m for m in (2, 5, 10) if fig5_means[m, "greedy"] > fig5_means[m, "random"]]
    assert record(6, not bad, f"greedy <= random (violated at M={bad})" if bad else "greedy <= random")


def test_c6_proposed_nonincreasing_in_edges(fig5_means):
    seq = [fig5_means[m, "proposed"] for m in (2, 5, 10)]
    ok = all(x >= y for x, y in zip(seq, seq[1:]))
    assert record(6, ok, "proposed mean nonincreasing in M")


def test_c6_proposed_near_exhaustive_oracle():
    worst = 0.0
    for seed in range(20):
        sc = generate_scenario(seed, 8, 2)
        worst = max(worst, propose(sc).max_latency / exhaustive_oracle(sc).max_latency - 1.0)
    assert record(6, worst <= ASSOC_ORACLE_GAP, f"N=8/M=2 worst gap to exhaustive oracle {worst:.2%} (<= 5%)")


# 7 ------------------------------------------------------------------------------------

EDGE_OF = np.array([0, 0, 0, 0, 1, 1, 1, 1])


@pytest.fixture(scope="module")
def tasks():
    return flsim.make_tasks(0, 10, 8)


def test_c7_gradient_check(tasks):
    rng = np.random.default_rng(0)
    worst = 0.0
    h = 1e-4
    for t in tasks.tasks:
        w = rng.normal(size=t.dim) * 5
        fd = np.array(
            [(flsim.local_loss(t, w + h * e) - flsim.local_loss(t, w - h * e)) / (2 * h) for e in np.eye(t.dim)]
        )
        worst = max(worst, np.linalg.norm(fd - t.gradient(w)) / np.linalg.norm(t.gradient(w)))
    assert record(7, worst <= GRAD_RTOL, f"gradient FD rel. error {worst:.1e} (<= 1e-6)")


def test_c7_monotone_descent(tasks):
    ok = True
    for a, b in itertools.product((1, 3, 10), repeat=2):
        rep = flsim.run(tasks, EDGE_OF, a, b, step_size=1.0 / tasks.smoothness, epsilon=0.01)
        ok &= bool(np.all(np.diff(rep.losses) <= 0.0))
    assert record(7, ok, "global loss nonincreasing at step 1/L")


def test_c7_aggregation_composition():
    rng = np.random.default_rng(1)
    models = rng.integers(-100, 100, size=(8, 10)).astype(float)
    weights = rng.integers(1, 9, size=8).astype(float)
    groups = [np.flatnonzero(EDGE_OF == m) for m in (0, 1)]
    nested = flsim.cloud_aggregate(
        [flsim.edge_aggregate(models[g], weights[g]) for g in groups], [weights[g].sum() for g in groups]
    )
    flat = weights @ models / weights.sum()
    err = float(np.max(np.abs(nested - flat)))
    ok = err <= 4 * np.finfo(float).eps * float(np.max(np.abs(flat)))
    assert record(7, ok, f"cloud(edge) vs flat mean max error {err:.1e}")


def test_c7_rounds_linear_in_log_target(tasks):
    eps = np.array([0.3, 0.1, 0.03, 0.01])
    rounds = [flsim.run(tasks, EDGE_OF, 3, 2, epsilon=e).rounds for e in eps]
    r2 = float(np.corrcoef(np.log(1 / eps), rounds)[0, 1] ** 2)
    assert record(7, r2 >= R2_MIN, f"rounds {rounds} vs ln(1/eps): R^2 = {r2:.4f} (>= 0.95)")


def test_c7_rounds_weakly_decrease_in_ab(tasks):
    rounds = {
        (a, b): flsim.run(tasks, EDGE_OF, a, b, epsilon=0.01).rounds
        for a, b in itertools.product(range(1, 11), repeat=2)
    }
    violations = [
        (p, q)
        for p, q in itertools.permutations(rounds, 2)
        if p[0] * p[1] < q[0] * q[1] and rounds[p] < rounds[q]
    ]
    assert record(7, not violations, f"rounds-to-eps vs a*b over a, b in 1..10: {len(violations)} violations")


# 8 ------------------------------------------------------------------------------------


def test_c8_sweep_byte_identical(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(
        json.dumps(
            {
                "axis": "num_edges",
                "values": [2, 5],
                "seeds": [0, 1, 2],
                "strategies": ["proposed", "greedy", "random"],
                "num_ues": 40,
            }
        )
    )
    outs = [tmp_path / "run1.csv", tmp_path / "run2.csv"]
    codes = [main(["sweep", str(spec), "--out", str(p)]) for p in outs]
    same = outs[0].read_bytes() == outs[1].read_bytes()
    assert record(8, same and codes == [0, 0], f"two runs byte-identical: {same}, exit codes {codes}")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
