# %% [markdown]
# # Choosing local and edge iteration counts
#
# For a fixed association the primal-dual loop returns a relaxed optimum,
# which is then rounded to integers. An exhaustive grid over
# (a, b) in [1, 200]^2 serves as ground truth.

# %%
from __future__ import annotations

import time

from hflopt.association import propose
from hflopt.experiments import generate_scenario
from hflopt.optimizer import grid_oracle, kkt_residuals, solve

# %%
print(f"{'seed':>4} {'a':>4} {'b':>3} {'grid a':>6} {'grid b':>6} {'gap %':>7} {'iters':>6} {'ms':>6}")
for seed in range(5):
    sc = generate_scenario(seed, 8, 2)
    assoc = propose(sc).association
    t0 = time.perf_counter()
    plan = solve(sc, assoc)
    ms = 1e3 * (time.perf_counter() - t0)
    ref = grid_oracle(sc, assoc)
    gap = 100 * (plan.objective / ref.objective - 1)
    print(f"{seed:4d} {plan.a_int:4d} {plan.b_int:3d} {ref.a_int:6d} {ref.b_int:6d} {gap:7.3f} {plan.iterations:6d} {ms:6.1f}")

# %% [markdown]
# At the returned point the multipliers satisfy the stationarity conditions
# in T and in each edge's round time.

# %%
sc = generate_scenario(0, 8, 2)
assoc = propose(sc).association
plan = solve(sc, assoc)
kkt = kkt_residuals(sc, assoc, plan)
print(f"relaxed (a, b) = ({plan.a_real:.3f}, {plan.b_real:.3f})")
print(f"sum(lambda) = {plan.dual.lam.sum():.6f}   R = {kkt.rounds:.6f}")
print(f"edge residuals lambda_m b - sum mu = {kkt.tau_residual}")

# %% [markdown]
# Tightening the accuracy target only rescales the objective by
# ln(1/eps), so the best schedule stays put while the round count grows.

# %%
from dataclasses import replace

from hflopt.scenario import Scenario

big = generate_scenario(0, 100, 5)
assoc = propose(big).association
for eps in (0.5, 0.25, 0.1, 0.05):
    s = Scenario(big.ues, big.edges, big.noise_power, big.carrier_wavelength, replace(big.accuracy, epsilon=eps))
    p = solve(s, assoc)
    print(f"eps={eps:<5} a={p.a_int:3d} b={p.b_int:2d} R={p.rounds:7.3f} total={p.objective:8.3f} s")
