# %% [markdown]
# # Who talks to which edge
#
# Each edge can host a fixed number of UEs. We compare the conflict-resolving
# SNR heuristic against a sequential greedy fill, a random spread and, on
# small instances, exhaustive search. Latency is the worst UE's
# `a * t_cmp + t_up` at a = 1.

# %%
from __future__ import annotations

import numpy as np

from hflopt.association import associate, exhaustive_oracle, propose
from hflopt.experiments import SweepSpec, generate_scenario

# %%
gaps = []
for seed in range(20):
    sc = generate_scenario(seed, 8, 2)
    gaps.append(propose(sc).max_latency / exhaustive_oracle(sc).max_latency - 1)
print(f"8 UEs / 2 edges: heuristic vs exhaustive, worst gap {100 * max(gaps):.2f}%")

# %% [markdown]
# 100 UEs, edge capacity held at 63 while the number of edges grows.

# %%
spec = SweepSpec("num_edges", (2, 5, 10), tuple(range(20)), strategies=("proposed", "greedy", "random"))
print(f"{'M':>3} {'proposed':>9} {'greedy':>8} {'random':>8}")
for m in spec.values:
    means = []
    for strategy in spec.strategies:
        vals = [associate(spec.cell(m, s), strategy, seed=s).max_latency for s in spec.seeds]
        means.append(np.mean(vals))
    print(f"{int(m):3d} " + " ".join(f"{v:8.3f}" for v in means))

# %% [markdown]
# Greedy lets the first edges fill to capacity, so at M = 5 most UEs crowd
# onto two edges and far UEs pay for it. Load counts make that visible.

# %%
sc = spec.cell(5, 0)
for strategy in spec.strategies:
    res = associate(sc, strategy, seed=0)
    print(f"{strategy:>8}: loads {res.association.loads(sc)}  max latency {res.max_latency:.3f} s")
