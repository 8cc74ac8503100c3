# %% [markdown]
# # Hierarchical training on quadratics
#
# Eight UEs with strongly convex quadratic losses, split over two edges.
# Each UE runs `a` gradient steps between edge averages, and the cloud
# averages after `b` edge rounds. The exact optimum is known, so the
# relative optimality gap is measured directly.

# %%
from __future__ import annotations

import numpy as np

from hflopt import flsim

tasks = flsim.make_tasks(seed=0, dim=10, num_ues=8)
edge_of = np.array([0, 0, 0, 0, 1, 1, 1, 1])
lo = min(t.eig_range[0] for t in tasks.tasks)
print(f"curvature range [{lo:.4f}, {tasks.smoothness:.4f}]")

# %% [markdown]
# Rounds needed grow linearly in ln(1/eps).

# %%
eps = np.array([0.3, 0.1, 0.03, 0.01])
rounds = np.array([flsim.run(tasks, edge_of, 3, 2, epsilon=e).rounds for e in eps])
x = np.log(1 / eps)
slope, icpt = np.polyfit(x, rounds, 1)
r2 = np.corrcoef(x, rounds)[0, 1] ** 2
for e, r in zip(eps, rounds):
    print(f"eps={e:<5} rounds={r}")
print(f"fit: rounds = {slope:.2f} ln(1/eps) + {icpt:.2f}, R^2 = {r2:.4f}")

# %% [markdown]
# More local work per cloud round means fewer cloud rounds.

# %%
grid = np.array([[flsim.run(tasks, edge_of, a, b, epsilon=0.01).rounds for b in range(1, 11)] for a in range(1, 11)])
print("rounds to eps = 0.01 (rows a = 1..10, columns b = 1..10)")
print(grid)

# %% [markdown]
# The loss curve, time-stamped with a per-round wall clock.

# %%
rep = flsim.run(tasks, edge_of, 5, 2, epsilon=0.05, round_time=0.8)
for r, t, loss, gap in rep.rows()[:6]:
    print(f"round {r:2d}  t={t:5.1f}s  loss={loss:10.4f}  gap={gap:.4f}")
