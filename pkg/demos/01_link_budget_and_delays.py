# %% [markdown]
# # From positions to per-round delays
#
# A UE's round costs local compute plus one model upload. Here we build a
# small deployment by hand, then look at how distance turns into seconds.

# %%
from __future__ import annotations

import numpy as np

from hflopt.accuracy import AccuracyParams, cloud_rounds
from hflopt.experiments import generate_scenario
from hflopt.scenario import (
    Association,
    channel_gain,
    cloud_round_delay,
    dbm_to_w,
    delay_table,
    total_time,
    uplink_rate,
    wavelength_from_ghz,
)

# %% [markdown]
# Free-space gain at 28 GHz falls off with the square of distance, but the
# rate only feels it through a log, so doubling distance costs far less
# than half the throughput.

# %%
lam = wavelength_from_ghz(28.0)
p = dbm_to_w(10.0)
print(f"{'dist m':>8} {'gain':>12} {'rate Mbit/s':>12} {'upload s':>9}")
for d in (10, 50, 100, 200, 400):
    g = channel_gain((0.0, 0.0), (d, 0.0), lam)
    r = uplink_rate(1e6, g, p, 1e-13)
    print(f"{d:8d} {g:12.3e} {r / 1e6:12.3f} {1e6 / r:9.4f}")

# %% [markdown]
# A seeded 8-UE / 2-edge deployment. Compute time does not depend on the
# edge; upload time does.

# %%
sc = generate_scenario(0, 8, 2)
table = delay_table(sc)
print("t_cmp  (s):", np.round(table.t_cmp, 4))
print("t_up   (s):\n", np.round(table.t_up, 4))
print("t_edge (s):", table.t_edge)

# %% [markdown]
# The wall clock of a cloud round is the slowest edge's `b` edge rounds
# plus its upload to the cloud. More local work per edge round (`a`) and
# more edge rounds (`b`) make each cloud round longer but cut how many are
# needed.

# %%
assoc = Association({u.id: int(np.argmin(table.t_up[n])) for n, u in enumerate(sc.ues)})
print("loads per edge:", assoc.loads(sc))
print(f"{'a':>4} {'b':>3} {'T s':>9} {'R':>8} {'R*T s':>9}")
for a, b in [(1, 1), (10, 1), (10, 5), (40, 3), (100, 10)]:
    big_t = cloud_round_delay(sc, assoc, a, b)
    r = cloud_rounds(a, b, sc.accuracy)
    print(f"{a:4d} {b:3d} {big_t:9.4f} {r:8.3f} {total_time(sc, assoc, a, b):9.4f}")

# %% [markdown]
# Rounds-to-target scale with ln(1/eps), so tightening the target raises the
# total time by a fixed factor regardless of the schedule.

# %%
for eps in (0.5, 0.1, 0.01):
    acc = AccuracyParams(zeta=sc.accuracy.zeta, gamma=sc.accuracy.gamma, epsilon=eps)
    print(f"eps={eps:<5} R(20, 3) = {cloud_rounds(20, 3, acc):.3f}")
