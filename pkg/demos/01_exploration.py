"""
Exploring a configuration-model graph edge by edge
==================================================

"""

# ## Imports

import numpy as np

from cmexplore import eea_run, from_sequence, lln_path, phase_and_rho
from cmexplore.eea import scaled_embedding
from cmexplore.graph_gen import components_of

# ## A degree sequence
#
# Half the vertices are leaves and half have degree three, so the graph has
# a giant component.

n = 20_000
degrees = np.array([1, 3] * (n // 2))
model = from_sequence(degrees)
phase = phase_and_rho(model)
print(phase.regime, "rho =", round(phase.rho, 6), "tau =", round(phase.tau, 6))

# ## One exploration run
#
# Every step either pairs two active half-edges or wakes a sleeping vertex.
# Components are the excursions of the active count above zero.

rng = np.random.default_rng(1)
graph, log, comps = eea_run(degrees, rng)
print("steps:", log.steps, "= edges + components:", graph.m + len(comps))

giant = max(comps, key=lambda c: c.edge_count)
print("giant edges / n:", giant.edge_count / n, "limit:", phase.tau)
print("giant degree configuration / n:", {k: v / n for k, v in sorted(giant.degree_config.items())})

# union-find on the realized graph gives the same components
same = sorted(c.key() for c in comps) == sorted(c.key() for c in components_of(graph))
print("excursions agree with union-find:", same)

# ## The scaled path against its limit
#
# Nominal holding times have mean 1/n, so step j sits near time j/n.

x0, xk = scaled_embedding(log)
tj = np.arange(len(x0)) / n
L = lln_path(model, tj[-1], 2001)
for k in (0, 1, 3):
    sim = x0 if k == 0 else xk[:, k]
    dev = np.abs(np.interp(L.t, tj, sim) - L.zeta[:, k]).max()
    print(f"sup |sim - limit| for coordinate {k}: {dev:.4f}")
