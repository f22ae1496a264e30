"""
Decay rate of a degree configuration
====================================

"""

# ## Imports

from cmexplore import DegreeConfigTarget, from_distribution, phase_and_rho
from cmexplore.degree_ld import degree_ld_report

model = from_distribution({1: 0.5, 3: 0.5})
rho = phase_and_rho(model).rho

# ## The typical giant component
#
# A degree-k vertex lies outside the giant with probability rho^k, so the
# giant holds p_k (1 - rho^k) vertices of degree k per vertex. Its rate is zero
# and the fixed point beta equals rho.

typical = {1: 0.5 * (1 - rho), 3: 0.5 * (1 - rho**3)}
rep = degree_ld_report(DegreeConfigTarget.build(typical, model))
print("typical:", {k: round(v, 4) for k, v in typical.items()}, "beta", rep.beta, "rate", rep.I1)

# ## Atypical targets

for q in ({1: 0.25, 3: 0.45}, {1: 0.30, 3: 0.46}, {1: 0.1, 3: 0.3}, {3: 0.4}):
    rep = degree_ld_report(DegreeConfigTarget.build(q, model))
    print(q, {k: round(v, 5) for k, v in rep.as_dict().items() if k != "matching_bounds"})
