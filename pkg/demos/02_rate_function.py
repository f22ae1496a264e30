"""
Rates of paths and band controls
================================

"""

# ## Imports

from cmexplore import BandControl, PathPair, from_distribution, lln_path, phase_and_rho, rate_integral
from cmexplore.rate import cost_of_control, euler_path, perturb_bands, perturbation_bound

model = from_distribution({1: 0.5, 3: 0.5})
T = 0.9 * phase_and_rho(model).absorption_time(model)

# ## The limit path costs nothing

P = PathPair.from_lln(lln_path(model, T, 4001))
res = rate_integral(P, p=model.p)
print("rate of the limit path:", res.value)

# ## Tilting one jump type
#
# Speeding up the consumption of degree-3 vertices produces a different
# path with a positive rate, growing with the size of the tilt.

for delta in (0.01, 0.05, 0.2):
    Q = euler_path(model.p, BandControl.per_type({3: 1 + delta}), T, 4001)
    print(f"tilt 1 + {delta}: rate {rate_integral(Q).value:.3e}")

# ## The optimal control and its perturbation
#
# The rate is attained by the band-constant control with intensity
# consumption / band width on every slice. Spreading that control over a
# slightly wider band keeps the consumption and raises the cost by a
# bounded amount.

Q = euler_path(model.p, BandControl.per_type({1: 0.7, 3: 1.3}), T, 2001)
res = rate_integral(Q)
ctl = res.as_control(Q)
print("cost of the optimal control:", cost_of_control(Q, ctl), "rate:", res.value)
for eps in (0.2, 0.05, 0.01):
    inflation = cost_of_control(Q, perturb_bands(ctl, eps, Q)) - res.value
    print(f"eps {eps}: inflation {inflation:.3e} <= bound {perturbation_bound(res.value, eps, Q.T):.3e}")
