"""
Estimating component probabilities
==================================

"""

# ## Imports

from cmexplore import BandControl, EventSpec, exact_probability, from_distribution, is_probability, mc_probability
from cmexplore.degree_ld import DegreeConfigTarget, rate_I1
from cmexplore.mc import mc_sweep

# ## A tiny instance with an exact answer
#
# Two degree-3 vertices and four leaves; the event asks for a component made
# of the two degree-3 vertices alone.

d = [3, 3, 1, 1, 1, 1]
spec = EventSpec({3: 1 / 3}, eps=0.01)
print("exact:", exact_probability(d, spec))

plain = mc_probability(d, spec, 20_000, seed=1)
print("plain:", plain.p_hat, "std err", plain.std_err)

# Doubling the rate of active-active pairings makes the event more likely;
# the likelihood ratio of the jump sequence corrects the bias.
tilted = is_probability(d, spec, BandControl.per_type({0: 2.0}), 20_000, seed=1)
print("tilted:", tilted.p_hat, "std err", tilted.std_err)

# ## Decay with the graph size

model = from_distribution({1: 0.5, 3: 0.5})
q = {1: 0.25, 3: 0.45}
for r in mc_sweep(model, EventSpec(q, eps=0.02), [50, 100, 200], replicas=3000, seed=7):
    print(f"n={r.n}: p_hat {r.p_hat:.4f}, -(1/n) log p_hat {r.rate_hat:.4f}")
print("limit reference:", rate_I1(DegreeConfigTarget.build(q, model)))
