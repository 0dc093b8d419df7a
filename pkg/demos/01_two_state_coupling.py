"""Maximal coupling of a two-state chain, step by step.

Rows (0.5, 0.5) and (0.2, 0.8).  The two rows overlap in mass 0.7, so a
maximal coupling started from (0, 1) merges with probability 0.7 at every
step and the uncoupled tail is 0.3^n.
"""

import numpy as np

from coupdoob import (
    build,
    evolve_coupled,
    invariant_measures,
    maximal_coupling_row,
    maximal_kernel,
    split,
)

chain = build("two-state", 0.5, 0.2)
print("transition matrix\n", chain.matrix)

# %% invariant measure
(mu,) = invariant_measures(chain)
print("\nipm:", np.round(mu.weights, 6), " (2/7, 5/7 =", (2 / 7, 5 / 7), ")")

# %% splitting the two rows
parts = split(chain, 0, 1)
print("\noverlap p:", parts.overlap_mass)
print("common part:", parts.common_part.as_dict())
print("residuals:", parts.residual_1.as_dict(), parts.residual_2.as_dict())

# %% one row of the maximal coupling
row = maximal_coupling_row(chain, 0, 1)
print("\nmaximal coupling row from (0, 1):")
for pair, w in sorted(row.as_dict().items()):
    print(f"  {pair}: {w:.3f}")

# %% exact evolution of the coupled pair
an = evolve_coupled(maximal_kernel(chain), (0, 1), 10)
print("\n n   P(Z1 != Z2)   ||P_n(0,.) - P_n(1,.)||   0.3^n")
for n in range(11):
    print(f"{n:2d}   {an.uncoupled_tail[n]:.6e}   {an.tv_curve[n]:.6e}"
          f"              {0.3**n:.6e}")
print("\nlargest violation of tv <= 2 * tail:", max(0.0, -an.bound_slack.min()))
