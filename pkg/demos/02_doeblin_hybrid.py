"""Doeblin sets and the hybrid coupling on a random chain.

Pairs whose N-step laws overlap by at least p form the Doeblin set C.  The
hybrid kernel couples maximally on C and moves the components independently
elsewhere; every visit to C is a coupling attempt that succeeds with
probability at least p.
"""

import numpy as np

from coupdoob import (
    attempt_bound,
    attempt_statistics,
    doeblin_set,
    evolve_coupled,
    hybrid_kernel,
    invariant_measures,
    random_chain,
    select_doeblin,
)

chain = random_chain(5, 0.6, seed=7, irreducible=True, aperiodic=True)
print(np.round(chain.matrix, 3))
(mu,) = invariant_measures(chain)

# %% Doeblin sets for a few (N, p)
for N, p in [(1, 0.2), (1, 0.5), (2, 0.5), (3, 0.8)]:
    C = doeblin_set(chain, N, p, mus=[mu])
    print(f"N={N} p={p}: {len(C.members):2d} pairs, mu x mu mass {C.mass:.3f}")

# %% automatic choice
C = select_doeblin(chain, mu, 4)
print(f"\nselected N={C.N}, p={C.p:.4f}, mass {C.mass:.3f}")
S = hybrid_kernel(chain, C)

# %% exact tail against the attempt bound
an = evolve_coupled(S, (0, 4), 15)
print("\n n   P(Z1 != Z2)")
for n in range(0, 16, 3):
    print(f"{n:2d}   {an.uncoupled_tail[n]:.5f}")

# %% Monte Carlo attempt statistics
z0 = next(z for z in sorted(C.members) if z[0] != z[1])
st = attempt_statistics(S, C, z0, replicas=20_000, horizon=200, seed=1, k_max=6)
print(f"\nstart {z0}, in C: {st.start_in_c}")
print(" k   P(T <= tau_k)   stderr    bound")
for k in range(6):
    print(f"{k + 1:2d}   {st.p_hat[k]:.4f}          {st.stderr[k]:.4f}    {st.bound[k]:.4f}")
print("bound respected:", bool(st.satisfies_bound().all()))
print("1 - (1 - p)^3 =", attempt_bound(C.p, 3))
