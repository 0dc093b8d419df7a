"""Probability of visiting a set infinitely often, exact and simulated."""

import numpy as np

from coupdoob import estimate_visit_probability, recurrence_psi, structure
from coupdoob.chain import FiniteChain

# 0 and 1 form a closed class, 4 is absorbing, 2 and 3 are transient
chain = FiniteChain.from_matrix([
    [0.3, 0.7, 0.0, 0.0, 0.0],
    [0.6, 0.4, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.3, 0.3, 0.2],
    [0.0, 0.1, 0.4, 0.0, 0.5],
    [0.0, 0.0, 0.0, 0.0, 1.0],
])
st = structure(chain)
print("classes:", st.classes, "recurrent:", st.recurrent)

rep = recurrence_psi(chain, {1})
print("psi:", np.round(rep.psi, 6))
print("harmonic residual:", rep.harmonic_residual(chain))

# %% Monte Carlo: visits to B during [n/2, n]
for x in chain.states:
    est = estimate_visit_probability(chain, x, {1}, 400, 20_000, seed=x, start=200)
    print(f"x={x}: exact {rep[x]:.4f}  simulated {est.point:.4f} +- {est.stderr:.4f}")
