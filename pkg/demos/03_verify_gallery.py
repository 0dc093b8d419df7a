"""Assumption checks and convergence for every finite gallery chain."""

from coupdoob import build, verify_doob
from coupdoob.gallery import ENTRIES

for name, e in ENTRIES.items():
    if e.countable:
        continue
    v = verify_doob(build(name))
    print(f"{name:26s} {v.classification:16s} ipms={v.ipm_count}  {v.summary}")

# %% a closer look at the two-class chain
v = verify_doob(build("disconnected-two-classes"))
for k, mu in enumerate(v.ipms):
    print(f"\nipm[{k}] =", [round(float(w), 4) for w in mu.weights])
    print("  first n with ||P_n(x,.) - mu|| < 1e-8:", v.first_below[k])
