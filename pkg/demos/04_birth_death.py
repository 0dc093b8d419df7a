"""Two birth-death chains on the nonnegative integers.

With upward drift and 0 absorbing, the point mass at 0 is the only invariant
measure, but from i > 0 the chain escapes with probability 1 - 2^-i, so the
distance to the ipm does not go to 0.  With downward drift and a holding
state at 0 the chain converges from every start even though no two distinct
starts ever have the same support.
"""

from coupdoob import build, estimate_hit_probability, nonconvergence_lower_bound

up = build("doob-counterexample")
print("i   P_i(hit 0)   2^-i      lower bound on lim ||P_n(i,.) - delta_0||")
for i in (1, 2, 3):
    est = estimate_hit_probability(up, i, 0, horizon=2000, replicas=50_000, seed=3)
    print(f"{i}   {est.point:.4f}       {2.0**-i:.4f}    {nonconvergence_lower_bound(est):.4f}")
print("exact:", [str(up.hit_zero_probability(i)) for i in (1, 2, 3)])

# %% the drift-down chain
down = build("remark3-drift-down")
mu = down.invariant()
print("\nmu(0..4):", [round(mu(i), 5) for i in range(5)])
print("same supports from 0 and 1 within 50 steps?", down.check_equivalence(0, 1, 50))
print("first n with overlapping supports:", down.check_nonsingular(0, 1, 50))
for x in (0, 3, 6):
    curve = down.convergence_curve(x, mu, 2000, stop_below=1e-8)
    print(f"from {x}: below 1e-8 after {curve.size - 1} steps")
