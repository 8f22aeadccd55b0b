"""Mutation counts and the Watterson-type estimator.

K is Poisson given the tree length, so its fluctuations mix the length
fluctuations with Poisson noise; which one wins depends on alpha against
sqrt(2).
"""
import numpy as np

from coalscope import CoalescentMeasure, simulate
from coalscope.chain import watterson_estimate
from coalscope.limits import centering_scaling, mutation_scenario

n, reps, t, theta = 5000, 2000, 0.25, 1.0

# %% regime and normalised counts for three alphas
for alpha in (1.3, 2 ** 0.5, 1.7):
    m = CoalescentMeasure.beta(alpha)
    sc = mutation_scenario(alpha)
    r = simulate(m, n, reps, grid=[t], theta=theta, seed=4, tag=f"demo/mut/{alpha}")
    z = centering_scaling(sc, m, n, t, theta).apply(r.K_t[:, 0])
    print(f"alpha={alpha:.4f} {sc.value:14s} mean={z.mean():+.3f} sd={z.std():.3f}")

# %% estimating theta from the total count
for m in (CoalescentMeasure.kingman(), CoalescentMeasure.beta(1.5)):
    r = simulate(m, n, reps, theta=theta, seed=5, tag="demo/watterson")
    est = watterson_estimate(r.K_total, n, m)
    print(f"{m.family.value:8s} mean estimate {np.mean(est):.4f} (true {theta})")
