"""Tree lengths from simulated jump chains.

Simulates Beta(2-alpha, alpha) coalescents, checks the first-order length
profile a(t), and looks at the Kingman total length against the Gumbel law.
"""
import math

import numpy as np

from coalscope import CoalescentMeasure, simulate
from coalscope.limits import a_of_t, centering_scaling
from coalscope.stats import summarize

m = CoalescentMeasure.beta(1.5)
n, reps = 5000, 2000
grid = [0.05, 0.1, 0.25, 0.4]

# %% partial lengths L_t, scaled by n^(alpha-2), against a(t)
r = simulate(m, n, reps, grid=grid, seed=1, tag="demo/lengths")
for j, t in enumerate(grid):
    got = np.mean(r.L_t[:, j]) * n ** (m.alpha - 2)
    print(f"t={t:4.2f}  mean n^(a-2) L_t={got:.4f}  a(t)={a_of_t(m, t):.4f}")

# %% the three versions of the length on the same paths
j = grid.index(0.25)
print("L_t      ", summarize(r.L_t[:, j])["quantiles"])
print("L~_t     ", summarize(r.L_tilde_t[:, j])["quantiles"])
print("number of coalescences / n:", r.tau.mean() / n)

# %% Kingman: L/2 - log n is close to a standard Gumbel
k = simulate(CoalescentMeasure.kingman(), n, reps, seed=2, tag="demo/kingman")
z = centering_scaling("kingman-gumbel", k.measure, n).apply(k.L_total)
print(f"mean of L/2 - log n: {z.mean():.4f} (Euler gamma 0.5772)")
print(f"mean of L/(2 log n): {np.mean(k.L_total) / (2 * math.log(n)):.4f}")
