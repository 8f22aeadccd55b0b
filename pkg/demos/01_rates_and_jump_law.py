"""Merger rates and the law of the first jump.

Builds the total merger rate g_n for a few Beta coalescents, compares it with
its power law, and watches the jump-size law approach its n -> infinity limit.
"""
import numpy as np

from coalscope import CoalescentMeasure
from coalscope.measures import (gn_asymptote_check, limit_jump_tail, mean_first_jump,
                                total_rate, total_rate_integral, transition_table)

# %% total rate, two ways
m = CoalescentMeasure.beta(1.5)
for n in (2, 10, 100, 1000):
    print(f"n={n:5d}  g_n={total_rate(m, n):.10g}  integral form={total_rate_integral(m, n):.10g}")

# %% g_n against C0 Gamma(2-alpha) n^alpha
for alpha in (1.2, 1.5, 1.8):
    tab = gn_asymptote_check(CoalescentMeasure.beta(alpha), [10 ** 3, 10 ** 4, 10 ** 5, 10 ** 6])
    print(f"alpha={alpha}: ratio", np.round(tab.ratio, 6))

# %% jump law: finite n vs limit, first few tail values
k = np.arange(1, 8)
print("limit tail     ", np.round(limit_jump_tail(1.5, k), 5))
for n in (100, 1000, 10_000):
    print(f"tail at n={n:5d}", np.round(transition_table(m, n).tail()[:7], 5))

# %% the mean jump creeps up to 1/gamma = 2 only slowly (heavy tail)
for n in (100, 1000, 10_000, 100_000):
    print(f"E[X] at n={n:6d}: {mean_first_jump(m, n):.4f}")
