"""Fluctuations against their stable limits.

Compares the centred number of coalescences with its stable limit at growing n.
The KS distance shrinks, but slowly: second-order terms decay like a small
power of n, which is why sample sizes in the thousands still reject.
"""
import numpy as np

from coalscope import CoalescentMeasure, simulate
from coalscope.limits import centering_scaling, sample_limit
from coalscope.rng import replicate_rng
from coalscope.stats import ks_two_sample

m = CoalescentMeasure.beta(1.5)
lim = sample_limit("tau", {"alpha": 1.5}, replicate_rng(3, 0, "demo/limit"), 4000).value

# %% KS distance along n
for n in (500, 2000, 5000, 20_000):
    r = simulate(m, n, 2000, seed=3, tag=f"demo/tau/n={n}")
    stat = centering_scaling("tau", m, n).apply(r.tau)
    ks = ks_two_sample(stat, lim)
    print(f"n={n:6d}  mean stat={stat.mean():+.3f}  KS={ks.statistic:.3f}  p={ks.p_value:.2g}")

# %% the limit has a heavy right tail and a light left one
print("quantiles of the limit:", np.round(np.quantile(lim, [0.001, 0.5, 0.999]), 2))
