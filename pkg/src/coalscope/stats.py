"""Sample summaries and the statistical comparisons used by the runners."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats as _st

QUANTILES = (0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99)


@dataclass(frozen=True)
class KSResult:
    statistic: float
    p_value: float


def ks_two_sample(x, y) -> KSResult:
    """Two-sample Kolmogorov-Smirnov test (exact p-value for small samples)."""
    r = _st.ks_2samp(np.asarray(x, float), np.asarray(y, float), method="auto")
    return KSResult(float(r.statistic), float(min(max(r.pvalue, 0.0), 1.0)))


def ks_one_sample(x, cdf) -> KSResult:
    r = _st.kstest(np.asarray(x, float), cdf)
    return KSResult(float(r.statistic), float(r.pvalue))


def summarize(x) -> dict:
    x = np.asarray(x, dtype=float)
    q = np.quantile(x, QUANTILES)
    return {
        "size": int(x.size),
        "mean": float(x.mean()),
        "sd": float(x.std(ddof=1)) if x.size > 1 else 0.0,
        "quantiles": {f"{p:g}": float(v) for p, v in zip(QUANTILES, q)},
    }


def truncated_mean(x, level: float = 1e-4):
    """Mean and standard error after clipping to the ``level`` and ``1-level`` quantiles.

    Stable samples have infinite variance; clipping the extreme tails gives a
    usable standard error at the price of a bias of order ``level``.
    """
    x = np.asarray(x, dtype=float)
    lo, hi = np.quantile(x, [level, 1.0 - level])
    c = np.clip(x, lo, hi)
    return float(c.mean()), float(c.std(ddof=1) / np.sqrt(c.size))


def loglog_slope(n, y) -> float:
    """Least-squares slope of ``log y`` against ``log n``."""
    n = np.asarray(n, dtype=float)
    y = np.asarray(y, dtype=float)
    if n.size < 2 or np.any(y <= 0):
        return float("nan")
    return float(np.polyfit(np.log(n), np.log(y), 1)[0])
