"""Block-counting jump chain, tree lengths and mutation counts.

The jump chain ``Y`` starts at ``n`` and loses ``X_k >= 1`` lineages at its
``k``-th jump until a single lineage remains after ``tau_n`` jumps.  The
state ``Y_k`` is held for an exponential time ``E_k / g_{Y_k}``; the tree
length accumulated up to the ``floor(n t)``-th coalescence is

    L_t = sum_{k <= floor(n t) ^ (tau-1)} (Y_k / g_{Y_k}) E_k.

The exponential draws ``E_k`` are stored in the path, so the mean-field
version (``E_k`` replaced by 1) and the power-sum version
(``sum Y_k^(1-alpha)``) are computed on the very same realisation.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import ArgumentError, CoalscopeError, UnsupportedFamilyError
from .measures import (CoalescentMeasure, Family, merger_start_table, rate_table,
                       transition_table)
from .rng import DEFAULT_SEED, replicate_rng, resolve_threads

__all__ = [
    "JumpChainPath",
    "TreeStatistics",
    "ReplicateSet",
    "sample_jump_chain",
    "tree_statistics",
    "watterson_estimate",
    "simulate",
]


@dataclass(frozen=True)
class JumpChainPath:
    """One realisation of the jump chain.

    Only the jump sizes (int32) and the exponential draws (float64) are
    stored; states and holding times are derived on demand.
    """

    measure: CoalescentMeasure
    n0: int
    x: np.ndarray
    exp_draws: np.ndarray
    rates: np.ndarray

    @property
    def tau(self) -> int:
        return int(self.x.shape[0])

    @property
    def y(self) -> np.ndarray:
        """States ``Y_0 = n0 > Y_1 > ... > Y_tau = 1``."""
        y = np.empty(self.tau + 1, dtype=np.int64)
        y[0] = self.n0
        np.subtract(self.n0, np.cumsum(self.x, dtype=np.int64), out=y[1:])
        return y

    @property
    def holding(self) -> np.ndarray:
        return self.exp_draws / self.rates[self.y[:-1]]

    @property
    def T_mrca(self) -> float:
        return float(self.holding.sum())

    def validate(self) -> None:
        y = self.y
        if int(self.x.sum()) != self.n0 - 1 or y[-1] != 1 or np.any(self.x < 1):
            raise CoalscopeError("jump chain path violates its invariants")


def _jump_sizes_shape(m, n, rng):
    a, b = (1.0, 1.0) if m.shape is None else m.shape
    p1 = merger_start_table(m, n)
    x = np.empty(n - 1, dtype=np.int32)
    y, pos, chunk = n, 0, min(n - 1, 1024)
    while y > 1:
        u = rng.random(min(chunk, n - 1 - pos))
        y, used = _kernels.beta_shape_jumps(y, a, b, p1, u, x, pos)
        pos += used
        chunk *= 2
    return x[:pos]


def _jump_sizes_general(m, n, rng):
    out = []
    y = n
    while y > 1:
        cdf = transition_table(m, y).cdf()
        ell = min(int(np.searchsorted(cdf, rng.random())) + 1, y - 1)
        out.append(ell)
        y -= ell
    return np.asarray(out, dtype=np.int32)


def sample_jump_chain(m: CoalescentMeasure, n: int, rng: np.random.Generator,
                      rates: np.ndarray | None = None) -> JumpChainPath:
    """Sample ``(Y_k)`` from ``n`` blocks, plus the exponential draws ``E_k``.

    Jumps are drawn by sequential inversion of the current state's jump law,
    scanning from one lost lineage upwards (expected scan length
    ``E[X] + 1``).  General density measures fall back on memoised
    per-state tables and are only practical for moderate ``n``.
    """
    if int(n) != n or n < 2:
        raise ArgumentError(f"n must be an integer >= 2, got {n}")
    n = int(n)
    if rates is None:
        rates = rate_table(m, n)
    if m.family is Family.KINGMAN:
        x = np.ones(n - 1, dtype=np.int32)
    elif m.shape is not None:
        x = _jump_sizes_shape(m, n, rng)
    else:
        x = _jump_sizes_general(m, n, rng)
    e = rng.standard_exponential(x.shape[0])
    return JumpChainPath(m, n, x, e, rates)


@dataclass(frozen=True)
class TreeStatistics:
    """Partial and total tree lengths of one path, with mutation counts.

    Per-grid arrays are aligned with ``grid``.
    """

    grid: np.ndarray
    L_t: np.ndarray
    L_tilde_t: np.ndarray
    L_hat_t: np.ndarray
    K_t: np.ndarray
    L_total: float
    L_tilde_total: float
    L_hat_total: float
    T_mrca: float
    K_total: int
    tau: int


def _grid_indices(m: CoalescentMeasure, n: int, tau: int, grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float).reshape(-1)
    if grid.size and (np.any(grid <= 0) or np.any(np.diff(grid) <= 0)):
        raise ArgumentError("grid must be strictly increasing and positive")
    idx = np.empty(grid.size, dtype=np.int64)
    for j, t in enumerate(grid):
        if m.is_power_tail and t > m.gamma * (1 + 1e-12):
            raise ArgumentError(f"grid point {t} exceeds gamma = alpha - 1 = {m.gamma}")
        if m.is_power_tail and math.isclose(t, m.gamma, rel_tol=1e-12):
            idx[j] = tau - 1
        else:
            # floor(n t) with a guard against representation error (0.29 * 100)
            idx[j] = min(math.floor(round(n * t, 9)), tau - 1)
    return idx


def tree_statistics(path: JumpChainPath, grid: Sequence[float] = (), theta: float = 0.0,
                    rng: np.random.Generator | None = None) -> TreeStatistics:
    """Tree lengths up to the ``floor(n t)``-th coalescence for each ``t``.

    ``K_t`` is a single Poisson process on the length axis: the increment
    between consecutive grid points is Poisson(theta * dL), so ``K_t`` is
    nondecreasing and ``K_total`` counts mutations on the whole tree.
    """
    if theta < 0:
        raise ArgumentError("theta must be nonnegative")
    m, n = path.measure, path.n0
    y = path.y[:-1]
    grid = np.asarray(grid, dtype=float).reshape(-1)
    idx = _grid_indices(m, n, path.tau, grid)
    w = y / path.rates[y]
    cl = np.cumsum(w * path.exp_draws)
    ct = np.cumsum(w)
    ch = np.cumsum(y.astype(float) ** (1.0 - m.alpha))
    L_t = cl[idx]
    L_total = float(cl[-1])
    if theta == 0:
        K = np.zeros(grid.size + 1, dtype=np.int64)
    else:
        if rng is None:
            raise ArgumentError("an rng is required when theta > 0")
        incr = np.diff(np.concatenate([[0.0], L_t, [L_total]]))
        K = np.cumsum(rng.poisson(theta * np.maximum(incr, 0.0)))
    return TreeStatistics(
        grid=grid, L_t=L_t, L_tilde_t=ct[idx], L_hat_t=ch[idx], K_t=K[:-1],
        L_total=L_total, L_tilde_total=float(ct[-1]), L_hat_total=float(ch[-1]),
        T_mrca=float((path.exp_draws / path.rates[y]).sum()), K_total=int(K[-1]),
        tau=path.tau)


def watterson_estimate(K_total, n: int, m: CoalescentMeasure, theta_mode: str = "auto"):
    """Mutation-rate estimate from the total number of mutations.

    ``theta_mode="kingman"`` divides by the expected Kingman length
    ``2 H_{n-1}``; ``"beta"`` divides by the first-order length
    ``a(gamma) n^(2-alpha)``.  ``"auto"`` picks by family.
    """
    from .limits import a_of_t

    if int(n) != n or n < 2:
        raise ArgumentError(f"n must be an integer >= 2, got {n}")
    if theta_mode == "auto":
        if m.family is Family.KINGMAN:
            theta_mode = "kingman"
        elif m.is_power_tail:
            theta_mode = "beta"
        else:
            raise UnsupportedFamilyError(f"no Watterson normalisation for {m.family.value}")
    K = np.asarray(K_total, dtype=float)
    if theta_mode == "kingman":
        if m.family is not Family.KINGMAN:
            raise UnsupportedFamilyError("kingman mode needs the Kingman coalescent")
        denom = 2.0 * float(np.sum(1.0 / np.arange(1, n)))
    elif theta_mode == "beta":
        if not m.is_power_tail:
            raise UnsupportedFamilyError("beta mode needs a power-tail measure")
        denom = a_of_t(m, m.gamma) * n ** (2.0 - m.alpha)
    else:
        raise ArgumentError(f"unknown theta_mode {theta_mode!r}")
    out = K / denom
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ReplicateSet:
    """Statistics of independent replicates, ordered by replicate index."""

    measure: CoalescentMeasure
    n: int
    grid: np.ndarray
    theta: float
    seed: int
    tag: str
    tau: np.ndarray
    L_t: np.ndarray
    L_tilde_t: np.ndarray
    L_hat_t: np.ndarray
    K_t: np.ndarray
    L_total: np.ndarray
    L_tilde_total: np.ndarray
    L_hat_total: np.ndarray
    T_mrca: np.ndarray
    K_total: np.ndarray

    @property
    def reps(self) -> int:
        return int(self.tau.shape[0])


def _one_replicate(m, n, grid, theta, seed, tag, index, rates):
    rng = replicate_rng(seed, index, tag)
    jump_rng, mut_rng = rng.spawn(2)
    path = sample_jump_chain(m, n, jump_rng, rates=rates)
    return tree_statistics(path, grid, theta, mut_rng)


def simulate(m: CoalescentMeasure, n: int, reps: int, grid: Sequence[float] = (),
             theta: float = 0.0, seed: int = DEFAULT_SEED, tag: str = "simulate",
             threads: int | None = None) -> ReplicateSet:
    """Run ``reps`` independent replicates from ``n`` lineages.

    Replicate ``i`` uses the stream ``(seed, tag, i)``; results do not depend
    on ``threads``.
    """
    if int(reps) != reps or reps < 1:
        raise ArgumentError("reps must be a positive integer")
    n, reps = int(n), int(reps)
    grid = np.asarray(grid, dtype=float).reshape(-1)
    rates = rate_table(m, n)
    if m.shape is not None:
        merger_start_table(m, n)
    threads = resolve_threads(threads)

    def run(i):
        return _one_replicate(m, n, grid, theta, seed, tag, i, rates)

    if threads == 1:
        stats = [run(i) for i in range(reps)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            stats = list(pool.map(run, range(reps), chunksize=max(1, reps // (8 * threads))))

    def col(name, dtype=float):
        return np.array([getattr(s, name) for s in stats], dtype=dtype)

    G = grid.size
    return ReplicateSet(
        measure=m, n=n, grid=grid, theta=float(theta), seed=int(seed), tag=tag,
        tau=col("tau", np.int64),
        L_t=col("L_t").reshape(reps, G), L_tilde_t=col("L_tilde_t").reshape(reps, G),
        L_hat_t=col("L_hat_t").reshape(reps, G), K_t=col("K_t", np.int64).reshape(reps, G),
        L_total=col("L_total"), L_tilde_total=col("L_tilde_total"),
        L_hat_total=col("L_hat_total"), T_mrca=col("T_mrca"), K_total=col("K_total", np.int64))
