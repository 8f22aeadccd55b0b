"""Scenario runners confronting simulated finite-``n`` statistics with limit laws.

Every runner is a pure function of its arguments: replicate ``i`` of the
finite-``n`` side uses the stream ``(seed, "<scenario>/n=<n>", i)`` and the
limit side uses ``(seed, "<scenario>/limit/n=<n>", 0)``.  Thresholds are
arguments with documented defaults and are recorded in the report, which
decides ``passed`` from them alone.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import gamma as gamma_fn

from .chain import simulate
from .errors import ArgumentError, UnsupportedFamilyError
from .limits import (ALPHA0, Scenario, a_of_t, centering_scaling, mutation_scenario,
                     sample_limit)
from .measures import (CoalescentMeasure, Family, first_jump_tail, gn_asymptote_check,
                       mohle_moment, rate_table, total_rate, total_rate_integral,
                       transition_table)
from .rng import DEFAULT_SEED, replicate_rng
from .stats import ks_two_sample, loglog_slope, summarize

__all__ = [
    "Check",
    "VerificationReport",
    "verify_tau",
    "verify_length",
    "verify_mutations",
    "verify_kingman",
    "verify_bs",
    "verify_mohle",
    "verify_approximations",
    "verify_rates",
]

EULER_GAMMA = 0.5772156649015329


@dataclass
class Check:
    """One pass/fail comparison ``value <op> threshold``.

    Checks with ``gating=False`` are reported but do not affect ``passed``.
    """

    name: str
    value: float
    threshold: float
    op: str
    passed: bool
    gating: bool = True
    note: str = ""


def _cmp(value, op, threshold) -> bool:
    if not np.isfinite(value):
        return False
    return {"<": value < threshold, "<=": value <= threshold,
            ">": value > threshold, ">=": value >= threshold}[op]


@dataclass
class VerificationReport:
    scenario: str
    measure: dict
    n_list: list
    replicates: int
    t: float | None = None
    theta: float | None = None
    seed: int = DEFAULT_SEED
    tolerances: dict = field(default_factory=dict)
    per_n: list = field(default_factory=list)
    trend: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    flags: list = field(default_factory=list)
    samples: dict = field(default_factory=dict, repr=False)

    def check(self, name, value, op, threshold, gating=True, note="") -> Check:
        c = Check(name, float(value), float(threshold), op, bool(_cmp(value, op, threshold)),
                  bool(gating), note)
        self.checks.append(c)
        return c

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.gating)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("samples")
        d["passed"] = self.passed
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, allow_nan=True, default=_jsonable, **kw)


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _n_list(n_list) -> list:
    out = [int(n) for n in np.atleast_1d(n_list)]
    if not out or any(n < 2 for n in out):
        raise ArgumentError("n_list must hold integers >= 2")
    return out


def _require_power_tail(m: CoalescentMeasure, what: str):
    if not m.is_power_tail:
        raise UnsupportedFamilyError(f"{what} needs a Beta or power-tail measure, got {m.family.value}")
    if not m.satisfies_regularity():
        raise UnsupportedFamilyError(f"{what} needs zeta > 1 - 1/alpha")


def _open_t(m, t):
    if t is None or not 0.0 < t < m.gamma:
        raise ArgumentError(f"t must lie in (0, gamma) = (0, {m.gamma}), got {t}")
    return float(t)


def _limit_draws(seed, tag, scenario, params, size):
    return np.asarray(sample_limit(scenario, params, replicate_rng(seed, 0, tag), size).value)


def _compare(report, n, stat, limit, extra=None):
    ks = ks_two_sample(stat, limit)
    row = {"n": n, "statistic": summarize(stat), "limit": summarize(limit),
           "ks_statistic": ks.statistic, "ks_p_value": ks.p_value}
    row.update(extra or {})
    report.per_n.append(row)
    report.samples[n] = (np.asarray(stat), np.asarray(limit))
    return ks


def _ks_checks(report, p_threshold, name="ks_p_value", require_trend=False):
    last = report.per_n[-1]
    report.check(f"{name}[n={last['n']}]", last["ks_p_value"], ">", p_threshold)
    d = [r["ks_statistic"] for r in report.per_n]
    report.trend["ks_statistic"] = d
    if require_trend and len(d) > 1:
        report.check("ks_statistic_decreasing", float(d[-1] - d[0]), "<", 0.0,
                     note="KS distance at the largest n minus the smallest n")


def verify_tau(m: CoalescentMeasure, n_list: Sequence[int], reps: int, seed: int = DEFAULT_SEED,
               limit_reps: int | None = None, p_threshold: float = 0.01,
               threads: int | None = None) -> VerificationReport:
    """Number of coalescences: ``n^(-1/alpha) (n - tau_n / gamma)`` against ``V_gamma``."""
    _require_power_tail(m, "verify_tau")
    ns = _n_list(n_list)
    rep = VerificationReport("tau", m.describe(), ns, reps, seed=seed,
                             tolerances={"ks_p_value": p_threshold})
    for n in ns:
        r = simulate(m, n, reps, seed=seed, tag=f"tau/n={n}", threads=threads)
        stat = centering_scaling(Scenario.TAU, m, n).apply(r.tau)
        lim = _limit_draws(seed, f"tau/limit/n={n}", Scenario.TAU, {"alpha": m.alpha},
                           limit_reps or reps)
        _compare(rep, n, stat, lim, {"mean_tau_over_n": float(r.tau.mean() / n)})
    _ks_checks(rep, p_threshold, require_trend=True)
    return rep


def verify_length(m: CoalescentMeasure, n_list: Sequence[int], reps: int, t: float,
                  seed: int = DEFAULT_SEED, which: str = "L", limit_reps: int | None = None,
                  p_threshold: float = 0.01, lln_tolerance: float = 0.03, epsilon: float = 0.05,
                  threads: int | None = None, theta_unused=None) -> VerificationReport:
    """Partial tree length fluctuations, or their concentration when ``alpha >= alpha0``.

    ``which="L"`` uses ``L_t`` against ``V*_t``; ``which="Lhat"`` uses the
    power sum against its own stable limit.  Below ``alpha0`` a two-sample KS
    test decides; at or above it the 95% quantile of
    ``n^-epsilon |L_t - a(t) n^(2-alpha)|`` must shrink along ``n_list``.
    The first-order law ``n^(alpha-2) L_t -> a(t)`` is checked at the largest n.
    """
    _require_power_tail(m, "verify_length")
    t = _open_t(m, t)
    if which not in ("L", "Lhat"):
        raise ArgumentError(f"which must be 'L' or 'Lhat', got {which!r}")
    ns = _n_list(n_list)
    distributional = m.alpha < ALPHA0
    mode = "distribution" if distributional else "concentration"
    rep = VerificationReport(f"length/{which}/{mode}", m.describe(), ns, reps, t=t, seed=seed,
                             tolerances={"ks_p_value": p_threshold, "lln_relative": lln_tolerance,
                                         "epsilon": epsilon})
    a_t = a_of_t(m, t)
    sc = Scenario.L if which == "L" else Scenario.LHAT
    q95 = []
    lln = None
    for n in ns:
        r = simulate(m, n, reps, grid=[t], seed=seed, tag=f"length/n={n}", threads=threads)
        L = r.L_t[:, 0] if which == "L" else r.L_hat_t[:, 0]
        lln = float(np.mean(r.L_t[:, 0]) * n ** (m.alpha - 2.0))
        if distributional:
            stat = centering_scaling(sc, m, n, t).apply(L)
            lim = _limit_draws(seed, f"length/limit/n={n}", sc,
                               {"alpha": m.alpha, "t": t, "c0": m.c0}, limit_reps or reps)
            _compare(rep, n, stat, lim, {"lln_mean": lln})
        else:
            center = centering_scaling(sc, m, n, t).center
            dev = n ** (-epsilon) * np.abs(L - center)
            q95.append(float(np.quantile(dev, 0.95)))
            rep.per_n.append({"n": n, "statistic": summarize(dev), "q95": q95[-1], "lln_mean": lln})
            rep.samples[n] = (dev, None)
    if distributional:
        _ks_checks(rep, p_threshold)
    else:
        rep.trend["q95"] = q95
        steps = np.diff(q95) if len(q95) > 1 else np.array([np.nan])
        rep.check("q95_decreasing", float(np.max(steps)), "<", 0.0,
                  note="largest step of the 95% quantile along n_list")
    rep.trend["a_t"] = a_t
    rep.check(f"lln_relative_error[n={ns[-1]}]", abs(lln / a_t - 1.0), "<=", lln_tolerance)
    return rep


def verify_mutations(m: CoalescentMeasure, n_list: Sequence[int], reps: int, t: float,
                     theta: float, seed: int = DEFAULT_SEED, limit_reps: int | None = None,
                     p_threshold: float = 0.01, threads: int | None = None) -> VerificationReport:
    """Mutation counts ``K_t`` in the regime selected by ``alpha`` versus ``sqrt(2)``."""
    _require_power_tail(m, "verify_mutations")
    t = _open_t(m, t)
    if theta is None or theta <= 0:
        raise ArgumentError("theta must be positive")
    ns = _n_list(n_list)
    sc = mutation_scenario(m.alpha)
    rep = VerificationReport(f"mutations/{sc.value}", m.describe(), ns, reps, t=t, theta=theta,
                             seed=seed, tolerances={"ks_p_value": p_threshold})
    for n in ns:
        r = simulate(m, n, reps, grid=[t], theta=theta, seed=seed, tag=f"mutations/n={n}",
                     threads=threads)
        stat = centering_scaling(sc, m, n, t, theta).apply(r.K_t[:, 0])
        lim = _limit_draws(seed, f"mutations/limit/n={n}", sc,
                           {"alpha": m.alpha, "t": t, "theta": theta, "c0": m.c0},
                           limit_reps or reps)
        _compare(rep, n, stat, lim)
    _ks_checks(rep, p_threshold)
    return rep


def verify_kingman(n_list: Sequence[int], reps: int, seed: int = DEFAULT_SEED,
                   limit_reps: int | None = None, p_threshold: float = 0.01,
                   mean_tolerance: float = 0.05, ratio_tolerance: float = 0.02,
                   threads: int | None = None) -> VerificationReport:
    """Kingman total length: ``L/2 - log n`` against the standard Gumbel law.

    The ratio ``L / (2 log n)`` is reported as a non-gating check: its mean is
    ``H_{n-1} / log n``, which is still about 1.06 at ``n = 10^4``.
    """
    m = CoalescentMeasure.kingman()
    ns = _n_list(n_list)
    rep = VerificationReport("kingman", m.describe(), ns, reps, seed=seed,
                             tolerances={"ks_p_value": p_threshold, "mean_abs": mean_tolerance,
                                         "ratio_relative": ratio_tolerance})
    for n in ns:
        r = simulate(m, n, reps, seed=seed, tag=f"kingman/n={n}", threads=threads)
        stat = centering_scaling(Scenario.KINGMAN_GUMBEL, m, n).apply(r.L_total)
        lim = _limit_draws(seed, f"kingman/limit/n={n}", Scenario.KINGMAN_GUMBEL, {},
                           limit_reps or reps)
        _compare(rep, n, stat, lim,
                 {"ratio_mean": float(np.mean(r.L_total) / (2.0 * math.log(n)))})
    _ks_checks(rep, p_threshold)
    last = rep.per_n[-1]
    rep.check(f"gumbel_mean_error[n={last['n']}]", abs(last["statistic"]["mean"] - EULER_GAMMA),
              "<=", mean_tolerance)
    rep.check(f"ratio_relative_error[n={last['n']}]", abs(last["ratio_mean"] - 1.0), "<=",
              ratio_tolerance, gating=False,
              note="exact mean is H_{n-1}/log n; logarithmic convergence")
    return rep


def verify_bs(n_list: Sequence[int], reps: int, seed: int = DEFAULT_SEED,
              limit_reps: int | None = None, p_threshold: float = 0.001,
              ratio_tolerance: float = 0.10, threads: int | None = None) -> VerificationReport:
    """Bolthausen-Sznitman total length: ``(L - a_n) / b_n`` against the stable ``Z``.

    Convergence is at logarithmic speed, so the thresholds are loose.  The
    KS distance to ``-Z`` is reported as a non-gating orientation diagnostic:
    the simulated statistic has its heavy tail on the left, while ``Z``
    (finite ``E[exp(-l Z)]`` for all ``l > 0``) has it on the right.
    """
    m = CoalescentMeasure.bolthausen_sznitman()
    ns = _n_list(n_list)
    rep = VerificationReport("bs", m.describe(), ns, reps, seed=seed,
                             tolerances={"ks_p_value": p_threshold,
                                         "ratio_relative": ratio_tolerance})
    for n in ns:
        r = simulate(m, n, reps, seed=seed, tag=f"bs/n={n}", threads=threads)
        stat = centering_scaling(Scenario.BS_STABLE, m, n).apply(r.L_total)
        lim = _limit_draws(seed, f"bs/limit/n={n}", Scenario.BS_STABLE, {}, limit_reps or reps)
        mirrored = ks_two_sample(stat, -lim)
        _compare(rep, n, stat, lim,
                 {"ratio_mean": float(np.mean(r.L_total) * math.log(n) / n),
                  "ks_statistic_mirrored": mirrored.statistic,
                  "ks_p_value_mirrored": mirrored.p_value})
    _ks_checks(rep, p_threshold)
    last = rep.per_n[-1]
    rep.trend["ks_statistic_mirrored"] = [r["ks_statistic_mirrored"] for r in rep.per_n]
    rep.check(f"ks_p_value_mirrored[n={last['n']}]", last["ks_p_value_mirrored"], ">",
              p_threshold, gating=False, note="statistic against -Z")
    rep.check(f"ratio_relative_error[n={last['n']}]", abs(last["ratio_mean"] - 1.0), "<=",
              ratio_tolerance)
    return rep


def verify_mohle(m: CoalescentMeasure, n: int, reps: int, theta: float,
                 seed: int = DEFAULT_SEED, mean_tolerance: float = 0.05,
                 second_tolerance: float = 0.08, threads: int | None = None) -> VerificationReport:
    """Moments of ``K / (n theta)`` on the whole tree against the moment formula."""
    target1, target2 = mohle_moment(m, 1), mohle_moment(m, 2)
    n = _n_list([n])[0]
    rep = VerificationReport("mohle", m.describe(), [n], reps, theta=theta, seed=seed,
                             tolerances={"mean_relative": mean_tolerance,
                                         "second_moment_relative": second_tolerance})
    if theta is None or theta < 0:
        raise ArgumentError("theta must be nonnegative")
    if theta == 0:
        rep.flags.append("degenerate: theta = 0 gives K = 0 on every tree")
        rep.per_n.append({"n": n, "K_total_max": 0})
        rep.check("theta_positive", 0.0, ">", 0.0, note="degenerate input")
        return rep
    r = simulate(m, n, reps, theta=theta, seed=seed, tag=f"mohle/n={n}", threads=threads)
    z = r.K_total / (n * theta)
    m1, m2 = float(z.mean()), float(np.mean(z ** 2))
    rep.per_n.append({"n": n, "statistic": summarize(z), "moment1": m1, "moment2": m2,
                      "target1": target1, "target2": target2})
    rep.samples[n] = (z, None)
    rep.check("moment1_relative_error", abs(m1 / target1 - 1.0), "<=", mean_tolerance)
    rep.check("moment2_relative_error", abs(m2 / target2 - 1.0), "<=", second_tolerance)
    return rep


def verify_approximations(m: CoalescentMeasure, n_list: Sequence[int], reps: int,
                          t: float | None = None, seed: int = DEFAULT_SEED,
                          gap_n_list: Sequence[int] | None = None, gap_reps: int = 200,
                          slope_tolerance: float = 0.4, bound_ratio: float = 3.0,
                          threads: int | None = None) -> VerificationReport:
    """Size of ``L_t - L~_t`` and of ``L~_t - L^_t / (C0 Gamma(2-alpha))`` across n.

    Below ``alpha = 3/2`` the mean square of the first difference must grow
    with log-log slope ``3 - 2 alpha`` (within ``slope_tolerance``); above it,
    it must stay bounded (max/min below ``bound_ratio``).  The mean absolute
    deterministic gap must stay bounded over ``gap_n_list`` in the same sense.
    ``t`` defaults to ``gamma``, the whole tree.
    """
    _require_power_tail(m, "verify_approximations")
    t = m.gamma if t is None else float(t)
    if not 0.0 < t <= m.gamma * (1 + 1e-12):
        raise ArgumentError(f"t must lie in (0, gamma], got {t}")
    ns = _n_list(n_list)
    gap_ns = _n_list(gap_n_list) if gap_n_list is not None else ns
    rep = VerificationReport("approx", m.describe(), ns, reps, t=t, seed=seed,
                             tolerances={"slope": slope_tolerance, "bound_ratio": bound_ratio})
    norm = m.c0 * gamma_fn(2.0 - m.alpha)
    msq = []
    for n in ns:
        r = simulate(m, n, reps, grid=[t], seed=seed, tag=f"approx/n={n}", threads=threads)
        d2 = (r.L_t[:, 0] - r.L_tilde_t[:, 0]) ** 2
        msq.append(float(d2.mean()))
        rep.per_n.append({"n": n, "mean_square_diff": msq[-1],
                          "se": float(d2.std(ddof=1) / math.sqrt(reps))})
    gaps = []
    for n in gap_ns:
        r = simulate(m, n, gap_reps, grid=[t], seed=seed, tag=f"approx/gap/n={n}", threads=threads)
        gaps.append(float(np.mean(np.abs(r.L_tilde_t[:, 0] - r.L_hat_t[:, 0] / norm))))
    rep.trend = {"mean_square_diff": msq, "slope": loglog_slope(ns, msq), "gap_n_list": gap_ns,
                 "gap": gaps}
    if m.alpha < 1.5:
        target = 3.0 - 2.0 * m.alpha
        rep.trend["slope_target"] = target
        rep.check("variance_slope_error", abs(rep.trend["slope"] - target), "<=", slope_tolerance)
    elif m.alpha > 1.5:
        rep.check("variance_max_over_min", max(msq) / min(msq), "<", bound_ratio)
    else:
        rep.flags.append("alpha = 3/2: logarithmic regime, variance reported only")
    rep.check("gap_max_over_min", max(gaps) / min(gaps), "<", bound_ratio)
    return rep


def verify_rates(m: CoalescentMeasure, n_max: int = 1000, gn_n_list=(10 ** 4, 10 ** 5, 10 ** 6),
                 dual_tolerance: float = 1e-8, sum_tolerance: float = 1e-12,
                 tail_tolerance: float = 1e-10, gn_tolerance: float = 0.01) -> VerificationReport:
    """Deterministic identities: dual forms of ``g_n``, pmf mass, tail/pmf agreement,
    and ``g_n`` against its power law."""
    rep = VerificationReport("rates", m.describe(), [int(n_max)], 0,
                             tolerances={"dual_relative": dual_tolerance, "pmf_sum": sum_tolerance,
                                         "tail_pmf": tail_tolerance, "gn_ratio": gn_tolerance})
    ns = np.unique(np.concatenate([np.arange(2, min(n_max, 60) + 1),
                                   np.geomspace(2, n_max, 40).astype(int)]))
    if m.family is Family.KINGMAN:
        g = rate_table(m, n_max)
        k = np.arange(2, n_max + 1)
        rep.check("kingman_exact_max_abs", float(np.max(np.abs(g[2:] - k * (k - 1) / 2))), "<=", 0.0)
    else:
        rel = max(abs(total_rate_integral(m, int(n)) / total_rate(m, int(n)) - 1.0) for n in ns)
        rep.check("dual_form_max_relative", rel, "<=", dual_tolerance)
    sum_err, tail_err = 0.0, 0.0
    for n in ns:
        tab = transition_table(m, int(n))
        sum_err = max(sum_err, abs(tab.pmf.sum() - 1.0))
        if m.family is not Family.KINGMAN:
            tail = tab.tail()
            for k in sorted({1, 2, 3, int(n) // 2, int(n) - 1} - {0}):
                if 1 <= k <= n - 1:
                    tail_err = max(tail_err, abs(first_jump_tail(m, int(n), k) - tail[k - 1]))
    rep.check("pmf_sum_max_error", sum_err, "<=", sum_tolerance)
    rep.check("tail_pmf_max_error", tail_err, "<=", tail_tolerance)
    if m.is_power_tail:
        tab = gn_asymptote_check(m, list(gn_n_list))
        rep.per_n = [{"n": int(n), "ratio": float(r), "residual": float(s)}
                     for n, r, s in zip(tab.n, tab.ratio, tab.residual)]
        rep.check(f"gn_ratio_error[n={int(tab.n[-1])}]", abs(float(tab.ratio[-1]) - 1.0), "<=",
                  gn_tolerance)
    return rep
