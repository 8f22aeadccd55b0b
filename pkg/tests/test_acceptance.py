"""Acceptance suite: thirteen criteria, each printing one PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` or
``python3 tests/test_acceptance.py``.  Criteria that fail are left failing;
the analysis of each failure lives in the decisions ledger.
"""
import math
import time

import numpy as np
import pytest
from scipy import integrate
from scipy.special import betaln, gammaln

from coalscope.cli import main as cli_main
from coalscope.limits import sample_limit, stable_rvs, v_of_t
from coalscope.measures import CoalescentMeasure as M
from coalscope.measures import (first_jump_tail, gn_asymptote_check, lambda_rate,
                                limit_jump_tail, rate_table, total_rate, total_rate_integral,
                                transition_table)
from coalscope.rng import replicate_rng
from coalscope.stats import ks_two_sample
from coalscope.verify import (verify_approximations, verify_bs, verify_kingman, verify_length,
                              verify_mohle, verify_mutations, verify_tau)

SEED = 20080101


@pytest.fixture
def report(capsys):
    started = time.perf_counter()

    def emit(number, title, items):
        """``items`` is a list of ``(label, passed, detail)``; prints one line, then asserts."""
        ok = all(p for _, p, _ in items)
        detail = "; ".join(f"{lab} {'ok' if p else 'FAILED'} ({d})" for lab, p, d in items)
        line = (f"{'PASS' if ok else 'FAIL'} criterion {number:>2} {title}: {detail} "
                f"[{time.perf_counter() - started:.1f} s]")
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return emit


def gate(rep, prefix):
    c = next(c for c in rep.checks if c.name.startswith(prefix))
    return c.passed, f"{c.name}={c.value:.4g} {c.op} {c.threshold:.4g}"


def beta_pdf(alpha):
    a, b = 2.0 - alpha, alpha
    lb = betaln(a, b)
    return lambda x: math.exp((a - 1) * math.log(x) + (b - 1) * math.log1p(-x) - lb)


# ---------------------------------------------------------------------------

def test_criterion_01_exact_identities(report):
    items = []
    ns = np.unique(np.concatenate([np.arange(2, 61), np.geomspace(2, 1000, 60).astype(int)]))
    worst = 0.0
    for m in (M.beta(1.2), M.beta(1.5), M.beta(1.8), M.bolthausen_sznitman()):
        for n in ns:
            worst = max(worst, abs(total_rate_integral(m, int(n)) / total_rate(m, int(n)) - 1))
    items.append(("dual-form g_n", worst <= 1e-8, f"max rel {worst:.2e} <= 1e-8"))

    sum_err = tail_err = 0.0
    for m in (M.beta(1.5), M.bolthausen_sznitman(), M.kingman()):
        for n in ns:
            tab = transition_table(m, int(n))
            sum_err = max(sum_err, abs(tab.pmf.sum() - 1))
            if m.family.value != "kingman":
                tail = tab.tail()
                for k in {1, 2, int(n) // 2, int(n) - 1}:
                    if 1 <= k <= n - 1:
                        tail_err = max(tail_err, abs(first_jump_tail(m, int(n), k) - tail[k - 1]))
    items.append(("pmf sum", sum_err <= 1e-12, f"{sum_err:.1e} <= 1e-12"))
    items.append(("tail/pmf", tail_err <= 1e-10, f"{tail_err:.1e} <= 1e-10"))

    k = np.arange(2, 1001)
    exact = bool(np.array_equal(rate_table(M.kingman(), 1000)[2:], k * (k - 1) / 2))
    items.append(("Kingman g_k", exact, "exact"))

    v_err = 0.0
    for alpha in (1.2, 1.5, 1.8):
        g = alpha - 1
        for frac in (0.1, 0.5, 0.9):
            ref, _ = integrate.quad(lambda r: (1 - r / g) ** (-g), 0, frac * g, epsabs=0,
                                    epsrel=1e-13)
            v_err = max(v_err, abs(v_of_t(alpha, frac * g) - ref))
    items.append(("v(t) vs quadrature", v_err <= 1e-10, f"{v_err:.1e} <= 1e-10"))

    lam_err = 0.0
    for alpha in (1.2, 1.5, 1.8):
        pdf = beta_pdf(alpha)
        m = M.beta(alpha)
        for b in range(2, 31):
            for kk in range(2, b + 1):
                ref, _ = integrate.quad(lambda x: x ** (kk - 2) * (1 - x) ** (b - kk) * pdf(x),
                                        0, 1, epsabs=0, epsrel=1e-12, limit=200, points=[0.5])
                lam_err = max(lam_err, abs(lambda_rate(m, b, kk) / ref - 1))
    items.append(("Beta lambda vs quadrature", lam_err <= 1e-9, f"max rel {lam_err:.1e} <= 1e-9"))
    report(1, "exact identities", items)


def test_criterion_02_gn_power_law(report):
    items = []
    for alpha in (1.2, 1.5, 1.8):
        r = float(gn_asymptote_check(M.beta(alpha), [10 ** 6]).ratio[-1])
        items.append((f"alpha={alpha}", abs(r - 1) <= 0.01, f"|ratio-1|={abs(r - 1):.2e} <= 0.01"))
    report(2, "g_n ~ C0 Gamma(2-alpha) n^alpha at n=1e6", items)


def test_criterion_03_jump_law_convergence(report):
    k = np.arange(1, 21)
    gap = float(np.max(np.abs(transition_table(M.beta(1.5), 10 ** 4).tail()[:20]
                              - limit_jump_tail(1.5, k))))
    report(3, "jump law at n=1e4", [("max tail gap k<=20", gap < 5e-3, f"{gap:.2e} < 5e-3")])


def test_criterion_04_stable_laplace(report):
    items = []
    for ai, alpha in enumerate((1.2, 1.5, 1.8)):
        g = alpha - 1
        for ti, t in enumerate((g / 4, g)):
            v = stable_rvs(alpha, t, replicate_rng(SEED, 10 * ai + ti, "acceptance/laplace"),
                           10 ** 5)
            for u in (0.25, 0.5, 1.0):
                e = np.exp(-u * v)
                z = (e.mean() - math.exp(t * u ** alpha / g)) / (e.std(ddof=1) / math.sqrt(e.size))
                items.append((f"a={alpha},t={t:.3g},u={u}", abs(z) < 3, f"z={z:+.2f}"))
    report(4, "stable sampler Laplace grid (3 SE)", items)


def test_criterion_05_tau(report):
    rep = verify_tau(M.beta(1.5), [500, 5000], 4000, seed=SEED, limit_reps=4000)
    report(5, "tau_n limit, Beta 1.5", [("KS n=5000", *gate(rep, "ks_p_value")),
                                        ("KS distance trend", *gate(rep, "ks_statistic_decr"))])


def test_criterion_06_length(report):
    rep = verify_length(M.beta(1.5), [5000], 4000, 0.25, seed=SEED, limit_reps=4000)
    conc = verify_length(M.beta(1.7), [2000, 20000], 4000, 0.25, seed=SEED, epsilon=0.05)
    report(6, "partial length, t=0.25", [
        ("(a) LLN alpha=1.5", *gate(rep, "lln_relative_error")),
        ("(b) KS vs V*_t alpha=1.5", *gate(rep, "ks_p_value")),
        ("alpha=1.7 q95 decreasing", *gate(conc, "q95_decreasing")),
    ])


def test_criterion_07_mutations(report):
    items = []
    for alpha in (1.3, 1.7, math.sqrt(2.0)):
        rep = verify_mutations(M.beta(alpha), [5000], 4000, 0.25, 1.0, seed=SEED,
                               limit_reps=4000)
        items.append((rep.scenario, *gate(rep, "ks_p_value")))
    report(7, "mutation regimes at n=5000", items)


def test_criterion_08_vstar_self_consistency(report):
    p = {"alpha": 1.5, "t": 0.25}
    a = sample_limit("lhat", {**p, "method": "oneshot"},
                     replicate_rng(SEED, 0, "acceptance/oneshot"), 4000).value
    b = sample_limit("lhat", {**p, "method": "path"},
                     replicate_rng(SEED, 0, "acceptance/path"), 4000).value
    ks = ks_two_sample(a, b)
    report(8, "V*_t path vs oneshot", [("KS", ks.p_value > 0.01, f"p={ks.p_value:.3g} > 0.01")])


def test_criterion_09_kingman(report):
    rep = verify_kingman([5000], 4000, seed=SEED, limit_reps=4000)
    report(9, "Kingman Gumbel at n=5000", [("KS", *gate(rep, "ks_p_value")),
                                            ("mean", *gate(rep, "gumbel_mean_error"))])


def test_criterion_10_mohle(report):
    rep = verify_mohle(M.beta_density(2.0, 1.0), 5000, 4000, theta=1.0, seed=SEED)
    report(10, "Mohle moments, Lambda(dx)=2x dx", [("mean", *gate(rep, "moment1")),
                                                   ("second moment", *gate(rep, "moment2"))])


def test_criterion_11_approximations(report):
    ns, gap_ns = [500, 2000, 8000], [1000, 10000, 100000]
    low = verify_approximations(M.beta(1.25), ns, 4000, seed=SEED, gap_n_list=gap_ns)
    high = verify_approximations(M.beta(1.75), ns, 4000, seed=SEED, gap_n_list=gap_ns)
    report(11, "approximation scaling", [
        ("alpha=1.25 slope", *gate(low, "variance_slope_error")),
        ("alpha=1.75 bounded", *gate(high, "variance_max_over_min")),
        ("gap alpha=1.25", *gate(low, "gap_max_over_min")),
        ("gap alpha=1.75", *gate(high, "gap_max_over_min")),
    ])


def test_criterion_12_determinism(report, tmp_path):
    commands = {
        "simulate": ["simulate", "--family", "beta", "--alpha", "1.5", "--n", "5000", "--reps",
                     "100", "--t", "0.25", "--theta", "1", "--seed", "42"],
        "verify": ["verify", "length", "--alpha", "1.5", "--n", "500,1000", "--reps", "200",
                   "--t", "0.25", "--seed", "42"],
        "tables": ["tables", "vat", "--alpha", "1.5", "--points", "50"],
    }
    items = []
    for name, argv in commands.items():
        outs = [tmp_path / f"{name}-{i}.out" for i in range(2)]
        codes = [cli_main([*argv, "--out", str(o)]) for o in outs]
        same = outs[0].read_bytes() == outs[1].read_bytes()
        items.append((name, same and codes[0] == codes[1],
                      f"byte-identical={same}, exit codes {codes}"))
    report(12, "determinism of reruns", items)


def test_criterion_13_bolthausen_sznitman(report):
    rep = verify_bs([10 ** 5], 4000, seed=SEED, limit_reps=4000)
    report(13, "Bolthausen-Sznitman at n=1e5", [("ratio mean", *gate(rep, "ratio_relative")),
                                                 ("KS vs Z", *gate(rep, "ks_p_value[n="))])


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
