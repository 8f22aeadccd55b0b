"""Command-line front end: ``simulate``, ``verify`` and ``tables``.

Every command writes one data file (``--out``) and a metadata sidecar
``<out>.meta.json`` holding the merged configuration, the library version
and the wall time.  Data files depend only on the configuration, so reruns
are byte-identical.  Settings come from defaults, then an optional JSON
``--config`` file, then explicit flags.

Exit codes: 0 success, 1 verification failure, 2 usage error,
3 runtime or numeric error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .chain import simulate
from .errors import ArgumentError, UnsupportedFamilyError
from .limits import (Scenario, a_of_t, centering_scaling, kappa_of_t, v_of_t)
from .measures import (CoalescentMeasure, gn_asymptote_check, limit_jump_pmf,
                       limit_jump_tail, rate_table, transition_table)
from .rng import DEFAULT_SEED, THREADS_ENV
from . import verify as _verify

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3

RUN_RECORD_FIELDS = ("replicate_index", "n", "alpha", "t", "tau_n", "L_t", "L_tilde_t",
                     "L_hat_t", "K_t", "L_total", "T_mrca", "scaled_statistic")

SCENARIOS = ("tau", "length", "mutations", "kingman", "bs", "mohle", "approx", "rates")
TABLES = ("gn", "pmf", "limit", "vat")
FAMILIES = ("kingman", "bs", "beta", "beta-density")

DEFAULTS = {
    "family": "beta", "alpha": 1.5, "a": 2.0, "b": 1.0, "mass": 1.0,
    "n": None, "reps": None, "t": None, "theta": None, "seed": DEFAULT_SEED,
    "out": None, "format": "csv", "threads": None, "which": "L", "gap_n": None,
    "points": 100, "kmax": 50, "limit_reps": None,
}

# per-scenario defaults reproduce the acceptance configuration
VERIFY_DEFAULTS = {
    "tau": {"n": [500, 5000], "reps": 4000},
    "length": {"n": [5000], "reps": 4000, "t": [0.25]},
    "mutations": {"n": [5000], "reps": 4000, "t": [0.25], "theta": 1.0},
    "kingman": {"n": [5000], "reps": 4000},
    "bs": {"n": [100000], "reps": 4000},
    "mohle": {"n": [5000], "reps": 4000, "theta": 1.0, "family": "beta-density"},
    "approx": {"n": [500, 2000, 8000], "reps": 4000, "gap_n": [1000, 10000, 100000]},
    "rates": {"n": [1000]},
}


class UsageError(Exception):
    pass


def _int_list(text):
    try:
        out = [int(float(v)) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc
    return out


def _float_list(text):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _seed(text):
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _common(p, measure=True):
    if measure:
        p.add_argument("--family", choices=FAMILIES, default=None)
        p.add_argument("--alpha", type=float, default=None)
        p.add_argument("--a", type=float, default=None, help="beta-density first shape")
        p.add_argument("--b", type=float, default=None, help="beta-density second shape")
        p.add_argument("--mass", type=float, default=None)
    p.add_argument("--n", type=_int_list, default=None, help="sample size(s), comma separated")
    p.add_argument("--out", default=None)
    p.add_argument("--config", default=None, help="JSON file of defaults; flags override it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coalscope",
                                     description="Lambda-coalescent simulation and limit-law checks")
    parser.add_argument("--version", action="version", version=f"coalscope {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="simulate replicates and write RunRecord rows")
    _common(sim)
    sim.add_argument("--reps", type=_positive_int, default=None)
    sim.add_argument("--t", type=_float_list, default=None, help="time grid, comma separated")
    sim.add_argument("--theta", type=float, default=None)
    sim.add_argument("--seed", type=_seed, default=None)
    sim.add_argument("--format", choices=("csv", "json"), default=None)
    sim.add_argument("--threads", type=_positive_int, default=None)

    ver = sub.add_parser("verify", help="run a verification scenario and write its report")
    ver.add_argument("scenario", choices=SCENARIOS)
    _common(ver)
    ver.add_argument("--reps", type=_positive_int, default=None)
    ver.add_argument("--limit-reps", dest="limit_reps", type=_positive_int, default=None)
    ver.add_argument("--t", type=_float_list, default=None)
    ver.add_argument("--theta", type=float, default=None)
    ver.add_argument("--which", choices=("L", "Lhat"), default=None)
    ver.add_argument("--gap-n", dest="gap_n", type=_int_list, default=None)
    ver.add_argument("--seed", type=_seed, default=None)
    ver.add_argument("--threads", type=_positive_int, default=None)

    tab = sub.add_parser("tables", help="write deterministic tables as CSV")
    tab.add_argument("table", choices=TABLES)
    _common(tab)
    tab.add_argument("--points", type=_positive_int, default=None)
    tab.add_argument("--kmax", type=_positive_int, default=None)
    return parser


def merge_config(args: argparse.Namespace) -> dict:
    """Defaults, then the ``--config`` file, then explicit flags."""
    cfg = dict(DEFAULTS)
    if args.command == "verify":
        cfg.update(VERIFY_DEFAULTS[args.scenario])
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"--config: cannot read {args.config}: {exc}") from exc
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"--config: unknown keys {sorted(unknown)}")
        for key in ("n", "gap_n"):
            if key in loaded and not isinstance(loaded[key], list):
                loaded[key] = [loaded[key]]
        if "t" in loaded and not isinstance(loaded["t"], list):
            loaded["t"] = [loaded["t"]]
        cfg.update(loaded)
    for key, value in vars(args).items():
        if key in ("config",) or value is None:
            continue
        cfg[key] = value
    cfg["config_file"] = args.config
    if cfg.get("threads") is None and os.environ.get(THREADS_ENV):
        cfg["threads"] = int(os.environ[THREADS_ENV])
    return cfg


def measure_from_config(cfg) -> CoalescentMeasure:
    fam = cfg["family"]
    try:
        if fam == "kingman":
            return CoalescentMeasure.kingman()
        if fam == "bs":
            return CoalescentMeasure.bolthausen_sznitman()
        if fam == "beta":
            return CoalescentMeasure.beta(cfg["alpha"])
        return CoalescentMeasure.beta_density(cfg["a"], cfg["b"], cfg["mass"])
    except ArgumentError as exc:
        flag = "--alpha" if fam == "beta" else "--a/--b/--mass"
        raise UsageError(f"{flag}: {exc}") from exc


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def _write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    _write_text(path, buf.getvalue())


def _write_meta(path, cfg, started, extra=None):
    meta = {"config": {k: cfg[k] for k in sorted(cfg)}, "version": __version__,
            "wall_time_seconds": time.perf_counter() - started}
    meta.update(extra or {})
    _write_text(path + ".meta.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _scaled(m, n, t, L_t, L_total, tau):
    """Scenario-dependent normalisation written to ``scaled_statistic``."""
    if m.is_power_tail:
        if t is None or t >= m.gamma:
            return float(centering_scaling(Scenario.TAU, m, n).apply(tau))
        return float(centering_scaling(Scenario.L, m, n, t).apply(L_t))
    if m.family.value == "kingman":
        return float(centering_scaling(Scenario.KINGMAN_GUMBEL, m, n).apply(L_total))
    if m.family.value == "bs":
        return float(centering_scaling(Scenario.BS_STABLE, m, n).apply(L_total))
    return math.nan


def cmd_simulate(cfg) -> int:
    started = time.perf_counter()
    m = measure_from_config(cfg)
    ns = cfg["n"]
    if not ns:
        raise UsageError("--n: a sample size is required")
    if len(ns) != 1:
        raise UsageError("--n: simulate takes a single sample size")
    n = ns[0]
    if n < 2:
        raise UsageError("--n: must be >= 2")
    reps = cfg["reps"] or 1
    theta = cfg["theta"] or 0.0
    if theta < 0:
        raise UsageError("--theta: must be nonnegative")
    grid = cfg["t"] or []
    try:
        res = simulate(m, n, reps, grid=grid, theta=theta, seed=cfg["seed"], tag="simulate",
                       threads=cfg["threads"])
    except ArgumentError as exc:
        raise UsageError(f"--t: {exc}") from exc
    rows = []
    for i in range(reps):
        if grid:
            for j, t in enumerate(grid):
                rows.append((i, n, m.alpha, t, int(res.tau[i]), res.L_t[i, j], res.L_tilde_t[i, j],
                             res.L_hat_t[i, j], int(res.K_t[i, j]), res.L_total[i], res.T_mrca[i],
                             _scaled(m, n, t, res.L_t[i, j], res.L_total[i], res.tau[i])))
        else:
            rows.append((i, n, m.alpha, math.nan, int(res.tau[i]), res.L_total[i],
                         res.L_tilde_total[i], res.L_hat_total[i], int(res.K_total[i]),
                         res.L_total[i], res.T_mrca[i],
                         _scaled(m, n, None, res.L_total[i], res.L_total[i], res.tau[i])))
    out = cfg["out"] or f"coalscope-simulate.{cfg['format']}"
    if cfg["format"] == "csv":
        _write_csv(out, RUN_RECORD_FIELDS, rows)
    else:
        recs = [dict(zip(RUN_RECORD_FIELDS, (r[0], r[1], *[float(v) for v in r[2:4]], r[4],
                                             *[float(v) for v in r[5:8]], r[8],
                                             *[float(v) for v in r[9:]])))
                for r in rows]
        _write_text(out, json.dumps(recs, allow_nan=True) + "\n")
    _write_meta(out, cfg, started, {"rows": len(rows), "columns": list(RUN_RECORD_FIELDS)})
    print(f"wrote {len(rows)} rows to {out}")
    return EXIT_OK


def run_verify(cfg) -> _verify.VerificationReport:
    sc = cfg["scenario"]
    seed, reps, threads = cfg["seed"], cfg["reps"], cfg["threads"]
    ns = cfg["n"]
    if not ns:
        raise UsageError("--n: at least one sample size is required")
    t = cfg["t"][0] if cfg.get("t") else None
    if sc == "kingman":
        return _verify.verify_kingman(ns, reps, seed, cfg["limit_reps"], threads=threads)
    if sc == "bs":
        return _verify.verify_bs(ns, reps, seed, cfg["limit_reps"], threads=threads)
    m = measure_from_config(cfg)
    if sc == "tau":
        return _verify.verify_tau(m, ns, reps, seed, cfg["limit_reps"], threads=threads)
    if sc == "length":
        return _verify.verify_length(m, ns, reps, t, seed, which=cfg["which"],
                                     limit_reps=cfg["limit_reps"], threads=threads)
    if sc == "mutations":
        return _verify.verify_mutations(m, ns, reps, t, cfg["theta"], seed, cfg["limit_reps"],
                                        threads=threads)
    if sc == "mohle":
        return _verify.verify_mohle(m, ns[0], reps, cfg["theta"], seed, threads=threads)
    if sc == "approx":
        return _verify.verify_approximations(m, ns, reps, t, seed, gap_n_list=cfg["gap_n"],
                                             threads=threads)
    return _verify.verify_rates(m, n_max=ns[-1])


def cmd_verify(cfg) -> int:
    started = time.perf_counter()
    rep = run_verify(cfg)
    out = cfg["out"] or f"coalscope-verify-{cfg['scenario']}.json"
    _write_text(out, rep.to_json(indent=2) + "\n")
    _write_meta(out, cfg, started, {"passed": rep.passed})
    for c in rep.checks:
        tag = "PASS" if c.passed else "FAIL"
        if not c.gating:
            tag += " (info)"
        print(f"{tag} {c.name}: {c.value:.6g} {c.op} {c.threshold:.6g}")
    print(f"report written to {out}")
    return EXIT_OK if rep.passed else EXIT_FAIL


def _table_rows(cfg):
    kind = cfg["table"]
    if kind == "vat":
        m = measure_from_config(cfg)
        if not m.is_power_tail:
            raise UsageError("--family: vat needs a power-tail measure")
        g, P = m.gamma, cfg["points"]
        rows = []
        for i in range(1, P + 1):
            t = g * i / (P + 1)
            rows.append((t, v_of_t(m.alpha, t), a_of_t(m, t), kappa_of_t(m.alpha, t)))
        return ("t", "v", "a", "kappa"), rows
    if kind == "limit":
        alpha = cfg["alpha"]
        if not 1.0 < alpha < 2.0:
            raise UsageError(f"--alpha: must lie in (1, 2), got {alpha}")
        k = np.arange(1, cfg["kmax"] + 1)
        return ("k", "pmf", "tail"), list(zip(k.tolist(), limit_jump_pmf(alpha, k),
                                              limit_jump_tail(alpha, k)))
    m = measure_from_config(cfg)
    ns = cfg["n"]
    if not ns:
        raise UsageError("--n: at least one sample size is required")
    if any(n < 2 for n in ns):
        raise UsageError("--n: sizes must be >= 2")
    if kind == "gn":
        if m.is_power_tail:
            tab = gn_asymptote_check(m, ns)
            return ("n", "g_n", "ratio"), list(zip(tab.n.tolist(), tab.g, tab.ratio))
        g = rate_table(m, max(ns))
        return ("n", "g_n", "ratio"), [(n, g[n], math.nan) for n in ns]
    if len(ns) != 1:
        raise UsageError("--n: pmf takes a single sample size")
    tab = transition_table(m, ns[0])
    return ("ell", "pmf", "tail"), list(zip(tab.support.tolist(), tab.pmf, tab.tail()))


def cmd_tables(cfg) -> int:
    started = time.perf_counter()
    header, rows = _table_rows(cfg)
    out = cfg["out"] or f"coalscope-table-{cfg['table']}.csv"
    _write_csv(out, header, rows)
    _write_meta(out, cfg, started, {"rows": len(rows)})
    print(f"wrote {len(rows)} rows to {out}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = merge_config(args)
        handler = {"simulate": cmd_simulate, "verify": cmd_verify, "tables": cmd_tables}
        return handler[args.command](cfg)
    except UsageError as exc:
        print(f"coalscope {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArgumentError, UnsupportedFamilyError) as exc:
        print(f"coalscope {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # runtime, numeric and I/O failures share one exit code
        print(f"coalscope {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
