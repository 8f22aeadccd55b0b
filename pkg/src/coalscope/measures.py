"""Lambda-measures and the deterministic rate / jump-law quantities they induce.

A coalescent measure ``Lambda`` on [0, 1] fixes the merger rates

    lambda_{b,k} = int x^(k-2) (1-x)^(b-k) Lambda(dx),     2 <= k <= b,

the total rate ``g_n`` out of ``n`` blocks and the law of the number of
lineages lost at a jump.  Everything here is a pure function of its inputs;
tables are memoised.

Two evaluation routes exist for most quantities: closed forms (log-gamma
arithmetic, used for Kingman and every Beta-shaped Lambda) and quadrature of
the defining integrals against the tail function ``rho(t) = nu((t, 1])`` with
``nu(dx) = x^-2 Lambda(dx)``.  The quadrature route serves general densities
and doubles as an independent cross-check of the closed forms.
"""
from __future__ import annotations

import enum
import functools
import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, optimize
from scipy.special import betaln, gammaln, logsumexp, xlog1py, xlogy

from .errors import ArgumentError, NumericError, UnsupportedFamilyError

__all__ = [
    "Family",
    "CoalescentMeasure",
    "JumpLawTable",
    "RateFunction",
    "GnAsymptoteTable",
    "lambda_rate",
    "total_rate",
    "total_rate_integral",
    "rate_table",
    "merger_start_table",
    "tail_function",
    "transition_table",
    "first_jump_tail",
    "limit_jump_pmf",
    "limit_jump_tail",
    "limit_laplace",
    "finite_laplace",
    "laplace_expansion_residual",
    "mean_first_jump",
    "mean_first_jump_integral",
    "second_moment_first_jump",
    "second_moment_integral",
    "fitted_rate_constant",
    "gn_asymptote_check",
    "mohle_phi",
    "mohle_moment",
]

QUAD_EPSABS = 1e-12
QUAD_EPSREL = 1e-9


class Family(str, enum.Enum):
    KINGMAN = "kingman"
    BOLTHAUSEN_SZNITMAN = "bs"
    BETA = "beta"
    BETA_DENSITY = "beta-density"
    GENERAL_POWER_TAIL = "general"


@dataclass(frozen=True)
class CoalescentMeasure:
    """A finite measure ``Lambda`` on [0, 1] plus its tail parameters.

    Use the class-method constructors rather than the raw initializer.

    Attributes
    ----------
    family : Family
    alpha : float
        Stability exponent; 2 for Kingman and 1 for Bolthausen-Sznitman by
        convention.
    c0 : float
        Tail constant in ``rho(t) = c0 t^-alpha + O(t^(zeta-alpha))``; NaN
        when ``Lambda`` has an atom at 0 (Kingman).
    zeta : float
        Regularity exponent of the tail expansion.
    density : callable or None
        Vectorised density of ``Lambda`` on (0, 1) for general measures.
    shape : (a, b) or None
        Set when ``Lambda = mass * Beta(a, b)``; enables closed forms.
    mass : float
        Total mass of ``Lambda``.
    """

    family: Family
    alpha: float
    c0: float
    zeta: float
    density: Optional[Callable] = field(default=None, compare=True)
    shape: Optional[tuple] = None
    mass: float = 1.0

    @classmethod
    def kingman(cls) -> "CoalescentMeasure":
        return cls(Family.KINGMAN, 2.0, math.nan, math.inf)

    @classmethod
    def bolthausen_sznitman(cls) -> "CoalescentMeasure":
        # Lebesgue measure: rho(t) = 1/t - 1
        return cls(Family.BOLTHAUSEN_SZNITMAN, 1.0, 1.0, 1.0, shape=(1.0, 1.0))

    @classmethod
    def beta(cls, alpha: float) -> "CoalescentMeasure":
        """Beta(2 - alpha, alpha) coalescent, 1 < alpha < 2."""
        alpha = float(alpha)
        if not 1.0 < alpha < 2.0:
            raise ArgumentError(f"Beta coalescent needs alpha in (1, 2), got {alpha}")
        c0 = 1.0 / (alpha * math.gamma(2.0 - alpha) * math.gamma(alpha))
        return cls(Family.BETA, alpha, c0, 1.0, shape=(2.0 - alpha, alpha))

    @classmethod
    def beta_density(cls, a: float, b: float, mass: float = 1.0) -> "CoalescentMeasure":
        """``Lambda(dx) = mass * x^(a-1) (1-x)^(b-1) dx / B(a, b)``.

        ``beta_density(2, 1)`` is ``Lambda(dx) = 2x dx``.  The tail exponent
        is ``alpha = 2 - a``; ``c0`` is only meaningful for ``a < 2``.
        """
        a, b, mass = float(a), float(b), float(mass)
        if a <= 0 or b <= 0 or mass <= 0:
            raise ArgumentError("beta_density needs a, b, mass > 0")
        alpha = 2.0 - a
        c0 = mass / (alpha * math.exp(betaln(a, b))) if alpha > 0 else math.nan
        return cls(Family.BETA_DENSITY, alpha, c0, 1.0, shape=(a, b), mass=mass)

    @classmethod
    def power_tail(cls, density: Callable, alpha: float, c0: float,
                   zeta: float) -> "CoalescentMeasure":
        """General ``Lambda`` given by a vectorised density on (0, 1).

        ``alpha``, ``c0`` and ``zeta`` describe the tail of ``rho`` and are
        trusted as given; they are not re-derived from the density.
        """
        if not 1.0 < alpha < 2.0:
            raise ArgumentError(f"alpha must lie in (1, 2), got {alpha}")
        if c0 <= 0 or zeta <= 0:
            raise ArgumentError("c0 and zeta must be positive")
        return cls(Family.GENERAL_POWER_TAIL, float(alpha), float(c0), float(zeta),
                   density=density)

    @property
    def gamma(self) -> float:
        return self.alpha - 1.0

    @property
    def is_power_tail(self) -> bool:
        """True when the asymptotic theory (1 < alpha < 2) applies."""
        return 1.0 < self.alpha < 2.0 and self.c0 > 0

    def satisfies_regularity(self) -> bool:
        return self.is_power_tail and self.zeta > 1.0 - 1.0 / self.alpha

    def describe(self) -> dict:
        d = {"family": self.family.value, "alpha": self.alpha, "c0": self.c0,
             "zeta": self.zeta, "mass": self.mass}
        if self.shape is not None:
            d["shape"] = list(self.shape)
        return d

    def density_values(self, x):
        """Density of ``Lambda`` at ``x`` in (0, 1)."""
        if self.density is not None:
            return np.asarray(self.density(x), dtype=float)
        if self.shape is None:
            raise UnsupportedFamilyError("Kingman Lambda is an atom at 0 and has no density")
        a, b = self.shape
        x = np.asarray(x, dtype=float)
        return self.mass * np.exp(xlogy(a - 1, x) + xlog1py(b - 1, -x) - betaln(a, b))


def _require_power_tail(m: CoalescentMeasure, what: str) -> None:
    if not m.is_power_tail:
        raise UnsupportedFamilyError(
            f"{what} needs a power-tail measure with 1 < alpha < 2 (got {m.family.value}, "
            f"alpha={m.alpha})")


def _check_n(n: int, lo: int = 2) -> int:
    if int(n) != n or n < lo:
        raise ArgumentError(f"n must be an integer >= {lo}, got {n}")
    return int(n)


# ---------------------------------------------------------------------------
# quadrature


def _quad(f, lo, hi, knots=(), epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL):
    """Adaptive quadrature of ``f`` on [lo, hi], split at interior ``knots``."""
    pts = sorted({lo, hi, *(k for k in knots if lo < k < hi)})
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        res = integrate.quad(f, a, b, epsabs=epsabs, epsrel=epsrel, limit=500,
                             full_output=1)
        y, err = res[0], res[1]
        if len(res) > 3 and err > 10 * max(epsabs, epsrel * abs(y)):
            raise NumericError(f"quadrature on [{a}, {b}] did not converge: {res[3]}",
                               achieved=err)
        total += y
    return total


_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)


class _TailTable:
    """``rho(t) = int_t^1 x^-2 Lambda(dx)`` for a density measure.

    ``rho`` is tabulated exactly at log-spaced nodes (dense towards 0 and
    towards 1) and completed between nodes by Gauss-Legendre on the remaining
    sub-panel, so every evaluation is at quadrature accuracy.
    """

    def __init__(self, m: CoalescentMeasure, decades: int = 16, per_decade: int = 8):
        self._f = lambda x: m.density_values(x) / np.square(x)
        left = np.logspace(-decades, math.log10(0.5), decades * per_decade + 1)
        right = 1.0 - np.logspace(math.log10(0.5), -decades, decades * per_decade + 1)[1:]
        nodes = np.concatenate([left, right])
        lo, hi = nodes[:-1], nodes[1:]
        panel = self._gl(lo, hi)
        end = _quad(lambda x: float(self._f(x)), nodes[-1], 1.0)
        R = np.empty_like(nodes)
        R[-1] = end
        R[:-1] = end + np.cumsum(panel[::-1])[::-1]
        self.nodes, self.R = nodes, R

    def _gl(self, lo, hi):
        half = 0.5 * (hi - lo)
        x = (lo + hi)[:, None] * 0.5 + half[:, None] * _GL_X[None, :]
        return half * (self._f(x) @ _GL_W)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        out = np.empty_like(t)
        nodes, R = self.nodes, self.R
        low = t < nodes[0]
        high = t >= nodes[-1]
        mid = ~(low | high)
        if mid.any():
            tm = t[mid]
            i = np.searchsorted(nodes, tm, side="right")
            i = np.minimum(i, len(nodes) - 1)
            out[mid] = R[i] + self._gl(tm, nodes[i])
        for j in np.flatnonzero(low):
            out[j] = R[0] + _quad(lambda x: float(self._f(x)), t[j], nodes[0])
        for j in np.flatnonzero(high):
            out[j] = 0.0 if t[j] >= 1.0 else _quad(lambda x: float(self._f(x)), t[j], 1.0)
        return out[0] if scalar else out


@functools.lru_cache(maxsize=64)
def tail_function(m: CoalescentMeasure) -> Callable:
    """Return the vectorised tail function ``rho(t) = nu((t, 1])``."""
    if m.family is Family.KINGMAN:
        raise UnsupportedFamilyError("Kingman Lambda has no tail function (atom at 0)")
    if m.family is Family.BETA:
        alpha, c0 = m.alpha, m.c0
        # int_t^1 x^(-1-alpha) (1-x)^(alpha-1) dx = ((1-t)/t)^alpha / alpha
        return lambda t: c0 * np.power((1.0 - np.asarray(t)) / np.asarray(t), alpha)
    if m.shape == (1.0, 1.0):
        mass = m.mass
        return lambda t: mass * (1.0 / np.asarray(t) - 1.0)
    return _TailTable(m)


# ---------------------------------------------------------------------------
# rates


def _log_lambda_shape(m: CoalescentMeasure, b, k):
    a, bb = m.shape
    return math.log(m.mass) + betaln(k - 2 + a, b - k + bb) - betaln(a, bb)


def lambda_rate(m: CoalescentMeasure, b: int, k: int, method: str = "auto") -> float:
    """Rate at which a given ``k``-tuple among ``b`` blocks merges.

    Parameters
    ----------
    method : {"auto", "closed", "quad"}
        ``"quad"`` integrates the defining integral numerically even when a
        closed form exists.
    """
    b = _check_n(b)
    if int(k) != k or not 2 <= k <= b:
        raise ArgumentError(f"need 2 <= k <= b, got b={b}, k={k}")
    if m.family is Family.KINGMAN:
        return 1.0 if k == 2 else 0.0
    if method == "closed" or (method == "auto" and m.shape is not None):
        if m.shape is None:
            raise UnsupportedFamilyError("no closed form for a general density")
        return math.exp(_log_lambda_shape(m, b, k))
    if method not in ("auto", "quad"):
        raise ArgumentError(f"unknown method {method!r}")
    return _lambda_quad(m, b, k)


def _lambda_quad(m, b, k):
    return math.exp(_log_lambda_quad(m, b, k))


def _log_lambda_quad(m, b, k):
    def logf(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            v = xlogy(k - 2, x) + xlog1py(b - k, -x) + np.log(m.density_values(x))
        return np.where(np.isfinite(v), v, -np.inf)

    hints = [(k - 2) / (b - 2)] if b > 2 else []
    return _log_quad(logf, 1.0 / b, hints)


def _log_binom(n, k):
    return gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0)


def _log_merger_terms(m, n):
    """log of C(n, l+1) lambda_{n, l+1} for l = 1..n-1 (closed forms)."""
    ell = np.arange(1, n, dtype=float)
    return _log_binom(n, ell + 1) + _log_lambda_shape(m, n, ell + 1)


def total_rate(m: CoalescentMeasure, n: int, check: bool = False) -> float:
    """Total merger rate ``g_n = sum_l C(n, l+1) lambda_{n, l+1}``.

    With ``check=True`` the integral form ``n(n-1) int (1-t)^(n-2) t rho(t) dt``
    is evaluated as well and a :class:`NumericError` is raised when the two
    disagree by more than a relative 1e-8.
    """
    n = _check_n(n)
    if m.family is Family.KINGMAN:
        return n * (n - 1) / 2.0
    if m.shape is not None:
        g = float(np.exp(logsumexp(_log_merger_terms(m, n))))
    else:
        g = float(_general_merger_terms(m, n).sum())
    if check:
        g2 = total_rate_integral(m, n)
        if abs(g - g2) > 1e-8 * abs(g):
            raise NumericError(f"g_{n}: sum form {g!r} vs integral form {g2!r}",
                               achieved=abs(g - g2) / g)
    return g


_LOGIT_SCAN = np.linspace(-36.0, 36.0, 289)


def _log_integrand_peak(logf, hints=()):
    """Maximiser of a log-integrand on (0, 1), or None when it sits at an edge.

    A logit-spaced scan plus optional hints brackets the peak, then a bounded
    scalar search refines it in logit coordinates.
    """
    s = np.concatenate([_LOGIT_SCAN, [math.log(x / (1.0 - x)) for x in hints if 0 < x < 1]])
    vals = logf(1.0 / (1.0 + np.exp(-s)))
    i = int(np.argmax(vals))
    if not np.isfinite(vals[i]) or s[i] <= _LOGIT_SCAN[0] or s[i] >= _LOGIT_SCAN[-1]:
        return None
    res = optimize.minimize_scalar(lambda z: -float(logf(1.0 / (1.0 + math.exp(-z)))),
                                   bounds=(s[i] - 0.25, s[i] + 0.25), method="bounded",
                                   options={"xatol": 1e-10})
    z = res.x if -res.fun > vals[i] else s[i]
    t = 1.0 / (1.0 + math.exp(-z))
    return t, float(logf(t))


def _log_quad(logf, bulk, hints=(), knots_extra=()):
    """log of ``int_0^1 exp(logf(t)) dt`` with the integrand rescaled at its peak.

    Rescaling keeps full relative accuracy for integrals far below the
    absolute tolerance.  When the peak is at an endpoint (an integrable
    singularity, or mass piled against 1) the scale is taken at ``bulk``.
    """
    peak = _log_integrand_peak(logf, hints)
    if peak is None:
        mode, logscale = bulk, float(logf(bulk))
    else:
        mode, logscale = peak

    def f(t):
        if t <= 0.0 or t >= 1.0:
            return 0.0
        v = float(logf(t))
        return math.exp(v - logscale) if v > -np.inf else 0.0

    knots = [mode, mode / 8, min(8 * mode, 0.5 * (1 + mode)), bulk, *knots_extra]
    val = _quad(f, 0.0, 1.0, knots=knots, epsabs=0.0, epsrel=1e-11)
    return logscale + math.log(val)


def _log_scale_integral(m, p, q, knots_extra=()):
    """log of ``int_0^1 t^p (1-t)^q rho(t) dt`` for p >= 1, q >= 0."""
    rho = tail_function(m)

    def logf(t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            v = p * np.log(t) + q * np.log1p(-t) + np.log(rho(t))
        return np.where(np.isfinite(v), v, -np.inf)

    e = p - max(m.alpha, 0.0)
    hints = [e / (e + q)] if e > 0 and q > 0 else []
    return _log_quad(logf, 1.0 / (p + q + 1.0), hints, knots_extra)


def total_rate_integral(m: CoalescentMeasure, n: int) -> float:
    """``g_n`` from the tail function: ``n(n-1) int (1-t)^(n-2) t rho(t) dt``."""
    n = _check_n(n)
    if m.family is Family.KINGMAN:
        raise UnsupportedFamilyError("Kingman has no tail function")
    return math.exp(math.log(n) + math.log(n - 1) + _log_scale_integral(m, 1, n - 2))


_cache_lock = threading.RLock()


def _locked_cache(maxsize):
    """lru_cache whose misses are computed under a lock (concurrent readers ok)."""

    def deco(fn):
        cached = functools.lru_cache(maxsize=maxsize)(fn)

        @functools.wraps(fn)
        def wrapper(*args):
            with _cache_lock:
                return cached(*args)

        wrapper.cache_clear = cached.cache_clear
        return wrapper

    return deco


@_locked_cache(maxsize=256)
def _general_merger_terms(m, n):
    loglam = np.array([_log_lambda_quad(m, n, k) for k in range(2, n + 1)])
    return np.exp(_log_binom(n, np.arange(2, n + 1, dtype=float)) + loglam)


@_locked_cache(maxsize=32)
def rate_table(m: CoalescentMeasure, n: int) -> np.ndarray:
    """Array ``g`` with ``g[k] = g_k`` for ``k = 2..n`` (``g[0] = g[1] = 0``).

    Built from ``g_2 = lambda_{2,2}`` and ``g_{k+1} = g_k + k lambda_{k+1,2}``,
    which follows from ``P(Bin(k+1,x) >= 2) - P(Bin(k,x) >= 2) = k x^2 (1-x)^(k-1)``.
    """
    n = _check_n(n)
    k = np.arange(n + 1, dtype=float)
    g = np.zeros(n + 1)
    if m.family is Family.KINGMAN:
        g[2:] = k[2:] * (k[2:] - 1) / 2.0
        g.setflags(write=False)
        return g
    if m.shape is not None:
        a, bb = m.shape
        lam2 = m.mass * np.exp(betaln(a, k[2:] - 2 + bb) - betaln(a, bb))
    else:
        lam2 = np.array([_lambda_quad(m, int(b), 2) for b in range(2, n + 1)])
    inc = np.empty(n - 1)
    inc[0] = lam2[0]
    inc[1:] = k[2:n] * lam2[1:]
    g[2:] = np.cumsum(inc)
    g.setflags(write=False)
    return g


@_locked_cache(maxsize=32)
def merger_start_table(m: CoalescentMeasure, n: int) -> np.ndarray:
    """``p1[k] = P(X_1^(k) = 1)`` for k = 2..n, the seed of the ratio recurrence."""
    if m.family is not Family.KINGMAN and m.shape is None:
        raise UnsupportedFamilyError("ratio recurrence needs a Beta-shaped measure")
    g = rate_table(m, n)
    k = np.arange(n + 1, dtype=float)
    p1 = np.zeros(n + 1)
    if m.family is Family.KINGMAN:
        p1[2:] = 1.0
    else:
        a, bb = m.shape
        lam2 = m.mass * np.exp(betaln(a, k[2:] - 2 + bb) - betaln(a, bb))
        p1[2:] = k[2:] * (k[2:] - 1) / 2.0 * lam2 / g[2:]
    p1.setflags(write=False)
    return p1


# ---------------------------------------------------------------------------
# first jump


@dataclass(frozen=True)
class JumpLawTable:
    """Law of ``X_1^(n)``, the number of lineages lost at the first jump.

    ``pmf[l - 1] = P(X_1^(n) = l)`` for ``l = 1..n-1``.
    """

    n: int
    pmf: np.ndarray
    g_n: float

    @property
    def support(self) -> np.ndarray:
        return np.arange(1, self.n)

    def tail(self) -> np.ndarray:
        """``tail[k - 1] = P(X >= k)``, from reverse cumulative sums."""
        return np.cumsum(self.pmf[::-1])[::-1]

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.pmf)


@_locked_cache(maxsize=256)
def transition_table(m: CoalescentMeasure, n: int) -> JumpLawTable:
    """Jump law from ``n`` blocks: ``P(n, n-l) = C(n, l+1) lambda_{n,l+1} / g_n``.

    For Beta-shaped measures the atoms are generated by the ratio recurrence

        p[l+1] / p[l] = ((n-l-1)/(l+2)) * ((l-1+a)/(n-l-2+b))

    accumulated in log space, then renormalised.
    """
    n = _check_n(n)
    if m.family is Family.KINGMAN:
        pmf = np.zeros(n - 1)
        pmf[0] = 1.0
        return JumpLawTable(n, pmf, n * (n - 1) / 2.0)
    if m.shape is not None:
        a, bb = m.shape
        ell = np.arange(1, n - 1, dtype=float)
        logr = (np.log(n - ell - 1) - np.log(ell + 2)
                + np.log(ell - 1 + a) - np.log(n - ell - 2 + bb))
        logp = np.concatenate([[0.0], np.cumsum(logr)])
        p = np.exp(logp - logp.max())
        pmf = p / p.sum()
        g = total_rate(m, n)
    else:
        terms = _general_merger_terms(m, n)
        g = float(terms.sum())
        pmf = terms / g
    pmf.setflags(write=False)
    return JumpLawTable(n, pmf, g)


def first_jump_tail(m: CoalescentMeasure, n: int, k: int) -> float:
    """``P(X_1^(n) >= k)`` from the ratio of tail-function integrals

        (n-2)! / (k! (n-k-1)!) * int (1-t)^(n-k-1) t^k rho / int (1-t)^(n-2) t rho.
    """
    n = _check_n(n)
    if int(k) != k or not 1 <= k <= n - 1:
        raise ArgumentError(f"need 1 <= k <= n-1, got n={n}, k={k}")
    if m.family is Family.KINGMAN:
        return 1.0 if k == 1 else 0.0
    if k == 1:
        return 1.0
    logc = gammaln(n - 1.0) - gammaln(k + 1.0) - gammaln(n - k + 0.0)
    return float(math.exp(logc + _log_scale_integral(m, k, n - k - 1)
                          - _log_scale_integral(m, 1, n - 2)))


def _check_alpha(alpha):
    if not 1.0 < alpha < 2.0:
        raise ArgumentError(f"alpha must lie in (1, 2), got {alpha}")


def limit_jump_tail(alpha: float, k):
    """``P(X >= k) = Gamma(k+1-alpha) / (Gamma(2-alpha) k!)`` (vectorised in k)."""
    _check_alpha(alpha)
    k = np.asarray(k, dtype=float)
    if np.any(k < 1):
        raise ArgumentError("k must be >= 1")
    out = np.exp(gammaln(k + 1 - alpha) - gammaln(2 - alpha) - gammaln(k + 1))
    return float(out) if out.ndim == 0 else out


def limit_jump_pmf(alpha: float, k):
    """``P(X = k) = alpha Gamma(k+1-alpha) / (Gamma(2-alpha) (k+1)!)``."""
    _check_alpha(alpha)
    k = np.asarray(k, dtype=float)
    if np.any(k < 1):
        raise ArgumentError("k must be >= 1")
    out = np.exp(math.log(alpha) + gammaln(k + 1 - alpha) - gammaln(2 - alpha)
                 - gammaln(k + 2))
    return float(out) if out.ndim == 0 else out


def limit_laplace(alpha: float, u):
    """Laplace transform of the limit jump law,

        phi(u) = 1 + (e^u - 1)/(alpha-1) * ((1 - e^-u)^(alpha-1) - 1),

    evaluated as ``1 - (1-w) (1 - (1-w)^gamma) / (gamma w)`` with ``w = e^-u``
    to avoid overflow.
    """
    _check_alpha(alpha)
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise ArgumentError("u must be nonnegative")
    gam = alpha - 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.exp(-u)
        frac = -np.expm1(gam * np.log1p(-w)) / w
        out = np.where(u == 0, 1.0, 1.0 - (1.0 - w) * frac / gam)
    out = np.where(w == 0.0, 0.0, out)
    return float(out) if out.ndim == 0 else out


def finite_laplace(m: CoalescentMeasure, n: int, u):
    """``phi_n(u) = E[exp(-u X_1^(n))]`` from the jump-law table."""
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise ArgumentError("u must be nonnegative")
    tab = transition_table(m, n)
    out = np.exp(-np.multiply.outer(u, tab.support.astype(float))) @ tab.pmf
    return float(out) if out.ndim == 0 else out


def laplace_expansion_residual(m: CoalescentMeasure, n: int, u):
    """``phi_n(u) - (1 - u/gamma + u^alpha/gamma)``, a diagnostic of the
    small-u expansion of the finite-n Laplace transform."""
    _require_power_tail(m, "laplace_expansion_residual")
    gam = m.gamma
    u = np.asarray(u, dtype=float)
    return finite_laplace(m, n, u) - (1.0 - u / gam + u ** m.alpha / gam)


def mean_first_jump(m: CoalescentMeasure, n: int) -> float:
    tab = transition_table(m, n)
    return float(tab.support @ tab.pmf)


def second_moment_first_jump(m: CoalescentMeasure, n: int) -> float:
    tab = transition_table(m, n)
    s = tab.support.astype(float)
    return float((s * s) @ tab.pmf)


def mean_first_jump_integral(m: CoalescentMeasure, n: int) -> float:
    """``n int [1 - (1-t)^(n-1)] rho(t) dt / g_n`` with ``g_n`` in integral form."""
    n = _check_n(n)
    if m.family is Family.KINGMAN:
        raise UnsupportedFamilyError("Kingman has no tail function")
    rho = tail_function(m)

    def f(t):
        return -math.expm1((n - 1) * math.log1p(-t)) * float(rho(t)) if 0 < t < 1 else 0.0

    num = n * _quad(f, 0.0, 1.0, knots=[1.0 / n, 10.0 / n, 0.5], epsabs=0.0, epsrel=1e-11)
    return num / total_rate_integral(m, n)


def second_moment_integral(m: CoalescentMeasure, n: int) -> float:
    """``2n(n-1) int t rho(t) dt / g_n - E[X_1^(n)]``, both in integral form."""
    n = _check_n(n)
    if m.family is Family.KINGMAN:
        raise UnsupportedFamilyError("Kingman has no tail function")
    rho = tail_function(m)
    i1 = _quad(lambda t: t * float(rho(t)) if 0 < t < 1 else 0.0, 0.0, 1.0,
               knots=[1e-6, 1e-3, 0.5], epsabs=0.0, epsrel=1e-11)
    return 2.0 * n * (n - 1) * i1 / total_rate_integral(m, n) - mean_first_jump_integral(m, n)


@dataclass(frozen=True)
class RateFunction:
    """Convergence rate ``phi_n`` of the first-jump mean towards ``1/gamma``.

    ``n^-zeta`` if zeta < alpha-1, ``n^(1-alpha+eps0)`` if zeta = alpha-1,
    ``n^(1-alpha)`` otherwise.
    """

    alpha: float
    zeta: float
    epsilon0: float = 0.01

    def __call__(self, n):
        n = np.asarray(n, dtype=float)
        gam = self.alpha - 1.0
        if math.isclose(self.zeta, gam, rel_tol=1e-12):
            return n ** (1.0 - self.alpha + self.epsilon0)
        if self.zeta < gam:
            return n ** (-self.zeta)
        return n ** (1.0 - self.alpha)

    @classmethod
    def for_measure(cls, m: CoalescentMeasure, epsilon0: float = 0.01) -> "RateFunction":
        _require_power_tail(m, "RateFunction")
        return cls(m.alpha, m.zeta, epsilon0)


def fitted_rate_constant(m: CoalescentMeasure, n_list: Sequence[int],
                         epsilon0: float = 0.01) -> float:
    """Smallest C with ``|E[X_1^(n)] - 1/gamma| <= C phi_n`` over ``n_list``."""
    rate = RateFunction.for_measure(m, epsilon0)
    return max(abs(mean_first_jump(m, n) - 1.0 / m.gamma) / float(rate(n)) for n in n_list)


@dataclass(frozen=True)
class GnAsymptoteTable:
    n: np.ndarray
    g: np.ndarray
    ratio: np.ndarray
    residual: np.ndarray

    def rows(self):
        return list(zip(self.n.tolist(), self.g.tolist(), self.ratio.tolist(),
                        self.residual.tolist()))


def gn_asymptote_check(m: CoalescentMeasure, n_list: Sequence[int]) -> GnAsymptoteTable:
    """Ratios ``g_n / (c0 Gamma(2-alpha) n^alpha)`` and scaled residuals
    ``n^min(zeta,1) |ratio - 1|``."""
    _require_power_tail(m, "gn_asymptote_check")
    n = np.array([_check_n(k) for k in n_list], dtype=np.int64)
    g = np.array([total_rate(m, int(k)) for k in n])
    ratio = g / (m.c0 * math.gamma(2.0 - m.alpha) * n.astype(float) ** m.alpha)
    resid = n.astype(float) ** min(m.zeta, 1.0) * np.abs(ratio - 1.0)
    return GnAsymptoteTable(n, g, ratio, resid)


# ---------------------------------------------------------------------------
# measures with int x^-1 Lambda(dx) < infinity


def _require_finite_inverse_moment(m: CoalescentMeasure) -> None:
    if m.family is Family.KINGMAN:
        raise UnsupportedFamilyError("int x^-1 Lambda(dx) is infinite for Kingman")
    if m.shape is not None:
        if m.shape[0] <= 1.0:
            raise UnsupportedFamilyError(
                f"int x^-1 Lambda(dx) is infinite for {m.family.value} (a={m.shape[0]})")
        return
    f = lambda x: float(m.density_values(x)) / x
    i1 = _quad(f, 1e-8, 1.0, knots=[1e-4])
    i2 = _quad(f, 1e-14, 1e-8)
    if not math.isfinite(i1) or i2 > 1e-3 * max(i1, 1e-300):
        raise UnsupportedFamilyError("int x^-1 Lambda(dx) appears to diverge")


def mohle_phi(m: CoalescentMeasure, i: int) -> float:
    """``Phi(i) = int (1 - (1-x)^i) x^-2 Lambda(dx)``.

    For Beta-shaped measures this is the positive series
    ``mass * sum_{j<i} B(a-1, b+j) / B(a, b)``; otherwise quadrature.
    """
    if int(i) != i or i < 1:
        raise ArgumentError(f"i must be a positive integer, got {i}")
    _require_finite_inverse_moment(m)
    if m.shape is not None:
        a, b = m.shape
        j = np.arange(int(i), dtype=float)
        return float(m.mass * np.exp(betaln(a - 1.0, b + j) - betaln(a, b)).sum())

    def f(x):
        return -math.expm1(i * math.log1p(-x)) / (x * x) * float(m.density_values(x))

    return _quad(f, 0.0, 1.0, knots=[1.0 / (i + 1)])


def mohle_moment(m: CoalescentMeasure, k: int) -> float:
    """``E[Z^k] = k! / prod_{i<=k} Phi(i)`` of the limit of ``K^(n) / (n theta)``."""
    if int(k) != k or k < 0:
        raise ArgumentError(f"k must be a nonnegative integer, got {k}")
    if k == 0:
        return 1.0
    logp = sum(math.log(mohle_phi(m, i)) for i in range(1, int(k) + 1))
    return math.exp(math.lgamma(k + 1) - logp)
