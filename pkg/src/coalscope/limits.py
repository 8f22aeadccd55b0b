"""Deterministic length profiles and samplers for the limit laws.

Stable parametrization
----------------------
The driving process ``V`` is strictly ``alpha``-stable with

    E[exp(-u V_t)] = exp(t u^alpha / gamma),   gamma = alpha - 1.

A Chambers-Mallows-Stuck draw ``X ~ S_alpha(sigma, beta=1, 0)`` with
``1 < alpha < 2`` has ``log E[exp(-u X)] = -sigma^alpha u^alpha / cos(pi alpha / 2)``
and ``cos(pi alpha / 2) < 0``, so matching exponents gives

    sigma^alpha = t |cos(pi alpha / 2)| / gamma.

The Laplace transform is finite for ``u > 0`` only because the left tail is
light; the right tail is the heavy one (``P(V_t > x) ~ c x^-alpha``).

For ``alpha = 1`` the law ``S_1(sigma, 1, mu)`` has
``log E[exp(-l X)] = -mu l + (2 sigma / pi) l log l``; the target
``E[exp(-l Z)] = exp(l log l)`` is ``sigma = pi / 2``, ``mu = 0``, i.e.
``Z = (pi/2) X_1 + log(pi/2)`` with ``X_1 ~ S_1(1, 1, 0)``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy import integrate
from scipy.special import gamma as gamma_fn

from .errors import ArgumentError, NumericError, UnsupportedFamilyError
from .measures import CoalescentMeasure, Family

__all__ = [
    "ALPHA0",
    "SQRT2",
    "v_of_t",
    "a_of_t",
    "kappa_of_t",
    "beta_c0",
    "stable_rvs",
    "bs_stable_rvs",
    "StablePath",
    "sample_stable_path",
    "Scenario",
    "LimitSample",
    "sample_limit",
    "Normalization",
    "centering_scaling",
    "bs_centering",
]

ALPHA0 = (1.0 + math.sqrt(5.0)) / 2.0
SQRT2 = math.sqrt(2.0)


def _check_alpha(alpha) -> float:
    alpha = float(alpha)
    if not 1.0 < alpha < 2.0:
        raise ArgumentError(f"alpha must lie in (1, 2), got {alpha}")
    return alpha


def _check_t(alpha, t, closed=True) -> float:
    g = alpha - 1.0
    t = float(t)
    ok = (0.0 <= t <= g * (1 + 1e-12)) if closed else (0.0 < t < g)
    if not ok:
        span = "[0, gamma]" if closed else "(0, gamma)"
        raise ArgumentError(f"t must lie in {span} with gamma = {g}, got {t}")
    return min(t, g)


def beta_c0(alpha: float) -> float:
    """Tail constant of the Beta(2-alpha, alpha) measure."""
    alpha = _check_alpha(alpha)
    return 1.0 / (alpha * gamma_fn(2.0 - alpha) * gamma_fn(alpha))


def v_of_t(alpha: float, t: float) -> float:
    """``v(t) = int_0^t (1 - r/gamma)^(-gamma) dr`` in closed form."""
    alpha = _check_alpha(alpha)
    t = _check_t(alpha, t)
    g = alpha - 1.0
    if t >= g:
        return g / (2.0 - alpha)
    return g / (2.0 - alpha) * -math.expm1((2.0 - alpha) * math.log1p(-t / g))


def a_of_t(m: CoalescentMeasure, t: float) -> float:
    """First-order length profile ``a(t) = v(t) / (C0 Gamma(2-alpha))``."""
    if not m.is_power_tail:
        raise UnsupportedFamilyError(f"a(t) needs a power-tail measure, got {m.family.value}")
    return v_of_t(m.alpha, t) / (m.c0 * gamma_fn(2.0 - m.alpha))


def _kappa_inner(alpha, t, r):
    # int_r^t (1 - s/g)^(-alpha) ds; the prefactor g / (alpha - 1) is one
    g = alpha - 1.0
    return (1.0 - t / g) ** (1.0 - alpha) - (1.0 - r / g) ** (1.0 - alpha)


def kappa_of_t(alpha: float, t: float) -> float:
    """Scale functional ``kappa(t) = int_0^t (int_r^t (1-s/gamma)^(-alpha) ds)^alpha dr``."""
    alpha = _check_alpha(alpha)
    t = _check_t(alpha, t, closed=False)
    val, err = integrate.quad(lambda r: _kappa_inner(alpha, t, r) ** alpha, 0.0, t,
                              epsabs=1e-14, epsrel=1e-11, limit=200)
    if not np.isfinite(val) or err > 1e-9 * max(val, 1e-300) + 1e-14:
        raise NumericError("kappa quadrature did not converge", achieved=err)
    return val


# ---------------------------------------------------------------------------
# samplers

def stable_rvs(alpha: float, t: float, rng: np.random.Generator, size=None):
    """Draws of ``V_t``, so that ``E[exp(-u V_t)] = exp(t u^alpha / gamma)``."""
    alpha = _check_alpha(alpha)
    if t < 0:
        raise ArgumentError("t must be nonnegative")
    sigma = (t * abs(math.cos(math.pi * alpha / 2.0)) / (alpha - 1.0)) ** (1.0 / alpha)
    v = rng.uniform(-math.pi / 2.0, math.pi / 2.0, size)
    w = rng.standard_exponential(size)
    tan_ = math.tan(math.pi * alpha / 2.0)
    b = math.atan(tan_) / alpha
    s = (1.0 + tan_ * tan_) ** (1.0 / (2.0 * alpha))
    x = (s * np.sin(alpha * (v + b)) / np.cos(v) ** (1.0 / alpha)
         * (np.cos(v - alpha * (v + b)) / w) ** ((1.0 - alpha) / alpha))
    return sigma * x


def bs_stable_rvs(rng: np.random.Generator, size=None):
    """Draws of ``Z`` with ``E[exp(-l Z)] = exp(l log l)``."""
    h = math.pi / 2.0
    v = rng.uniform(-h, h, size)
    w = rng.standard_exponential(size)
    x1 = (2.0 / math.pi) * ((h + v) * np.tan(v) - np.log(h * w * np.cos(v) / (h + v)))
    return h * x1 + math.log(h)


@dataclass(frozen=True)
class StablePath:
    """``V`` observed on an increasing grid; ``values[..., j] = V(grid[j])``."""

    grid: np.ndarray
    values: np.ndarray
    alpha: float

    @property
    def gamma_param(self) -> float:
        return self.alpha - 1.0


def sample_stable_path(alpha: float, grid, rng: np.random.Generator, size=None) -> StablePath:
    """Sample ``V`` at the grid points from independent stable increments.

    With ``size`` given, ``values`` has shape ``(size, len(grid))``.
    """
    alpha = _check_alpha(alpha)
    grid = np.asarray(grid, dtype=float).reshape(-1)
    g = alpha - 1.0
    if grid.size == 0 or grid[0] < 0 or np.any(np.diff(grid) <= 0) or grid[-1] > g * (1 + 1e-12):
        raise ArgumentError("grid must be strictly increasing inside [0, gamma]")
    dt = np.diff(np.concatenate([[0.0], grid]))
    shape = (len(grid),) if size is None else (int(size), len(grid))
    unit = stable_rvs(alpha, 1.0, rng, shape)
    values = np.cumsum(unit * dt ** (1.0 / alpha), axis=-1)
    return StablePath(grid, values, alpha)


class Scenario(str, enum.Enum):
    TAU = "tau"
    LHAT = "lhat"
    L = "l"
    MUTATION_LOW = "mutation-low"
    MUTATION_HIGH = "mutation-high"
    MUTATION_CRIT = "mutation-crit"
    KINGMAN_GUMBEL = "kingman-gumbel"
    BS_STABLE = "bs-stable"


@dataclass(frozen=True)
class LimitSample:
    """Draws from one limit law; ``value`` is a float or an array of draws."""

    scenario: Scenario
    value: object
    t: float | None = None
    params: Mapping = field(default_factory=dict)


def _lhat_oneshot(alpha, t, rng, size):
    return (alpha - 1.0) * kappa_of_t(alpha, t) ** (1.0 / alpha) * stable_rvs(alpha, 1.0, rng, size)


def _lhat_path(alpha, t, rng, size, steps):
    g = alpha - 1.0
    h = t / steps
    mid = (np.arange(steps) + 0.5) * h
    w = (1.0 - mid / g) ** (-alpha)
    total = 1 if size is None else int(size)
    out = np.empty(total)
    for lo in range(0, total, 512):
        hi = min(total, lo + 512)
        out[lo:hi] = sample_stable_path(alpha, mid, rng, size=hi - lo).values @ w
    out *= g * h
    return float(out[0]) if size is None else out


def _limit_c0(params, alpha):
    m = params.get("measure")
    if m is not None:
        if not m.is_power_tail:
            raise UnsupportedFamilyError("V*_t needs a power-tail measure")
        return m.c0
    return params.get("c0", beta_c0(alpha))


def sample_limit(scenario, params: Mapping, rng: np.random.Generator, size=None) -> LimitSample:
    """Draw from the limit law named by ``scenario``.

    Parameters
    ----------
    scenario : Scenario or str
    params : mapping
        ``alpha`` for the stable scenarios, ``t`` for the length and mutation
        ones, ``theta`` for the mutation ones.  ``c0`` (or ``measure``) fixes
        the tail constant, defaulting to the Beta value.  ``method`` is
        ``"oneshot"`` (default) or ``"path"`` with ``steps`` midpoints.
    """
    sc = Scenario(scenario)
    params = dict(params)
    if sc is Scenario.KINGMAN_GUMBEL:
        return LimitSample(sc, rng.gumbel(size=size), None, params)
    if sc is Scenario.BS_STABLE:
        return LimitSample(sc, bs_stable_rvs(rng, size), None, params)
    if "alpha" not in params:
        raise ArgumentError(f"scenario {sc.value} needs alpha")
    alpha = _check_alpha(params["alpha"])
    if sc is Scenario.TAU:
        return LimitSample(sc, stable_rvs(alpha, alpha - 1.0, rng, size), None, params)
    if "t" not in params:
        raise ArgumentError(f"scenario {sc.value} needs t")
    t = _check_t(alpha, params["t"], closed=False)
    c0 = _limit_c0(params, alpha)
    norm = c0 * gamma_fn(2.0 - alpha)
    theta = None
    if sc in (Scenario.MUTATION_LOW, Scenario.MUTATION_HIGH, Scenario.MUTATION_CRIT):
        theta = float(params.get("theta", 0.0))
        if theta <= 0:
            raise ArgumentError("mutation scenarios need theta > 0")
    a_t = v_of_t(alpha, t) / norm

    def v_star():
        method = params.get("method", "oneshot")
        if method == "oneshot":
            return _lhat_oneshot(alpha, t, rng, size) / norm
        if method == "path":
            return _lhat_path(alpha, t, rng, size, int(params.get("steps", 2048))) / norm
        raise ArgumentError(f"unknown method {method!r}")

    if sc is Scenario.LHAT:
        value = v_star() * norm
    elif sc is Scenario.L:
        value = v_star()
    elif sc is Scenario.MUTATION_LOW:
        value = theta * v_star()
    elif sc is Scenario.MUTATION_HIGH:
        value = math.sqrt(theta * a_t) * rng.standard_normal(size)
    else:
        vs = v_star()
        value = theta * vs + math.sqrt(theta * a_t) * rng.standard_normal(size)
    return LimitSample(sc, value, t, params)


# ---------------------------------------------------------------------------
# centering and scaling

@dataclass(frozen=True)
class Normalization:
    """Affine map ``x -> sign * (weight * x - center) / scale``."""

    center: float
    scale: float
    weight: float = 1.0
    sign: float = 1.0

    def apply(self, x):
        return self.sign * (self.weight * np.asarray(x, dtype=float) - self.center) / self.scale


def bs_centering(n: float) -> tuple[float, float]:
    """``(a_n, b_n)`` for the total length of the Bolthausen-Sznitman tree."""
    ln = math.log(n)
    return n / ln + n * math.log(ln) / ln ** 2, n / ln ** 2


def _length_scale(alpha, n):
    return n ** (1.0 - alpha + 1.0 / alpha)


def centering_scaling(scenario, m: CoalescentMeasure, n: int, t: float | None = None,
                      theta: float | None = None) -> Normalization:
    """Centering and scaling that turn the finite-``n`` statistic into its limit.

    ``TAU`` maps ``tau`` to ``(n - tau/gamma) / n^(1/alpha)``.  ``KINGMAN_GUMBEL``
    and ``BS_STABLE`` act on the total length; the rest act on ``L_t``,
    ``L_hat_t`` or ``K_t``.
    """
    sc = Scenario(scenario)
    if n < 2:
        raise ArgumentError("n must be >= 2")
    if sc is Scenario.KINGMAN_GUMBEL:
        if m.family is not Family.KINGMAN:
            raise UnsupportedFamilyError("Gumbel limit needs the Kingman coalescent")
        return Normalization(2.0 * math.log(n), 2.0)
    if sc is Scenario.BS_STABLE:
        if m.family is not Family.BOLTHAUSEN_SZNITMAN:
            raise UnsupportedFamilyError("stable Z limit needs the Bolthausen-Sznitman coalescent")
        a_n, b_n = bs_centering(n)
        return Normalization(a_n, b_n)
    if not m.is_power_tail:
        raise UnsupportedFamilyError(f"{sc.value} needs a power-tail measure")
    alpha = m.alpha
    if sc is Scenario.TAU:
        return Normalization(float(n), n ** (1.0 / alpha), weight=1.0 / (alpha - 1.0), sign=-1.0)
    if t is None:
        raise ArgumentError(f"{sc.value} needs t")
    if sc is Scenario.LHAT:
        return Normalization(n ** (2.0 - alpha) * v_of_t(alpha, t), _length_scale(alpha, n))
    a_t = a_of_t(m, t)
    if sc is Scenario.L:
        return Normalization(a_t * n ** (2.0 - alpha), _length_scale(alpha, n))
    if theta is None or theta <= 0:
        raise ArgumentError("mutation scenarios need theta > 0")
    center = theta * a_t * n ** (2.0 - alpha)
    crit = math.isclose(alpha, SQRT2, rel_tol=1e-9)
    if sc is Scenario.MUTATION_LOW:
        if alpha >= SQRT2 and not crit:
            raise ArgumentError(f"stable mutation regime needs alpha < sqrt(2), got {alpha}")
        return Normalization(center, _length_scale(alpha, n))
    if sc is Scenario.MUTATION_HIGH:
        if alpha <= SQRT2 and not crit:
            raise ArgumentError(f"Gaussian mutation regime needs alpha > sqrt(2), got {alpha}")
        return Normalization(center, n ** (1.0 - alpha / 2.0))
    if not crit:
        raise ArgumentError(f"critical mutation regime needs alpha = sqrt(2), got {alpha}")
    return Normalization(center, _length_scale(alpha, n))


def mutation_scenario(alpha: float) -> Scenario:
    """Regime of the mutation-count fluctuations for this ``alpha``."""
    if math.isclose(alpha, SQRT2, rel_tol=1e-9):
        return Scenario.MUTATION_CRIT
    return Scenario.MUTATION_LOW if alpha < SQRT2 else Scenario.MUTATION_HIGH
