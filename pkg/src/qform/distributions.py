"""Reference distributions used by the moment matchers.

Gamma (unit scale), central and noncentral chi-square, and Snedecor F.
All scale handling lives in the affine map of the matchers, so none of
these take a scale argument.

Upper tails are always computed from the complemented special function
(``gammaincc``, or ``betainc`` with swapped arguments) rather than as
``1 - cdf``, so that p-values far in the tail keep their relative accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
from scipy import special as sc
from scipy.optimize import brentq

from .errors import SeriesOverflow

SERIES_TOL = 1e-14
SERIES_MAX_TERMS = 1_000_000
_CHUNK = 64


def reg_inc_gamma(a, x):
    """Regularized lower incomplete gamma ``P(a, x)``."""
    return sc.gammainc(a, np.maximum(x, 0.0))


def reg_inc_gamma_upper(a, x):
    """Regularized upper incomplete gamma ``Q(a, x) = 1 - P(a, x)``."""
    return sc.gammaincc(a, np.maximum(x, 0.0))


def reg_inc_beta(a, b, x):
    return sc.betainc(a, b, np.clip(x, 0.0, 1.0))


def gamma_cdf(x, shape):
    return reg_inc_gamma(shape, x)


def gamma_sf(x, shape):
    return reg_inc_gamma_upper(shape, x)


def chisq_cdf(x, df):
    return reg_inc_gamma(0.5 * df, 0.5 * np.asarray(x, dtype=float))


def chisq_sf(x, df):
    return reg_inc_gamma_upper(0.5 * df, 0.5 * np.asarray(x, dtype=float))


def f_cdf(x, d1, d2):
    x = np.maximum(np.asarray(x, dtype=float), 0.0)
    return reg_inc_beta(0.5 * d1, 0.5 * d2, d1 * x / (d1 * x + d2))


def f_sf(x, d1, d2):
    x = np.maximum(np.asarray(x, dtype=float), 0.0)
    return reg_inc_beta(0.5 * d2, 0.5 * d1, d2 / (d1 * x + d2))


def _poisson_log_weights(j: np.ndarray, lam: float) -> np.ndarray:
    return -lam + j * math.log(lam) - sc.gammaln(j + 1.0)


def _mixture_scalar(x: float, df: float, nc: float, upper: bool) -> float:
    """Poisson mixture of central chi-square tails, summed outward from the mode.

    ``upper`` selects the survival function. In the direction where the
    chi-square term grows toward 1 the leftover is bounded by the
    remaining Poisson mass; in the other direction by that mass times the
    last term. Expansion stops once either bound drops below
    ``SERIES_TOL`` relative to the running total.
    """
    lam = 0.5 * nc
    half_x = 0.5 * x
    term_fn = sc.gammaincc if upper else sc.gammainc
    mode = math.floor(lam)
    total = 0.0
    n_terms = 0

    # upward: j = mode, mode+1, ...
    start = mode
    while True:
        j = np.arange(start, start + _CHUNK, dtype=float)
        terms = np.exp(_poisson_log_weights(j, lam)) * term_fn(0.5 * df + j, half_x)
        total += float(np.sum(terms))
        n_terms += _CHUNK
        last = start + _CHUNK - 1
        rest_mass = float(sc.pdtrc(last, lam))  # P(J > last)
        bound = rest_mass if upper else rest_mass * float(term_fn(0.5 * df + last, half_x))
        if bound <= SERIES_TOL * total or rest_mass == 0.0:
            break
        if n_terms > SERIES_MAX_TERMS:
            raise SeriesOverflow(f"noncentral chi-square series exceeded {SERIES_MAX_TERMS} terms")
        start += _CHUNK

    # downward: j = mode-1, mode-2, ..., 0
    stop = mode
    while stop > 0:
        lo = max(0, stop - _CHUNK)
        j = np.arange(lo, stop, dtype=float)
        terms = np.exp(_poisson_log_weights(j, lam)) * term_fn(0.5 * df + j, half_x)
        total += float(np.sum(terms))
        n_terms += stop - lo
        if lo == 0:
            break
        rest_mass = float(sc.pdtr(lo - 1, lam))  # P(J < lo)
        bound = rest_mass * float(term_fn(0.5 * df + lo, half_x)) if upper else rest_mass
        if bound <= SERIES_TOL * total:
            break
        if n_terms > SERIES_MAX_TERMS:
            raise SeriesOverflow(f"noncentral chi-square series exceeded {SERIES_MAX_TERMS} terms")
        stop = lo
    return min(max(total, 0.0), 1.0)


def _noncentral(x, df, nc, upper):
    if nc < 0 or df <= 0:
        raise ValueError("need df > 0 and nc >= 0")
    if nc == 0:
        return chisq_sf(x, df) if upper else chisq_cdf(x, df)
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape)
    for idx, xi in np.ndenumerate(x):
        if xi <= 0:
            out[idx] = 1.0 if upper else 0.0
        else:
            out[idx] = _mixture_scalar(float(xi), float(df), float(nc), upper)
    return float(out) if out.ndim == 0 else out


def noncentral_chisq_cdf(x, df, nc):
    return _noncentral(x, df, nc, upper=False)


def noncentral_chisq_sf(x, df, nc):
    return _noncentral(x, df, nc, upper=True)


def quantile_bisect(cdf, p: float, lo: float, hi: float, xtol: float = 1e-12) -> float:
    """Solve ``cdf(x) = p`` on ``[lo, hi]``, widening ``hi`` if needed."""
    for _ in range(200):
        if cdf(hi) >= p:
            break
        lo, hi = hi, 2.0 * hi + 1.0
    return brentq(lambda t: cdf(t) - p, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)


def _tail_root(sf, p: float, start: float) -> float:
    """Solve ``sf(x) = p`` for a decreasing ``sf`` on x >= 0, working in log space."""
    target = math.log(p)
    g = lambda t: math.log(max(float(sf(t)), 1e-320)) - target
    lo, hi = 0.0, max(start, 1.0)
    while g(hi) > 0:
        lo, hi = hi, 2.0 * hi
        if hi > 1e300:
            raise ArithmeticError("tail quantile not bracketed")
    if g(lo) < 0:
        return lo
    return brentq(g, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


# Parameter objects -------------------------------------------------------


@dataclass(frozen=True)
class GammaParams:
    """Gamma(shape, scale=1)."""

    shape: float
    family = "gamma"

    def __post_init__(self):
        if not (self.shape > 0 and math.isfinite(self.shape)):
            raise ValueError(f"gamma shape must be finite and positive, got {self.shape!r}")

    @property
    def mean(self) -> float:
        return self.shape

    @property
    def variance(self) -> float:
        return self.shape

    @property
    def skewness(self) -> float:
        return 2.0 / math.sqrt(self.shape)

    @property
    def excess_kurtosis(self) -> float:
        return 6.0 / self.shape

    def sf(self, y):
        return gamma_sf(y, self.shape)

    def cdf(self, y):
        return gamma_cdf(y, self.shape)

    def isf(self, p: float) -> float:
        return float(sc.gammainccinv(self.shape, p))

    def as_tuple(self) -> tuple[float, ...]:
        return (self.shape,)


@dataclass(frozen=True)
class NoncentralChiSqParams:
    """Chi-square with ``df`` degrees of freedom and noncentrality ``nc``."""

    df: float
    nc: float = 0.0
    family = "noncentral-chisq"

    def __post_init__(self):
        if not (self.df > 0 and math.isfinite(self.df)):
            raise ValueError(f"df must be finite and positive, got {self.df!r}")
        if not (self.nc >= 0 and math.isfinite(self.nc)):
            raise ValueError(f"nc must be finite and nonnegative, got {self.nc!r}")

    @property
    def mean(self) -> float:
        return self.df + self.nc

    @property
    def variance(self) -> float:
        return 2.0 * (self.df + 2.0 * self.nc)

    @property
    def skewness(self) -> float:
        return math.sqrt(8.0) * (self.df + 3.0 * self.nc) / (self.df + 2.0 * self.nc) ** 1.5

    @property
    def excess_kurtosis(self) -> float:
        return 12.0 * (self.df + 4.0 * self.nc) / (self.df + 2.0 * self.nc) ** 2

    def sf(self, y):
        return noncentral_chisq_sf(y, self.df, self.nc)

    def cdf(self, y):
        return noncentral_chisq_cdf(y, self.df, self.nc)

    def isf(self, p: float) -> float:
        if self.nc == 0:
            return 2.0 * float(sc.gammainccinv(0.5 * self.df, p))
        return _tail_root(self.sf, p, start=self.mean + 10.0 * math.sqrt(self.variance))

    def as_tuple(self) -> tuple[float, ...]:
        return (self.df, self.nc)


@dataclass(frozen=True)
class FParams:
    """Snedecor F with ``d1`` numerator and ``d2`` denominator degrees of freedom."""

    d1: float
    d2: float
    family = "f"

    def __post_init__(self):
        if not (self.d1 > 0 and self.d2 > 0):
            raise ValueError("F degrees of freedom must be positive")

    @property
    def mean(self) -> float:
        if self.d2 <= 2:
            return math.inf
        return self.d2 / (self.d2 - 2.0)

    @property
    def variance(self) -> float:
        d1, d2 = self.d1, self.d2
        if d2 <= 4:
            return math.inf
        return 2.0 * d2 * d2 * (d1 + d2 - 2.0) / (d1 * (d2 - 2.0) ** 2 * (d2 - 4.0))

    @property
    def skewness(self) -> float:
        d1, d2 = self.d1, self.d2
        if d2 <= 6:
            return math.inf
        return (
            (2.0 * d1 + d2 - 2.0)
            * math.sqrt(8.0 * (d2 - 4.0))
            / ((d2 - 6.0) * math.sqrt(d1 * (d1 + d2 - 2.0)))
        )

    @property
    def excess_kurtosis(self) -> float:
        d1, d2 = self.d1, self.d2
        if d2 <= 8:
            return math.inf
        num = d1 * (5.0 * d2 - 22.0) * (d1 + d2 - 2.0) + (d2 - 4.0) * (d2 - 2.0) ** 2
        return 12.0 * num / (d1 * (d2 - 6.0) * (d2 - 8.0) * (d1 + d2 - 2.0))

    def sf(self, y):
        return f_sf(y, self.d1, self.d2)

    def cdf(self, y):
        return f_cdf(y, self.d1, self.d2)

    def isf(self, p: float) -> float:
        z = float(sc.betaincinv(0.5 * self.d2, 0.5 * self.d1, p))
        if z <= 0:
            return math.inf
        return self.d2 * (1.0 - z) / (self.d1 * z)

    def as_tuple(self) -> tuple[float, ...]:
        return (self.d1, self.d2)
