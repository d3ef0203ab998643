"""Moment-matching approximations to the law of ``Q``.

Every matcher approximates ``Q`` by ``T = a*Y + b`` where ``Y`` belongs to a
reference family with parameters ``theta``. Given ``theta``, the affine
pair is pinned by mean and variance::

    a = sd_Q / sd_Y(theta),    b = mean_Q - a * mean_Y(theta)

and the tail is ``P(Q > q) ~= P(Y > (q - b) / a)``. The methods differ
only in how ``theta`` is chosen:

======  ================  ==================================================
SW      gamma             mean and variance with ``b = 0``
HBE     gamma             skewness
Wood    F                 mean, variance and skewness with ``b = 0``
LTZ     noncentral chi2   skewness and kurtosis; skewness only if impossible
LTZ4    noncentral chi2   as LTZ, falling back to kurtosis instead
MR      gamma             ratio skewness / excess kurtosis
ME      gamma             least squares on (skewness, kurtosis)
======  ================  ==================================================

Matchers consume :class:`~qform.moments.StandardizedMoments` only, so one
moment computation serves all of them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.optimize import brentq

from .distributions import FParams, GammaParams, NoncentralChiSqParams
from .errors import (
    DegenerateFamilyVariance,
    DegenerateKurtosis,
    DegenerateSkewness,
    DegenerateVariance,
    NoSolution,
    QFormError,
    RootNotBracketed,
)
from .moments import StandardizedMoments

APPROXIMATE_METHODS = ("SW", "HBE", "Wood", "LTZ", "LTZ4", "MR", "ME")
ALL_METHODS = APPROXIMATE_METHODS + ("Exact", "MC")

FAMILIES = {
    "gamma": GammaParams,
    "noncentral-chisq": NoncentralChiSqParams,
    "f": FParams,
}


@dataclass(frozen=True)
class MatchResult:
    """A fitted ``T = a*Y + b`` with ``Y ~ family(theta)``.

    ``fallback_used`` is set when the preferred matching equations had no
    admissible solution and a simpler rule was used; ``status`` says which.
    """

    method: str
    theta: GammaParams | NoncentralChiSqParams | FParams
    a: float
    b: float
    fallback_used: bool = False
    status: str = "ok"
    moments: StandardizedMoments | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not (self.a > 0 and math.isfinite(self.a)):
            raise DegenerateFamilyVariance(f"scale a={self.a!r} must be positive and finite")

    @property
    def family(self) -> str:
        return self.theta.family

    def standardize(self, q):
        """Map ``q`` to the reference scale, ``(q - b) / a``."""
        return (np.asarray(q, dtype=float) - self.b) / self.a

    def tail(self, q):
        return tail_probability(q, self)

    def critical_value(self, alpha: float) -> float:
        """Smallest ``q`` with ``tail(q) <= alpha``: ``a * isf_Y(alpha) + b``."""
        return self.a * self.theta.isf(alpha) + self.b

    @property
    def t_mean(self) -> float:
        return self.a * self.theta.mean + self.b

    @property
    def t_variance(self) -> float:
        return self.a**2 * self.theta.variance


def affine_from_theta(m: StandardizedMoments, theta) -> tuple[float, float]:
    var_y = theta.variance
    if not (var_y > 0 and math.isfinite(var_y)):
        raise DegenerateFamilyVariance(f"reference variance {var_y!r} is not usable")
    a = m.sd / math.sqrt(var_y)
    return a, m.mean - a * theta.mean


def tail_probability(q, r: MatchResult):
    """``P(Y > (q - b) / a)`` clamped to [0, 1]; scalar in, scalar out."""
    y = r.standardize(q)
    p = np.clip(r.theta.sf(y), 0.0, 1.0)
    return float(p) if np.ndim(p) == 0 else p


def _check_skew(m: StandardizedMoments) -> None:
    if not (m.skewness > 0 and math.isfinite(m.skewness)):
        raise DegenerateSkewness(f"skewness {m.skewness!r} must be positive")


def _check_kurt(m: StandardizedMoments) -> None:
    if not (m.excess_kurtosis > 0 and math.isfinite(m.excess_kurtosis)):
        raise DegenerateKurtosis(f"kurtosis {m.kurtosis!r} must exceed 3")


def _framework(method, m, theta, **kw) -> MatchResult:
    a, b = affine_from_theta(m, theta)
    return MatchResult(method, theta, a, b, moments=m, **kw)


def match_sw(m: StandardizedMoments) -> MatchResult:
    if not (m.mean > 0 and m.variance > 0):
        raise DegenerateVariance("SW needs positive mean and variance")
    theta = GammaParams(m.mean**2 / m.variance)
    return MatchResult("SW", theta, m.variance / m.mean, 0.0, moments=m)


def match_hbe(m: StandardizedMoments) -> MatchResult:
    _check_skew(m)
    return _framework("HBE", m, GammaParams(4.0 / m.skewness**2))


def match_mr(m: StandardizedMoments) -> MatchResult:
    _check_skew(m)
    _check_kurt(m)
    return _framework("MR", m, GammaParams(9.0 * m.skewness**2 / m.excess_kurtosis**2))


def me_cubic(alpha, skewness: float, kurtosis: float):
    """Stationarity condition of the (skewness, kurtosis) distance, in ``alpha``."""
    alpha = np.asarray(alpha, dtype=float)
    return skewness * alpha**1.5 - 2.0 * (10.0 - 3.0 * kurtosis) * alpha - 36.0


def _me_root(skewness: float, kurtosis: float) -> float:
    """Unique positive root of ``g t^3 + c t^2 - 36 = 0`` in ``t = sqrt(alpha)``.

    With ``c = -2 (10 - 3 kurtosis)`` the cubic is negative at 0, has at most
    one interior minimum and increases afterwards, so Newton steps are
    safeguarded by a shrinking sign-change bracket.
    """
    g = skewness
    c = -2.0 * (10.0 - 3.0 * kurtosis)
    f = lambda t: (g * t + c) * t * t - 36.0
    df = lambda t: (3.0 * g * t + 2.0 * c) * t

    lo, hi = 1e-4, 1e4  # alpha in [1e-8, 1e8]
    if f(lo) > 0 or f(hi) < 0:
        raise RootNotBracketed(
            f"ME cubic has no root for alpha in [1e-8, 1e8] (skewness={g!r}, kurtosis={kurtosis!r})"
        )
    ex = kurtosis - 3.0
    t = 3.0 * g / ex if ex > 0 else math.sqrt(4.0 / g**2)  # sqrt of MR alpha
    if not lo < t < hi:
        t = math.sqrt(lo * hi)
    tol = 1e-13 * (1.0 + 36.0)
    for _ in range(200):
        ft = f(t)
        if abs(ft) <= tol:
            return t
        if ft < 0:
            lo = t
        else:
            hi = t
        d = df(t)
        step = t - ft / d if d > 0 else None
        t = step if step is not None and lo < step < hi else 0.5 * (lo + hi)
        if hi - lo <= 4e-16 * hi:
            return t
    return t


def match_me(m: StandardizedMoments) -> MatchResult:
    _check_skew(m)
    t = _me_root(m.skewness, m.kurtosis)
    return _framework("ME", m, GammaParams(t * t))


def _ltz_matched(m: StandardizedMoments) -> NoncentralChiSqParams | None:
    """Solve for (df, nc) matching skewness and kurtosis, or ``None``.

    In trace units (``s1 = skew / sqrt 8``, ``s2 = excess / 12``) a
    solution exists iff ``s1^2 > s2``.
    """
    s1 = m.skewness / math.sqrt(8.0)
    s2 = m.excess_kurtosis / 12.0
    if not s1 * s1 > s2:
        return None
    t = 1.0 / (s1 - math.sqrt(s1 * s1 - s2))
    nc = s1 * t**3 - t * t
    df = t * t - 2.0 * nc
    if not (df > 0 and nc >= 0 and math.isfinite(df) and math.isfinite(nc)):
        return None
    return NoncentralChiSqParams(df, nc)


def ltz_condition(m: StandardizedMoments) -> bool:
    """True when a noncentral chi-square can match both skewness and kurtosis."""
    return _ltz_matched(m) is not None


def match_ltz(m: StandardizedMoments) -> MatchResult:
    _check_skew(m)
    theta = _ltz_matched(m)
    if theta is not None:
        return _framework("LTZ", m, theta)
    # central chi-square with matching skewness: sqrt(8/df) = skew
    theta = NoncentralChiSqParams(8.0 / m.skewness**2, 0.0)
    return _framework("LTZ", m, theta, fallback_used=True, status="fallback:skewness")


def match_ltz4(m: StandardizedMoments) -> MatchResult:
    _check_kurt(m)
    theta = _ltz_matched(m)
    if theta is not None:
        return _framework("LTZ4", m, theta)
    # central chi-square with matching excess kurtosis: 12/df = excess
    theta = NoncentralChiSqParams(12.0 / m.excess_kurtosis, 0.0)
    return _framework("LTZ4", m, theta, fallback_used=True, status="fallback:kurtosis")


# Wood -------------------------------------------------------------------

WOOD_D2_MAX = 1e10
_WOOD_GRID = np.linspace(-30.0, math.log(WOOD_D2_MAX), 400)


def _wood_d1(cv2: float, d2: float) -> float:
    # from  CV^2 of F(d1, d2) = 2 (d1 + d2 - 2) / (d1 (d2 - 4))
    return 2.0 * (d2 - 2.0) / (cv2 * (d2 - 4.0) - 2.0)


def _wood_skew_grid(cv2: float, d2_min: float) -> np.ndarray:
    d2 = d2_min + np.exp(_WOOD_GRID)
    d1 = 2.0 * (d2 - 2.0) / (cv2 * (d2 - 4.0) - 2.0)
    return (2.0 * d1 + d2 - 2.0) * np.sqrt(8.0 * (d2 - 4.0)) / (
        (d2 - 6.0) * np.sqrt(d1 * (d1 + d2 - 2.0))
    )


def wood_solve(cv2: float, skewness: float) -> FParams:
    """F(d1, d2) with squared coefficient of variation ``cv2`` and the given skewness.

    Eliminating ``d1`` through the CV equation leaves a one-dimensional
    equation in ``d2`` on ``d2 > max(6, 4 + 2/cv2)``, bracketed by a
    log-spaced scan and then solved by Brent's method. As ``d2`` grows the
    skewness decreases to the gamma value ``2 sqrt(cv2)``, the boundary of
    the feasible region; targets on that boundary (to 1e-10 relative) are
    returned with ``d2 = WOOD_D2_MAX``.
    """
    if not (cv2 > 0 and skewness > 0):
        raise NoSolution("Wood needs positive CV^2 and skewness")
    d2_min = max(6.0, 4.0 + 2.0 / cv2)

    def resid(u):
        d2 = d2_min + math.exp(u)
        return FParams(_wood_d1(cv2, d2), d2).skewness - skewness

    boundary = 2.0 * math.sqrt(cv2)
    if skewness < boundary * (1.0 - 1e-10):
        raise NoSolution(
            f"skewness {skewness:.6g} below the F-family minimum {boundary:.6g} for CV^2={cv2:.6g}"
        )
    values = _wood_skew_grid(cv2, d2_min) - skewness
    if values[-1] >= 0:
        d2 = WOOD_D2_MAX
        return FParams(_wood_d1(cv2, d2), d2)
    sign_change = np.nonzero((values[:-1] >= 0) & (values[1:] < 0))[0]
    if sign_change.size == 0:
        raise NoSolution(
            f"skewness {skewness:.6g} above the F-family maximum for CV^2={cv2:.6g}"
        )
    i = sign_change[0]
    u = brentq(resid, _WOOD_GRID[i], _WOOD_GRID[i + 1], xtol=1e-14, rtol=1e-15, maxiter=500)
    d2 = d2_min + math.exp(u)
    return FParams(_wood_d1(cv2, d2), d2)


def match_wood(m: StandardizedMoments) -> MatchResult:
    """F fit with ``b = 0``: matches CV^2 and skewness, then ``a = mean_Q / mean_F``.

    Raises :class:`NoSolution` when no admissible ``d2 > 6`` exists; see
    :func:`fit` for the HBE fallback.
    """
    _check_skew(m)
    if not (m.mean > 0 and m.variance > 0):
        raise DegenerateVariance("Wood needs positive mean and variance")
    theta = wood_solve(m.variance / m.mean**2, m.skewness)
    return MatchResult("Wood", theta, m.mean / theta.mean, 0.0, moments=m)


MATCHERS = {
    "SW": match_sw,
    "HBE": match_hbe,
    "Wood": match_wood,
    "LTZ": match_ltz,
    "LTZ4": match_ltz4,
    "MR": match_mr,
    "ME": match_me,
}


def fit(method: str, m: StandardizedMoments) -> MatchResult:
    """Fit ``method`` to ``m``; Wood falls back to HBE with ``status="fallback:HBE"``."""
    try:
        matcher = MATCHERS[method]
    except KeyError:
        raise ValueError(f"unknown method {method!r}; choose from {list(MATCHERS)}") from None
    if method != "Wood":
        return matcher(m)
    try:
        return matcher(m)
    except NoSolution:
        r = match_hbe(m)
        return MatchResult(
            "Wood", r.theta, r.a, r.b, fallback_used=True, status="fallback:HBE", moments=m
        )


def approximate_tail(q, m: StandardizedMoments, method: str = "MR"):
    return tail_probability(q, fit(method, m))


def parse_methods(text_or_list) -> list[str]:
    """Split a comma-separated method list and validate each identifier."""
    if isinstance(text_or_list, str):
        items = [s.strip() for s in text_or_list.split(",") if s.strip()]
    else:
        items = list(text_or_list)
    if not items:
        raise ValueError("empty method list")
    for name in items:
        if name not in ALL_METHODS:
            raise ValueError(f"unknown method {name!r}; choose from {', '.join(ALL_METHODS)}")
    return items


__all__ = [
    "ALL_METHODS",
    "APPROXIMATE_METHODS",
    "MATCHERS",
    "MatchResult",
    "QFormError",
    "affine_from_theta",
    "approximate_tail",
    "fit",
    "ltz_condition",
    "match_hbe",
    "match_ltz",
    "match_ltz4",
    "match_me",
    "match_mr",
    "match_sw",
    "match_wood",
    "me_cubic",
    "parse_methods",
    "tail_probability",
    "wood_solve",
]
