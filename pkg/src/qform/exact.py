"""Exact tail probabilities by characteristic-function inversion, plus Monte Carlo.

Imhof's representation of the upper tail of ``Q = sum_r lambda_r (Z_r + m_r)^2``::

    P(Q > q) = 1/2 + (1/pi) * int_0^inf sin(theta(u)) / (u rho(u)) du

    theta(u) = 1/2 sum_r [atan(lambda_r u) + m_r^2 lambda_r u / (1 + lambda_r^2 u^2)] - q u / 2
    rho(u)   = prod_r (1 + lambda_r^2 u^2)^(1/4)
               * exp(1/2 sum_r m_r^2 lambda_r^2 u^2 / (1 + lambda_r^2 u^2))

The integral is split at a point ``U``. On ``[0, U]`` the integrand is
smooth (its limit at 0 is ``(c1 - q) / 2``) and goes to adaptive
Gauss-Kronrod quadrature. ``U`` is chosen so that the envelope
``1 / (pi u rho(u))`` integrated beyond it is below the truncation
tolerance. When that would need an impractically large ``U`` (few
effective terms, slowly decaying envelope), the remainder is written as
two Fourier integrals with slowly varying amplitudes::

    sin(beta(u) - w u) = sin(beta) cos(w u) - cos(beta) sin(w u),   w = q / 2

and handled by QUADPACK's QAWF routine, which integrates cycle by cycle
and extrapolates the resulting series.
"""

from __future__ import annotations

from dataclasses import dataclass
import math
import warnings

import numpy as np
from scipy import integrate

from .errors import QuadratureFailure, TruncationFailure
from .reduction import SpectralForm, evaluate_spectral

NOT_RESOLVABLE_BELOW = 1e-12


@dataclass(frozen=True)
class InversionSettings:
    abs_tol: float = 1e-10
    max_interval_subdivisions: int = 1_000_000
    truncation_bound_tol: float = 1e-12
    # split point search stops here and hands the remainder to QAWF
    max_finite_periods: float = 50.0

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.max_interval_subdivisions > 0 and self.truncation_bound_tol > 0):
            raise ValueError("inversion settings must be positive")


@dataclass(frozen=True)
class InversionResult:
    p: float
    abserr: float
    upper_limit: float
    used_fourier_tail: bool

    @property
    def resolvable(self) -> bool:
        return self.p >= NOT_RESOLVABLE_BELOW


class _Integrand:
    def __init__(self, sf: SpectralForm, q: float):
        lam = sf.lambdas[sf.lambdas > 0]
        d = (sf.mu_tilde[sf.lambdas > 0]) ** 2
        self.lam = lam
        self.d = d
        self.q = q
        self.omega = 0.5 * q
        self.c1 = float(lam.sum() + (d * lam).sum())
        self.half_m = 0.5 * lam.size
        self.log_lam_sum = float(np.log(lam).sum())

    def _parts(self, u: float):
        lu = self.lam * u
        lu2 = lu * lu
        inv = 1.0 / (1.0 + lu2)
        beta = 0.5 * (np.sum(np.arctan(lu)) + np.sum(self.d * lu * inv))
        log_rho = 0.25 * np.sum(np.log1p(lu2)) + 0.5 * np.sum(self.d * lu2 * inv)
        return beta, log_rho

    def full(self, u: float) -> float:
        if u < 1e-8:
            return 0.5 * (self.c1 - self.q)
        beta, log_rho = self._parts(u)
        return math.sin(beta - self.omega * u) / u * math.exp(-log_rho)

    def cos_amp(self, u: float) -> float:
        beta, log_rho = self._parts(u)
        return math.sin(beta) / u * math.exp(-log_rho)

    def sin_amp(self, u: float) -> float:
        beta, log_rho = self._parts(u)
        return math.cos(beta) / u * math.exp(-log_rho)

    def log_envelope_tail(self, u: float) -> float:
        """log of a bound on ``int_u^inf 1/(pi t rho(t)) dt``.

        Uses ``rho(t) >= prod (lambda_r t)^(1/2) * exp(noncentral part at u)``.
        """
        lu = self.lam * u
        lu2 = lu * lu
        nc = 0.5 * np.sum(self.d * lu2 / (1.0 + lu2))
        k = self.half_m
        return -math.log(math.pi * k) - k * math.log(u) - 0.5 * self.log_lam_sum - nc


def _quad(fn, a, b, settings, **kw):
    """``scipy.integrate.quad`` with a subdivision budget grown on demand."""
    limit = min(200, settings.max_interval_subdivisions)
    while True:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            out = integrate.quad(
                fn, a, b, epsabs=settings.abs_tol * math.pi, epsrel=0.0,
                limit=limit, full_output=1, **kw,
            )
        value, abserr, info = out[0], out[1], out[2]
        ier = out[3] if len(out) > 3 else 0
        if ier == 0 or abserr <= settings.abs_tol * math.pi:
            return value, abserr
        if ier == 1 and limit < settings.max_interval_subdivisions:
            limit = min(limit * 10, settings.max_interval_subdivisions)
            continue
        # other QUADPACK codes: accept if the error estimate is still small
        if abserr <= 1e3 * settings.abs_tol * math.pi:
            return value, abserr
        raise QuadratureFailure(f"quadrature did not converge (ier={ier}, abserr={abserr:.3g})")


def _split_point(f: _Integrand, settings: InversionSettings) -> tuple[float, bool]:
    """Return (U, needs_fourier_tail)."""
    target = math.log(settings.truncation_bound_tol)
    period = 2.0 * math.pi / f.omega
    cap = settings.max_finite_periods * period
    lam_max = float(f.lam.max())
    u = 1.0 / lam_max
    for _ in range(2000):
        if f.log_envelope_tail(u) <= target:
            break
        if u >= cap:
            return cap, True
        u *= 1.25
    else:
        raise TruncationFailure("could not find a truncation point")
    # tighten the split point by bisection on log u
    lo, hi = u / 1.25, u
    if f.log_envelope_tail(lo) > target:
        for _ in range(40):
            mid = math.sqrt(lo * hi)
            if f.log_envelope_tail(mid) <= target:
                hi = mid
            else:
                lo = mid
    return min(hi, cap), hi > cap


def imhof(sf: SpectralForm, q: float, settings: InversionSettings | None = None) -> InversionResult:
    settings = settings or InversionSettings()
    if not np.any(sf.lambdas > 0):
        raise ValueError("spectrum needs at least one positive eigenvalue")
    q = float(q)
    if q <= 0:
        return InversionResult(1.0, 0.0, 0.0, False)
    f = _Integrand(sf, q)
    U, fourier = _split_point(f, settings)
    # geometric segments keep the features near u ~ 1/lambda_max visible to
    # the adaptive rule when U is many orders of magnitude larger
    edges = [0.0]
    u = 1.0 / float(f.lam.max())
    while u < U:
        edges.append(u)
        u *= 8.0
    edges.append(U)
    value = err = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        v, e = _quad(f.full, a, b, settings)
        value += v
        err += e
    if fourier:
        vc, ec = _quad(f.cos_amp, U, np.inf, settings, weight="cos", wvar=f.omega)
        vs, es = _quad(f.sin_amp, U, np.inf, settings, weight="sin", wvar=f.omega)
        value += vc - vs
        err += ec + es
    p = 0.5 + value / math.pi
    return InversionResult(min(max(p, 0.0), 1.0), err / math.pi, U, fourier)


def exact_tail(sf: SpectralForm, q, settings: InversionSettings | None = None):
    """``P(Q > q)`` by numerical inversion; vectorizes over ``q``."""
    if np.ndim(q) == 0:
        return imhof(sf, float(q), settings).p
    q = np.asarray(q, dtype=float)
    return np.array([imhof(sf, float(x), settings).p for x in q.ravel()]).reshape(q.shape)


# Monte Carlo -------------------------------------------------------------

MC_BLOCK = 1 << 18


def block_generator(seed, block_index: int, *stream) -> np.random.Generator:
    """Counter-based generator for one block, independent of how blocks are scheduled."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(stream) + (block_index,))
    return np.random.Generator(np.random.Philox(ss))


def sample_spectral(sf: SpectralForm, n_draws: int, seed: int, block_size: int = MC_BLOCK):
    """Yield blocks of draws of ``Q`` from its spectral form."""
    n_blocks = -(-n_draws // block_size)
    for b in range(n_blocks):
        size = min(block_size, n_draws - b * block_size)
        z = block_generator(seed, b).standard_normal((size, sf.n))
        yield evaluate_spectral(sf, z)


def mc_tail(sf: SpectralForm, q, n_draws: int = 1_000_000, seed: int = 0, block_size: int = MC_BLOCK):
    """Monte Carlo estimate of ``P(Q > q)`` and its binomial standard error.

    ``q`` may be an array; all entries share the same draws.
    """
    if n_draws < 1000:
        raise ValueError("n_draws must be at least 1000")
    qs = np.atleast_1d(np.asarray(q, dtype=float))
    counts = np.zeros(qs.shape, dtype=np.int64)
    for block in sample_spectral(sf, n_draws, seed, block_size):
        counts += np.count_nonzero(block[:, None] > qs.ravel()[None, :], axis=0).reshape(qs.shape)
    p = counts / n_draws
    se = np.sqrt(p * (1.0 - p) / n_draws)
    if np.ndim(q) == 0:
        return float(p[0]), float(se[0])
    return p, se
