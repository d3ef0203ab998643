"""Cumulants of a Gaussian quadratic form.

Three interchangeable routes to the first four cumulants

    c_k = 2^(k-1) (k-1)! [ tr(B^k) + k mu' B^(k-1) A mu ],   B = A Sigma,

which in spectral coordinates is ``2^(k-1)(k-1)! (S_k + k sum_r lambda_r^k mu_tilde_r^2)``:

* :func:`cumulants_from_spectrum` -- from eigenvalues,
* :func:`cumulants_naive_trace` -- three explicit powers of ``B``,
* :func:`cumulants_fast_trace` -- a single product ``B @ B``; the odd and
  even traces come from entrywise sums ``sum_ij (B^j)_ij (B^k)_ji``.

The fast route is the default (:func:`cumulants`).
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .errors import AllZeroSpectrum, DegenerateVariance
from .reduction import QuadraticFormSpec, SpectralForm, reduce

# 2^(k-1) (k-1)! for k = 1..4
_FACTORS = np.array([1.0, 2.0, 8.0, 48.0])


@dataclass(frozen=True)
class Cumulants:
    c1: float
    c2: float
    c3: float
    c4: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.c1, self.c2, self.c3, self.c4)


@dataclass(frozen=True)
class StandardizedMoments:
    """Mean, variance, skewness and (non-excess) kurtosis of ``Q``."""

    mean: float
    variance: float
    skewness: float
    kurtosis: float

    @property
    def sd(self) -> float:
        return math.sqrt(self.variance)

    @property
    def excess_kurtosis(self) -> float:
        return self.kurtosis - 3.0


def _assemble(traces, noncentral) -> Cumulants:
    k = np.arange(1, 5)
    c = _FACTORS * (np.asarray(traces, dtype=float) + k * np.asarray(noncentral, dtype=float))
    return Cumulants(*(float(x) for x in c))


def cumulants_from_spectrum(sf: SpectralForm) -> Cumulants:
    lam = sf.lambdas
    if lam.size == 0 or not np.any(lam > 0):
        raise AllZeroSpectrum("spectrum has no positive eigenvalue")
    d2 = sf.mu_tilde**2
    powers = np.vstack([lam, lam**2, lam**3, lam**4])
    return _assemble(powers.sum(axis=1), powers @ d2)


def cumulants_eigen(spec: QuadraticFormSpec) -> Cumulants:
    return cumulants_from_spectrum(reduce(spec))


def _product(spec: QuadraticFormSpec) -> np.ndarray:
    """``B = A Sigma``; no multiplication when A is the identity."""
    if spec.is_identity_weight:
        return spec.sigma
    return spec.A @ spec.sigma


def _as_spec(A, sigma, mu) -> QuadraticFormSpec:
    if isinstance(A, QuadraticFormSpec):
        return A
    return QuadraticFormSpec(sigma=sigma, A=A, mu=mu)


def cumulants_naive_trace(A, sigma=None, mu=None) -> Cumulants:
    """Cumulants from explicit ``B^2, B^3, B^4`` (three matrix products).

    Accepts either ``(A, sigma, mu)`` or a single :class:`QuadraticFormSpec`.
    """
    spec = _as_spec(A, sigma, mu)
    B = _product(spec)
    B2 = B @ B
    B3 = B2 @ B
    B4 = B3 @ B
    traces = [np.trace(B), np.trace(B2), np.trace(B3), np.trace(B4)]
    if not np.any(spec.mu):
        return _assemble(traces, np.zeros(4))
    w = spec.weight @ spec.mu
    noncentral = [spec.mu @ w, spec.mu @ (B @ w), spec.mu @ (B2 @ w), spec.mu @ (B3 @ w)]
    return _assemble(traces, noncentral)


def _entrywise_traces(B, B2):
    return [np.trace(B), np.sum(B * B.T), np.sum(B * B2.T), np.sum(B2 * B2.T)]


def trace_powers(B) -> np.ndarray:
    """``tr(B^k)`` for k = 1..4 from ``B`` and ``B @ B`` only; ``B`` need not be symmetric."""
    B = np.asarray(B, dtype=float)
    return np.array(_entrywise_traces(B, B @ B), dtype=float)


def cumulants_fast_trace(A, sigma=None, mu=None) -> Cumulants:
    """Cumulants from one product ``B @ B`` plus O(n^2) entrywise sums.

    ``tr(B^3) = sum_ij B_ij (B^2)_ji`` and ``tr(B^4) = sum_ij (B^2)_ij (B^2)_ji``;
    the noncentral terms use a matrix-vector chain. ``np.sum`` reduces
    contiguous buffers pairwise, which keeps rounding error at O(log n^2) ulps.
    """
    spec = _as_spec(A, sigma, mu)
    B = _product(spec)
    B2 = B @ B
    traces = _entrywise_traces(B, B2)
    if not np.any(spec.mu):
        return _assemble(traces, np.zeros(4))
    w = spec.mu if spec.is_identity_weight else spec.A @ spec.mu
    v2 = B @ w
    noncentral = [spec.mu @ w, spec.mu @ v2, spec.mu @ (B2 @ w), spec.mu @ (B2 @ v2)]
    return _assemble(traces, noncentral)


def mean_variance_only(A, sigma=None, mu=None) -> tuple[float, float]:
    """First two cumulants with no matrix-matrix product beyond ``B = A Sigma``.

    With A the identity, no product is formed at all.
    """
    spec = _as_spec(A, sigma, mu)
    B = _product(spec)
    t1 = np.trace(B)
    t2 = np.sum(B * B.T)
    if not np.any(spec.mu):
        return float(t1), float(2.0 * t2)
    w = spec.mu if spec.is_identity_weight else spec.A @ spec.mu
    return float(t1 + spec.mu @ w), float(2.0 * (t2 + 2.0 * (spec.mu @ (B @ w))))


PATHS = {
    "eigen": cumulants_eigen,
    "trace": cumulants_naive_trace,
    "fast": cumulants_fast_trace,
}


def cumulants(spec: QuadraticFormSpec, path: str = "fast") -> Cumulants:
    try:
        fn = PATHS[path]
    except KeyError:
        raise ValueError(f"unknown cumulant path {path!r}; choose from {sorted(PATHS)}")
    return fn(spec)


def standardize(c: Cumulants) -> StandardizedMoments:
    if not c.c2 > 0:
        raise DegenerateVariance(f"variance c2={c.c2!r} is not positive")
    return StandardizedMoments(
        mean=c.c1,
        variance=c.c2,
        skewness=c.c3 / c.c2**1.5,
        kurtosis=c.c4 / c.c2**2 + 3.0,
    )


def moments(spec: QuadraticFormSpec, path: str = "fast") -> StandardizedMoments:
    return standardize(cumulants(spec, path))


def power_sums(lambdas, orders=(1, 2, 3, 4)) -> np.ndarray:
    lam = np.asarray(lambdas, dtype=float)
    if np.any(lam < 0):
        raise ValueError("power sums are defined here for nonnegative weights")
    return np.array([np.sum(lam**a) for a in orders])
