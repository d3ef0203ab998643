"""Type-I-error simulation: correlation models, mean configurations, replicates.

With ``A = I`` and ``X ~ N(mu, Sigma)``, each replicate gives ``q = X'X``,
each method a p-value, and the empirical type-I-error rate is the fraction
of p-values below ``alpha``.

Because every method's tail function is nonincreasing in ``q``, the event
``p(q) < alpha`` is ``q > q_crit(alpha)`` with ``q_crit`` the method's
critical value. Critical values are solved once per configuration and
replicates are streamed in fixed-size blocks that only update integer
counters. Each block draws from its own counter-based generator keyed by
``(seed, configuration, block index)``, so the counts do not depend on
how blocks are spread across workers.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import logging
import math
import os
import zlib

import numpy as np
from scipy.optimize import brentq

from . import linalg
from .errors import NotPositiveDefinite, QFormError
from .exact import InversionSettings, block_generator, imhof
from .matchers import APPROXIMATE_METHODS, fit
from .moments import StandardizedMoments, moments
from .reduction import QuadraticFormSpec, SpectralForm, reduce

log = logging.getLogger(__name__)

BASES = ("Equal", "Poly", "InvEqual", "InvPoly")
BLOCK_TYPES = ("I", "II", "III")
MEAN_VARIANTS = ("mu1", "mu2", "mu3")
DEFAULT_RHOS = (0.9, 0.5, 0.1)
DEFAULT_PHIS = (0.2, 1.0, 3.0)
DEFAULT_NS = (10, 50, 100, 500)
DEFAULT_BLOCK = 1 << 16
SIM_METHODS = APPROXIMATE_METHODS + ("Exact",)


def equicorrelation(k: int, rho: float) -> np.ndarray:
    """``E_k(rho)``: unit diagonal, every off-diagonal entry ``rho``."""
    e = np.full((k, k), float(rho))
    np.fill_diagonal(e, 1.0)
    return e


def poly_decay(k: int, phi: float, lag_offset: int = 0) -> np.ndarray:
    """``D_k(phi)``: unit diagonal, entry ``1 / (|i-j| + lag_offset)^phi`` off it.

    With the default ``lag_offset=0`` neighbouring entries equal 1, so the
    matrix is singular or indefinite for ``k >= 2``. ``lag_offset=1`` gives
    the Toeplitz matrix with first row ``1, 2^-phi, 3^-phi, ...``, which is
    positive definite.
    """
    i = np.arange(k)
    lag = np.abs(i[:, None] - i[None, :]).astype(float)
    with np.errstate(divide="ignore"):
        d = 1.0 / (lag + lag_offset) ** phi
    np.fill_diagonal(d, 1.0)
    return d


@dataclass(frozen=True)
class CorrelationModel:
    base: str
    block_type: str
    n: int
    parameter: float
    lag_offset: int = 0

    def __post_init__(self):
        if self.base not in BASES:
            raise ValueError(f"base must be one of {BASES}, got {self.base!r}")
        if self.block_type not in BLOCK_TYPES:
            raise ValueError(f"block_type must be one of {BLOCK_TYPES}, got {self.block_type!r}")
        if self.n <= 0 or self.n % 2:
            raise ValueError(f"n must be a positive even integer, got {self.n!r}")
        if self.base in ("Equal", "InvEqual") and not 0 <= self.parameter < 1:
            raise ValueError("rho must lie in [0, 1)")
        if self.base in ("Poly", "InvPoly") and not self.parameter > 0:
            raise ValueError("phi must be positive")

    @property
    def label(self) -> str:
        return f"{self.base}({self.parameter:g})/{self.block_type}/n={self.n}"


def _base_block(model: CorrelationModel, k: int) -> np.ndarray:
    if model.base in ("Equal", "InvEqual"):
        m = equicorrelation(k, model.parameter)
    else:
        m = poly_decay(k, model.parameter, model.lag_offset)
    if model.base.startswith("Inv"):
        m = linalg.standardize_correlation(linalg.invert(m))
    return m


def build_correlation(model: CorrelationModel) -> np.ndarray:
    """Correlation matrix of one Table-style cell; verified positive definite.

    Inverse models are inverted and standardized block by block, before
    embedding.
    """
    n, h = model.n, model.n // 2
    if model.block_type == "III":
        sigma = _base_block(model, n)
    else:
        block = _base_block(model, h)
        sigma = np.eye(n)
        sigma[:h, :h] = block
        if model.block_type == "II":
            sigma[h:, h:] = block
    np.fill_diagonal(sigma, 1.0)
    linalg.cholesky(sigma)  # raises NotPositiveDefinite
    return sigma


def mean_vector(variant: str, n: int) -> np.ndarray:
    if variant == "mu1":
        return np.zeros(n)
    if variant == "mu2":
        return np.ones(n)
    if variant == "mu3":
        return np.concatenate([np.ones(n // 2), np.zeros(n - n // 2)])
    raise ValueError(f"mean variant must be one of {MEAN_VARIANTS}, got {variant!r}")


def sample_gaussian(sigma, mu, n_reps: int, seed, block_size: int = DEFAULT_BLOCK, stream=()):
    """Yield blocks of draws ``X = mu + L z`` with ``L`` the Cholesky factor of ``sigma``."""
    L = linalg.cholesky(sigma).L
    mu = np.asarray(mu, dtype=float)
    for b in range(-(-n_reps // block_size)):
        size = min(block_size, n_reps - b * block_size)
        z = block_generator(seed, b, *stream).standard_normal((size, L.shape[0]))
        yield z @ L.T + mu


# Critical values ----------------------------------------------------------


def exact_critical_value(sf: SpectralForm, alpha: float, m: StandardizedMoments,
                         settings: InversionSettings | None = None) -> float:
    """Solve ``P(Q > q) = alpha`` with the inversion oracle."""
    g = lambda q: imhof(sf, q, settings).p - alpha
    guess = fit("MR", m).critical_value(alpha)
    lo, hi = 0.9 * guess, 1.1 * guess
    for _ in range(100):
        if g(lo) > 0:
            break
        lo *= 0.5
    for _ in range(100):
        if g(hi) < 0:
            break
        hi = hi * 1.5 + m.sd
    return brentq(g, lo, hi, xtol=1e-12 * hi, rtol=1e-14, maxiter=200)


@dataclass
class ConfigPlan:
    """Everything a worker needs to count rejections for one configuration."""

    L: np.ndarray
    mu: np.ndarray
    methods: list[str]
    alphas: list[float]
    crit: np.ndarray  # (methods, alphas)
    status: dict[str, str] = field(default_factory=dict)
    fallback: dict[str, bool] = field(default_factory=dict)


def plan_configuration(sigma, mu, methods, alphas, settings=None) -> ConfigPlan:
    spec = QuadraticFormSpec(sigma=sigma, mu=mu)
    m = moments(spec, "fast")
    sf = reduce(spec) if "Exact" in methods else None
    crit = np.empty((len(methods), len(alphas)))
    status, fallback = {}, {}
    for i, method in enumerate(methods):
        if method == "Exact":
            crit[i] = [exact_critical_value(sf, a, m, settings) for a in alphas]
            status[method] = "ok"
            fallback[method] = False
            continue
        r = fit(method, m)
        crit[i] = [r.critical_value(a) for a in alphas]
        status[method] = r.status
        fallback[method] = r.fallback_used
    return ConfigPlan(linalg.cholesky(sigma).L, np.asarray(mu, float), list(methods),
                      list(alphas), crit, status, fallback)


def _count_blocks(args) -> np.ndarray:
    L, mu, crit, n_reps, block_size, seed, stream, blocks = args
    counts = np.zeros(crit.shape, dtype=np.int64)
    flat = crit.ravel()
    for b in blocks:
        size = min(block_size, n_reps - b * block_size)
        z = block_generator(seed, b, *stream).standard_normal((size, L.shape[0]))
        x = z @ L.T + mu
        q = np.einsum("ij,ij->i", x, x)
        q.sort()
        # number of q strictly greater than each critical value
        counts += (size - np.searchsorted(q, flat, side="right")).reshape(crit.shape)
    return counts


def count_rejections(plan: ConfigPlan, n_reps: int, seed: int, stream=(),
                     block_size: int = DEFAULT_BLOCK, workers: int = 1) -> np.ndarray:
    n_blocks = -(-n_reps // block_size)
    if workers <= 1 or n_blocks == 1:
        return _count_blocks((plan.L, plan.mu, plan.crit, n_reps, block_size, seed, stream,
                              range(n_blocks)))
    shards = [range(w, n_blocks, workers) for w in range(workers)]
    jobs = [(plan.L, plan.mu, plan.crit, n_reps, block_size, seed, stream, s) for s in shards]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return sum(pool.map(_count_blocks, jobs))


@dataclass(frozen=True)
class TypeIErrorRow:
    method: str
    alpha: float
    rejections: int
    n_reps: int
    status: str = "ok"
    fallback_used: bool = False

    @property
    def rate(self) -> float:
        return self.rejections / self.n_reps

    @property
    def ratio(self) -> float:
        return self.rate / self.alpha

    @property
    def std_error(self) -> float:
        """Binomial standard error of the rate under the nominal level."""
        return math.sqrt(self.alpha * (1.0 - self.alpha) / self.n_reps)


@dataclass
class TypeIErrorReport:
    model: CorrelationModel
    mean_variant: str
    rows: list[TypeIErrorRow]

    def row(self, method: str, alpha: float) -> TypeIErrorRow:
        for r in self.rows:
            if r.method == method and r.alpha == alpha:
                return r
        raise KeyError((method, alpha))

    def csv_rows(self):
        for r in self.rows:
            yield {
                "n": self.model.n,
                "model": self.model.base,
                "block_type": self.model.block_type,
                "parameter": repr(float(self.model.parameter)),
                "mean_variant": self.mean_variant,
                "method": r.method,
                "alpha": repr(float(r.alpha)),
                "n_reps": r.n_reps,
                "empirical_rate": repr(r.rate),
                "ratio": repr(r.ratio),
                "std_error": repr(r.std_error),
            }


CSV_COLUMNS = ("n", "model", "block_type", "parameter", "mean_variant", "method",
               "alpha", "n_reps", "empirical_rate", "ratio", "std_error")


def config_stream(model: CorrelationModel, mean_variant: str) -> tuple[int, ...]:
    """Stable integer key for a configuration, used to derive its random stream."""
    key = f"{model.base}|{model.block_type}|{model.n}|{model.parameter!r}|{model.lag_offset}|{mean_variant}"
    return (zlib.crc32(key.encode()),)


def run_type1_experiment(model: CorrelationModel, mean_variant: str, methods, alphas,
                         n_reps: int, seed: int, workers: int = 1,
                         block_size: int = DEFAULT_BLOCK,
                         settings: InversionSettings | None = None) -> TypeIErrorReport:
    methods = list(methods)
    alphas = [float(a) for a in alphas]
    if not methods:
        raise ValueError("empty method list")
    bad = [m for m in methods if m not in SIM_METHODS]
    if bad:
        raise ValueError(f"methods {bad} cannot be simulated; choose from {SIM_METHODS}")
    sigma = build_correlation(model)
    mu = mean_vector(mean_variant, model.n)
    plan = plan_configuration(sigma, mu, methods, alphas, settings)
    counts = count_rejections(plan, n_reps, seed, config_stream(model, mean_variant),
                              block_size, workers)
    rows = [
        TypeIErrorRow(method, alpha, int(counts[i, j]), n_reps,
                      plan.status[method], plan.fallback[method])
        for i, method in enumerate(methods)
        for j, alpha in enumerate(alphas)
    ]
    return TypeIErrorReport(model, mean_variant, rows)


def default_models(ns=DEFAULT_NS, rhos=DEFAULT_RHOS, phis=DEFAULT_PHIS, lag_offset: int = 0):
    for n in ns:
        for base in BASES:
            params = rhos if base in ("Equal", "InvEqual") else phis
            for p in params:
                for bt in BLOCK_TYPES:
                    yield CorrelationModel(base, bt, n, p, lag_offset)


def run_sweep(models, mean_variants, methods, alphas, n_reps, seed, workers=1,
              block_size=DEFAULT_BLOCK, settings=None):
    """Run every (model, mean) cell; infeasible cells are logged and skipped."""
    reports = []
    for model in models:
        try:
            build_correlation(model)
        except (NotPositiveDefinite, QFormError) as exc:
            log.warning("skipping %s: %s", model.label, exc)
            continue
        for mv in mean_variants:
            reports.append(run_type1_experiment(model, mv, methods, alphas, n_reps, seed,
                                                workers, block_size, settings))
    return reports


def worker_count(requested: int | None = None) -> int:
    """Worker count from the argument, else ``QFORM_THREADS``, else 1."""
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("QFORM_THREADS")
    return max(1, int(env)) if env else 1
