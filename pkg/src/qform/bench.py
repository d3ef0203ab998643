"""Timing harness for moment computation and tail evaluation.

Only ratios between timings are meaningful; nothing here asserts absolute
times. Inputs are built outside the timed region, each timed call's output
feeds a checksum so the work cannot be skipped, and warm-up runs are
discarded.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import statistics
import time

import numpy as np

from .exact import block_generator, imhof
from .matchers import APPROXIMATE_METHODS, fit, tail_probability
from .moments import cumulants_fast_trace, cumulants_from_spectrum, cumulants_naive_trace, standardize
from .reduction import QuadraticFormSpec, reduce
from .simgen import poly_decay

MOMENT_PATHS = ("eigen", "trace", "fast")
TAIL_METHODS = ("Exact",) + APPROXIMATE_METHODS
BENCH_COLUMNS = ("task", "method", "n", "reps", "mean_seconds", "median_seconds")

# PD stand-in for the polynomial-decay benchmark matrix; see poly_decay
BENCH_LAG_OFFSET = 1


@dataclass
class Timing:
    task: str
    method: str
    n: int
    samples: list[float]
    checksum: float = 0.0

    @property
    def reps(self) -> int:
        return len(self.samples)

    @property
    def mean(self) -> float:
        return statistics.fmean(self.samples)

    @property
    def median(self) -> float:
        return statistics.median(self.samples)


@dataclass
class BenchReport:
    timings: list[Timing] = field(default_factory=list)

    def get(self, task: str, method: str, n: int) -> Timing:
        for t in self.timings:
            if (t.task, t.method, t.n) == (task, method, n):
                return t
        raise KeyError((task, method, n))

    def csv_rows(self):
        for t in self.timings:
            yield {
                "task": t.task,
                "method": t.method,
                "n": t.n,
                "reps": t.reps,
                "mean_seconds": repr(t.mean),
                "median_seconds": repr(t.median),
            }

    def point_rows(self):
        for t in self.timings:
            for i, s in enumerate(t.samples):
                yield (t.task, t.method, t.n, i, repr(s))


def bench_sigma(n: int, phi: float = 1.0) -> np.ndarray:
    return poly_decay(n, phi, lag_offset=BENCH_LAG_OFFSET)


def _time(fn, reps: int, warmup: int):
    for _ in range(warmup):
        fn()
    samples, checksum = [], 0.0
    for _ in range(reps):
        t0 = time.perf_counter()
        out = fn()
        samples.append(time.perf_counter() - t0)
        checksum += float(out)
    return samples, checksum


def bench_moments(n_grid, reps: int = 5, warmup: int = 1, paths=MOMENT_PATHS) -> BenchReport:
    """Time the eigen, naive-trace and fast-trace cumulant paths on ``bench_sigma(n)``.

    The eigen path includes the decomposition, as it would in use.
    """
    if reps < 5:
        raise ValueError("reps must be at least 5")
    report = BenchReport()
    for n in n_grid:
        spec = QuadraticFormSpec(sigma=bench_sigma(n))
        fns = {
            "eigen": lambda: cumulants_from_spectrum(reduce(spec)).c4,
            "trace": lambda: cumulants_naive_trace(spec).c4,
            "fast": lambda: cumulants_fast_trace(spec).c4,
        }
        for path in paths:
            samples, chk = _time(fns[path], reps, warmup)
            report.timings.append(Timing("moments", path, n, samples, chk))
    return report


def null_q_values(m, n_calls: int, seed: int = 0) -> np.ndarray:
    """Workload of ``q`` values drawn once per ``n`` from the MR approximation of the null.

    Drawing through the fitted gamma avoids simulating ``n``-dimensional
    Gaussians, which would dominate the harness at large ``n``.
    """
    r = fit("MR", m)
    y = block_generator(seed, 0, n_calls).gamma(r.theta.shape, size=n_calls)
    return r.a * y + r.b


def bench_tail(n_grid, n_calls: int = 50_000, reps: int = 5, warmup: int = 1,
               methods=TAIL_METHODS, exact_calls: int = 200, seed: int = 0) -> BenchReport:
    """Cost of ``n_calls`` tail evaluations per method, eigenvalues and moments precomputed.

    The matcher is fitted once per repetition (it depends on the moments
    only) and then evaluated at each q, one scalar call at a time. Exact
    inversion is too slow to run ``n_calls`` times per repetition at large
    ``n``; it is timed on the first ``exact_calls`` q values and scaled
    linearly to ``n_calls``.
    """
    if reps < 5:
        raise ValueError("reps must be at least 5")
    report = BenchReport()
    for n in n_grid:
        spec = QuadraticFormSpec(sigma=bench_sigma(n))
        m = standardize(cumulants_fast_trace(spec))
        qs = [float(x) for x in null_q_values(m, n_calls, seed)]
        sf = reduce(spec) if "Exact" in methods else None
        for method in methods:
            if method == "Exact":
                sub = qs[: min(exact_calls, n_calls)]
                scale = n_calls / len(sub)

                def run(sub=sub):
                    return sum(imhof(sf, q).p for q in sub)

                samples, chk = _time(run, reps, warmup)
                samples = [s * scale for s in samples]
            else:

                def run(method=method):
                    r = fit(method, m)
                    acc = 0.0
                    for q in qs:
                        acc += tail_probability(q, r)
                    return acc

                samples, chk = _time(run, reps, warmup)
            report.timings.append(Timing("tail", method, n, samples, chk))
    return report
