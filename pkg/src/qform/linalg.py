"""Dense symmetric matrix primitives.

Thin, validated wrappers over LAPACK (through numpy/scipy). Matrices are
plain ``numpy.ndarray`` objects; the helpers here only enforce the
contracts the rest of the package relies on (symmetry, definiteness,
sorted spectra) and translate LAPACK failures into package exceptions.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from .errors import (
    ConvergenceFailure,
    DimensionMismatch,
    MatrixParseError,
    NotPositiveDefinite,
    NotPositiveSemiDefinite,
)

SYMMETRY_ATOL = 1e-12
# eigenvalues of a PSD input down to -CLIP_RTOL * max|eigenvalue| are treated as zero
CLIP_RTOL = 1e-8


@dataclass(frozen=True)
class CholeskyFactor:
    L: np.ndarray

    @property
    def n(self) -> int:
        return self.L.shape[0]

    def reconstruct(self) -> np.ndarray:
        return self.L @ self.L.T

    def solve_lower(self, b: np.ndarray) -> np.ndarray:
        """Return ``L^{-1} b`` by forward substitution."""
        return sla.solve_triangular(self.L, b, lower=True)


@dataclass(frozen=True)
class EigenDecomposition:
    values: np.ndarray  # descending
    vectors: np.ndarray  # columns are eigenvectors

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.T


def as_square(a, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def as_symmetric(a, name: str = "matrix", atol: float = SYMMETRY_ATOL) -> np.ndarray:
    """Validate that ``a`` is a finite symmetric matrix and return it as float."""
    a = as_square(a, name)
    if not np.allclose(a, a.T, rtol=0.0, atol=atol):
        raise ValueError(f"{name} is not symmetric within {atol:g}")
    return a


def matmul(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionMismatch(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def cholesky(sigma, jitter: float = 0.0) -> CholeskyFactor:
    """Lower Cholesky factor of a symmetric positive definite matrix.

    Parameters
    ----------
    sigma : array_like, shape (n, n)
        Symmetric positive definite matrix.
    jitter : float, optional
        Added to the diagonal before factoring. Off by default; the
        factorization never regularizes on its own.

    Raises
    ------
    NotPositiveDefinite
        If a pivot is not strictly positive.
    """
    sigma = as_symmetric(sigma, "sigma")
    if jitter < 0:
        raise ValueError("jitter must be nonnegative")
    if jitter:
        sigma = sigma + jitter * np.eye(sigma.shape[0])
    try:
        L = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    if not np.all(np.diag(L) > 0):
        raise NotPositiveDefinite("nonpositive pivot in Cholesky factor")
    return CholeskyFactor(L)


def sym_eigen(m) -> EigenDecomposition:
    """Eigendecomposition of a symmetric matrix, eigenvalues sorted descending."""
    m = as_symmetric(m, "M", atol=max(SYMMETRY_ATOL, 1e-12 * _maxabs(m)))
    try:
        w, v = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    return EigenDecomposition(w[::-1].copy(), v[:, ::-1].copy())


def sym_eigvals(m) -> np.ndarray:
    m = as_symmetric(m, "M", atol=max(SYMMETRY_ATOL, 1e-12 * _maxabs(m)))
    try:
        return np.linalg.eigvalsh(m)[::-1].copy()
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc


def clip_psd(values: np.ndarray, rtol: float = CLIP_RTOL) -> np.ndarray:
    """Zero out round-off negatives in a PSD spectrum.

    Raises :class:`NotPositiveSemiDefinite` if any eigenvalue is below
    ``-rtol * max|value|``.
    """
    values = np.asarray(values, dtype=float)
    scale = np.max(np.abs(values)) if values.size else 0.0
    if values.size and values.min() < -rtol * scale:
        raise NotPositiveSemiDefinite(
            f"eigenvalue {values.min():.3g} below -{rtol:g} x {scale:.3g}"
        )
    return np.where(values < 0, 0.0, values)


def invert(sigma) -> np.ndarray:
    """Inverse of a symmetric positive definite matrix via its Cholesky factor."""
    sigma = as_symmetric(sigma, "sigma")
    try:
        c, lower = sla.cho_factor(sigma, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    inv = sla.cho_solve((c, lower), np.eye(sigma.shape[0]))
    return 0.5 * (inv + inv.T)


def standardize_correlation(s) -> np.ndarray:
    """Rescale a covariance matrix to unit diagonal: s_ij / sqrt(s_ii s_jj)."""
    s = as_symmetric(s, "covariance")
    d = np.sqrt(np.diag(s))
    if not np.all(d > 0):
        raise NotPositiveDefinite("covariance has nonpositive diagonal")
    r = s / np.outer(d, d)
    np.fill_diagonal(r, 1.0)
    return 0.5 * (r + r.T)


def _maxabs(m) -> float:
    m = np.asarray(m, dtype=float)
    return float(np.max(np.abs(m))) if m.size else 0.0


def read_matrix_csv(path) -> np.ndarray:
    """Read a square matrix from a headerless CSV file, one row per line."""
    rows = _read_rows(path)
    n = len(rows)
    if n == 0:
        raise MatrixParseError("empty matrix file", path)
    for lineno, row in rows:
        if len(row) != n:
            raise MatrixParseError(
                f"expected {n} columns for a square matrix, found {len(row)}",
                path,
                lineno,
            )
    return np.array([row for _, row in rows], dtype=float)


def read_vector_csv(path) -> np.ndarray:
    """Read a vector stored either as one row or as one value per line."""
    rows = _read_rows(path)
    if not rows:
        raise MatrixParseError("empty vector file", path)
    if len(rows) == 1:
        return np.array(rows[0][1], dtype=float)
    for lineno, row in rows:
        if len(row) != 1:
            raise MatrixParseError(
                f"expected one value per line, found {len(row)}", path, lineno
            )
    return np.array([row[0] for _, row in rows], dtype=float)


def write_matrix_csv(path, a) -> None:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in a:
            writer.writerow([repr(float(x)) for x in row])


def _read_rows(path) -> list[tuple[int, list[float]]]:
    path = Path(path)
    rows = []
    with open(path, newline="") as fh:
        for lineno, raw in enumerate(csv.reader(fh), start=1):
            cells = [c.strip() for c in raw]
            if not cells or all(c == "" for c in cells):
                continue
            try:
                values = [float(c) for c in cells]
            except ValueError:
                raise MatrixParseError(f"non-numeric entry in {raw!r}", path, lineno)
            if not all(np.isfinite(values)):
                raise MatrixParseError("non-finite entry", path, lineno)
            rows.append((lineno, values))
    return rows
