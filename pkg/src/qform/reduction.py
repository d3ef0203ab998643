"""Spectral reduction of a Gaussian quadratic form.

For ``X ~ N(mu, Sigma)`` and PSD ``A``, ``Q = X'AX`` has the same law as
``sum_r lambda_r (Z_r + mu_tilde_r)^2`` with ``Z`` standard normal, where
``lambda`` are the eigenvalues of ``M = L'AL`` (``Sigma = LL'``) and
``mu_tilde = P'L^{-1}mu`` for the eigenvectors ``P`` of ``M``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import DimensionMismatch

# eigenvalues below DROP_RTOL * max eigenvalue are removed from the spectrum
DROP_RTOL = 1e-12


@dataclass(frozen=True)
class QuadraticFormSpec:
    """The triple (A, Sigma, mu) defining ``Q = X'AX`` with ``X ~ N(mu, Sigma)``.

    ``A=None`` stands for the identity, which lets the moment code skip
    the ``A @ Sigma`` product.
    """

    sigma: np.ndarray
    A: np.ndarray | None = None
    mu: np.ndarray | None = None

    def __post_init__(self):
        sigma = linalg.as_symmetric(self.sigma, "sigma")
        n = sigma.shape[0]
        object.__setattr__(self, "sigma", sigma)
        if self.A is not None:
            A = linalg.as_symmetric(self.A, "A")
            if A.shape != sigma.shape:
                raise DimensionMismatch(f"A is {A.shape}, sigma is {sigma.shape}")
            object.__setattr__(self, "A", A)
        mu = np.zeros(n) if self.mu is None else np.asarray(self.mu, dtype=float)
        if mu.shape != (n,):
            raise DimensionMismatch(f"mu has shape {mu.shape}, expected ({n},)")
        object.__setattr__(self, "mu", mu)

    @property
    def n(self) -> int:
        return self.sigma.shape[0]

    @property
    def weight(self) -> np.ndarray:
        return np.eye(self.n) if self.A is None else self.A

    @property
    def is_identity_weight(self) -> bool:
        return self.A is None


@dataclass(frozen=True)
class SpectralForm:
    """Eigenvalues (descending, nonnegative) and transformed mean."""

    lambdas: np.ndarray
    mu_tilde: np.ndarray | None = None

    def __post_init__(self):
        lam = np.atleast_1d(np.asarray(self.lambdas, dtype=float))
        mt = (
            np.zeros_like(lam)
            if self.mu_tilde is None
            else np.atleast_1d(np.asarray(self.mu_tilde, dtype=float))
        )
        if lam.ndim != 1 or lam.shape != mt.shape:
            raise DimensionMismatch(
                f"lambdas {lam.shape} and mu_tilde {mt.shape} must be equal-length vectors"
            )
        if np.any(lam < 0) or not np.all(np.isfinite(lam)):
            raise ValueError("lambdas must be finite and nonnegative")
        order = np.argsort(-lam, kind="stable")
        object.__setattr__(self, "lambdas", lam[order])
        object.__setattr__(self, "mu_tilde", mt[order])

    @property
    def n(self) -> int:
        return self.lambdas.shape[0]

    @property
    def is_central(self) -> bool:
        return not np.any(self.mu_tilde)


def reduce(spec: QuadraticFormSpec, drop_rtol: float = DROP_RTOL) -> SpectralForm:
    """Reduce ``spec`` to its spectral form.

    The square root of Sigma is its lower Cholesky factor; the law of the
    reduced form does not depend on that choice.
    """
    chol = linalg.cholesky(spec.sigma)
    L = chol.L
    if spec.is_identity_weight:
        M = L.T @ L
    else:
        M = L.T @ spec.A @ L
    M = 0.5 * (M + M.T)
    eig = linalg.sym_eigen(M)
    lam = linalg.clip_psd(eig.values)
    mu_tilde = eig.vectors.T @ chol.solve_lower(spec.mu)
    lam_max = lam[0] if lam.size else 0.0
    keep = lam > drop_rtol * lam_max
    return SpectralForm(lam[keep], mu_tilde[keep])


def evaluate(spec: QuadraticFormSpec, x) -> float | np.ndarray:
    """``x'Ax`` for a vector, or row-wise for a 2-D array of draws."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != spec.n:
        raise DimensionMismatch(f"x has length {x.shape[-1]}, expected {spec.n}")
    if spec.is_identity_weight:
        q = np.einsum("...i,...i->...", x, x)
    else:
        q = np.einsum("...i,...i->...", x @ spec.A, x)
    return float(q) if q.ndim == 0 else q


def evaluate_spectral(sf: SpectralForm, z) -> float | np.ndarray:
    """``sum_r lambda_r (z_r + mu_tilde_r)^2``, row-wise for 2-D ``z``."""
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != sf.n:
        raise DimensionMismatch(f"z has length {z.shape[-1]}, expected {sf.n}")
    w = z + sf.mu_tilde
    q = (w * w) @ sf.lambdas
    return float(q) if np.ndim(q) == 0 else q
