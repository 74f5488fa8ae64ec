"""
Finite-dimensional centred Gaussian measures.

A :class:`CovarianceModel` wraps either a dense SPD matrix (Cholesky
factored once) or a diagonal spectrum with an optional orthonormal basis.
All quadratic forms are computed through the factorization; the inverse is
never formed explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import cho_factor, solve_triangular


class NotPositiveDefiniteError(ValueError):
    """Raised when a covariance fails its SPD check."""


class CovarianceModel:
    """Covariance of a centred Gaussian N(0, C) on R^d.

    Use the :meth:`dense`, :meth:`diagonal` or :meth:`spectral` constructors.
    Instances are treated as immutable.
    """

    def __init__(self, *, matrix=None, eigenvalues=None, basis=None):
        if (matrix is None) == (eigenvalues is None):
            raise ValueError("give exactly one of matrix or eigenvalues")
        self._chol = None
        self._eig = None
        self._basis = None
        if matrix is not None:
            C = np.array(matrix, dtype=float)
            if C.ndim != 2 or C.shape[0] != C.shape[1]:
                raise ValueError(f"covariance must be square, got shape {C.shape}")
            scale = max(np.max(np.abs(C)), 1.0)
            if np.max(np.abs(C - C.T)) > 1e-10 * scale:
                raise NotPositiveDefiniteError("covariance matrix is not symmetric")
            C = 0.5 * (C + C.T)
            try:
                self._chol = np.linalg.cholesky(C)
                cho_factor(C)  # LAPACK potrf; catches borderline cases numpy lets through
            except np.linalg.LinAlgError as exc:
                raise NotPositiveDefiniteError("covariance matrix is not positive definite") from exc
            self._matrix = C
            self.dim = C.shape[0]
            self.kind = "dense"
        else:
            lam = np.array(eigenvalues, dtype=float)
            if lam.ndim != 1 or lam.size == 0:
                raise ValueError("eigenvalues must be a non-empty 1-D array")
            if not np.all(lam > 0):
                raise NotPositiveDefiniteError("all eigenvalues must be positive")
            self._eig = lam
            if basis is not None:
                U = np.array(basis, dtype=float)
                if U.shape != (lam.size, lam.size):
                    raise ValueError(f"basis must be {lam.size}x{lam.size}, got {U.shape}")
                if np.max(np.abs(U.T @ U - np.eye(lam.size))) > 1e-8:
                    raise ValueError("basis columns are not orthonormal")
                if np.any(np.diff(lam) > 0):
                    raise ValueError("spectral eigenvalues must be sorted descending")
                self._basis = U
                self.kind = "spectral"
            else:
                self.kind = "diagonal"
            self._matrix = None
            self.dim = lam.size
        self._sqrt_eig = None if self._eig is None else np.sqrt(self._eig)

    @classmethod
    def dense(cls, matrix) -> "CovarianceModel":
        return cls(matrix=matrix)

    @classmethod
    def diagonal(cls, eigenvalues) -> "CovarianceModel":
        return cls(eigenvalues=eigenvalues)

    @classmethod
    def spectral(cls, eigenvalues, basis) -> "CovarianceModel":
        return cls(eigenvalues=eigenvalues, basis=basis)

    @classmethod
    def identity(cls, dim: int) -> "CovarianceModel":
        return cls(eigenvalues=np.ones(dim))

    @property
    def eigenvalues(self) -> np.ndarray | None:
        return self._eig

    @property
    def basis(self) -> np.ndarray | None:
        return self._basis

    def matrix(self) -> np.ndarray:
        """Dense d x d representation of C."""
        if self._matrix is not None:
            return self._matrix.copy()
        if self._basis is None:
            return np.diag(self._eig)
        return (self._basis * self._eig) @ self._basis.T

    def scaled(self, factor: float) -> "CovarianceModel":
        """Return the covariance ``factor * C``."""
        if factor <= 0:
            raise ValueError("scale factor must be positive")
        if self.kind == "dense":
            return CovarianceModel.dense(factor * self._matrix)
        if self.kind == "diagonal":
            return CovarianceModel.diagonal(factor * self._eig)
        return CovarianceModel.spectral(factor * self._eig, self._basis)

    def logdet(self) -> float:
        if self._chol is not None:
            return 2.0 * float(np.sum(np.log(np.diag(self._chol))))
        return float(np.sum(np.log(self._eig)))

    def sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        """Draw from N(0, C). Returns shape (d,) or (size, d)."""
        shape = (self.dim,) if size is None else (size, self.dim)
        z = rng.standard_normal(shape)
        if self._chol is not None:
            return z @ self._chol.T
        z = z * self._sqrt_eig
        if self._basis is not None:
            z = z @ self._basis.T
        return z

    def precision_quadratic(self, x) -> np.ndarray | float:
        """x^T C^{-1} x along the last axis of ``x``."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ValueError(f"expected last axis of length {self.dim}, got {x.shape}")
        if self._chol is not None:
            flat = x.reshape(-1, self.dim)
            z = solve_triangular(self._chol, flat.T, lower=True, check_finite=False)
            out = np.sum(z * z, axis=0).reshape(x.shape[:-1])
        else:
            if self._basis is not None:
                x = x @ self._basis
            out = np.sum(x * x / self._eig, axis=-1)
        return float(out) if np.ndim(out) == 0 else out

    def __repr__(self) -> str:
        return f"CovarianceModel(kind={self.kind!r}, dim={self.dim})"


def gaussian_sample(cov: CovarianceModel, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    return cov.sample(rng, size)


def precision_quadratic(cov: CovarianceModel, x) -> np.ndarray | float:
    return cov.precision_quadratic(x)


class GaussianSampleStream:
    """Seeded stream of N(0, C) draws; equal seeds replay identical sequences."""

    def __init__(self, cov: CovarianceModel, seed: int | None = None):
        self.cov = cov
        self.seed = seed
        self.rng = np.random.default_rng(seed)

    def __iter__(self):
        return self

    def __next__(self) -> np.ndarray:
        return self.cov.sample(self.rng)

    def take(self, n: int) -> np.ndarray:
        return self.cov.sample(self.rng, n)


@dataclass(frozen=True)
class KLExpansion:
    """Discrete Karhunen-Loeve eigenpairs of a covariance kernel on a uniform grid.

    ``eigenfunctions[:, i]`` is L2(D)-normalised on the grid, i.e.
    ``dt * sum_k phi_i(t_k) phi_j(t_k) == delta_ij``.
    """

    grid: np.ndarray
    dt: float
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray

    @property
    def rank(self) -> int:
        return self.eigenvalues.size

    def covariance(self) -> CovarianceModel:
        """Spectral model of the discretised operator on the retained eigenpairs."""
        basis = self.eigenfunctions * np.sqrt(self.dt)
        if basis.shape[0] != basis.shape[1]:
            raise ValueError("spectral CovarianceModel needs the full eigenbasis; use truncate()")
        return CovarianceModel.spectral(self.eigenvalues, basis)

    def truncate(self, d: int) -> CovarianceModel:
        """Coefficient covariance diag(lambda_1, ..., lambda_d)."""
        if not 1 <= d <= self.rank:
            raise ValueError(f"cannot truncate to d={d}; {self.rank} eigenpairs available")
        return CovarianceModel.diagonal(self.eigenvalues[:d])

    def reconstruct(self, s_idx, t_idx) -> np.ndarray:
        """sum_i lambda_i phi_i(s) phi_i(t) at grid index pairs."""
        phi = self.eigenfunctions
        return np.sum(self.eigenvalues * phi[s_idx] * phi[t_idx], axis=-1)


def _sign_convention(vec: np.ndarray) -> np.ndarray:
    # LAPACK signs are arbitrary; make the first non-negligible entry of each column positive
    big = np.abs(vec) > 1e-8 * np.abs(vec).max(axis=0)
    first = np.argmax(big, axis=0)
    return np.where(vec[first, np.arange(vec.shape[1])] < 0, -1.0, 1.0)


def eigendecompose_kernel_matrix(
    grid,
    covariance_function: Callable[[np.ndarray, np.ndarray], np.ndarray],
    n_keep: int | None = None,
    *,
    neg_tol: float = 1e-10,
) -> KLExpansion:
    """Nystrom (rectangle-rule) eigendecomposition of a covariance kernel.

    Builds ``K_ij = c(s_i, t_j) * dt`` on a uniform grid and diagonalises it.
    Eigenvalues are returned in descending order; numerically-zero negatives
    are clipped and dropped, anything below ``-neg_tol * lambda_1`` raises.

    Parameters
    ----------
    grid : array_like
        Uniformly spaced points.
    covariance_function : callable
        Vectorised ``c(s, t)``.
    n_keep : int, optional
        Keep at most this many leading eigenpairs.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError("grid must be a 1-D array with at least two points")
    steps = np.diff(grid)
    dt = float(steps.mean())
    if np.max(np.abs(steps - dt)) > 1e-9 * max(dt, 1.0):
        raise ValueError("grid must be uniformly spaced")
    K = covariance_function(grid[:, None], grid[None, :]) * dt
    K = 0.5 * (K + K.T)
    lam, vec = np.linalg.eigh(K)
    lam, vec = lam[::-1], vec[:, ::-1]
    if lam[0] <= 0:
        raise NotPositiveDefiniteError("kernel matrix has no positive eigenvalue")
    if lam[-1] < -neg_tol * lam[0]:
        raise NotPositiveDefiniteError(
            f"kernel matrix has eigenvalue {lam[-1]:.3e} below tolerance (lambda_1={lam[0]:.3e})"
        )
    keep = lam > 0
    if n_keep is not None:
        keep[n_keep:] = False
    lam, vec = lam[keep], vec[:, keep]
    vec = vec * _sign_convention(vec)
    return KLExpansion(grid=grid, dt=dt, eigenvalues=lam, eigenfunctions=vec / np.sqrt(dt))
