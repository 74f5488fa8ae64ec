"""
Sphere primitives: radial projection, geodesic distance, the angular central
Gaussian (ACG) law and the radial conditional of a centred Gaussian.

Points on S^{d-1} are plain 1-D float arrays of unit norm (batches are
``(n, d)`` arrays); :func:`as_sphere_vector` validates and repairs drift.
"""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln

from .gaussian import CovarianceModel

# assertion threshold vs. silent re-normalisation threshold for unit-norm drift
UNIT_NORM_TOL = 1e-12
RENORMALIZE_TOL = 1e-8


class InvalidDimensionError(ValueError):
    pass


def _check_dim(d: int) -> None:
    if d < 2:
        raise InvalidDimensionError(f"sphere dimension needs d >= 2 ambient coordinates, got d={d}")


def anchor(d: int) -> np.ndarray:
    """The fixed image of the origin under radial projection: e_d."""
    _check_dim(d)
    z = np.zeros(d)
    z[-1] = 1.0
    return z


def as_sphere_vector(x, *, tol: float = RENORMALIZE_TOL) -> np.ndarray:
    """Validate a point on the sphere, silently renormalising small drift.

    Raises ``ValueError`` if ``| ||x|| - 1 | > tol``.
    """
    x = np.array(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("a sphere vector must be 1-D")
    _check_dim(x.size)
    nrm = np.linalg.norm(x)
    if abs(nrm - 1.0) > tol:
        raise ValueError(f"not a unit vector: norm={nrm!r}")
    if abs(nrm - 1.0) > UNIT_NORM_TOL:
        x /= nrm
    return x


def project_to_sphere(x) -> np.ndarray:
    """Radial projection x / ||x||, mapping 0 to e_d. Works row-wise on batches."""
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    _check_dim(d)
    nrm = np.linalg.norm(x, axis=-1, keepdims=True)
    zero = nrm == 0.0
    out = x / np.where(zero, 1.0, nrm)
    if np.any(zero):
        out = np.where(zero, anchor(d), out)
    return out


def geodesic_distance(a, b) -> np.ndarray | float:
    """arccos(<a, b>) with the inner product clamped to [-1, 1]."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")
    ip = np.clip(np.sum(a * b, axis=-1), -1.0, 1.0)
    out = np.arccos(ip)
    return float(out) if np.ndim(out) == 0 else out


def chordal_geodesic_distance(a, b) -> np.ndarray | float:
    """2 arcsin(||a - b|| / 2); agrees with :func:`geodesic_distance` on the sphere."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")
    out = 2.0 * np.arcsin(np.clip(0.5 * np.linalg.norm(a - b, axis=-1), 0.0, 1.0))
    return float(out) if np.ndim(out) == 0 else out


def acg_sample(cov: CovarianceModel, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw from ACG(C) by projecting N(0, C) draws."""
    _check_dim(cov.dim)
    return project_to_sphere(cov.sample(rng, size))


def acg_log_density(cov: CovarianceModel, x) -> np.ndarray | float:
    """Log density of ACG(C) w.r.t. the (d-1)-dimensional Hausdorff measure.

    log Gamma(d/2) - log 2 - (d/2) log pi - (1/2) log det C - (d/2) log(x^T C^{-1} x)
    """
    d = cov.dim
    _check_dim(d)
    const = gammaln(0.5 * d) - np.log(2.0) - 0.5 * d * np.log(np.pi) - 0.5 * cov.logdet()
    return const - 0.5 * d * np.log(cov.precision_quadratic(x))


def radial_rate(cov: CovarianceModel, x) -> np.ndarray | float:
    """Gamma rate 1/2 x^T C^{-1} x of the squared radius given direction x."""
    return 0.5 * cov.precision_quadratic(x)


def radial_conditional_sample(cov: CovarianceModel, x, rng: np.random.Generator) -> np.ndarray | float:
    """Radius R with R^2 ~ Gamma(shape=d/2, rate=x^T C^{-1} x / 2).

    R * x is then distributed as N(0, C) conditioned on having direction x.
    Vectorised over leading axes of ``x``.
    """
    rate = radial_rate(cov, x)
    r2 = rng.gamma(0.5 * cov.dim, 1.0 / np.asarray(rate))
    out = np.sqrt(r2)
    return float(out) if np.ndim(out) == 0 else out


def lift(x, cov: CovarianceModel, rng: np.random.Generator) -> np.ndarray:
    """Sample an ambient point R * x from the radial conditional of N(0, C)."""
    x = np.asarray(x, dtype=float)
    r = radial_conditional_sample(cov, x, rng)
    return np.asarray(r)[..., None] * x if x.ndim > 1 else r * x


def uniform_sphere_sample(d: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Uniform draw on S^{d-1} (ACG with identity covariance)."""
    _check_dim(d)
    shape = (d,) if size is None else (size, d)
    return project_to_sphere(rng.standard_normal(shape))
