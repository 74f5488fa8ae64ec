"""
Bayesian binary classification on [0, 1]: a Whittle-Matern level-set prior,
a two-phase log-permeability, the 1D Darcy solve and the resulting
negative log-likelihood on the sphere of KL coefficients.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .gaussian import CovarianceModel, KLExpansion, eigendecompose_kernel_matrix
from .geometry import project_to_sphere

logger = logging.getLogger(__name__)

U_LOW, U_HIGH = -2.0, 2.0
OBS_POINTS = (0.2, 0.4, 0.6, 0.8)
P_LEFT, P_RIGHT = 0.0, 2.0
TRUTH = (1.0, 2.0, 3.0, 4.0, 5.0, 1.0, 1.0, 1.0)
DEFAULT_DT = 1e-3
MAX_EIGENPAIRS = 800
CORRELATION_LENGTH = 0.1
SMOOTHNESS = 1.5
DEFAULT_DATA_SEED = 0


def whittle_matern_cov(s, t, corr_length: float = CORRELATION_LENGTH):
    """Matern-3/2 covariance with unit variance."""
    r = math.sqrt(3.0) * np.abs(np.asarray(t, dtype=float) - np.asarray(s, dtype=float)) / corr_length
    return (1.0 + r) * np.exp(-r)


def make_grid(dt: float = DEFAULT_DT) -> np.ndarray:
    m = int(round(1.0 / dt))
    if not math.isclose(m * dt, 1.0, rel_tol=0, abs_tol=1e-12):
        raise ValueError(f"dt={dt} does not divide [0, 1]")
    return np.linspace(0.0, 1.0, m + 1)


# --- eigenpair cache ------------------------------------------------------


def _cache_stem(dt: float, corr_length: float) -> str:
    return f"matern32_rho{corr_length:g}_dt{dt:g}"


def save_kl_cache(kl: KLExpansion, directory, corr_length: float = CORRELATION_LENGTH) -> Path:
    """Write eigenpairs as a little-endian float64 array with a JSON sidecar."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stem = _cache_stem(kl.dt, corr_length)
    data = np.concatenate([kl.eigenvalues[None, :], kl.eigenfunctions]).astype("<f8")
    raw = data.tobytes()
    (directory / f"{stem}.f64").write_bytes(raw)
    meta = {
        "rows": int(data.shape[0]),
        "cols": int(data.shape[1]),
        "layout": "row 0 = eigenvalues; rows 1.. = eigenfunctions on the grid (L2-normalised)",
        "dtype": "<f8",
        "dt": kl.dt,
        "grid_points": int(kl.grid.size),
        "covariance": {"family": "whittle_matern", "variance": 1.0, "correlation_length": corr_length, "smoothness": SMOOTHNESS},
        "sha256": hashlib.sha256(raw).hexdigest(),
    }
    path = directory / f"{stem}.json"
    path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def load_kl_cache(directory, dt: float = DEFAULT_DT, corr_length: float = CORRELATION_LENGTH) -> KLExpansion | None:
    directory = Path(directory)
    stem = _cache_stem(dt, corr_length)
    meta_path, data_path = directory / f"{stem}.json", directory / f"{stem}.f64"
    if not (meta_path.exists() and data_path.exists()):
        return None
    meta = json.loads(meta_path.read_text())
    raw = data_path.read_bytes()
    if hashlib.sha256(raw).hexdigest() != meta["sha256"]:
        raise ValueError(f"checksum mismatch for eigenpair cache {data_path}")
    data = np.frombuffer(raw, dtype="<f8").reshape(meta["rows"], meta["cols"]).astype(float)
    return KLExpansion(grid=make_grid(dt), dt=meta["dt"], eigenvalues=data[0].copy(), eigenfunctions=data[1:].copy())


def compute_kl(dt: float = DEFAULT_DT, corr_length: float = CORRELATION_LENGTH, n_keep: int = MAX_EIGENPAIRS) -> KLExpansion:
    grid = make_grid(dt)
    kl = eigendecompose_kernel_matrix(grid, lambda s, t: whittle_matern_cov(s, t, corr_length), n_keep=min(n_keep, grid.size))
    return kl


def get_kl(dt: float = DEFAULT_DT, cache_dir=None, *, build: bool = True) -> KLExpansion:
    """Load eigenpairs from ``cache_dir`` or compute (and cache) them."""
    if cache_dir is not None:
        kl = load_kl_cache(cache_dir, dt)
        if kl is not None:
            return kl
        if not build:
            raise FileNotFoundError(f"no eigenpair cache for dt={dt} in {cache_dir}")
    kl = compute_kl(dt)
    if cache_dir is not None:
        save_kl_cache(kl, cache_dir)
    return kl


# --- forward model --------------------------------------------------------


@dataclass(frozen=True)
class LevelSetField:
    g_values: np.ndarray
    u_values: np.ndarray


def level_set_map(g) -> np.ndarray:
    """u = -2 + 4 * 1[g >= 0]."""
    return np.where(np.asarray(g) >= 0.0, U_HIGH, U_LOW)


def synthesize_level_set(x, eigenfunctions: np.ndarray) -> LevelSetField:
    """g = sum_i x_i phi_i on the grid, and the two-phase field u."""
    x = np.asarray(x, dtype=float)
    g = eigenfunctions[:, : x.size] @ x
    return LevelSetField(g, level_set_map(g))


def cumulative_trapezoid(f, dt: float) -> np.ndarray:
    out = np.empty_like(f, dtype=float)
    out[0] = 0.0
    np.cumsum(0.5 * dt * (f[1:] + f[:-1]), out=out[1:])
    return out


def solve_darcy_1d(u_values, dt: float) -> np.ndarray:
    """Pressure p(t) = 2 S_t(e^-u) / S_1(e^-u), integrals by the trapezoidal rule."""
    S = cumulative_trapezoid(np.exp(-np.asarray(u_values, dtype=float)), dt)
    p = (P_RIGHT - P_LEFT) * S / S[-1] + P_LEFT
    p[-1] = P_RIGHT
    return p


def observation_indices(grid: np.ndarray, points=OBS_POINTS) -> np.ndarray | None:
    """Grid indices of the observation points, or None if they are off-grid."""
    dt = grid[1] - grid[0]
    idx = np.rint(np.asarray(points) / dt).astype(int)
    if np.all(np.abs(grid[idx] - np.asarray(points)) < 1e-9 * max(dt, 1.0)):
        return idx
    return None


@dataclass(frozen=True)
class BenchmarkProblem:
    """Level-set inversion posterior on S^{d-1} for a given truncation ``d``.

    ``y`` and ``noise_var`` are the data and per-observation noise variances.
    ``truth`` is the coefficient vector used to generate the data.
    """

    kl: KLExpansion
    d: int
    y: np.ndarray
    noise_var: np.ndarray
    truth: np.ndarray
    obs_points: tuple = OBS_POINTS
    _basis: np.ndarray = field(init=False, repr=False)
    _obs_idx: np.ndarray | None = field(init=False, repr=False)

    def __post_init__(self):
        if not 2 <= self.d <= self.kl.rank:
            raise ValueError(f"d={self.d} outside [2, {self.kl.rank}]")
        if np.any(np.asarray(self.noise_var) <= 0):
            raise ValueError("noise variances must be positive")
        if not math.isclose(self.kl.dt * (self.kl.grid.size - 1), 1.0, abs_tol=1e-9):
            raise ValueError("grid must cover [0, 1]")
        object.__setattr__(self, "_basis", np.ascontiguousarray(self.kl.eigenfunctions[:, : self.d]))
        object.__setattr__(self, "_obs_idx", observation_indices(self.kl.grid, self.obs_points))
        object.__setattr__(self, "_inv_var", 1.0 / np.asarray(self.noise_var, dtype=float))

    @property
    def dt(self) -> float:
        return self.kl.dt

    @property
    def grid(self) -> np.ndarray:
        return self.kl.grid

    def prior_covariance(self) -> CovarianceModel:
        """Coefficient covariance Lambda_d; the sphere prior is ACG(Lambda_d)."""
        return self.kl.truncate(self.d)

    def level_set(self, x) -> LevelSetField:
        return synthesize_level_set(x, self._basis)

    def pressure(self, x) -> np.ndarray:
        return solve_darcy_1d(level_set_map(self._basis @ np.asarray(x, dtype=float)), self.dt)

    def observe_pressure(self, p) -> np.ndarray:
        if self._obs_idx is not None:
            return p[self._obs_idx]
        return np.interp(self.obs_points, self.grid, p)

    def forward_observe(self, x) -> np.ndarray:
        """x -> g -> u -> p -> (p(0.2), ..., p(0.8))."""
        return self.observe_pressure(self.pressure(x))

    def potential(self, x) -> float:
        r = self.y - self.forward_observe(x)
        return 0.5 * float(np.sum(self._inv_var * r * r))

    def quantity_of_interest(self, x) -> float:
        """Effective permeability (int_0^1 exp(-u) dt)^-1, trapezoidal rule."""
        u = level_set_map(self._basis @ np.asarray(x, dtype=float))
        f = np.exp(-u)
        return 1.0 / (self.dt * (f.sum() - 0.5 * (f[0] + f[-1])))

    def potential_bound(self) -> float:
        """Upper bound of the potential using 0 <= p <= 2 on [0, 1]."""
        dev = np.maximum(np.abs(self.y - P_LEFT), np.abs(self.y - P_RIGHT))
        return 0.5 * float(np.sum(self._inv_var * dev * dev))

    def with_dimension(self, d: int) -> "BenchmarkProblem":
        return BenchmarkProblem(self.kl, d, self.y, self.noise_var, self.truth, self.obs_points)


def forward_observe(x, problem: BenchmarkProblem) -> np.ndarray:
    return problem.forward_observe(x)


def potential(x, problem: BenchmarkProblem) -> float:
    return problem.potential(x)


def quantity_of_interest(x, problem: BenchmarkProblem) -> float:
    return problem.quantity_of_interest(x)


def truth_vector(n: int | None = None) -> np.ndarray:
    t = np.array(TRUTH)
    if n is None or n == t.size:
        return t
    if n < t.size:
        return t[:n]
    return np.concatenate([t, np.zeros(n - t.size)])


def generate_synthetic_data(kl: KLExpansion, noise_seed: int | None, truth=None, *, zero_noise: bool = False):
    """Noisy observations y_j = p_true(0.2j) + eta_j, eta_j ~ N(0, p_true(0.2j)/10).

    Returns ``(y, noise_var, o_true)``.
    """
    truth = truth_vector() if truth is None else np.asarray(truth, dtype=float)
    g = kl.eigenfunctions[:, : truth.size] @ truth
    p = solve_darcy_1d(level_set_map(g), kl.dt)
    idx = observation_indices(kl.grid)
    o_true = p[idx] if idx is not None else np.interp(OBS_POINTS, kl.grid, p)
    if np.any(o_true <= 0):
        raise ValueError("true observations must be positive to define the noise variances")
    noise_var = o_true / 10.0
    if zero_noise:
        return o_true.copy(), noise_var, o_true
    rng = np.random.default_rng(noise_seed)
    y = o_true + np.sqrt(noise_var) * rng.standard_normal(o_true.size)
    return y, noise_var, o_true


def build_problem(
    d: int,
    *,
    dt: float = DEFAULT_DT,
    data_seed: int | None = DEFAULT_DATA_SEED,
    zero_noise: bool = False,
    cache_dir=None,
    kl: KLExpansion | None = None,
) -> BenchmarkProblem:
    """Assemble the benchmark posterior for truncation level ``d``.

    The data are always generated from the full truth vector, independently of ``d``.
    """
    if kl is None:
        kl = get_kl(dt, cache_dir)
    y, noise_var, _ = generate_synthetic_data(kl, data_seed, zero_noise=zero_noise)
    return BenchmarkProblem(kl, d, y, noise_var, truth_vector())


def sphere_potential(problem: BenchmarkProblem):
    from .kernels import SpherePotential

    return SpherePotential(problem.potential, (0.0, problem.potential_bound()))


__all__ = [
    "BenchmarkProblem",
    "LevelSetField",
    "build_problem",
    "forward_observe",
    "generate_synthetic_data",
    "get_kl",
    "level_set_map",
    "potential",
    "project_to_sphere",
    "quantity_of_interest",
    "solve_darcy_1d",
    "synthesize_level_set",
    "whittle_matern_cov",
]
