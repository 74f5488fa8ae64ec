"""
Markov transition kernels on R^d and on the sphere S^{d-1}.

Ambient kernels (pCN-MH, elliptical slice sampling) target
``d nu / d N(0, C) ~ exp(-Phi)``.  Sphere kernels target
``d mu / d ACG(C) ~ exp(-Phi_bar)``:

* reprojected pCN-MH and reprojected ESS lift the current direction with the
  Gamma radial law, move in R^d and project back;
* the geodesic random-walk MH and tangent-space MH baselines work with the
  Hausdorff density ``rho(x) = exp(-Phi_bar(x)) / ||x||_C^d``;
* :class:`NaiveReprojection` is a negative control that skips the radial
  lift and is *not* invariant for the target.

Every kernel exposes ``step(state, rng) -> KernelStep``.  Returned states are
read-only arrays; a rejected MH move returns the very same array object.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .gaussian import CovarianceModel
from .geometry import geodesic_distance, lift, project_to_sphere

KERNEL_IDS = (
    "pcn_ambient",
    "ess_ambient",
    "repro_pcn",
    "repro_ess",
    "geodesic_mh",
    "tangent_mh",
    "naive_repro",
    "projected_wrapper",
)
NEGATIVE_CONTROLS = frozenset({"naive_repro", "projected_wrapper"})

MAX_SHRINK_TRIES = 10**6


class ShrinkageError(RuntimeError):
    """Elliptical shrinkage exceeded its iteration cap."""


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class KernelStep:
    next_state: np.ndarray
    accepted: bool
    jump_distance: float
    proposal: np.ndarray | None = None
    shrink_tries: int | None = None


class SpherePotential:
    """Negative log-likelihood on the sphere with optional declared bounds."""

    def __init__(self, evaluate: Callable[[np.ndarray], float], bounds: tuple[float, float] | None = None):
        self.evaluate = evaluate
        self.declared_bounds = bounds

    def __call__(self, x: np.ndarray) -> float:
        return self.evaluate(x)

    def lifted(self) -> Callable[[np.ndarray], float]:
        """Phi = Phi_bar o projection, as a function on R^d."""
        ev = self.evaluate
        return lambda x: ev(project_to_sphere(x))


def zero_potential(x) -> float:
    return 0.0


def _frozen(x: np.ndarray) -> np.ndarray:
    x.flags.writeable = False
    return x


class _LastValue:
    # remembers f at the last array object it saw; valid because states are read-only
    __slots__ = ("f", "key", "value")

    def __init__(self, f):
        self.f = f
        self.key = None
        self.value = None

    def __call__(self, x):
        if x is self.key:
            return self.value
        v = float(self.f(x))
        self.key, self.value = x, v
        return v

    def store(self, x, v):
        self.key, self.value = x, v


def _log_uniform(rng: np.random.Generator) -> float:
    """log U with U ~ U(0, 1]."""
    return math.log(1.0 - rng.random())


# --- tangent spaces -------------------------------------------------------


def tangent_onb(x) -> np.ndarray:
    """Orthonormal basis of the tangent space x^perp as a d x (d-1) matrix.

    Taken from a complete QR factorisation of the constraint Jacobian
    ``grad(||x||^2 - 1) = 2x``: the first Q column spans x, the rest span x^perp.
    """
    x = np.asarray(x, dtype=float)
    q, _ = np.linalg.qr(x[:, None], mode="complete")
    return q[:, 1:]


def _householder_vector(x: np.ndarray) -> np.ndarray:
    # reflector H = I - 2 u u^T / u^T u with H e_d = +-x; branch keeps u away from 0
    u = x.copy()
    if x[-1] > 0:
        u[-1] += 1.0
    else:
        u = -u
        u[-1] += 1.0
    return u


def tangent_vector(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Map coordinates ``w`` in R^{d-1} to x^perp through an orthonormal basis.

    Equivalent to ``U @ w`` for the Householder basis ``U = H[:, :d-1]`` but
    costs O(d).
    """
    u = _householder_vector(x)
    wt = np.append(w, 0.0)
    return wt - (2.0 * (u @ wt) / (u @ u)) * u


def householder_tangent_onb(x) -> np.ndarray:
    """Explicit form of the basis used by :func:`tangent_vector`."""
    x = np.asarray(x, dtype=float)
    u = _householder_vector(x)
    H = np.eye(x.size) - 2.0 * np.outer(u, u) / (u @ u)
    return H[:, :-1]


def acg_log_rho(cov: CovarianceModel, potential: Callable[[np.ndarray], float]) -> Callable[[np.ndarray], float]:
    """Unnormalised log Hausdorff density -Phi_bar(x) - (d/2) log(x^T C^{-1} x)."""
    half_d = 0.5 * cov.dim
    return lambda x: -potential(x) - half_d * math.log(cov.precision_quadratic(x))


# --- proposals (vectorised over leading axes) -----------------------------


def pcn_proposal(x, cov: CovarianceModel, s: float, rng: np.random.Generator) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    size = None if x.ndim == 1 else x.shape[0]
    w = cov.sample(rng, size)
    return math.sqrt(1.0 - s * s) * x + s * w


def repro_pcn_proposal(x, cov: CovarianceModel, s: float, rng: np.random.Generator) -> np.ndarray:
    """Lift radially, take a pCN proposal, project back."""
    return project_to_sphere(pcn_proposal(lift(x, cov, rng), cov, s, rng))


def naive_repro_proposal(x, cov: CovarianceModel, s: float, rng: np.random.Generator) -> np.ndarray:
    """pCN proposal applied to the unit vector itself, then projected (no lift)."""
    return project_to_sphere(pcn_proposal(x, cov, s, rng))


def _check_s(s: float) -> None:
    if not 0.0 < s <= 1.0:
        raise ParameterError(f"pCN step size must lie in (0, 1], got {s}")


# --- ambient kernels ------------------------------------------------------


def pcn_step_ambient(x, cov, s, potential, rng, *, _phi=None) -> KernelStep:
    """One pCN-MH step targeting exp(-Phi) N(0, C)."""
    _check_s(s)
    phi = _phi or potential
    y = _frozen(pcn_proposal(x, cov, s, rng))
    phi_x = phi(x)
    phi_y = float(potential(y))
    if _log_uniform(rng) <= phi_x - phi_y:
        if _phi is not None:
            _phi.store(y, phi_y)
        return KernelStep(y, True, float(np.linalg.norm(y - x)), proposal=y)
    return KernelStep(x, False, 0.0, proposal=y)


def shrink_ellipse(x, log_level: float, cov, potential, rng, *, max_tries: int = MAX_SHRINK_TRIES):
    """Elliptical shrinkage toward ``x`` until ``-Phi(y) >= log_level``.

    ``log_level`` is log t for a level t in (0, exp(-Phi(x))].  Returns
    ``(y, tries, Phi(y))`` where ``tries`` counts potential evaluations.
    """
    x = np.asarray(x, dtype=float)
    w = cov.sample(rng)
    theta = rng.uniform(0.0, 2.0 * math.pi)
    lo, hi = theta - 2.0 * math.pi, theta
    tries = 0
    while True:
        y = math.cos(theta) * x + math.sin(theta) * w
        phi_y = float(potential(y))
        tries += 1
        if -phi_y >= log_level:
            return y, tries, phi_y
        if tries >= max_tries:
            raise ShrinkageError(f"no point in the level set after {tries} tries")
        if theta < 0.0:
            lo = theta
        else:
            hi = theta
        theta = rng.uniform(lo, hi)


def ess_step_ambient(x, cov, potential, rng, *, _phi=None) -> KernelStep:
    """One elliptical slice sampling step targeting exp(-Phi) N(0, C)."""
    phi = _phi or potential
    log_t = -phi(x) + _log_uniform(rng)
    y, tries, phi_y = shrink_ellipse(x, log_t, cov, potential, rng)
    y = _frozen(y)
    if _phi is not None:
        _phi.store(y, phi_y)
    return KernelStep(y, True, float(np.linalg.norm(y - x)), proposal=y, shrink_tries=tries)


# --- sphere kernels -------------------------------------------------------


def repro_pcn_step(x, cov, s, potential, rng, *, _phi=None) -> KernelStep:
    """Reprojected pCN-MH step on the sphere."""
    _check_s(s)
    phi = _phi or potential
    y = _frozen(repro_pcn_proposal(x, cov, s, rng))
    phi_x = phi(x)
    phi_y = float(potential(y))
    if _log_uniform(rng) <= phi_x - phi_y:
        if _phi is not None:
            _phi.store(y, phi_y)
        return KernelStep(y, True, geodesic_distance(x, y), proposal=y)
    return KernelStep(x, False, 0.0, proposal=y)


def repro_ess_step(x, cov, potential, rng, *, _phi=None) -> KernelStep:
    """Reprojected elliptical slice sampling step on the sphere."""
    phi = _phi or potential
    log_t = -phi(x) + _log_uniform(rng)
    ambient = lift(x, cov, rng)

    def lifted(z):
        return potential(project_to_sphere(z))

    y, tries, phi_y = shrink_ellipse(ambient, log_t, cov, lifted, rng)
    y = _frozen(project_to_sphere(y))
    if _phi is not None:
        _phi.store(y, phi_y)
    return KernelStep(y, True, geodesic_distance(x, y), proposal=y, shrink_tries=tries)


def geodesic_mh_step(x, t, log_rho, rng, *, _lr=None) -> KernelStep:
    """Metropolised geodesic random walk with fixed arc length ``t``."""
    if not 0.0 < t <= 0.5 * math.pi:
        raise ParameterError(f"geodesic step must lie in (0, pi/2], got {t}")
    lr = _lr or log_rho
    d = x.size
    w = rng.standard_normal(d - 1)
    w /= np.linalg.norm(w)
    v = tangent_vector(x, w)
    y = math.cos(t) * x + math.sin(t) * v
    y = _frozen(y / np.linalg.norm(y))
    lr_x = lr(x)
    lr_y = float(log_rho(y))
    if _log_uniform(rng) <= lr_y - lr_x:
        if _lr is not None:
            _lr.store(y, lr_y)
        return KernelStep(y, True, geodesic_distance(x, y), proposal=y)
    return KernelStep(x, False, 0.0, proposal=y)


def tangent_mh_step(x, s, log_rho, rng, *, _lr=None) -> KernelStep:
    """MH with Gaussian tangent proposals projected back along x (sphere case)."""
    if not s > 0.0:
        raise ParameterError(f"tangent step size must be positive, got {s}")
    lr = _lr or log_rho
    d = x.size
    v = tangent_vector(x, s * rng.standard_normal(d - 1))
    vv = float(v @ v)
    if vv > 1.0:
        return KernelStep(x, False, 0.0)
    y = math.sqrt(1.0 - vv) * x + v
    y = _frozen(y / np.linalg.norm(y))
    lr_x = lr(x)
    lr_y = float(log_rho(y))
    if _log_uniform(rng) <= lr_y - lr_x:
        if _lr is not None:
            _lr.store(y, lr_y)
        return KernelStep(y, True, geodesic_distance(x, y), proposal=y)
    return KernelStep(x, False, 0.0, proposal=y)


# --- kernel objects -------------------------------------------------------


@dataclass
class TransitionKernel:
    """Base class; subclasses bind parameters and implement :meth:`step`."""

    kernel_id: str = field(init=False, default="")
    negative_control: bool = field(init=False, default=False)
    on_sphere: bool = field(init=False, default=True)

    @property
    def tuning(self) -> dict:
        return {}

    def step(self, state: np.ndarray, rng: np.random.Generator) -> KernelStep:
        raise NotImplementedError

    def prepare(self, state) -> np.ndarray:
        x = np.array(state, dtype=float)
        if self.on_sphere:
            x = x / np.linalg.norm(x)
        return _frozen(x)


@dataclass
class PCNKernel(TransitionKernel):
    cov: CovarianceModel
    s: float
    potential: Callable = zero_potential

    def __post_init__(self):
        _check_s(self.s)
        self.kernel_id, self.on_sphere = "pcn_ambient", False
        self._phi = _LastValue(self.potential)

    @property
    def tuning(self):
        return {"s": self.s}

    def step(self, state, rng):
        return pcn_step_ambient(state, self.cov, self.s, self.potential, rng, _phi=self._phi)


@dataclass
class ESSKernel(TransitionKernel):
    cov: CovarianceModel
    potential: Callable = zero_potential

    def __post_init__(self):
        self.kernel_id, self.on_sphere = "ess_ambient", False
        self._phi = _LastValue(self.potential)

    def step(self, state, rng):
        return ess_step_ambient(state, self.cov, self.potential, rng, _phi=self._phi)


@dataclass
class ReprojectedPCN(TransitionKernel):
    cov: CovarianceModel
    s: float
    potential: Callable = zero_potential

    def __post_init__(self):
        _check_s(self.s)
        self.kernel_id = "repro_pcn"
        self._phi = _LastValue(self.potential)

    @property
    def tuning(self):
        return {"s": self.s}

    def step(self, state, rng):
        return repro_pcn_step(state, self.cov, self.s, self.potential, rng, _phi=self._phi)


@dataclass
class ReprojectedESS(TransitionKernel):
    cov: CovarianceModel
    potential: Callable = zero_potential

    def __post_init__(self):
        self.kernel_id = "repro_ess"
        self._phi = _LastValue(self.potential)

    def step(self, state, rng):
        return repro_ess_step(state, self.cov, self.potential, rng, _phi=self._phi)


@dataclass
class GeodesicMH(TransitionKernel):
    t: float
    log_rho: Callable

    def __post_init__(self):
        if not 0.0 < self.t <= 0.5 * math.pi:
            raise ParameterError(f"geodesic step must lie in (0, pi/2], got {self.t}")
        self.kernel_id = "geodesic_mh"
        self._lr = _LastValue(self.log_rho)

    @property
    def tuning(self):
        return {"t": self.t}

    def step(self, state, rng):
        return geodesic_mh_step(state, self.t, self.log_rho, rng, _lr=self._lr)


@dataclass
class TangentMH(TransitionKernel):
    s: float
    log_rho: Callable

    def __post_init__(self):
        if not self.s > 0:
            raise ParameterError(f"tangent step size must be positive, got {self.s}")
        self.kernel_id = "tangent_mh"
        self._lr = _LastValue(self.log_rho)

    @property
    def tuning(self):
        return {"s": self.s}

    def step(self, state, rng):
        return tangent_mh_step(state, self.s, self.log_rho, rng, _lr=self._lr)


@dataclass
class NaiveReprojection(TransitionKernel):
    """Negative control: apply an ambient kernel to the unit vector, then project.

    Not invariant for the sphere target; never use it as a sampler.
    """

    inner: TransitionKernel

    def __post_init__(self):
        if self.inner.on_sphere:
            raise ValueError("naive reprojection needs an ambient inner kernel")
        self.kernel_id = "naive_repro"
        self.negative_control = True

    @property
    def tuning(self):
        return {"inner": self.inner.kernel_id, **self.inner.tuning}

    def step(self, state, rng):
        res = self.inner.step(state, rng)
        if res.next_state is state:
            return KernelStep(state, False, 0.0, proposal=res.proposal, shrink_tries=res.shrink_tries)
        y = _frozen(project_to_sphere(res.next_state))
        return KernelStep(y, res.accepted, geodesic_distance(state, y), proposal=y, shrink_tries=res.shrink_tries)


def naive_repro_step(x, inner: TransitionKernel, rng) -> KernelStep:
    return NaiveReprojection(inner).step(x, rng)


@dataclass
class IdentityKernel(TransitionKernel):
    """Stays put; useful as a stub."""

    ambient: bool = False

    def __post_init__(self):
        self.kernel_id = "identity"
        self.on_sphere = not self.ambient

    def step(self, state, rng):
        return KernelStep(state, True, 0.0, proposal=state)


def make_sphere_kernel(kernel_id: str, cov: CovarianceModel, potential: Callable, param: float | None = None) -> TransitionKernel:
    """Build one of the four sphere samplers (or the naive control) by id."""
    if kernel_id == "repro_pcn":
        return ReprojectedPCN(cov, param, potential)
    if kernel_id == "repro_ess":
        return ReprojectedESS(cov, potential)
    if kernel_id == "geodesic_mh":
        return GeodesicMH(param, acg_log_rho(cov, potential))
    if kernel_id == "tangent_mh":
        return TangentMH(param, acg_log_rho(cov, potential))
    if kernel_id == "naive_repro":
        return NaiveReprojection(PCNKernel(cov, param, zero_potential))
    raise ValueError(f"unknown sphere kernel {kernel_id!r}; valid: repro_pcn, repro_ess, geodesic_mh, tangent_mh, naive_repro")
