"""Chain driver and acceptance-rate tuning."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .diagnostics import ChainTrace
from .gaussian import CovarianceModel
from .kernels import TransitionKernel, make_sphere_kernel

logger = logging.getLogger(__name__)


class ChainAbortedError(RuntimeError):
    """A functional returned a non-finite value; ``state`` holds the offending point."""

    def __init__(self, message: str, state: np.ndarray, iteration: int):
        super().__init__(message)
        self.state = state
        self.iteration = iteration


def _as_named(functionals) -> dict[str, Callable]:
    if functionals is None:
        return {}
    if isinstance(functionals, Mapping):
        return dict(functionals)
    return {f"f{i}": f for i, f in enumerate(functionals)}


def run_chain(
    kernel: TransitionKernel,
    x0,
    n: int,
    burn_in: int,
    functionals: Mapping[str, Callable] | Sequence[Callable] | None,
    rng: np.random.Generator,
    *,
    thin: int | None = None,
    allow_negative_control: bool = False,
) -> tuple[ChainTrace, np.ndarray]:
    """Run ``n`` transitions, recording the last ``n - burn_in`` of them.

    Functionals are evaluated on every recorded state; on a rejected move
    the previous values are reused.  If ``thin`` is given, every ``thin``-th
    recorded state is stored in ``trace.states``.

    Returns the trace and the final state.
    """
    if not n > burn_in >= 0:
        raise ValueError(f"need n > burn_in >= 0, got n={n}, burn_in={burn_in}")
    if kernel.negative_control and not allow_negative_control:
        raise ValueError(f"{kernel.kernel_id} is a negative control; pass allow_negative_control=True")
    funcs = _as_named(functionals)
    m = n - burn_in
    series = {name: np.empty(m) for name in funcs}
    jumps = np.empty(m)
    stored = []
    accepted = 0
    tries = 0

    x = kernel.prepare(x0)
    step = kernel.step
    for _ in range(burn_in):
        x = step(x, rng).next_state

    prev_x, prev_vals = None, None
    for k in range(m):
        res = step(x, rng)
        x = res.next_state
        accepted += res.accepted
        if res.shrink_tries:
            tries += res.shrink_tries
        jumps[k] = res.jump_distance
        if x is not prev_x:
            prev_vals = [f(x) for f in funcs.values()]
            for v in prev_vals:
                if not math.isfinite(v):
                    raise ChainAbortedError(f"non-finite functional value at iteration {burn_in + k}", np.array(x), burn_in + k)
            prev_x = x
        for name, v in zip(series, prev_vals):
            series[name][k] = v
        if thin and k % thin == thin - 1:
            stored.append(np.array(x))

    trace = ChainTrace(
        functional_series=series,
        step_count=m,
        accepted_count=int(accepted),
        jump_distances=jumps,
        shrink_tries_total=int(tries),
        states=np.array(stored) if thin else None,
        meta={"kernel_id": kernel.kernel_id, "tuning": kernel.tuning, "dimension": int(np.size(x)), "n": n, "burn_in": burn_in},
    )
    return trace, x


def acceptance_rate(kernel: TransitionKernel, x0, n: int, rng) -> tuple[float, np.ndarray]:
    x = kernel.prepare(x0)
    acc = 0
    for _ in range(n):
        res = kernel.step(x, rng)
        acc += res.accepted
        x = res.next_state
    return acc / n, x


# parameter ranges searched by the tuner (lower, upper)
PARAM_RANGES = {
    "repro_pcn": (1e-4, 1.0),
    "geodesic_mh": (1e-5, 0.5 * math.pi),
    "tangent_mh": (1e-5, 2.0),
    "naive_repro": (1e-4, 1.0),
}


@dataclass
class TuningResult:
    param: float
    rate: float
    converged: bool
    flat: bool
    rounds: int
    state: np.ndarray


def tune_step_size(
    kernel_family: str,
    target_rate: float,
    potential: Callable,
    cov: CovarianceModel,
    rng: np.random.Generator,
    *,
    x0=None,
    pilot_steps: int = 5000,
    tol: float = 0.02,
    max_rounds: int = 20,
    confirm_factor: int = 4,
) -> TuningResult:
    """Bisection on the log step size until the acceptance rate is within ``tol``.

    Each pilot run continues from where the previous one stopped.  A step
    whose short pilot lands within ``tol`` is confirmed by a pilot
    ``confirm_factor`` times longer that must land within ``tol / 2``;
    otherwise the longer estimate steers the next bisection round.  If even
    the largest step is accepted at least ``target_rate`` of the time the
    response is treated as flat: the largest step is returned and a warning
    logged.
    """
    if not 0.0 < target_rate < 1.0:
        raise ValueError("target_rate must lie in (0, 1)")
    if kernel_family not in PARAM_RANGES:
        raise ValueError(f"no tunable parameter for {kernel_family!r}")
    lo, hi = (math.log(v) for v in PARAM_RANGES[kernel_family])
    if x0 is None:
        from .geometry import acg_sample

        x0 = acg_sample(cov, rng)
    rounds = 0

    def evaluate(log_param, x):
        nonlocal rounds
        k = make_sphere_kernel(kernel_family, cov, potential, math.exp(log_param))
        rate, x = acceptance_rate(k, x, pilot_steps, rng)
        rounds += 1
        logger.debug("%s: round %d param=%.4g rate=%.3f", kernel_family, rounds, math.exp(log_param), rate)
        if abs(rate - target_rate) > tol:
            return rate, x, False
        rate, x = acceptance_rate(k, x, confirm_factor * pilot_steps, rng)
        logger.debug("%s: confirmation rate=%.3f", kernel_family, rate)
        return rate, x, abs(rate - target_rate) <= 0.5 * tol

    rate, x, ok = evaluate(hi, x0)
    if ok:
        return TuningResult(math.exp(hi), rate, True, False, rounds, x)
    if rate > target_rate:
        logger.warning("%s: acceptance %.3f at the largest step; response is flat", kernel_family, rate)
        return TuningResult(math.exp(hi), rate, False, True, rounds, x)
    mid = hi
    while rounds < max_rounds:
        mid = 0.5 * (lo + hi)
        rate, x, ok = evaluate(mid, x)
        if ok:
            return TuningResult(math.exp(mid), rate, True, False, rounds, x)
        if rate > target_rate:
            lo = mid
        else:
            hi = mid
    logger.warning("%s: tuning did not converge (last rate %.3f)", kernel_family, rate)
    return TuningResult(math.exp(mid), rate, False, False, rounds, x)
