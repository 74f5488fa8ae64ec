"""
Scripted reproductions: the naive-reprojection counterexample, the
Markovianity Monte Carlo probabilities, the stationarity suite and the
level-set benchmark / dimension sweep.
"""

from __future__ import annotations

import functools
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import __version__
from ..chain import run_chain, tune_step_size
from ..diagnostics import diagnose, iact, kde_marginal, ks_statistic, ks_threshold
from ..gaussian import CovarianceModel
from ..geometry import acg_sample
from ..kernels import make_sphere_kernel, naive_repro_proposal, repro_pcn_proposal, zero_potential
from ..levelset import build_problem, get_kl, level_set_map, solve_darcy_1d, truth_vector
from .config import SPHERE_SAMPLERS, TUNABLE, ExperimentConfig

logger = logging.getLogger(__name__)

COUNTEREXAMPLE_COV = np.array(
    [
        [1.25, 0.33, -1.62],
        [0.33, 0.42, -0.09],
        [-1.62, -0.09, 2.85],
    ]
)
COUNTEREXAMPLE_STEP = 0.7
KDE_POINTS = 200
KS_ALPHA = 0.01

# 2x2 covariance for the circle detailed-balance check
CIRCLE_COV = np.array([[2.0, 0.6], [0.6, 0.7]])


@dataclass
class RunResult:
    """Everything one experiment produced.

    ``reports`` maps a task key to a flat dict of metrics; ``curves`` holds
    arrays for plotting (as lists); ``summary`` holds experiment-level
    scalars.  ``wall_clock_seconds`` is the only non-deterministic field.
    """

    config: dict
    reports: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    curves: dict = field(default_factory=dict)
    seeds: list = field(default_factory=list)
    version: str = __version__
    wall_clock_seconds: float = 0.0

    @property
    def experiment(self) -> str:
        return self.config["experiment"]

    def to_dict(self, *, include_wall_clock: bool = True) -> dict:
        d = asdict(self)
        if not include_wall_clock:
            d.pop("wall_clock_seconds")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunResult":
        return cls(**d)

    def check_references(self) -> list[str]:
        """Reports whose (kernel, dimension, seed) is not in the config."""
        cfg, bad = self.config, []
        for key, rep in self.reports.items():
            if "kernel" in rep and cfg.get("kernels") and rep["kernel"] not in cfg["kernels"]:
                bad.append(key)
            elif "dimension" in rep and cfg.get("dimensions") and rep["dimension"] not in cfg["dimensions"]:
                bad.append(key)
            elif "seed" in rep and rep["seed"] not in cfg["seeds"]:
                bad.append(key)
        return bad


def task_key(kernel: str, d: int, seed: int) -> str:
    return f"{kernel}|d={d}|seed={seed}"


# --- counterexample -------------------------------------------------------


@dataclass
class CounterexampleReport:
    n_samples: int
    seed: int
    grid: np.ndarray
    kde: dict  # law -> (3, len(grid)) densities
    ks: dict  # "naive" / "repro" -> per-coordinate KS statistic
    threshold: float

    @property
    def naive_separated(self) -> bool:
        return bool(max(self.ks["naive"]) >= 5.0 * self.threshold)

    @property
    def repro_matches(self) -> bool:
        return bool(max(self.ks["repro"]) < self.threshold)


def run_counterexample(n_samples: int, seed: int, *, with_kde: bool = True) -> CounterexampleReport:
    """One naive and one reprojected pCN step from exact ACG draws, compared with the target."""
    if n_samples < 10**5:
        raise ValueError("n_samples must be at least 1e5")
    cov = CovarianceModel.dense(COUNTEREXAMPLE_COV)
    rng = np.random.default_rng(seed)
    target = acg_sample(cov, rng, n_samples)
    start = acg_sample(cov, rng, n_samples)
    laws = {
        "target": target,
        "naive": naive_repro_proposal(start, cov, COUNTEREXAMPLE_STEP, rng),
        "repro": repro_pcn_proposal(start, cov, COUNTEREXAMPLE_STEP, rng),
    }
    ks = {law: [ks_statistic(laws[law][:, i], target[:, i]) for i in range(3)] for law in ("naive", "repro")}
    grid = np.linspace(-1.0, 1.0, KDE_POINTS)
    kde = {}
    if with_kde:
        kde = {law: np.array([kde_marginal(x[:, i], grid) for i in range(3)]) for law, x in laws.items()}
    return CounterexampleReport(n_samples, seed, grid, kde, ks, float(ks_threshold(n_samples, n_samples, KS_ALPHA)))


def counterexample_result(config: ExperimentConfig) -> RunResult:
    t0 = time.perf_counter()
    seed = config.seeds[0]
    rep = run_counterexample(config.n_samples, seed)
    reports = {}
    for law, kid in (("naive", "naive_repro"), ("repro", "repro_pcn")):
        reports[task_key(kid, 3, seed)] = {
            "kernel": kid,
            "dimension": 3,
            "seed": seed,
            **{f"ks_coord{i}": float(v) for i, v in enumerate(rep.ks[law])},
        }
    curves = {"kde_grid": rep.grid.tolist(), "kde": {law: v.tolist() for law, v in rep.kde.items()}}
    summary = {
        "ks_threshold": rep.threshold,
        "naive_separated": rep.naive_separated,
        "repro_matches": rep.repro_matches,
        "step_size": COUNTEREXAMPLE_STEP,
    }
    return RunResult(config.to_dict(), reports, summary, curves, [seed], wall_clock_seconds=time.perf_counter() - t0)


# --- Markovianity probabilities -------------------------------------------


@dataclass
class ConditionalEstimate:
    probability: float
    std_error: float
    events: int
    conditioning: int


@dataclass
class MarkovianityReport:
    n_samples: int
    seed: int
    estimates: dict  # (chain, "two"|"three") -> ConditionalEstimate

    def separation(self, chain: str) -> float:
        """Difference of the two estimates in units of the combined standard error."""
        a, b = self.estimates[(chain, "two")], self.estimates[(chain, "three")]
        return abs(a.probability - b.probability) / math.hypot(a.std_error, b.std_error)


MARKOVIANITY_CHAINS = {"random_walk": 1.0, "pcn": 0.5}


def _estimate(events: int, cond: int) -> ConditionalEstimate:
    p = events / cond
    return ConditionalEstimate(p, math.sqrt(p * (1.0 - p) / cond), events, cond)


def run_appendix_b(n_samples: int, seed: int, *, chunk: int = 2_000_000) -> MarkovianityReport:
    """Monte Carlo estimates of P(X2>0 | X1>0) and P(X2>0 | X1>0, X0>0) for scalar chains.

    ``random_walk`` uses X_{k+1} = X_k + s W (s = 1); ``pcn`` uses
    X_{k+1} = sqrt(1 - s^2) X_k + s W (s = 0.5); both start from X0 ~ N(0, 1).
    """
    if n_samples < 10**6:
        raise ValueError("n_samples must be at least 1e6")
    rng = np.random.default_rng(seed)
    estimates = {}
    for name, s in MARKOVIANITY_CHAINS.items():
        a = 1.0 if name == "random_walk" else math.sqrt(1.0 - s * s)
        c1 = c12 = c01 = c012 = 0
        left = n_samples
        while left:
            m = min(chunk, left)
            w = rng.standard_normal((3, m))
            x0 = w[0]
            x1 = a * x0 + s * w[1]
            x2 = a * x1 + s * w[2]
            p0, p1, p2 = x0 > 0, x1 > 0, x2 > 0
            p01 = p0 & p1
            c1 += int(p1.sum())
            c12 += int((p1 & p2).sum())
            c01 += int(p01.sum())
            c012 += int((p01 & p2).sum())
            left -= m
        estimates[(name, "two")] = _estimate(c12, c1)
        estimates[(name, "three")] = _estimate(c012, c01)
    return MarkovianityReport(n_samples, seed, estimates)


def appendix_b_result(config: ExperimentConfig) -> RunResult:
    t0 = time.perf_counter()
    seed = config.seeds[0]
    rep = run_appendix_b(config.n_samples, seed)
    reports = {}
    for name in MARKOVIANITY_CHAINS:
        two, three = rep.estimates[(name, "two")], rep.estimates[(name, "three")]
        reports[f"{name}|seed={seed}"] = {
            "chain": name,
            "step_size": MARKOVIANITY_CHAINS[name],
            "seed": seed,
            "p_given_x1": two.probability,
            "se_given_x1": two.std_error,
            "p_given_x1_x0": three.probability,
            "se_given_x1_x0": three.std_error,
            "separation_z": rep.separation(name),
        }
    return RunResult(config.to_dict(), reports, {"n_samples": config.n_samples}, {}, [seed], wall_clock_seconds=time.perf_counter() - t0)


# --- stationarity suite ---------------------------------------------------


def _effective_size(series: np.ndarray) -> float:
    # the KS statistic is a sup over indicator functionals, so use the slowest of
    # the coordinate itself and indicators at its quartiles
    taus = [iact(series)]
    for q in np.quantile(series, [0.25, 0.5, 0.75]):
        taus.append(iact((series <= q).astype(float)))
    return series.size / max(taus)


def stationarity_check(kernel_id: str, n_steps: int, seed: int) -> dict:
    """Chain marginals under a zero potential versus direct ACG sampling.

    The chain starts from an exact ACG draw.  The KS threshold uses the
    chain's effective sample size.
    """
    cov = CovarianceModel.dense(COUNTEREXAMPLE_COV)
    rng = np.random.default_rng([seed, SPHERE_SAMPLERS.index(kernel_id)])
    kernel = make_sphere_kernel(kernel_id, cov, zero_potential, COUNTEREXAMPLE_STEP)
    x0 = acg_sample(cov, rng)
    funcs = {f"x{i}": (lambda x, i=i: float(x[i])) for i in range(3)}
    trace, _ = run_chain(kernel, x0, n_steps, 0, funcs, rng)
    ref = acg_sample(cov, rng, n_steps)
    out = {"kernel": kernel_id, "seed": seed, "n_steps": n_steps}
    ok = True
    for i in range(3):
        series = trace.functional_series[f"x{i}"]
        n_eff = _effective_size(series)
        ks = ks_statistic(series, ref[:, i])
        thr = ks_threshold(n_eff, n_steps, KS_ALPHA)
        out[f"ks_coord{i}"], out[f"threshold_coord{i}"], out[f"n_eff_coord{i}"] = ks, thr, n_eff
        ok &= ks < thr
    out["marginals_match"] = bool(ok)
    return out


def exact_sphere_posterior(cov: CovarianceModel, potential, n: int, rng, *, phi_min: float = 0.0) -> np.ndarray:
    """Rejection sampling from exp(-Phi_bar) ACG(C); needs Phi_bar >= phi_min."""
    out, have = [], 0
    while have < n:
        x = acg_sample(cov, rng, n)
        phi = np.array([potential(z) for z in x]) if potential is not zero_potential else np.zeros(n)
        keep = x[rng.random(n) < np.exp(phi_min - phi)]
        out.append(keep)
        have += keep.shape[0]
    return np.concatenate(out)[:n]


def detailed_balance_check(kernel_id: str, n_pairs: int, seed: int, *, bins: int = 72, potential=zero_potential) -> dict:
    """Binned symmetry of the pair law (x, K(x, .)) on the circle from exact stationary starts.

    For each pair of angular cells (i, j) the counts F_ij and F_ji are
    compared with z = |F_ij - F_ji| / sqrt(F_ij + F_ji).
    """
    cov = CovarianceModel.dense(CIRCLE_COV)
    rng = np.random.default_rng([seed, 1000 + SPHERE_SAMPLERS.index(kernel_id)])
    kernel = make_sphere_kernel(kernel_id, cov, potential, 0.6)
    starts = exact_sphere_posterior(cov, potential, n_pairs, rng)
    ends = np.empty_like(starts)
    for k, x0 in enumerate(starts):
        ends[k] = kernel.step(kernel.prepare(x0), rng).next_state
    edges = np.linspace(0.0, 2.0 * math.pi, bins + 1)
    ang = lambda x: np.mod(np.arctan2(x[:, 1], x[:, 0]), 2.0 * math.pi)
    F, _, _ = np.histogram2d(ang(starts), ang(ends), bins=[edges, edges])
    tot = F + F.T
    iu = np.triu_indices(bins, 1)
    mask = tot[iu] > 0
    z = np.abs(F - F.T)[iu][mask] / np.sqrt(tot[iu][mask])
    zmax = float(z.max()) if z.size else 0.0
    return {"kernel": kernel_id, "seed": seed, "n_pairs": n_pairs, "bins": bins, "max_z": zmax, "symmetric": zmax < 4.0}


def stationarity_result(config: ExperimentConfig) -> RunResult:
    t0 = time.perf_counter()
    reports = {}
    for seed in config.seeds:
        for kid in config.kernels:
            rep = stationarity_check(kid, config.iterations - config.burn_in, seed)
            rep.update({f"db_{k}": v for k, v in detailed_balance_check(kid, 200_000, seed).items() if k not in ("kernel", "seed")})
            reports[f"{kid}|seed={seed}"] = rep
    ok = all(r["marginals_match"] and r["db_symmetric"] for r in reports.values())
    return RunResult(config.to_dict(), dict(sorted(reports.items())), {"all_pass": ok}, {}, list(config.seeds), wall_clock_seconds=time.perf_counter() - t0)


# --- level-set benchmark --------------------------------------------------


@functools.lru_cache(maxsize=4)
def _kl(cache_dir):
    return get_kl(cache_dir=cache_dir)


def run_benchmark_task(config: ExperimentConfig, kernel_id: str, d: int, seed: int) -> dict:
    """Tune (if requested), burn in and run one chain; diagnostics for q."""
    problem = build_problem(d, kl=_kl(config.cache_dir), data_seed=config.data_seed)
    cov = problem.prior_covariance()
    pot = problem.potential
    entropy = [seed, d, SPHERE_SAMPLERS.index(kernel_id)]
    rng = np.random.default_rng(entropy)
    x0 = acg_sample(cov, rng)
    rep = {"kernel": kernel_id, "dimension": d, "seed": seed, "rng_entropy": entropy}
    param = None
    if kernel_id in TUNABLE:
        param = config.fixed_param(kernel_id)
        if param is None:
            target = config.target_rate(kernel_id)
            tuned = tune_step_size(kernel_id, target, pot, cov, rng, x0=x0, pilot_steps=config.pilot_steps)
            param, x0 = tuned.param, tuned.state
            rep.update(tuning_target=target, tuning_rate=tuned.rate, tuning_converged=tuned.converged, tuning_flat=tuned.flat)
        rep["param"] = param
    kernel = make_sphere_kernel(kernel_id, cov, pot, param)
    trace, _ = run_chain(kernel, x0, config.iterations, config.burn_in, {"q": problem.quantity_of_interest}, rng, thin=config.thinning)
    diag = diagnose(trace)
    rep.update(
        n_recorded=trace.step_count,
        acceptance_rate=diag.acceptance_rate,
        iact=diag.iact["q"],
        mean_q=diag.mean["q"],
        half_ci_q=diag.half_ci["q"],
        rmsjd=diag.rmsjd,
    )
    if diag.mean_shrink_tries is not None:
        rep["mean_shrink_tries"] = diag.mean_shrink_tries
    if config.save_traces:
        rep["thinned_states"] = trace.states.tolist()
    return rep


def _run_task_tuple(args):
    return run_benchmark_task(*args)


def benchmark_tasks(config: ExperimentConfig) -> list[tuple[str, int, int]]:
    return sorted(
        ((k, d, s) for k in config.kernels for d in config.dimensions for s in config.seeds),
        key=lambda t: (SPHERE_SAMPLERS.index(t[0]), t[1], t[2]),
    )


def truth_curves(config: ExperimentConfig) -> dict:
    """Grid, true level set / field / pressure and the synthetic data."""
    kl = _kl(config.cache_dir)
    t = truth_vector()
    g = kl.eigenfunctions[:, : t.size] @ t
    u = level_set_map(g)
    p = solve_darcy_1d(u, kl.dt)
    prob = build_problem(3, kl=kl, data_seed=config.data_seed)
    return {
        "t": kl.grid.tolist(),
        "g_true": g.tolist(),
        "u_true": u.tolist(),
        "p_true": p.tolist(),
        "obs_points": list(prob.obs_points),
        "y": prob.y.tolist(),
        "noise_var": np.asarray(prob.noise_var).tolist(),
    }


def run_benchmark(config: ExperimentConfig, *, jobs: int = 1) -> RunResult:
    """All (kernel, dimension, seed) tasks; parallel over ``jobs`` processes, merged by sorted key."""
    t0 = time.perf_counter()
    tasks = benchmark_tasks(config)
    args = [(config, *t) for t in tasks]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outs = list(pool.map(_run_task_tuple, args))
    else:
        outs = []
        for a in args:
            logger.info("running %s d=%d seed=%d", *a[1:])
            outs.append(_run_task_tuple(a))
    reports = {task_key(*t): rep for t, rep in zip(tasks, outs)}
    curves = {"truth": truth_curves(config)} if config.experiment == "benchmark_d3" else {}
    return RunResult(config.to_dict(), reports, {"n_tasks": len(tasks)}, curves, list(config.seeds), wall_clock_seconds=time.perf_counter() - t0)


def run_experiment(config: ExperimentConfig, *, jobs: int = 1) -> RunResult:
    if config.experiment == "counterexample":
        return counterexample_result(config)
    if config.experiment == "appendix_b":
        return appendix_b_result(config)
    if config.experiment == "stationarity_suite":
        return stationarity_result(config)
    return run_benchmark(config, jobs=jobs)
