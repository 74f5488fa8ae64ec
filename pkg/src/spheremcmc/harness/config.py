"""JSON experiment configuration: parsing, defaults and validation."""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..kernels import KERNEL_IDS

EXPERIMENTS = ("counterexample", "appendix_b", "benchmark_d3", "dimension_sweep", "stationarity_suite")
SPHERE_SAMPLERS = ("repro_pcn", "repro_ess", "geodesic_mh", "tangent_mh")
TUNABLE = ("repro_pcn", "geodesic_mh", "tangent_mh")

DEFAULT_BURN_IN = 50_000
DEFAULT_THINNING = 100
AUTO_RE = re.compile(r"^auto-(\d+(?:\.\d+)?)%$")

MIN_SAMPLES = {"counterexample": 10**5, "appendix_b": 10**6}
DEFAULT_SAMPLES = {"counterexample": 10**6, "appendix_b": 10**7}

# kernels each experiment may ask for
ALLOWED_KERNELS = {
    "counterexample": ("repro_pcn", "naive_repro"),
    "appendix_b": (),
    "benchmark_d3": SPHERE_SAMPLERS,
    "dimension_sweep": SPHERE_SAMPLERS,
    "stationarity_suite": ("repro_pcn", "repro_ess"),
}


class ConfigError(ValueError):
    """Carries every violation found, not just the first."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class ExperimentConfig:
    experiment: str
    dimensions: list[int] = field(default_factory=list)
    kernels: list[str] = field(default_factory=list)
    iterations: int = 0
    burn_in: int = DEFAULT_BURN_IN
    thinning: int = DEFAULT_THINNING
    seeds: list[int] = field(default_factory=lambda: [0])
    tuning: dict = field(default_factory=dict)
    output_dir: str = "results"
    n_samples: int | None = None
    data_seed: int = 0
    pilot_steps: int = 5000
    save_traces: bool = False
    cache_dir: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def target_rate(self, kernel: str) -> float | None:
        """Acceptance target for an auto-tuned kernel, None for a fixed parameter."""
        spec = self.tuning.get(kernel, "auto-23%")
        if isinstance(spec, str):
            return float(AUTO_RE.match(spec).group(1)) / 100.0
        return None

    def fixed_param(self, kernel: str) -> float | None:
        spec = self.tuning.get(kernel)
        return float(spec) if isinstance(spec, (int, float)) and not isinstance(spec, bool) else None


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Apply defaults and validate; raises :class:`ConfigError` listing all problems."""
    errors: list[str] = []
    if not isinstance(raw, dict):
        raise ConfigError(["config must be a JSON object"])
    known = set(ExperimentConfig.__dataclass_fields__)
    for key in sorted(set(raw) - known):
        errors.append(f"unknown field {key!r}")

    exp = raw.get("experiment")
    if exp not in EXPERIMENTS:
        errors.append(f"experiment must be one of {', '.join(EXPERIMENTS)}; got {exp!r}")

    def ints(name, default, minimum):
        v = raw.get(name, default)
        if not _is_int(v):
            errors.append(f"{name} must be an integer")
            return default
        if v < minimum:
            errors.append(f"{name} must be >= {minimum}")
        return v

    iterations = ints("iterations", 0, 0)
    burn_in = ints("burn_in", DEFAULT_BURN_IN, 0)
    thinning = ints("thinning", DEFAULT_THINNING, 1)
    data_seed = ints("data_seed", 0, 0)
    pilot_steps = ints("pilot_steps", 5000, 100)

    seeds = raw.get("seeds", [0])
    if not isinstance(seeds, list) or not all(_is_int(s) and s >= 0 for s in seeds):
        errors.append("seeds must be a list of non-negative integers")
        seeds = []
    elif not seeds:
        errors.append("at least one seed is required")

    dims = raw.get("dimensions", [])
    if not isinstance(dims, list) or not all(_is_int(d) and d >= 2 for d in dims):
        errors.append("dimensions must be a list of integers >= 2")
        dims = []

    kernels = raw.get("kernels", [])
    if not isinstance(kernels, list) or not all(isinstance(k, str) for k in kernels):
        errors.append("kernels must be a list of kernel ids")
        kernels = []
    for k in kernels:
        if k not in KERNEL_IDS:
            errors.append(f"unknown kernel {k!r}; valid ids: {', '.join(KERNEL_IDS)}")
        elif exp in ALLOWED_KERNELS and k not in ALLOWED_KERNELS[exp]:
            errors.append(f"kernel {k!r} is not used by experiment {exp!r}")

    tuning = raw.get("tuning", {})
    if isinstance(tuning, str):
        tuning = {k: tuning for k in kernels if k in TUNABLE}
    if not isinstance(tuning, dict):
        errors.append("tuning must be 'auto-NN%' or an object of per-kernel overrides")
        tuning = {}
    for k, v in tuning.items():
        if k not in TUNABLE:
            errors.append(f"kernel {k!r} has no tunable parameter")
        elif isinstance(v, str):
            m = AUTO_RE.match(v)
            if not m or not 0 < float(m.group(1)) < 100:
                errors.append(f"tuning for {k!r} must look like 'auto-23%' or be a number")
        elif not isinstance(v, (int, float)) or isinstance(v, bool) or v <= 0:
            errors.append(f"tuning for {k!r} must be positive")

    n_samples = raw.get("n_samples")
    if exp in MIN_SAMPLES:
        if n_samples is None:
            n_samples = DEFAULT_SAMPLES[exp]
        if not _is_int(n_samples) or n_samples < MIN_SAMPLES[exp]:
            errors.append(f"n_samples must be an integer >= {MIN_SAMPLES[exp]} for {exp}")
    elif n_samples is not None:
        errors.append(f"n_samples is not used by {exp!r}")

    if exp in ("benchmark_d3", "dimension_sweep", "stationarity_suite"):
        if _is_int(iterations) and _is_int(burn_in) and iterations <= burn_in:
            errors.append("iterations must exceed burn_in")
        if not kernels:
            errors.append(f"{exp} needs at least one kernel")
    if exp in ("benchmark_d3", "dimension_sweep") and not dims:
        errors.append(f"{exp} needs at least one dimension")
    if exp == "benchmark_d3" and dims and dims != [3]:
        errors.append("benchmark_d3 runs at dimension 3 only")

    output_dir = raw.get("output_dir", "results")
    if not isinstance(output_dir, str) or not output_dir:
        errors.append("output_dir must be a non-empty string")
    cache_dir = raw.get("cache_dir")
    if cache_dir is not None and not isinstance(cache_dir, str):
        errors.append("cache_dir must be a string")
    save_traces = raw.get("save_traces", False)
    if not isinstance(save_traces, bool):
        errors.append("save_traces must be true or false")

    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(
        experiment=exp,
        dimensions=list(dims),
        kernels=list(kernels),
        iterations=iterations,
        burn_in=burn_in,
        thinning=thinning,
        seeds=list(seeds),
        tuning=dict(tuning),
        output_dir=output_dir,
        n_samples=n_samples,
        data_seed=data_seed,
        pilot_steps=pilot_steps,
        save_traces=save_traces,
        cache_dir=cache_dir,
    )


def validate_config(path) -> ExperimentConfig:
    """Read a JSON config file; see :func:`config_from_dict`."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError([f"config file not found: {path}"]) from None
    except json.JSONDecodeError as exc:
        raise ConfigError([f"invalid JSON in {path}: {exc}"]) from None
    return config_from_dict(raw)


def default_config(experiment: str, *, full_scale: bool = False) -> dict:
    """Desk-scale defaults for each experiment (raw form, before validation)."""
    if experiment == "counterexample":
        return {"experiment": experiment, "kernels": ["repro_pcn", "naive_repro"], "n_samples": DEFAULT_SAMPLES[experiment]}
    if experiment == "appendix_b":
        return {"experiment": experiment, "n_samples": 10**8 if full_scale else DEFAULT_SAMPLES[experiment]}
    if experiment == "benchmark_d3":
        return {
            "experiment": experiment,
            "dimensions": [3],
            "kernels": list(SPHERE_SAMPLERS),
            "iterations": 1_050_000 if full_scale else 250_000,
            "tuning": "auto-23%",
        }
    if experiment == "dimension_sweep":
        return {
            "experiment": experiment,
            "dimensions": [10, 40, 160, 640] if full_scale else [10, 40, 160],
            "kernels": list(SPHERE_SAMPLERS),
            "iterations": 1_050_000 if full_scale else 250_000,
            "seeds": [0, 1, 2],
            "tuning": "auto-23%",
        }
    if experiment == "stationarity_suite":
        return {"experiment": experiment, "kernels": ["repro_pcn", "repro_ess"], "iterations": 100_000, "burn_in": 0}
    raise ValueError(f"unknown experiment {experiment!r}")
