"""Result persistence: JSON reports, tidy CSV plot data, raw trace arrays."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .experiments import RunResult

METRIC_COLUMNS = ("experiment", "kernel", "dimension", "seed", "metric", "value")
# metrics exported per benchmark task, in this order
TASK_METRICS = ("iact", "rmsjd", "mean_q", "half_ci_q", "acceptance_rate", "mean_shrink_tries", "param", "tuning_rate")


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def result_json(result: RunResult, *, include_wall_clock: bool = True) -> str:
    return json.dumps(result.to_dict(include_wall_clock=include_wall_clock), sort_keys=True, indent=1, default=_jsonable) + "\n"


def save_result(result: RunResult, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "result.json"
    path.write_text(result_json(result), encoding="utf-8")
    return path


def load_result(path) -> RunResult:
    return RunResult.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path: Path, header, rows) -> Path:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def _metric_rows(result: RunResult):
    exp = result.experiment
    rows = []
    for key in sorted(result.reports):
        rep = result.reports[key]
        kernel = rep.get("kernel", rep.get("chain", ""))
        dim = rep.get("dimension", "")
        seed = rep.get("seed", "")
        if exp in ("benchmark_d3", "dimension_sweep"):
            names = [m for m in TASK_METRICS if m in rep]
        else:
            names = sorted(k for k, v in rep.items() if isinstance(v, (int, float)) and k not in ("dimension", "seed"))
        rows.extend((exp, kernel, dim, seed, m, rep[m]) for m in names)
    rows.sort(key=lambda r: (str(r[1]), r[2] if r[2] != "" else -1, r[3] if r[3] != "" else -1, r[4]))
    return rows


def emit_plot_data(result: RunResult, out_dir) -> list[Path]:
    """Write tidy CSVs for the result; re-emission is byte-identical."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [_write_csv(out / "metrics.csv", METRIC_COLUMNS, _metric_rows(result))]
    if result.experiment == "counterexample" and result.curves.get("kde"):
        grid = result.curves["kde_grid"]
        rows = []
        for law in ("target", "naive", "repro"):
            dens = result.curves["kde"][law]
            for coord in range(3):
                rows.extend((law, coord, x, f) for x, f in zip(grid, dens[coord]))
        paths.append(_write_csv(out / "kde.csv", ("law", "coordinate", "x", "density"), rows))
    truth = result.curves.get("truth")
    if truth:
        rows = zip(truth["t"], truth["g_true"], truth["u_true"], truth["p_true"])
        paths.append(_write_csv(out / "truth.csv", ("t", "g_true", "u_true", "p_true"), rows))
        rows = zip(truth["obs_points"], truth["y"], truth["noise_var"])
        paths.append(_write_csv(out / "observations.csv", ("t", "y", "noise_var"), rows))
    return paths


def save_trace(states, path) -> Path:
    """Raw array as little-endian float64 plus a JSON sidecar with shape and checksum."""
    arr = np.ascontiguousarray(states, dtype="<f8")
    raw = arr.tobytes()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.with_suffix(".f64").write_bytes(raw)
    meta = {"shape": list(arr.shape), "dtype": "<f8", "sha256": hashlib.sha256(raw).hexdigest()}
    side = path.with_suffix(".json")
    side.write_text(json.dumps(meta, sort_keys=True) + "\n")
    return side


def load_trace(path) -> np.ndarray:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    raw = path.with_suffix(".f64").read_bytes()
    if hashlib.sha256(raw).hexdigest() != meta["sha256"]:
        raise ValueError(f"checksum mismatch for {path}")
    return np.frombuffer(raw, dtype="<f8").reshape(meta["shape"]).astype(float)


def externalise_traces(result: RunResult, out_dir) -> None:
    """Move in-memory thinned states into ``traces/`` binary files, leaving the file name."""
    for key, rep in result.reports.items():
        states = rep.pop("thinned_states", None)
        if states is None:
            continue
        name = key.replace("|", "_").replace("=", "")
        save_trace(np.asarray(states), Path(out_dir) / "traces" / name)
        rep["trace_file"] = f"traces/{name}.f64"
