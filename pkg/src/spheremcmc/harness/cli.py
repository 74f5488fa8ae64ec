"""Command line entry point: ``spheremcmc <subcommand> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..chain import ChainAbortedError
from .config import ConfigError, config_from_dict, default_config, validate_config
from .experiments import run_experiment
from .io import emit_plot_data, externalise_traces, load_result, save_result

logger = logging.getLogger("spheremcmc")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

# subcommand -> (default experiment, experiments it accepts)
COMMANDS = {
    "counterexample": ("counterexample", {"counterexample"}),
    "appendix-b": ("appendix_b", {"appendix_b"}),
    "benchmark": ("benchmark_d3", {"benchmark_d3", "stationarity_suite"}),
    "sweep": ("dimension_sweep", {"dimension_sweep"}),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON experiment config")
    common.add_argument("--seed", type=int, action="append", help="RNG seed (repeatable); overrides the config")
    common.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    common.add_argument("--out", type=Path, help="output directory (default: config output_dir)")
    common.add_argument("--full-scale", action="store_true", help="use the full-size defaults (slow)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="spheremcmc", description="MCMC on the sphere by reprojection: experiments and reproductions.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("counterexample", "naive vs reprojected pCN step marginals"),
        ("appendix-b", "Markovianity counterexample probabilities"),
        ("benchmark", "level-set benchmark at d = 3 (or a stationarity_suite config)"),
        ("sweep", "dimension sweep of IACT and RMSJD"),
        ("validate", "check a config file and print it with defaults applied"),
    ):
        sub.add_parser(name, parents=[common], help=help_)
    ep = sub.add_parser("emit-plots", parents=[common], help="write CSV plot data from a result.json")
    ep.add_argument("result", type=Path)
    return p


def _load_config(args, command: str):
    default_exp, accepted = COMMANDS[command]
    if args.config is not None:
        raw = json.loads(args.config.read_text(encoding="utf-8")) if args.config.exists() else None
        if raw is None:
            raise ConfigError([f"config file not found: {args.config}"])
    else:
        raw = default_config(default_exp, full_scale=args.full_scale)
    if args.seed:
        raw = {**raw, "seeds": list(args.seed)}
    cfg = config_from_dict(raw)
    if cfg.experiment not in accepted:
        raise ConfigError([f"'{command}' cannot run experiment {cfg.experiment!r}"])
    return cfg


def _print_summary(result) -> None:
    for key in sorted(result.reports):
        rep = result.reports[key]
        shown = {k: (round(v, 5) if isinstance(v, float) else v) for k, v in rep.items() if not isinstance(v, list)}
        print(f"{key}: {json.dumps(shown, sort_keys=True)}")
    if result.summary:
        print(f"summary: {json.dumps(result.summary, sort_keys=True)}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")

    if args.command == "validate":
        if args.config is None:
            print("error: validate needs --config", file=sys.stderr)
            return EXIT_CONFIG
        try:
            cfg = validate_config(args.config)
        except ConfigError as exc:
            for e in exc.errors:
                print(f"config error: {e}", file=sys.stderr)
            return EXIT_CONFIG
        print(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
        return EXIT_OK

    if args.command == "emit-plots":
        try:
            result = load_result(args.result)
            out = args.out or args.result.parent
            for path in emit_plot_data(result, out):
                print(path)
        except (OSError, ValueError, KeyError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
        return EXIT_OK

    try:
        cfg = _load_config(args, args.command)
    except (ConfigError, json.JSONDecodeError) as exc:
        for e in getattr(exc, "errors", [str(exc)]):
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if args.jobs < 1:
        print("config error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    if args.full_scale:
        logger.warning("full-scale run requested; expect hours of runtime")

    out = args.out or Path(cfg.output_dir)
    try:
        result = run_experiment(cfg, jobs=args.jobs)
        externalise_traces(result, out)
        save_result(result, out)
        emit_plot_data(result, out)
    except ChainAbortedError as exc:
        out.mkdir(parents=True, exist_ok=True)
        dump = {"error": str(exc), "iteration": exc.iteration, "state": np.asarray(exc.state).tolist()}
        (out / "abort_state.json").write_text(json.dumps(dump, indent=1) + "\n")
        print(f"runtime error: {exc} (state written to {out / 'abort_state.json'})", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - any failure of the run maps to exit code 2
        logger.debug("run failed", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    _print_summary(result)
    print(f"wrote {out / 'result.json'}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
