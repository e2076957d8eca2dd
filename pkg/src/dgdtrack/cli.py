"""Command-line front-end.

Subcommands:
  run       execute a Monte-Carlo experiment, write results.csv + manifest.json
  bounds    print the theory constants and a tracking-error bound table
  validate  run the cross-module invariant suites, nonzero exit on violation
  sweep     run one experiment cell per value of a swept parameter

Configs are JSON with the ExperimentConfig field names; unknown keys are
rejected.  A manifest written by ``run`` is itself accepted as a config
(its ``config`` block is extracted), so outputs can be reproduced from the
manifest alone.  Exit codes: 0 ok, 1 runtime failure, 2 config problem,
3 theory degeneracy.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from ._backend import BACKEND
from .errors import ConfigError, DgdTrackError, ParameterError, TheoryDegeneracyError
from .experiment import (
    ExperimentConfig,
    build_topology,
    monte_carlo,
    write_manifest,
    write_results_csv,
    _atomic_file_write,
)
from .theory import (
    ate_discounted,
    ate_uniform,
    bound_discounted,
    bound_uniform,
    constants_from_problem,
    discounted_constants,
    uniform_constants,
)
from .validation import FAIL, SKIP, run_validation
from .weighting import WeightScheme

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2
EXIT_DEGENERACY = 3

_SWEEPABLE = ("E", "gamma", "eta", "scheme")


def _load_config_dict(path) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON (line {exc.lineno}): {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    if "config" in raw and isinstance(raw["config"], dict):
        # manifest round-trip: the resolved config block is the config
        return raw["config"]
    return raw


def _parse_override(text):
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, value = text.split("=", 1)
    try:
        parsed = json.loads(value)
    except json.JSONDecodeError:
        parsed = value  # bare strings, e.g. scheme.kind=uniform
    return key.strip(), parsed


def _apply_overrides(raw: dict, overrides) -> dict:
    out = dict(raw)
    for text in overrides or ():
        key, value = _parse_override(text)
        if "." in key:
            head, tail = key.split(".", 1)
            if "." in tail:
                raise ConfigError(f"override key {key!r} nests too deep")
            node = dict(out.get(head) or {})
            node[tail] = value
            out[head] = node
        else:
            out[key] = value
    return out


def _resolve_config(args) -> ExperimentConfig:
    raw = _load_config_dict(args.config) if args.config else {}
    raw = _apply_overrides(raw, getattr(args, "set", None))
    if getattr(args, "seed", None) is not None:
        raw["master_seed"] = args.seed
    try:
        return ExperimentConfig.from_dict(raw)
    except (ParameterError, TypeError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc


def cmd_run(args) -> int:
    cfg = _resolve_config(args)
    os.makedirs(args.out, exist_ok=True)
    dump_dir = args.out if cfg.dump_streams else None
    result = monte_carlo(cfg, threads=args.threads, stream_dump_dir=dump_dir)
    write_results_csv(result, os.path.join(args.out, "results.csv"))
    write_manifest(result, os.path.join(args.out, "manifest.json"))
    print(f"wrote {os.path.join(args.out, 'results.csv')} "
          f"({len(result.ts)} rows, {cfg.n_runs} runs, scheme={cfg.scheme.label()}, "
          f"E={cfg.E}, backend={BACKEND})")
    return EXIT_OK


def _bound_grid(t0, t_max, n_points=40):
    if t_max <= t0:
        return [t0]
    grid = np.unique(np.round(np.geomspace(t0, t_max, n_points)).astype(int))
    return [int(t) for t in grid]


def cmd_bounds(args) -> int:
    cfg = _resolve_config(args)
    if (args.lambda2 is None) != (args.lambdaN is None):
        raise ConfigError("--lambda2 and --lambdaN must be given together")
    if args.lambda2 is not None:
        lambda2, lambdaN = args.lambda2, args.lambdaN
    else:
        _, mix = build_topology(cfg)
        lambda2, lambdaN = mix.lambda2, mix.lambdaN

    tc = constants_from_problem(cfg.mu, cfg.L, cfg.eta, cfg.E, cfg.n_agents, cfg.dim,
                                cfg.C_max, lambda2).with_init_dist(args.init_dist)
    lines = [
        ("mu", tc.mu), ("L", tc.L), ("kappa", tc.kappa), ("eta", tc.eta),
        ("E", tc.E), ("alpha", tc.alpha), ("C", tc.C), ("G", tc.G),
        ("lambda2", lambda2), ("lambdaN", lambdaN), ("Lambda", tc.Lambda),
        ("init_dist", tc.init_dist),
    ]
    if cfg.scheme.kind == "uniform":
        t0, a_const = uniform_constants(tc.alpha)
        lines += [("t0", t0), ("A", a_const), ("asymptote", ate_uniform(tc))]

        def bound_at(t):
            return bound_uniform(tc, a_const, t0, t)

        asymptote = ate_uniform(tc)
    else:
        gamma = cfg.scheme.gamma
        t0, a_gamma, floor = discounted_constants(tc.alpha, gamma)
        lines += [("gamma", gamma), ("t0", t0), ("A_gamma", a_gamma),
                  ("fpte_floor", (2.0 * tc.G / tc.mu) * floor),
                  ("asymptote", ate_discounted(tc, gamma))]

        def bound_at(t):
            return bound_discounted(tc, a_gamma, t0, gamma, t)

        asymptote = ate_discounted(tc, gamma)

    constants_text = "\n".join(f"{name},{value:.12g}" if isinstance(value, float)
                               else f"{name},{value}" for name, value in lines)
    table_rows = ["t,bound"]
    for t in _bound_grid(t0, args.t_max):
        table_rows.append(f"{t},{bound_at(t):.17g}")
    table_rows.append(f"inf,{asymptote:.17g}")
    table_text = "\n".join(table_rows)

    print(constants_text)
    print()
    print(table_text)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _atomic_file_write(os.path.join(args.out, "constants.csv"),
                           lambda p: _write_text(p, constants_text + "\n"))
        _atomic_file_write(os.path.join(args.out, "bounds.csv"),
                           lambda p: _write_text(p, table_text + "\n"))
    return EXIT_OK


def _write_text(path, text):
    with open(path, "w") as fh:
        fh.write(text)


def cmd_validate(args) -> int:
    cfg = _resolve_config(args) if (args.config or args.set) else None
    results = run_validation(cfg)
    failed = [r for r in results if r.status == FAIL]
    for r in results:
        marker = {FAIL: "FAIL", SKIP: "SKIP"}.get(r.status, "PASS")
        print(f"[{marker}] {r.name}: {r.detail}")
    if failed:
        print(f"{len(failed)} of {len(results)} checks failed: "
              + ", ".join(r.name for r in failed))
        return EXIT_RUNTIME
    print(f"all {len(results)} checks passed")
    return EXIT_OK


def _sweep_cells(cfg: ExperimentConfig, param: str, values):
    cells = []
    for text in values:
        if param == "E":
            cells.append((f"E={int(text)}", replace(cfg, E=int(text))))
        elif param == "eta":
            cells.append((f"eta={float(text):g}", replace(cfg, eta=float(text))))
        elif param == "gamma":
            gamma = float(text)
            cells.append((f"gamma={gamma:g}",
                          replace(cfg, scheme=WeightScheme("discounted", gamma))))
        elif param == "scheme":
            if text == "uniform":
                cells.append(("scheme=uniform", replace(cfg, scheme=WeightScheme("uniform"))))
            elif text.startswith("discounted"):
                _, _, gamma_text = text.partition(":")
                if gamma_text:
                    gamma = float(gamma_text)
                elif cfg.scheme.gamma is not None:
                    gamma = cfg.scheme.gamma
                else:
                    raise ConfigError(
                        "sweeping scheme=discounted needs a gamma: use discounted:GAMMA "
                        "or configure a discounted base scheme")
                cells.append(("scheme=discounted",
                              replace(cfg, scheme=WeightScheme("discounted", gamma))))
            else:
                raise ConfigError(f"unknown scheme value {text!r}")
        else:
            raise ConfigError(f"sweep parameter must be one of {_SWEEPABLE}, got {param!r}")
    return cells


def cmd_sweep(args) -> int:
    cfg = _resolve_config(args)
    values = [v for v in (args.values or "").split(",") if v]
    if not values:
        raise ConfigError("sweep needs a nonempty --values list")
    cells = _sweep_cells(cfg, args.param, values)
    for label, cell_cfg in cells:
        cell_dir = os.path.join(args.out, label)
        os.makedirs(cell_dir, exist_ok=True)
        dump_dir = cell_dir if cell_cfg.dump_streams else None
        result = monte_carlo(cell_cfg, threads=args.threads, stream_dump_dir=dump_dir)
        write_results_csv(result, os.path.join(cell_dir, "results.csv"))
        write_manifest(result, os.path.join(cell_dir, "manifest.json"))
        print(f"wrote {os.path.join(cell_dir, 'results.csv')}")
    return EXIT_OK


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="dgdtrack",
        description="Decentralized gradient descent tracking simulator and bound verifier",
    )
    parser.add_argument("--version", action="version", version=f"dgdtrack {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out):
        p.add_argument("--config", help="JSON config file (a run manifest also works)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key after file parsing (repeatable); "
                            "nested keys use dots, e.g. scheme.gamma=0.7")
        p.add_argument("--seed", type=int, help="override master_seed")
        if needs_out:
            p.add_argument("--out", required=True, help="output directory")
            p.add_argument("--threads", type=int, default=1,
                           help="worker threads for Monte-Carlo runs (results are "
                                "identical for any value)")

    p_run = sub.add_parser("run", help="run one experiment cell")
    common(p_run, needs_out=True)
    p_run.set_defaults(func=cmd_run)

    p_bounds = sub.add_parser("bounds", help="print constants and a bound table")
    common(p_bounds, needs_out=False)
    p_bounds.add_argument("--lambda2", type=float, help="use an explicit lambda2 instead of a graph")
    p_bounds.add_argument("--lambdaN", type=float, help="use an explicit lambdaN instead of a graph")
    p_bounds.add_argument("--t-max", type=int, default=10_000, dest="t_max")
    p_bounds.add_argument("--init-dist", type=float, default=0.0, dest="init_dist",
                          help="initial distance ||w0 - fixed point|| for the geometric term "
                               "(per-run quantity; defaults to 0)")
    p_bounds.add_argument("--out", help="also write constants.csv and bounds.csv here")
    p_bounds.set_defaults(func=cmd_bounds)

    p_val = sub.add_parser("validate", help="run the invariant suites")
    common(p_val, needs_out=False)
    p_val.set_defaults(func=cmd_validate)

    p_sweep = sub.add_parser("sweep", help="run one cell per swept value")
    common(p_sweep, needs_out=True)
    p_sweep.add_argument("--param", required=True, choices=_SWEEPABLE)
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated values, e.g. 1,5,10 or uniform,discounted:0.7")
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TheoryDegeneracyError as exc:
        print(f"theory degeneracy: {exc}", file=sys.stderr)
        return EXIT_DEGENERACY
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DgdTrackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
