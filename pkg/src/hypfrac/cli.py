"""Command-line front end: configuration, experiment orchestration, and
deterministic result emission.

Commands
--------
transform    round-trip and Plancherel reports for a named test function
kernels      kernel profiles and estimate-validation reports (CSV)
fujita       single evolution run (JSON-lines trace) or a (beta, gamma)
             verdict scan (CSV frontier)
groundstate  solves, verifies structure, persists the state as JSON
poincare     quotient sweeps and shift-order comparisons (CSV)

Configuration is a line-oriented ``key = value`` file with ``[section]``
headers (sections: model, grids, experiment, output); flags: --config,
--out, --threads, --seed, --cache.  Numeric model fields are validated
before any computation.

Exit codes
----------
0  success
2  usage error (unknown flag; argparse default)
3  configuration error (missing file/section/key, unparsable value)
4  domain error (parameter outside its validated range)
5  consistency failure (cross-route checks beyond tolerance)
6  missing cache (``--cache required`` semantics via experiment config)

Determinism: all floats are emitted with 17 significant digits, every
output file carries the config hash, seed, and tool version in '#'
header lines, and identical configs with identical seeds produce
byte-identical files.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .spectral import (
    ModelParams,
    RadialFn,
    SphericalTransform,
    radial_grid,
    spectral_grid,
)

EXIT_OK = 0
EXIT_CONFIG = 3
EXIT_RANGE = 4
EXIT_CONSISTENCY = 5
EXIT_CACHE = 6


def _config_hash(cfg: configparser.ConfigParser) -> str:
    canon = []
    for section in sorted(cfg.sections()):
        for key in sorted(cfg[section]):
            canon.append(f"{section}.{key}={cfg[section][key]}")
    return hashlib.sha256("\n".join(canon).encode()).hexdigest()[:16]


def _headers(cfg, seed, command):
    return (
        f"hypfrac v{__version__}",
        f"command: {command}",
        f"config-sha256: {_config_hash(cfg)}",
        f"seed: {seed}",
    )


def _load_config(path) -> configparser.ConfigParser:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    cfg = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cfg.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    return cfg


class ConfigError(RuntimeError):
    pass


def _get(cfg, section, key, cast, default=None):
    try:
        raw = cfg[section][key]
    except KeyError:
        if default is not None:
            return default
        raise ConfigError(f"missing config entry [{section}] {key}")
    try:
        return cast(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for [{section}] {key}: {raw}") from exc


def _model_params(cfg) -> ModelParams:
    return ModelParams(
        n=_get(cfg, "model", "n", int, 3),
        sigma=_get(cfg, "model", "sigma", float, 0.5),
        lam=_get(cfg, "model", "lambda", float, 0.0),
        beta=_get(cfg, "model", "beta", float, 1.0),
        gamma=_get(cfg, "model", "gamma", float, 2.0),
    )


def _grids(cfg, n, cache_dir=None):
    r_max = _get(cfg, "grids", "r_max", float, 40.0)
    xi_max = _get(cfg, "grids", "xi_max", float, 60.0)
    order = _get(cfg, "grids", "order", int, 16)
    rg = radial_grid(n, r_max, order=order)
    sg = spectral_grid(n, xi_max, order=order)
    return SphericalTransform(n, rg, sg, cache_dir=cache_dir)


def _named_test_fn(name, grid):
    nodes = grid.nodes
    if name == "gaussian":
        return RadialFn(grid, np.exp(-(nodes ** 2)), 1.0)
    if name == "wide":
        return RadialFn(grid, np.exp(-((nodes / 3.0) ** 2)), 1.0)
    if name == "zero":
        return RadialFn(grid, np.zeros_like(nodes), 0.0)
    if name == "oscillatory":
        return RadialFn(grid, np.exp(-(nodes ** 2)) * np.cos(2 * nodes), 1.0)
    raise ConfigError(f"unknown test function {name!r}")


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _write_csv(path, header_lines, cols, rows):
    with open(path, "w") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write(",".join(cols) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_transform(cfg, out_dir, seed, cache_dir):
    params = _model_params(cfg)
    tr = _grids(cfg, params.n, cache_dir)
    names = _get(cfg, "experiment", "functions", str,
                 "gaussian,wide,oscillatory,zero").split(",")
    rows = []
    for name in [s.strip() for s in names if s.strip()]:
        f = _named_test_fn(name, tr.rgrid)
        rep = tr.plancherel_check(f)
        back = tr.inverse(tr.forward(f))
        l2 = f.l2_norm()
        if l2 > 0:
            diff = math.sqrt(float(tr.rgrid.weights
                                   @ (back.values - f.values) ** 2)) / l2
        else:
            diff = 0.0
        rows.append([name, _fmt(rep.real_l2), _fmt(rep.spectral_l2),
                     _fmt(rep.rel_error), _fmt(diff)])
    _write_csv(os.path.join(out_dir, "transform.csv"),
               _headers(cfg, seed, "transform"),
               ("fn", "realL2", "spectralL2", "relError", "roundTrip"), rows)
    return EXIT_OK


def cmd_kernels(cfg, out_dir, seed, cache_dir):
    from . import kernels as K
    params = _model_params(cfg)
    t_list = [float(s) for s in
              _get(cfg, "experiment", "t_list", str, "0.5,1.0").split(",")]
    reports = K.validate_frac_heat_estimates(params)
    K.write_estimate_csv(reports, os.path.join(out_dir, "estimates.csv"),
                         _headers(cfg, seed, "kernels"))
    rows = []
    for t in t_list:
        prof = K.frac_heat_kernel(params, t)
        rows.append([_fmt(t), _fmt(prof.mass), _fmt(prof.meta["mass_in_grid"]),
                     _fmt(prof.profile.value_at_origin)])
    _write_csv(os.path.join(out_dir, "kernel_masses.csv"),
               _headers(cfg, seed, "kernels"),
               ("t", "mass", "massInGrid", "valueAtOrigin"), rows)
    return EXIT_OK


def cmd_fujita(cfg, out_dir, seed, cache_dir, threads=1):
    from . import fujita as FJ
    params = _model_params(cfg)
    kind = _get(cfg, "experiment", "kind", str, "single")
    horizon = _get(cfg, "experiment", "horizon", float, 20.0)
    dt0 = _get(cfg, "experiment", "dt0", float, 0.02)
    amplitude = _get(cfg, "experiment", "amplitude", float, 0.02)
    if kind == "single":
        config = FJ.FujitaConfig(
            params=params,
            initial=lambda r: amplitude * np.exp(-np.asarray(r) ** 2),
            horizon=horizon, dt0=dt0)
        trace = FJ.run(config)
        FJ.write_trace_jsonl(trace, os.path.join(out_dir, "trace.jsonl"),
                             header={"config": _config_hash(cfg),
                                     "seed": seed,
                                     "version": __version__})
        return EXIT_OK
    if kind == "scan":
        betas = np.linspace(_get(cfg, "experiment", "beta_min", float, 0.5),
                            _get(cfg, "experiment", "beta_max", float, 2.0),
                            _get(cfg, "experiment", "beta_count", int, 6))
        gammas = np.linspace(_get(cfg, "experiment", "gamma_min", float, 1.3),
                             _get(cfg, "experiment", "gamma_max", float, 3.3),
                             _get(cfg, "experiment", "gamma_count", int, 6))
        executor = ThreadPoolExecutor(threads) if threads > 1 else None
        rows = FJ.dichotomy_scan(params.n, params.sigma, betas, gammas,
                                 amplitude=amplitude, horizon=horizon,
                                 dt0=dt0, executor=executor)
        if executor is not None:
            executor.shutdown()
        FJ.write_scan_csv(rows, os.path.join(out_dir, "frontier.csv"),
                          _headers(cfg, seed, "fujita"))
        return EXIT_OK
    raise ConfigError(f"unknown fujita experiment kind {kind!r}")


def cmd_groundstate(cfg, out_dir, seed, cache_dir):
    from . import elliptic as EL
    params = _model_params(cfg)
    crit = params.sobolev_critical - 1.0
    if params.gamma >= crit:
        raise RangeError(
            f"nonlinearity exponent {params.gamma} is at or above the "
            f"critical endpoint {crit}; the solver refuses it")
    method = _get(cfg, "experiment", "method", str, "projected_gradient")
    tr = EL.solver_transform(params.n)
    gs = EL.solve_ground_state(params, method, tr)
    report = EL.verify_structure(gs, params, tr)
    EL.save_ground_state(gs, params, os.path.join(out_dir, "ground_state.json"))
    rows = [[method, _fmt(gs.energy), _fmt(gs.residual_l2), _fmt(gs.quotient),
             _fmt(report["fixed_point_defect"]), _fmt(report["nehari_defect"]),
             str(report["all_pass"]).lower()]]
    _write_csv(os.path.join(out_dir, "ground_state.csv"),
               _headers(cfg, seed, "groundstate"),
               ("method", "J", "residual", "quotient", "fixedPointDefect",
                "nehariDefect", "structurePass"), rows)
    return EXIT_OK


def cmd_poincare(cfg, out_dir, seed, cache_dir):
    from . import inequalities as IQ
    params = _model_params(cfg)
    tr = _grids(cfg, params.n, cache_dir)
    q_list = [float(s) for s in
              _get(cfg, "experiment", "q_list", str, "2.2,2.6,3.0").split(",")]
    fns = IQ.test_family(tr, seed=seed)
    all_samples = []
    rows = []
    for q in q_list:
        best, samples = IQ.estimate_best_constant(fns, q, params.sigma,
                                                  params.lam, tr)
        all_samples.extend(samples)
        rows.append([_fmt(q), _fmt(best)])
    IQ.write_quotient_csv(all_samples, os.path.join(out_dir, "quotients.csv"),
                          _headers(cfg, seed, "poincare"))
    _write_csv(os.path.join(out_dir, "quotient_minima.csv"),
               _headers(cfg, seed, "poincare"), ("q", "minQuotient"), rows)
    return EXIT_OK


class RangeError(RuntimeError):
    pass


# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(
        prog="hypfrac",
        description="Radial fractional heat flow and ground states on "
                    "hyperbolic space: transforms, kernels, evolution, "
                    "variational solves, inequality sweeps.")
    p.add_argument("command",
                   choices=("transform", "kernels", "fujita", "groundstate",
                            "poincare"))
    p.add_argument("--config", required=True, help="path to the config file")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cache", default=None,
                   help="directory for eigenfunction-table caches")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    os.makedirs(args.out, exist_ok=True)
    if args.cache is not None and _get(cfg, "experiment", "require_cache",
                                       str, "no") == "yes":
        if not os.path.isdir(args.cache) or not os.listdir(args.cache):
            print("error: cache directory required but empty", file=sys.stderr)
            return EXIT_CACHE
    try:
        if args.command == "transform":
            return cmd_transform(cfg, args.out, args.seed, args.cache)
        if args.command == "kernels":
            return cmd_kernels(cfg, args.out, args.seed, args.cache)
        if args.command == "fujita":
            return cmd_fujita(cfg, args.out, args.seed, args.cache,
                              args.threads)
        if args.command == "groundstate":
            return cmd_groundstate(cfg, args.out, args.seed, args.cache)
        if args.command == "poincare":
            return cmd_poincare(cfg, args.out, args.seed, args.cache)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RangeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RANGE
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONSISTENCY
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
