"""Config-driven command line front end.

Every subcommand reads a JSON config, validates it before any computation,
writes CSV/JSON artifacts plus a run manifest into the output directory,
and maps failures to stable exit codes:

    0   success
    2   iteration did not converge
    3   infeasible weight (no positive part)
    4   invalid gauge or domain labelling
    5   solver or oracle failure
    64  usage or configuration error

Setting the environment variable ANISOKPP_DETERMINISTIC=1 forces strictly
sequential reductions (the default execution is already sequential) and
omits wall-clock fields from the manifest, so identical config + seed
reproduce every artifact bitwise.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import List, Optional

import numpy as np

from . import __version__
from .anisotropy import asym1d, certify, ellipse, euclidean
from .eigen import (EigenOptions, minimize_lambda, minimize_mu,
                    survival_threshold, with_warm_start)
from .errors import (AnisoKppError, ConfigError, InfeasibleWeightError,
                     InvalidDomainError, InvalidNormError, OracleFailureError,
                     SolverError)
from .grid import GridFunction, build_grid, distance_to_dirichlet
from .pde import PdeOptions, logistic_reaction, parabolic_solve, sweep_diffusion
from .rearrange import hardy_littlewood_check, polya_check, verify_1d_theorem
from .serialize import (RunManifest, config_hash, deterministic_mode,
                        read_grid_function_csv, utc_now, write_csv,
                        write_grid_function_csv, write_json, write_manifest)
from .weight_opt import OptimizeOptions, WeightClass, optimize_weight

EXIT_OK = 0
EXIT_NONCONVERGED = 2
EXIT_INFEASIBLE = 3
EXIT_INVALID = 4
EXIT_SOLVER = 5
EXIT_USAGE = 64


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _get(cfg: dict, path: str, expected=None, default=..., required=False):
    node = cfg
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            if required:
                raise ConfigError(f"{path}: missing required field")
            return None if default is ... else default
        node = node[part]
    if expected is not None and not isinstance(node, expected):
        names = getattr(expected, "__name__", str(expected))
        raise ConfigError(f"{path}: expected {names}, got {type(node).__name__}")
    return node


def _build_norm(cfg: dict, dim: int):
    spec = _get(cfg, "norm", dict, default={"kind": "euclidean"})
    kind = str(spec.get("kind", "euclidean")).lower()
    if kind == "euclidean":
        return euclidean(dim)
    if kind == "asym1d":
        if dim != 1:
            raise ConfigError("norm.kind: asym1d requires a 1-D grid")
        try:
            return asym1d(float(spec["a"]), float(spec["b"]))
        except KeyError as exc:
            raise ConfigError(f"norm.{exc.args[0]}: missing for asym1d") from None
        except ValueError as exc:
            raise ConfigError(f"norm: {exc}") from None
    if kind == "ellipse":
        matrix = spec.get("matrix")
        if matrix is None:
            raise ConfigError("norm.matrix: missing for ellipse")
        try:
            nrm = ellipse(matrix)
        except ValueError as exc:
            raise ConfigError(f"norm.matrix: {exc}") from None
        if nrm.dim != dim:
            raise ConfigError(
                f"norm.matrix: dimension {nrm.dim} does not match grid dim {dim}")
        return nrm
    raise ConfigError(f"norm.kind: unknown kind {kind!r} "
                      "(custom gauges are library-only)")


def _build_grid(cfg: dict):
    spec = _get(cfg, "grid", dict, required=True)
    dim = _get(spec, "dim", int, default=1)
    cells = spec.get("cells")
    if cells is None:
        raise ConfigError("grid.cells: missing required field")
    labels = _get(spec, "labels", dict, required=True)
    extent = spec.get("extent")
    try:
        return build_grid(dim, cells, labels, extent)
    except (ValueError, InvalidDomainError) as exc:
        raise ConfigError(f"grid: {exc}") from None


def _build_weight(cfg: dict, grid) -> GridFunction:
    spec = _get(cfg, "weight", dict, required=True)
    kind = str(spec.get("kind", "")).lower()
    if kind == "constant":
        return GridFunction.full(grid, float(_req(spec, "value", "weight.value")))
    if kind == "bangbang":
        beta = float(_req(spec, "beta", "weight.beta"))
        if grid.dim == 1:
            lo, hi = [float(v) for v in _req(spec, "interval", "weight.interval")]
            inside = (grid.coords >= lo - 1e-12) & (grid.coords <= hi + 1e-12)
        else:
            box = _req(spec, "box", "weight.box")
            (x0, x1), (y0, y1) = [(float(a), float(b)) for a, b in box]
            inside = ((grid.coords[:, 0] >= x0 - 1e-12)
                      & (grid.coords[:, 0] <= x1 + 1e-12)
                      & (grid.coords[:, 1] >= y0 - 1e-12)
                      & (grid.coords[:, 1] <= y1 + 1e-12))
        return GridFunction(grid, np.where(inside, 1.0, -beta))
    if kind == "csv":
        path = _req(spec, "path", "weight.path")
        try:
            return read_grid_function_csv(path, grid)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"weight.path: {exc}") from None
    if kind == "class":
        raise ConfigError(
            "weight.kind: 'class' only parametrizes the optimize command; "
            "other commands need a concrete weight")
    raise ConfigError(f"weight.kind: unknown kind {kind!r}")


def _req(spec: dict, key: str, label: str):
    if key not in spec:
        raise ConfigError(f"{label}: missing required field")
    return spec[key]


def _eigen_options(cfg: dict, seed: int) -> EigenOptions:
    spec = _get(cfg, "eigen", dict, default={})
    return EigenOptions(
        tol=float(spec.get("tol", 1e-8)),
        max_iter=int(spec.get("max_iter", 20000)),
        init=str(spec.get("init", "distance")),
        seed=seed,
    )


def _pde_options(cfg: dict, section: str, seed: int) -> PdeOptions:
    spec = _get(cfg, section, dict, default={})
    opts = PdeOptions(eigen=_eigen_options(cfg, seed))
    for name in ("tol", "dt", "steady_tol", "zero_tol", "inner_tol",
                 "horizon_survival", "horizon_extinction"):
        if name in spec:
            setattr(opts, name, float(spec[name]))
    for name in ("trace_every", "max_picard", "max_halvings"):
        if name in spec:
            setattr(opts, name, int(spec[name]))
    if "run_parabolic" in spec:
        opts.run_parabolic = bool(spec["run_parabolic"])
    if "start" in spec:
        opts.start = str(spec["start"])
    return opts


class _Run:
    """Bookkeeping for one command invocation: output dir, artifacts,
    manifest."""

    def __init__(self, command: str, cfg: dict, outdir: str, seed: int):
        self.command = command
        self.outdir = outdir
        self.artifacts: List[str] = []
        os.makedirs(outdir, exist_ok=True)
        self.manifest = RunManifest(
            command=command, config_sha256=config_hash(cfg), seed=seed,
            version=__version__, deterministic=deterministic_mode(),
            started_at=utc_now())

    def path(self, name: str) -> str:
        self.artifacts.append(name)
        return os.path.join(self.outdir, name)

    def finish(self) -> None:
        self.manifest.finished_at = utc_now()
        self.manifest.artifacts = self.artifacts
        write_manifest(self.outdir, self.manifest)


def _eigen_summary(res) -> dict:
    return {"value": res.value, "residual": res.residual,
            "iterations": res.iterations, "converged": res.converged}


def cmd_eigen(cfg: dict, outdir: str, seed: int) -> int:
    grid = _build_grid(cfg)
    norm = _build_norm(cfg, grid.dim)
    m = _build_weight(cfg, grid)
    spec = _get(cfg, "eigen", dict, default={})
    problem = str(spec.get("problem", "lambda")).lower()
    opts = _eigen_options(cfg, seed)
    run = _Run("eigen", cfg, outdir, seed)
    if problem == "lambda":
        res = minimize_lambda(norm, m, grid, opts)
    elif problem == "mu":
        d = float(spec.get("d", 1.0))
        res = minimize_mu(norm, d, m, grid, opts)
    else:
        raise ConfigError(f"eigen.problem: expected 'lambda' or 'mu', got {problem!r}")
    write_json(run.path("eigen.json"), {"problem": problem, **_eigen_summary(res)})
    write_grid_function_csv(run.path("eigenfunction.csv"), res.eigenfunction)
    run.finish()
    return EXIT_OK if res.converged else EXIT_NONCONVERGED


def cmd_threshold(cfg: dict, outdir: str, seed: int) -> int:
    grid = _build_grid(cfg)
    norm = _build_norm(cfg, grid.dim)
    m = _build_weight(cfg, grid)
    opts = _eigen_options(cfg, seed)
    run = _Run("threshold", cfg, outdir, seed)
    lam_res = minimize_lambda(norm, m, grid, opts)
    d_star = 1.0 / lam_res.value
    warm = with_warm_start(opts, lam_res.eigenfunction.values)
    mus = {}
    for name, d in (("mu_at_half_d_star", 0.5 * d_star),
                    ("mu_at_d_star", d_star),
                    ("mu_at_twice_d_star", 2.0 * d_star)):
        res = minimize_mu(norm, d, m, grid, warm)
        warm = with_warm_start(opts, res.eigenfunction.values)
        mus[name] = res.value
    write_json(run.path("threshold.json"), {
        "lambda": lam_res.value, "d_star": d_star, **mus,
        "eigen": _eigen_summary(lam_res)})
    write_grid_function_csv(run.path("eigenfunction.csv"), lam_res.eigenfunction)
    run.finish()
    return EXIT_OK if lam_res.converged else EXIT_NONCONVERGED


def cmd_optimize(cfg: dict, outdir: str, seed: int) -> int:
    grid = _build_grid(cfg)
    norm = _build_norm(cfg, grid.dim)
    wspec = _get(cfg, "weight", dict, required=True)
    if str(wspec.get("kind", "")).lower() != "class":
        raise ConfigError("weight.kind: optimize needs kind 'class' with beta, m0")
    try:
        wc = WeightClass(beta=float(_req(wspec, "beta", "weight.beta")),
                         m0=float(_req(wspec, "m0", "weight.m0")),
                         domain_measure=grid.measure)
    except ValueError as exc:
        raise ConfigError(f"weight: {exc}") from None
    ospec = _get(cfg, "optimize", dict, default={})
    opts = OptimizeOptions(
        max_outer=int(ospec.get("max_outer", 100)),
        n_starts=int(ospec.get("n_starts", 1)),
        initial=str(ospec.get("initial", "default")),
        seed=seed,
        eigen=_eigen_options(cfg, seed))
    run = _Run("optimize", cfg, outdir, seed)
    result = optimize_weight(norm, grid, wc, opts)
    indicator = result.weight.omega_indicator
    if grid.dim == 1:
        rows = ((i, float(grid.coords[i]), int(indicator[i]))
                for i in range(grid.node_count))
        header = ["node", "x", "indicator"]
    else:
        rows = ((i, float(grid.coords[i, 0]), float(grid.coords[i, 1]),
                 int(indicator[i])) for i in range(grid.node_count))
        header = ["node", "x", "y", "indicator"]
    write_csv(run.path("omega.csv"), header, rows)
    write_csv(run.path("lambda_trace.csv"),
              ["iteration", "lambda", "set_change_count"],
              ((t["iteration"], t["lambda"], t["set_change_count"])
               for t in result.trace))
    write_json(run.path("summary.json"), {
        "Lambda": result.eigen.value,
        "d_star": 1.0 / result.eigen.value,
        "omega_measure": result.weight.measure,
        "threshold": result.weight.threshold,
        "iterations": result.iterations,
        "converged": result.converged,
        "eigen": _eigen_summary(result.eigen)})
    run.finish()
    return EXIT_OK if result.converged else EXIT_NONCONVERGED


def _initial_field(cfg: dict, grid) -> GridFunction:
    spec = _get(cfg, "evolve.initial", dict, default={"kind": "distance",
                                                      "scale": 0.5})
    kind = str(spec.get("kind", "distance")).lower()
    scale = float(spec.get("scale", 1.0))
    if kind == "distance":
        base = distance_to_dirichlet(grid)
        top = base.values.max()
        return GridFunction(grid, scale * base.values / (top if top > 0 else 1.0))
    if kind == "constant":
        vals = np.full(grid.node_count, float(spec.get("value", scale)))
        vals[grid.dirichlet_mask] = 0.0
        return GridFunction(grid, vals)
    if kind == "csv":
        return read_grid_function_csv(_req(spec, "path", "evolve.initial.path"), grid)
    raise ConfigError(f"evolve.initial.kind: unknown kind {kind!r}")


def cmd_evolve(cfg: dict, outdir: str, seed: int) -> int:
    grid = _build_grid(cfg)
    norm = _build_norm(cfg, grid.dim)
    m = _build_weight(cfg, grid)
    rspec = _get(cfg, "reaction", dict, default={"kind": "logistic"})
    if str(rspec.get("kind", "logistic")).lower() != "logistic":
        raise ConfigError("reaction.kind: the command line supports 'logistic'")
    reaction = logistic_reaction(m)
    espec = _get(cfg, "evolve", dict, default={})
    d = float(_req(espec, "d", "evolve.d"))
    horizon = float(espec.get("horizon", 50.0))
    opts = _pde_options(cfg, "evolve", seed)
    snapshot_times = espec.get("snapshot_times") or [0.0, horizon]
    v0 = _initial_field(cfg, grid)
    run = _Run("evolve", cfg, outdir, seed)
    traj = parabolic_solve(norm, d, reaction, v0, horizon, opts,
                           snapshot_times=[float(t) for t in snapshot_times])
    write_csv(run.path("trajectory.csv"), ["time", "l2_norm", "max"], traj.trace)
    for t, snap in zip(traj.times, traj.snapshots):
        write_grid_function_csv(run.path(f"snapshot_t{fmt_time(t)}.csv"), snap)
    write_json(run.path("evolve.json"), {
        "d": d, "horizon": horizon, "dt": opts.dt,
        "outcome": traj.outcome.value, "terminal_norm": traj.terminal_norm})
    run.finish()
    return EXIT_OK


def fmt_time(t: float) -> str:
    out = f"{t:.6f}".rstrip("0").rstrip(".")
    return out.replace(".", "p") if out else "0"


def cmd_sweep(cfg: dict, outdir: str, seed: int) -> int:
    grid = _build_grid(cfg)
    norm = _build_norm(cfg, grid.dim)
    m = _build_weight(cfg, grid)
    reaction = logistic_reaction(m)
    spec = _get(cfg, "sweep", dict, default={})
    opts = _pde_options(cfg, "sweep", seed)
    if "d_values" in spec:
        d_values = [float(v) for v in spec["d_values"]]
    else:
        points = int(spec.get("points", 13))
        span = spec.get("span", [0.5, 2.0])
        d_star = survival_threshold(norm, m, grid, opts.eigen)
        d_values = list(np.geomspace(float(span[0]) * d_star,
                                     float(span[1]) * d_star, points))
    run = _Run("sweep", cfg, outdir, seed)
    result = sweep_diffusion(norm, reaction, grid, d_values, opts)
    write_csv(run.path("sweep.csv"), ["d", "mu", "u_max", "outcome"],
              ((r.d, r.mu, r.u_max, r.outcome) for r in result.rows))
    write_json(run.path("sweep.json"), {
        "sign_changes": result.sign_changes,
        "threshold_bracket": list(result.threshold_bracket)
        if result.threshold_bracket else None})
    run.finish()
    return EXIT_OK


def cmd_verify(cfg: dict, outdir: str, seed: int) -> int:
    spec = _get(cfg, "verify", dict, default={})
    beta = float(spec.get("beta", 1.0))
    m0 = float(spec.get("m0", 0.0))
    boundary = str(spec.get("boundary", "DN")).upper()
    cells = int(spec.get("cells", 512))
    checks = int(spec.get("random_checks", 100))
    grid_cfg = {"grid": {"dim": 1, "cells": cells,
                         "labels": {"left": "dirichlet", "right": "neumann"}
                         if boundary == "DN" else
                         {"left": "neumann", "right": "dirichlet"}}}
    norm = _build_norm(cfg, 1)
    run = _Run("verify", cfg, outdir, seed)
    opts = OptimizeOptions(seed=seed, eigen=_eigen_options(cfg, seed))
    report = verify_1d_theorem(norm, beta, m0, boundary, cells, opts)

    rng = np.random.default_rng(seed)
    grid = _build_grid(grid_cfg)
    hl_ok = polya_ok = True
    for _ in range(checks):
        mv = GridFunction(grid, rng.uniform(-beta, 1.0, grid.node_count))
        uv = np.abs(rng.normal(size=grid.node_count))
        uv[grid.dirichlet_mask] = 0.0
        u = GridFunction(grid, uv)
        hl_ok &= hardy_littlewood_check(mv, u).holds
        polya_ok &= polya_check(norm, u).holds
    payload = report.to_dict()
    payload["rearrangement_checks"] = {
        "count": checks, "hardy_littlewood": hl_ok, "polya": polya_ok}
    passed = report.passed and hl_ok and polya_ok
    payload["passed"] = passed
    write_json(run.path("verify.json"), payload)
    run.finish()
    return EXIT_OK if passed else EXIT_NONCONVERGED


def cmd_check_norm(cfg: dict, outdir: str, seed: int) -> int:
    spec = _get(cfg, "check_norm", dict, default={})
    dim = _get(cfg, "grid.dim", int, default=1)
    norm = _build_norm(cfg, dim)
    samples = int(spec.get("samples", 256))
    run = _Run("check-norm", cfg, outdir, seed)
    constants = certify(norm, samples)
    write_json(run.path("norm_constants.json"), {
        "kind": norm.kind, "dim": norm.dim, "samples": samples,
        "alpha_lo": constants.alpha_lo, "alpha_hi": constants.alpha_hi,
        "grad_bound": constants.grad_bound, "convexity": constants.convexity,
        "euler_identity": True})
    run.finish()
    return EXIT_OK


_COMMANDS = {
    "eigen": cmd_eigen,
    "threshold": cmd_threshold,
    "optimize": cmd_optimize,
    "evolve": cmd_evolve,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
    "check-norm": cmd_check_norm,
}

_EPILOG = """exit codes:
  0   success
  2   iteration did not converge (or a verification assertion failed)
  3   infeasible weight: no positive part on the active nodes
  4   invalid gauge or domain labelling
  5   solver or oracle failure
  64  usage or configuration error

ANISOKPP_DETERMINISTIC=1 pins sequential reductions and omits wall-clock
fields from manifest.json so repeated runs are bitwise identical.
Execution is sequential; --threads is accepted for interface stability and
recorded, parallel fan-out being an implementation reserve for sweeps and
multi-starts only."""


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="anisokpp",
                     description="Anisotropic reaction-diffusion toolbox: "
                     "principal eigenvalues, survival thresholds, bang-bang "
                     "weight optimization, dynamics and 1-D verification.",
                     epilog=_EPILOG,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    for name in _COMMANDS:
        p = sub.add_parser(name, epilog=_EPILOG,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--out", default=None, help="output directory "
                       "(default: config 'output' field or ./out)")
        p.add_argument("--seed", type=int, default=None,
                       help="seed override (default: config 'seed' or 0)")
        p.add_argument("--threads", type=int, default=1,
                       help="worker cap for sweep/multi-start fan-out")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VAL",
                       help="override a scalar config field, e.g. "
                       "--set evolve.d=0.2 (repeatable)")
    return parser


def _apply_overrides(cfg: dict, pairs: List[str]) -> None:
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"--set {pair!r}: expected KEY=VALUE")
        key, raw = pair.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = cfg
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"--set {key}: {part} is not a section")
        node[parts[-1]] = value


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: "
            f"{exc.msg}") from None


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"anisokpp: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.command is None:
        parser.print_help()
        return EXIT_USAGE
    try:
        cfg = _load_config(args.config)
        if not isinstance(cfg, dict):
            raise ConfigError(f"{args.config}: top level must be a JSON object")
        _apply_overrides(cfg, args.set)
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        outdir = args.out or cfg.get("output") or "out"
        return _COMMANDS[args.command](cfg, outdir, seed)
    except ConfigError as exc:
        print(f"anisokpp: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleWeightError as exc:
        print(f"anisokpp: infeasible weight: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (InvalidNormError, InvalidDomainError) as exc:
        print(f"anisokpp: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (SolverError, OracleFailureError) as exc:
        print(f"anisokpp: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except AnisoKppError as exc:
        print(f"anisokpp: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
