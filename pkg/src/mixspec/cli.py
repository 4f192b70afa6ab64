"""``mixspec`` command line.

Each subcommand reads a JSON config; flags only override it.

  simulate      {"spec": {...}, "length": L, "seed": s}
  spectrum      {"ensemble": "Bn"|"An"|"Gn", "N": N, "n": n, "seed": s,
                 "spec": {...}}  or, for Bn only, a literal
                 {"trajectory": [...]} / {"trajectory_csv": path}
  lsd           {"c": c, "gamma": [g0, g1, ...] | "spec": {...} | "f_constant": f,
                 "lags": K, "v": v, "Q": Q, "tol": t, "max_iter": k,
                 "z": [[re, im], ...], "x": [lo, hi, count]}
  universality, concentrate, blocks
                ExperimentConfig JSON (see ``mixspec.experiments``)

Exit status: 0 success, 1 invalid input or failed write, 2 solver failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import experiments, lsd, matrices, processes
from ._io import atomic_outputs
from .errors import MixspecError, SolverError
from .processes import ProcessSpec
from .spectral import eig_sym, write_spectrum_csv, write_stieltjes_grid_csv

log = logging.getLogger("mixspec")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_SOLVER = 2

SUBCOMMANDS = ("simulate", "spectrum", "lsd", "universality", "concentrate", "blocks")
EXPERIMENT_FOR = {
    "universality": experiments.run_universality,
    "concentrate": experiments.run_concentration,
    "blocks": experiments.run_approximation_chain,
}


class UsageError(Exception):
    """Bad command-line usage or configuration file."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _sizes(text: str):
    out = []
    for part in text.split(","):
        try:
            N, n = part.lower().replace("x", ":").split(":")
            out.append((int(N), int(n)))
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"size {part!r} is not of the form N:n") from exc
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mixspec", description="Spectra of Gram matrices built from dependent sequences.")
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(SUBCOMMANDS) + "}")
    sub.required = True
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path, help="JSON configuration file")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument("--sizes", type=_sizes, help="override sizes, e.g. 100:100,200:200")
        p.add_argument("--output-dir", type=Path, help="directory for outputs (default: config 'output' or .)")
        p.add_argument("--threads", type=int, help="worker cap (default: MIXSPEC_THREADS or CPU count)")
        p.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def load_config(path: Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    return cfg


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise UsageError(f"config is missing '{key}'")
    return cfg[key]


def _check_keys(cfg: dict, allowed) -> None:
    extra = set(cfg) - set(allowed)
    if extra:
        raise UsageError(f"unknown config fields: {sorted(extra)}")


def _output_dir(args, cfg: dict) -> Path:
    if args.output_dir is not None:
        return args.output_dir
    return Path(cfg.get("output") or ".")


def _single_size(args, cfg: dict) -> matrices.EnsembleConfig:
    if args.sizes:
        if len(args.sizes) != 1:
            raise UsageError("this subcommand takes exactly one size")
        N, n = args.sizes[0]
    else:
        N, n = _require(cfg, "N"), _require(cfg, "n")
    return matrices.EnsembleConfig(int(N), int(n))


def _seed(args, cfg: dict, default: int = 0) -> int:
    return int(args.seed) if args.seed is not None else int(cfg.get("seed", default))


def cmd_simulate(args, cfg: dict):
    _check_keys(cfg, {"spec", "length", "seed", "output"})
    spec = ProcessSpec.from_dict(_require(cfg, "spec"))
    length = int(_require(cfg, "length"))
    seed = _seed(args, cfg)
    out = _output_dir(args, cfg) / "trajectory.csv"

    def run():
        traj = processes.sample_trajectory(spec, length, seed)
        with atomic_outputs([out]) as (tmp,):
            processes.write_trajectory_csv(traj, tmp)
        return [out]

    return run


def _literal_trajectory(cfg: dict) -> np.ndarray:
    if "trajectory" in cfg:
        values = np.asarray(cfg["trajectory"], dtype=np.float64)
        if values.ndim != 1:
            raise UsageError("'trajectory' must be a flat list of numbers")
        return values
    return processes.read_trajectory_csv(cfg["trajectory_csv"])


def cmd_spectrum(args, cfg: dict):
    _check_keys(cfg, {"ensemble", "spec", "N", "n", "seed", "trajectory", "trajectory_csv", "output", "lags"})
    ensemble = cfg.get("ensemble", "Bn")
    if ensemble not in ("Bn", "An", "Gn"):
        raise UsageError(f"unknown ensemble {ensemble!r}; expected Bn, An or Gn")
    ens = _single_size(args, cfg)
    seed = _seed(args, cfg)
    literal = "trajectory" in cfg or "trajectory_csv" in cfg
    if literal and ensemble != "Bn":
        raise UsageError("a literal trajectory only defines the Bn ensemble")
    if literal:
        values = _literal_trajectory(cfg)
        spec = None
    else:
        spec = ProcessSpec.from_dict(_require(cfg, "spec"))
    out = _output_dir(args, cfg) / "spectrum.csv"

    def run():
        if ensemble == "Bn":
            src = values if literal else processes.sample_trajectory(spec, ens.N * ens.n, seed)
            _, gram = matrices.build_Bn(src, ens)
        elif ensemble == "An":
            gram = matrices.build_An(spec, ens, seed)
        else:
            gamma = processes.autocovariance_closed_form(spec, ens.N)
            gram = matrices.build_Gn(gamma, ens, seed)
        spectrum = eig_sym(gram, psd=True, n=ens.n, kind=ensemble)
        with atomic_outputs([out]) as (tmp,):
            write_spectrum_csv(spectrum, tmp)
        return [out]

    return run


def _density_fn(cfg: dict) -> lsd.SpectralDensityFn:
    given = [k for k in ("gamma", "spec", "f_constant") if k in cfg]
    if len(given) != 1:
        raise UsageError("lsd config needs exactly one of 'gamma', 'spec', 'f_constant'")
    if "f_constant" in cfg:
        return lsd.constant_density(2.0 * math.pi * float(cfg["f_constant"]))
    if "gamma" in cfg:
        gamma = np.asarray(cfg["gamma"], dtype=np.float64)
        if gamma.ndim != 1 or gamma.size == 0:
            raise UsageError("'gamma' must be a non-empty list of numbers")
        return lsd.spectral_density(processes.AutocovarianceSeq(gamma, "closed_form"))
    spec = ProcessSpec.from_dict(cfg["spec"])
    lags = int(cfg.get("lags", experiments.LSD_LAGS))
    return lsd.spectral_density(processes.autocovariance_closed_form(spec, lags))


def cmd_lsd(args, cfg: dict):
    _check_keys(cfg, {"c", "gamma", "spec", "f_constant", "lags", "v", "Q", "tol", "max_iter", "z", "x", "output"})
    if args.sizes:
        if len(args.sizes) != 1:
            raise UsageError("lsd takes exactly one size")
        c = args.sizes[0][0] / args.sizes[0][1]
    else:
        c = float(_require(cfg, "c"))
    f = _density_fn(cfg)
    v = float(cfg.get("v", lsd.DEFAULT_V))
    opts = {
        "Q": int(cfg.get("Q", lsd.DEFAULT_Q)),
        "tol": float(cfg.get("tol", lsd.DEFAULT_TOL)),
        "max_iter": int(cfg.get("max_iter", lsd.DEFAULT_MAX_ITER)),
    }
    x = None
    if "x" in cfg:
        lo, hi, count = cfg["x"]
        x = np.linspace(float(lo), float(hi), int(count))
    z = None
    if "z" in cfg:
        z = np.array([complex(re, im) for re, im in cfg["z"]])
    outdir = _output_dir(args, cfg)
    paths = [outdir / "density.csv", outdir / "stieltjes.csv"]

    def run():
        dens = lsd.density_from_stieltjes(f, c, x, v=v, **opts)
        sol = lsd.solve_fixed_point(f, c, z, **opts) if z is not None else dens.solution
        log.info("density mass %.6f on %d points", dens.mass, dens.x.size)
        with atomic_outputs(paths) as (t_dens, t_st):
            dens.write_csv(t_dens)
            write_stieltjes_grid_csv(sol.z, sol.S, t_st)
        return paths

    return run


def cmd_experiment(args, cfg: dict):
    cfg = dict(cfg)
    if args.seed is not None:
        cfg["base_seed"] = args.seed
    if args.sizes:
        cfg["sizes"] = [list(s) for s in args.sizes]
    if args.threads is not None:
        cfg["threads"] = args.threads
    config = experiments.ExperimentConfig.from_dict(cfg)
    runner = EXPERIMENT_FOR[args.command]
    outdir = _output_dir(args, cfg)

    def run():
        report = runner(config)
        for note in report.notices:
            log.warning("%s", note)
        return report.write(outdir)

    return run


HANDLERS = {
    "simulate": cmd_simulate,
    "spectrum": cmd_spectrum,
    "lsd": cmd_lsd,
    "universality": cmd_experiment,
    "concentrate": cmd_experiment,
    "blocks": cmd_experiment,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"mixspec: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.threads is not None and args.threads < 1:
        print("mixspec: error: --threads must be positive", file=sys.stderr)
        return EXIT_INPUT
    try:
        cfg = load_config(args.config)
        # Everything is validated before the first computation starts.
        run = HANDLERS[args.command](args, cfg)
        written = run()
    except SolverError as exc:
        print(f"mixspec: solver did not converge: {exc}", file=sys.stderr)
        if exc.trace:
            print(f"mixspec: last residuals: {exc.trace[-5:]}", file=sys.stderr)
        return EXIT_SOLVER
    except UsageError as exc:
        print(f"mixspec: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (MixspecError, ValueError, TypeError, KeyError) as exc:
        print(f"mixspec: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"mixspec: cannot write output: {exc}", file=sys.stderr)
        return EXIT_INPUT
    for path in written:
        log.info("wrote %s", path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
