"""Command-line front end.

Subcommands: simulate (scene spec -> cubes + ground-truth masks),
decompose (cube + dictionary -> L/target/residual cubes, C and trace CSVs),
detect (sparse cube -> score map + mask), eval (mask vs ground truth ->
metrics), sweep (tau/lambda grid -> metrics CSV).

Every command writes a manifest.json holding the fully resolved argument
vector, so a run can be repeated exactly. Numeric options may also come
from a key=value config file (flags win). Exit codes: 0 success, 2 usage,
3 data error, 4 solver did not converge (outputs are still written).

Setting HSIRPCA_DETERMINISTIC=1 (with the BLAS thread counts pinned to 1)
makes reruns bit-identical: the sweep CSV then records 0 for the one
wall-clock field it would otherwise contain.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .cube import flatten, unflatten
from .detect import binarize, evaluate
from .dictionary import SpectrumRecord, build_dictionary, load_spectra, save_spectra
from .errors import DataError, SolverError
from .hsio import (read_cube, read_mask_pgm, write_cube, write_mask_pgm,
                   write_score_pgm)
from .scene import build_scenes, parse_scene_spec
from .solver import SolverConfig, lambda_grid, solve, tau_grid, trace_to_csv

_SOLVER_DEFAULTS = {
    "rho0": 1e-4,
    "rho_growth": 1.1,
    "outer_eps": 1e-4,
    "admm_tol": 1e-6,
    "max_outer": 100,
    "max_inner": 500,
}
_FLOOR_DEFAULT = 1e-8


class _UsageError(Exception):
    pass


def _deterministic() -> bool:
    return os.environ.get("HSIRPCA_DETERMINISTIC", "0") not in ("", "0")


def _parse_config(path: str) -> Dict[str, str]:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise _UsageError("config line %d is not key=value: %r" % (lineno, raw))
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key == "lambda":
            key = "lam"               # --lambda's argparse destination
        values[key] = value
    return values


def _resolve(args: argparse.Namespace, name: str, cast, default):
    """Flag value if given, else config file value, else default."""
    given = getattr(args, name, None)
    if given is not None:
        return given
    if name in args._config:
        try:
            return cast(args._config.pop(name))
        except ValueError as exc:
            raise _UsageError("config key %r is not a valid %s"
                              % (name, cast.__name__)) from exc
    return default


def _solver_config(args: argparse.Namespace, tau: float, lam: float) -> SolverConfig:
    return SolverConfig(
        tau=tau, lam=lam,
        rho0=_resolve(args, "rho0", float, _SOLVER_DEFAULTS["rho0"]),
        rho_growth=_resolve(args, "rho_growth", float, _SOLVER_DEFAULTS["rho_growth"]),
        outer_eps=_resolve(args, "outer_eps", float, _SOLVER_DEFAULTS["outer_eps"]),
        admm_tol=_resolve(args, "admm_tol", float, _SOLVER_DEFAULTS["admm_tol"]),
        max_outer=_resolve(args, "max_outer", int, _SOLVER_DEFAULTS["max_outer"]),
        max_inner=_resolve(args, "max_inner", int, _SOLVER_DEFAULTS["max_inner"]),
    )


def _solver_argv(cfg: SolverConfig) -> List[str]:
    return ["--tau", repr(cfg.tau), "--lambda", repr(cfg.lam),
            "--rho0", repr(cfg.rho0), "--rho-growth", repr(cfg.rho_growth),
            "--outer-eps", repr(cfg.outer_eps), "--admm-tol", repr(cfg.admm_tol),
            "--max-outer", str(cfg.max_outer), "--max-inner", str(cfg.max_inner)]


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, command: str, argv: Sequence[str],
                    inputs: Dict[str, str], outputs: Sequence[str],
                    solver: Optional[SolverConfig] = None,
                    seed: Optional[int] = None) -> None:
    manifest = {
        "command": command,
        "argv": list(argv),
        "inputs": inputs,
        "solver": dataclasses.asdict(solver) if solver is not None else None,
        "seed": seed,
        "out": str(out),
        "outputs": sorted(outputs),
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2,
                                                  sort_keys=True) + "\n")


def manifest_argv(path) -> List[str]:
    """The resolved argument vector a manifest records, for exact reruns."""
    manifest = json.loads(Path(path).read_text())
    return list(manifest["argv"])


def _fmt_alpha(alpha: float) -> str:
    return ("%g" % alpha)


def _cmd_simulate(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    spec = parse_scene_spec(args.spec)
    seed = _resolve(args, "seed", int, None)
    if seed is not None:
        spec = dataclasses.replace(spec, seed=seed)
    scenes, target = build_scenes(spec)
    outputs = []
    for cube, gt, alpha in scenes:
        stem = "scene" if alpha is None else "scene_alpha_%s" % _fmt_alpha(alpha)
        write_cube(cube, out / (stem + ".hsic"))
        outputs += [stem + ".hsic", stem + ".raw"]
        if gt is not None:
            name = "gt_alpha_%s.pgm" % _fmt_alpha(alpha)
            write_mask_pgm(gt.mask, out / name)
            outputs.append(name)
    if target is not None:
        save_spectra([SpectrumRecord(name="target", reflectance=target)],
                     out / "target.csv")
        outputs.append("target.csv")
    argv = ["simulate", str(args.spec), "--seed", str(spec.seed),
            "--out", str(out)]
    _write_manifest(out, "simulate", argv, {"spec": str(args.spec)}, outputs,
                    seed=spec.seed)
    return 0


def _cmd_decompose(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    tau = _resolve(args, "tau", float, None)
    lam = _resolve(args, "lam", float, None)
    if tau is None or lam is None:
        raise _UsageError("decompose requires --tau and --lambda "
                          "(or config file entries); run sweep to pick them")
    cfg = _solver_config(args, tau, lam)
    cube = read_cube(args.cube)
    D = flatten(cube)
    At = build_dictionary(load_spectra(args.dictionary), cube.bands)
    result = solve(D, At, cfg)

    outputs = []
    for stem, m in (("L", result.L), ("target", result.target),
                    ("residual", result.residual)):
        write_cube(unflatten(m, cube.height, cube.width), out / (stem + ".hsic"))
        outputs += [stem + ".hsic", stem + ".raw"]
    with (out / "C.csv").open("w") as fh:
        for label, row in zip(At.labels, result.C):
            fh.write(label + "," + ",".join(repr(float(v)) for v in row) + "\n")
    trace_to_csv(result.trace, out / "trace.csv")
    outputs += ["C.csv", "trace.csv"]
    argv = (["decompose", str(args.cube), str(args.dictionary)]
            + _solver_argv(cfg) + ["--out", str(out)])
    _write_manifest(out, "decompose", argv,
                    {"cube": str(args.cube), "dictionary": str(args.dictionary)},
                    outputs, solver=cfg)
    if not result.converged:
        print("warning: not converged after %d outer iterations"
              % result.outer_iters, file=sys.stderr)
        return 4
    return 0


def _cmd_detect(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    floor = _resolve(args, "floor", float, _FLOOR_DEFAULT)
    cube = read_cube(args.cube)
    scores = np.linalg.norm(cube.data, axis=0)
    mask = binarize(scores, floor)
    write_score_pgm(scores, out / "scores.pgm")
    np.savetxt(out / "scores.csv", scores, fmt="%.17g", delimiter=",")
    write_mask_pgm(mask, out / "mask.pgm")
    argv = ["detect", str(args.cube), "--floor", repr(floor), "--out", str(out)]
    _write_manifest(out, "detect", argv, {"cube": str(args.cube)},
                    ["scores.pgm", "scores.pgm.scale", "scores.csv", "mask.pgm"])
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    mask = read_mask_pgm(args.mask)
    gt = read_mask_pgm(args.truth)
    report = evaluate(mask, gt)
    metrics = {
        "detected": report.detected,
        "false_alarms": report.false_alarms,
        "pd": report.pd,
        "ground_truth_count": int(gt.sum()),
        "mask_count": int(mask.sum()),
    }
    text = json.dumps(metrics, indent=2, sort_keys=True) + "\n"
    (out / "metrics.json").write_text(text)
    sys.stdout.write(text)
    argv = ["eval", str(args.mask), str(args.truth), "--out", str(out)]
    _write_manifest(out, "eval", argv,
                    {"mask": str(args.mask), "truth": str(args.truth)},
                    ["metrics.json"])
    return 0


def _parse_grid(text: str) -> List[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise _UsageError("grid %r is not a comma list of numbers" % text) from exc
    if not values:
        raise _UsageError("empty grid %r" % text)
    return values


def _cmd_sweep(args: argparse.Namespace) -> int:
    out = _out_dir(args)
    floor = _resolve(args, "floor", float, _FLOOR_DEFAULT)
    cube = read_cube(args.cube)
    D = flatten(cube)
    At = build_dictionary(load_spectra(args.dictionary), cube.bands)
    gt = read_mask_pgm(args.truth)
    if gt.shape != (cube.height, cube.width):
        raise DataError("ground truth is %s but the scene is %dx%d"
                        % (gt.shape, cube.height, cube.width))

    tau_text = _resolve(args, "tau", str, None)
    lam_text = _resolve(args, "lam", str, None)
    taus = _parse_grid(tau_text) if tau_text else [float(t) for t in tau_grid(D)]
    lams = _parse_grid(lam_text) if lam_text else [float(v) for v in lambda_grid(D, At)]

    rows = []
    for tau in taus:
        for lam in lams:
            cfg = _solver_config(args, tau, lam)
            started = time.perf_counter()
            result = solve(D, At, cfg)
            # wall clock would break bit-identical reruns
            runtime = 0.0 if _deterministic() else time.perf_counter() - started
            scores = np.linalg.norm(result.target, axis=1).reshape(
                cube.height, cube.width)
            report = evaluate(binarize(scores, floor), gt)
            last = result.trace[-1]
            rows.append((tau, lam, report.pd, report.false_alarms,
                         last.rank_L, last.active_columns, runtime))

    with (out / "sweep.csv").open("w") as fh:
        fh.write("tau,lambda,pd,false_alarms,rank_L,active_columns,runtime_s\n")
        for tau, lam, pd, fa, rank, active, runtime in rows:
            fh.write("%s,%s,%s,%d,%d,%d,%.3f\n"
                     % (repr(tau), repr(lam), repr(pd), fa, rank, active, runtime))
    cfg0 = _solver_config(args, taus[0], lams[0])
    argv = (["sweep", str(args.cube), str(args.dictionary), str(args.truth),
             "--tau", ",".join(repr(t) for t in taus),
             "--lambda", ",".join(repr(v) for v in lams),
             "--floor", repr(floor)]
            + _solver_argv(cfg0)[4:]  # shared solver options, minus tau/lambda
            + ["--out", str(out)])
    _write_manifest(out, "sweep", argv,
                    {"cube": str(args.cube), "dictionary": str(args.dictionary),
                     "truth": str(args.truth)},
                    ["sweep.csv"])
    return 0


def _add_solver_options(sub: argparse.ArgumentParser, grid: bool) -> None:
    if grid:
        sub.add_argument("--tau", help="comma list of tau values (default: heuristic grid)")
        sub.add_argument("--lambda", dest="lam",
                         help="comma list of lambda values (default: heuristic grid)")
    else:
        sub.add_argument("--tau", type=float, help="nuclear norm weight")
        sub.add_argument("--lambda", dest="lam", type=float,
                         help="column sparsity weight")
    sub.add_argument("--rho0", type=float, help="initial ADMM penalty (default 1e-4)")
    sub.add_argument("--rho-growth", type=float,
                     help="ADMM penalty growth per iteration (default 1.1)")
    sub.add_argument("--outer-eps", type=float,
                     help="outer relative-change stop (default 1e-4)")
    sub.add_argument("--admm-tol", type=float,
                     help="inner consensus gap stop (default 1e-6)")
    sub.add_argument("--max-outer", type=int, help="outer iteration cap (default 100)")
    sub.add_argument("--max-inner", type=int, help="inner iteration cap (default 500)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hsirpca",
        description="Low-rank plus dictionary-sparse decomposition of "
                    "hyperspectral images, with scene simulation and detection.")
    commands = parser.add_subparsers(dest="command", required=True)

    sim = commands.add_parser("simulate", help="build scenes from a spec file")
    sim.add_argument("spec", help="scene spec file (key=value)")
    sim.add_argument("--seed", type=int, help="override the spec's seed")

    dec = commands.add_parser("decompose", help="run the decomposition on a cube")
    dec.add_argument("cube", help="input .hsic cube")
    dec.add_argument("dictionary", help="target spectra CSV")
    _add_solver_options(dec, grid=False)

    det = commands.add_parser("detect", help="score and binarize a sparse cube")
    det.add_argument("cube", help="sparse target component .hsic cube")
    det.add_argument("--floor", type=float,
                     help="relative score floor (default 1e-8)")

    ev = commands.add_parser("eval", help="compare a mask against ground truth")
    ev.add_argument("mask", help="detection mask PGM")
    ev.add_argument("truth", help="ground truth mask PGM")

    sw = commands.add_parser("sweep", help="grid-run tau/lambda and score each")
    sw.add_argument("cube", help="input .hsic cube")
    sw.add_argument("dictionary", help="target spectra CSV")
    sw.add_argument("truth", help="ground truth mask PGM")
    _add_solver_options(sw, grid=True)
    sw.add_argument("--floor", type=float,
                    help="relative score floor (default 1e-8)")

    for sub in (sim, dec, det, ev, sw):
        sub.add_argument("--out", required=True, help="output directory")
        sub.add_argument("--config", help="key=value file of option defaults")
    sim.set_defaults(func=_cmd_simulate)
    dec.set_defaults(func=_cmd_decompose)
    det.set_defaults(func=_cmd_detect)
    ev.set_defaults(func=_cmd_eval)
    sw.set_defaults(func=_cmd_sweep)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args._config = _parse_config(args.config) if args.config else {}
        return args.func(args)
    except _UsageError as exc:
        print("usage error: %s" % exc, file=sys.stderr)
        return 2
    except (DataError, FileNotFoundError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 3
    except SolverError as exc:
        print("solver error: %s" % exc, file=sys.stderr)
        return 4
    except ValueError as exc:
        # bad parameter values surface as config validation errors
        print("usage error: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
