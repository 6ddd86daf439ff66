"""Command line front end.

    petrovkit solve    --method dmlpg5 --m 2 --h 0.05
    petrovkit converge --method dmlpg5 --m 2 --h 0.2,0.1,0.05 --output conv.csv
    petrovkit compare  --m 2 --h 0.1,0.05 --output cmp.csv
    petrovkit gmls-derivative-test --m 2 --h 0.1,0.05,0.025

A ``--config`` file holds flat ``key = value`` lines using the long flag
names; explicit flags override it.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench
from .errors import PetrovkitError
from .geometry import Rectangle, generate_grid
from .solver import METHODS, WEAK_METHODS, DiscreteProblem, assemble

COMMANDS = ("solve", "converge", "compare", "gmls-derivative-test")
SHAPES = {"ball": "ball", "circle": "ball", "square": "square"}

# key -> (type, default); defaults of None are filled per degree
OPTIONS = {
    "method": (str, "dmlpg5"),
    "m": (int, 2),
    "h": (str, None),
    "c0": (float, None),
    "delta0": (float, None),
    "sigma0": (float, None),
    "shape": (str, None),
    "n_boundary": (int, None),
    "n_interior": (int, None),
    "n_rhs": (int, None),
    "output": (str, None),
    "plot_data": (str, None),
    "paired_output": (str, None),
    "export_system": (str, None),
    "seed": (int, 0),
    "workers": (int, None),
    "oversample": (bool, False),
    "probe_error": (bool, False),
    "parallel": (bool, False),
}


class UsageError(Exception):
    pass


def read_config(path):
    """Parse a flat ``key = value`` file (``#`` starts a comment)."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in OPTIONS:
            raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
        out[key] = value
    return out


def _convert(key, value):
    typ = OPTIONS[key][0]
    if isinstance(value, typ) and not (typ is int and isinstance(value, bool)):
        return value
    try:
        if typ is bool:
            text = str(value).strip().lower()
            if text in ("1", "true", "yes", "on"):
                return True
            if text in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        return typ(value)
    except ValueError:
        raise UsageError(f"invalid value for {key}: {value!r}") from None


def build_parser():
    p = argparse.ArgumentParser(prog="petrovkit", description="GMLS / DMLPG Poisson solvers and benchmarks")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--m", type=int, help="polynomial degree")
    p.add_argument("--h", help="mesh size or comma separated halving list")
    p.add_argument("--c0", type=float, help="weight shape, c = c0 h")
    p.add_argument("--delta0", type=float, help="weight support, delta = delta0 h (default 2m)")
    p.add_argument("--sigma0", type=float, help="subdomain size in units of h")
    p.add_argument("--shape", choices=sorted(SHAPES), help="local subdomain shape")
    p.add_argument("--n-boundary", type=int, help="quadrature points on the subdomain boundary (per edge for squares)")
    p.add_argument("--n-interior", type=int, help="interior quadrature points per direction (DMLPG1)")
    p.add_argument("--n-rhs", type=int, help="right-hand-side quadrature points per direction")
    p.add_argument("--output", help="CSV output path (stdout if omitted)")
    p.add_argument("--plot-data", help="write log10(h) log10(error) pairs here")
    p.add_argument("--paired-output", help="compare: paired CSV with speedup column")
    p.add_argument("--export-system", help="solve: write PREFIX.triplets and PREFIX.rhs")
    p.add_argument("--seed", type=int, help="seed for numpy's random generator")
    p.add_argument("--workers", type=int, help="assembly threads (capped by PETROVKIT_THREADS)")
    p.add_argument("--oversample", action="store_true", default=None, help="add cell-midpoint test nodes")
    p.add_argument("--probe-error", action="store_true", default=None, help="measure error on a 4x finer probe grid too")
    p.add_argument("--parallel", action="store_true", default=None, help="run study cases concurrently (no timings)")
    p.add_argument("-q", "--quiet", action="store_true", help="suppress per-case log lines")
    return p


def resolve_config(args):
    """Merge defaults, config file and flags (in increasing priority)."""
    cfg = {k: default for k, (_, default) in OPTIONS.items()}
    if args.config:
        for k, v in read_config(args.config).items():
            cfg[k] = _convert(k, v)
    for k in OPTIONS:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = _convert(k, v)
    cfg["method"] = cfg["method"].lower()
    if cfg["method"] not in METHODS:
        raise UsageError(f"unknown method {cfg['method']!r}")
    if cfg["h"] is None:
        raise UsageError("--h is required")
    try:
        cfg["hs"] = [float(v) for v in str(cfg["h"]).split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"invalid value for h: {cfg['h']!r}") from None
    if not cfg["hs"] or any(not h > 0 for h in cfg["hs"]):
        raise UsageError(f"h must be positive, got {cfg['h']!r}")
    if cfg["m"] < 0:
        raise UsageError(f"m must be non-negative, got {cfg['m']}")
    for key in ("c0", "delta0", "sigma0", "n_boundary", "n_interior", "n_rhs", "workers"):
        if cfg[key] is not None and not cfg[key] > 0:
            raise UsageError(f"{key} must be positive, got {cfg[key]}")
    if cfg["shape"] is not None:
        if cfg["shape"] not in SHAPES:
            raise UsageError(f"unknown shape {cfg['shape']!r}")
        cfg["shape"] = SHAPES[cfg["shape"]]
    return cfg


def _params(cfg):
    return bench.default_params(
        cfg["m"], c0=cfg["c0"], delta0=cfg["delta0"], sigma0=cfg["sigma0"], shape=cfg["shape"],
        n_boundary=cfg["n_boundary"], n_interior=cfg["n_interior"], n_rhs=cfg["n_rhs"],
        oversample=cfg["oversample"] or None, probe_error=cfg["probe_error"] or None, workers=cfg["workers"],
    )


def _check_degree(cfg, method):
    if method in WEAK_METHODS and cfg["m"] <= 1:
        raise UsageError(
            f"m={cfg['m']} refused for {method}: local weak forms vanish on linear polynomials, so weak-form "
            "methods necessarily fail for m <= 1 (zero stiffness rows); use m >= 2"
        )


def _emit(text, path):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _run(cfg):
    cmd = cfg["command"]
    params = _params(cfg)
    hs = cfg["hs"]
    m = cfg["m"]
    if cmd == "solve":
        _check_degree(cfg, cfg["method"])
        if len(hs) != 1:
            raise UsageError("solve takes a single --h")
        row = bench.run_case(cfg["method"], m, hs[0], params)
        if cfg["export_system"]:
            _export_system(cfg, params)
        _emit(bench.ConvergenceReport([row]).to_csv(), cfg["output"])
    elif cmd == "converge":
        _check_degree(cfg, cfg["method"])
        rep = bench.convergence_study(cfg["method"], m, hs, params, parallel=cfg["parallel"])
        _emit(rep.to_csv(), cfg["output"])
        if cfg["plot_data"]:
            Path(cfg["plot_data"]).write_text(rep.plot_data())
    elif cmd == "compare":
        _check_degree(cfg, "dmlpg5")
        rep = bench.compare_methods(m, hs, params)
        _emit(rep.to_csv(), cfg["output"])
        paired = cfg["paired_output"] or (str(Path(cfg["output"]).with_suffix("")) + ".paired.csv" if cfg["output"] else None)
        if paired:
            Path(paired).write_text(rep.to_paired_csv())
        else:
            sys.stdout.write(rep.to_paired_csv())
        if cfg["plot_data"]:
            Path(cfg["plot_data"]).write_text(rep.plot_data())
    else:
        errors, orders = bench.derivative_order_study(m, hs, params)
        lines = ["h,max_error,ratio"]
        for i, (h, e) in enumerate(zip(hs, errors)):
            lines.append(f"{h!r},{e!r},{'' if i == 0 else repr(orders[i - 1])}")
        _emit("\n".join(lines) + "\n", cfg["output"])
    return 0


def _export_system(cfg, params):
    nodes = generate_grid(Rectangle.unit(), cfg["hs"][0])
    prob = bench.FRANKE
    dp = DiscreteProblem(nodes, cfg["method"], cfg["m"], prob.laplacian, prob.u, prob.neumann,
                         c0=params.c0, delta0=params.delta0, shape=params.shape, sigma0=params.sigma0,
                         n_boundary=params.n_boundary, n_interior=params.n_interior, n_rhs=params.n_rhs,
                         oversample=params.oversample)
    system = assemble(dp, params.workers)
    prefix = cfg["export_system"]
    system.write_triplets(f"{prefix}.triplets", f"{prefix}.rhs")


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr)
    try:
        cfg = resolve_config(args)
        cfg["command"] = args.command
        np.random.seed(cfg["seed"])
        return _run(cfg)
    except UsageError as exc:
        print(f"petrovkit: error: {exc}", file=sys.stderr)
        return 2
    except (PetrovkitError, ValueError, OSError) as exc:
        print(f"petrovkit: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
