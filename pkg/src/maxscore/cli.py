"""Command-line surface: dataset files, config parsing, report emission.

Subcommands: simulate, estimate, bootstrap, montecarlo, hoeffding-check,
oracle. Every emitted report embeds the fully resolved configuration and
seed; numbers are written with 17 significant digits so files round-trip
bit-faithfully. Outputs refuse to overwrite existing files unless --force.

Exit codes: 0 success, 2 validation/usage error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from .arrays import Dataset, MultiIndexGrid, materialize
from .bootstrap import WeightSpec, bootstrap_estimate
from .dgp import DgpSpec, VARIANTS
from .hoeffding import decompose
from .mc_harness import (
    ExperimentConfig,
    run_coverage_study,
    run_normality_study,
    run_rate_study,
)
from .oracle import QuadratureSpec, oracle_variance
from .score import ConstraintSet, argmax_enumerate, argmax_sweep_2d

__all__ = ["load_dataset", "save_dataset", "run_command", "main"]


class ValidationError(Exception):
    """User-input problem; maps to exit code 2."""


# ---------------------------------------------------------------------------
# dataset files

def _fmt(v: float) -> str:
    return "%.17g" % v


def load_dataset(path: str, y01: bool = False, require_balanced: bool = False):
    """Parse a delimited dataset file into a Dataset plus a fill report.

    Columns: i1..iK (1-based integer cluster indices), y, x1..xd. With
    ``y01`` labels {0,1} are mapped 0 -> -1. Duplicate cells and non-finite
    covariates are rejected with row numbers.
    """
    if not os.path.exists(path):
        raise ValidationError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        rows = list(reader)
    header = [h.strip() for h in header]
    k_dims = sum(1 for h in header if h.startswith("i") and h[1:].isdigit())
    d = sum(1 for h in header if h.startswith("x") and h[1:].isdigit())
    expected = [f"i{k}" for k in range(1, k_dims + 1)] + ["y"] + [
        f"x{l}" for l in range(1, d + 1)
    ]
    if k_dims < 1 or d < 1 or header != expected:
        raise ValidationError(
            f"{path}: header must be i1..iK,y,x1..xd, got {','.join(header)}"
        )
    allowed_y = (0.0, 1.0) if y01 else (-1.0, 1.0)
    indices, ys, xs = [], [], []
    seen = {}
    for rownum, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise ValidationError(f"{path}:{rownum}: expected {len(header)} fields")
        try:
            idx = tuple(int(v) for v in row[:k_dims])
            yv = float(row[k_dims])
            xv = [float(v) for v in row[k_dims + 1:]]
        except ValueError as exc:
            raise ValidationError(f"{path}:{rownum}: {exc}") from None
        if any(i < 1 for i in idx):
            raise ValidationError(f"{path}:{rownum}: cluster indices must be >= 1")
        if yv not in allowed_y:
            raise ValidationError(
                f"{path}:{rownum}: y value {row[k_dims]} not in {allowed_y}"
            )
        for l, v in enumerate(xv, start=1):
            if not np.isfinite(v):
                raise ValidationError(f"{path}:{rownum}: non-finite x{l}")
        if idx in seen:
            raise ValidationError(
                f"{path}:{rownum}: duplicate cell {idx} (first at row {seen[idx]})"
            )
        seen[idx] = rownum
        indices.append(idx)
        ys.append(-1 if (y01 and yv == 0.0) else int(yv))
        xs.append(xv)
    if not indices:
        raise ValidationError(f"{path}: no records")
    sizes = tuple(int(m) for m in np.max(np.asarray(indices), axis=0))
    grid = MultiIndexGrid(sizes)
    data = Dataset(
        grid=grid,
        indices=np.asarray(indices, dtype=np.int64),
        y=np.asarray(ys, dtype=np.int64),
        x=np.asarray(xs, dtype=np.float64),
    )
    fill = data.n_records / grid.n_cells
    if require_balanced and not data.is_balanced():
        raise ValidationError(
            f"{path}: grid {sizes} has {grid.n_cells} cells but {data.n_records} records"
        )
    info = {"n_records": data.n_records, "grid": list(sizes), "fill_rate": fill}
    return data, info


def save_dataset(data: Dataset, path: str, force: bool = False) -> None:
    _check_overwrite(path, force)
    k, d = data.grid.k_dims, data.d
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([f"i{j}" for j in range(1, k + 1)] + ["y"]
                   + [f"x{l}" for l in range(1, d + 1)])
        for idx, y, x in zip(data.indices, data.y, data.x):
            w.writerow([*map(int, idx), int(y), *(_fmt(v) for v in x)])


# ---------------------------------------------------------------------------
# report emission

def _check_overwrite(path: str, force: bool) -> None:
    if path and os.path.exists(path) and not force:
        raise ValidationError(f"{path} exists; pass --force to overwrite")


def _native(obj):
    if isinstance(obj, dict):
        return {str(k): _native(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_native(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _native(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _emit_json(report: dict, path: str | None, force: bool) -> None:
    text = json.dumps(_native(report), sort_keys=True, indent=2) + "\n"
    if path:
        _check_overwrite(path, force)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_csv(rows, header, path: str, force: bool) -> None:
    _check_overwrite(path, force)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, float) else v for v in row])


def read_report(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# shared flag parsing

def _parse_vector(text: str) -> np.ndarray:
    try:
        v = np.array([float(t) for t in text.split(",")])
    except ValueError:
        raise ValidationError(f"bad vector {text!r}; expected comma-separated floats")
    return v


def _constraint_from_args(args) -> ConstraintSet:
    kind = args.constraint
    if kind == "full":
        return ConstraintSet()
    if kind == "hemisphere":
        if not args.ref:
            raise ValidationError("--constraint hemisphere needs --ref")
        ref = _parse_vector(args.ref)
        return ConstraintSet(kind="hemisphere", reference=ref / np.linalg.norm(ref))
    if args.component is None or args.bound is None:
        raise ValidationError("--constraint component-bound needs --component and --bound")
    return ConstraintSet(kind="component-bound", component=args.component, bound=args.bound)


def _estimate(data: Dataset, method: str, constraint: ConstraintSet, reference):
    if method == "sweep":
        return argmax_sweep_2d(data, constraint, reference=reference)
    if method == "enumerate":
        return argmax_enumerate(data, constraint, reference=reference)
    raise ValidationError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# subcommands

def _cmd_simulate(args) -> int:
    spec = DgpSpec(variant=args.dgp)
    n2 = args.n2 if args.n2 is not None else args.n
    data = materialize(spec, MultiIndexGrid((args.n, n2)), args.seed)
    save_dataset(data, args.out, args.force)
    return 0


def _cmd_estimate(args) -> int:
    data, info = load_dataset(args.data, y01=args.y01)
    constraint = _constraint_from_args(args)
    reference = _parse_vector(args.theta_ref) if args.theta_ref else None
    if reference is not None:
        reference = reference / np.linalg.norm(reference)
    est = _estimate(data, args.method, constraint, reference)
    report = {
        "command": "estimate",
        "config": {
            "data": args.data, "method": args.method, "constraint": args.constraint,
            "ref": args.ref, "component": args.component, "bound": args.bound, "y01": args.y01,
            "theta_ref": args.theta_ref,
        },
        "dataset": info,
        "beta_hat": est.beta_hat,
        "theta_hat": est.theta_hat,
        "objective": est.objective,
        "candidates_evaluated": est.candidates_evaluated,
        "method": est.method,
    }
    _emit_json(report, args.out, args.force)
    return 0


def _cmd_bootstrap(args) -> int:
    data, info = load_dataset(args.data, y01=args.y01)
    spec = WeightSpec(distribution=args.distribution, B=args.B)
    levels = tuple(float(t) for t in args.levels.split(","))
    reference = _parse_vector(args.theta_ref) if args.theta_ref else None
    if reference is not None:
        reference = reference / np.linalg.norm(reference)
    rep = bootstrap_estimate(
        data, spec, optimizer=args.method, constraint=_constraint_from_args(args),
        seed=args.seed, reference=reference, levels=levels,
    )
    report = {
        "command": "bootstrap",
        "config": {
            "data": args.data, "distribution": args.distribution, "B": args.B,
            "levels": list(levels), "seed": args.seed, "method": args.method,
            "constraint": args.constraint, "ref": args.ref,
            "component": args.component, "bound": args.bound,
            "y01": args.y01, "theta_ref": args.theta_ref,
        },
        "dataset": info,
        "beta_hat": rep.beta_hat,
        "theta_hat": rep.theta_hat,
        "reference": rep.reference,
        "variance_hat": rep.variance_hat,
        "n": rep.n,
        "intervals": {
            str(level): [
                {"percentile": list(c["percentile"]), "symmetric": list(c["symmetric"])}
                for c in coords
            ]
            for level, coords in rep.intervals.items()
        },
    }
    _emit_json(report, args.out, args.force)
    if args.draws_out:
        rows = [
            [b + 1, *map(float, rep.theta_star[b]), *map(float, rep.beta_star[b])]
            for b in range(spec.B)
        ]
        header = ["replicate"] + [f"theta{j+1}" for j in range(rep.theta_star.shape[1])] \
            + [f"beta{j+1}" for j in range(rep.beta_star.shape[1])]
        _emit_csv(rows, header, args.draws_out, args.force)
    return 0


_CONFIG_SCHEMA = {
    "study": str, "variant": str, "sizes": str, "reps": int, "seed": int,
    "layout": str, "workers": int, "levels": str,
    "bootstrap_distribution": str, "bootstrap_B": int,
}
_CONFIG_DEFAULTS = {
    "seed": 0, "layout": "square", "workers": 1, "levels": "0.9",
    "bootstrap_distribution": "exponential1", "bootstrap_B": 200,
}


def _parse_config(path: str) -> dict:
    """Flat key=value config file; '#' starts a comment."""
    if not os.path.exists(path):
        raise ValidationError(f"no such file: {path}")
    raw = dict(_CONFIG_DEFAULTS)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{lineno}: expected key=value")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key not in _CONFIG_SCHEMA:
                raise ValidationError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                raw[key] = _CONFIG_SCHEMA[key](value)
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: bad value for {key}") from None
    for key in ("study", "variant", "sizes", "reps"):
        if key not in raw:
            raise ValidationError(f"{path}: missing required key {key!r}")
    return raw


def _cmd_montecarlo(args) -> int:
    raw = _parse_config(args.config)
    study = raw["study"]
    if study not in ("rate", "normality", "coverage"):
        raise ValidationError(f"unknown study {raw['study']!r}")
    wspec = None
    if study == "coverage":
        wspec = WeightSpec(distribution=raw["bootstrap_distribution"], B=raw["bootstrap_B"])
    config = ExperimentConfig(
        variant=raw["variant"],
        sizes=tuple(int(t) for t in str(raw["sizes"]).split(",")),
        reps=raw["reps"],
        seed=raw["seed"],
        layout=raw["layout"],
        workers=raw["workers"],
        bootstrap=wspec,
        levels=tuple(float(t) for t in str(raw["levels"]).split(",")),
    )
    # worker count is an execution detail; keeping it out of the report makes
    # outputs byte-identical across parallelism degrees
    base = {"command": "montecarlo", "config": {k: v for k, v in raw.items() if k != "workers"}}
    csv_path = args.out + ".csv"
    json_path = args.out + ".json"
    if study == "rate":
        rep = run_rate_study(config)
        rows = [
            [n, float(rt), float(ra), int(c)]
            for n, rt, ra, c in zip(rep.sizes, rep.rmse_theta, rep.rmse_angle, rep.reps_done)
        ]
        _emit_csv(rows, ["n", "rmse_theta", "rmse_angle", "reps_done"], csv_path, args.force)
        base.update({"slope": rep.slope, "slope_se": rep.slope_se,
                     "sizes": list(rep.sizes), "rmse_theta": rep.rmse_theta,
                     "rmse_angle": rep.rmse_angle, "reps_done": list(rep.reps_done)})
    elif study == "normality":
        rep = run_normality_study(config)
        rows = [[float(a), float(b)] for a, b in rep.qq]
        _emit_csv(rows, ["normal_quantile", "sample_quantile"], csv_path, args.force)
        base.update({"n": rep.n, "sd": rep.sd, "ks_stat": rep.ks_stat,
                     "p_value": rep.p_value, "degenerate": rep.degenerate,
                     "reps_done": rep.reps_done})
    else:
        rep = run_coverage_study(config)
        rows = [
            [float(level), rep.coverage[level], rep.coverage_se[level], rep.avg_length[level]]
            for level in rep.levels
        ]
        _emit_csv(rows, ["level", "coverage", "coverage_se", "avg_length"], csv_path, args.force)
        base.update({
            "levels": list(rep.levels),
            "coverage": {str(k): v for k, v in rep.coverage.items()},
            "coverage_se": {str(k): v for k, v in rep.coverage_se.items()},
            "avg_length": {str(k): v for k, v in rep.avg_length.items()},
            "ks_distance": rep.ks_distance,
            "reps_done": rep.reps_done,
        })
    _emit_json(base, json_path, args.force)
    return 0


def _cmd_hoeffding_check(args) -> int:
    spec = DgpSpec(variant=args.dgp)
    n2 = args.n2 if args.n2 is not None else args.n
    data = materialize(spec, MultiIndexGrid((args.n, n2)), args.seed)
    if args.dgp == "discrete-test":
        f = lambda br, bc, bl: br + bc + bl - 1.5
        mode = "exact"
        f_name = "bit-sum centered"
    else:
        f = lambda y, x: y
        mode = "mc"
        f_name = "label"
    table = decompose(data, spec, f, mode=mode, draws=args.draws, seed=args.seed)
    report = {
        "command": "hoeffding-check",
        "config": {"dgp": args.dgp, "n": args.n, "n2": n2, "seed": args.seed,
                   "mode": mode, "draws": args.draws, "functional": f_name},
        "sample_mean": table.sample_mean,
        "population_mean": table.population_mean,
        "residual": table.residual,
        "h": {str(p): v for p, v in table.h.items()},
        "se": {str(p): v for p, v in table.se.items()},
    }
    _emit_json(report, args.out, args.force)
    return 0


def _cmd_oracle(args) -> int:
    spec = DgpSpec(variant=args.dgp)
    lam = tuple(float(t) for t in args.lam.split(","))
    quad = QuadratureSpec(nodes=args.nodes)
    orc = oracle_variance(spec, lam=lam, u_draws=args.u_draws, seed=args.seed, quad=quad)
    report = {
        "command": "oracle",
        "config": {"dgp": args.dgp, "lambda": list(lam), "u_draws": args.u_draws,
                   "seed": args.seed, "nodes": args.nodes,
                   "radius_sd": quad.radius_sd},
        "hessian": orc.hessian,
        "omega": orc.omega,
        "v": orc.v,
        "omega_se": orc.omega_se,
        "v_se": orc.v_se,
    }
    _emit_json(report, args.out, args.force)
    return 0


# ---------------------------------------------------------------------------
# argument wiring

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maxscore",
        description="Maximum score estimation for multiway-clustered binary choice",
    )
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("simulate", help="generate a dataset from a built-in DGP")
    p.add_argument("--dgp", required=True, choices=VARIANTS)
    p.add_argument("--n", type=int, required=True, help="rows (N1)")
    p.add_argument("--n2", type=int, default=None, help="columns (N2), default n")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(fn=_cmd_simulate)

    def estimation_flags(p):
        p.add_argument("--data", required=True)
        p.add_argument("--method", default="sweep", choices=("sweep", "enumerate"))
        p.add_argument("--constraint", default="full",
                       choices=("full", "hemisphere", "component-bound"))
        p.add_argument("--ref", default=None, help="constraint reference, e.g. 1,0")
        p.add_argument("--component", type=int, default=None,
                       help="0-based coordinate for component-bound")
        p.add_argument("--bound", type=float, default=None)
        p.add_argument("--theta-ref", default=None,
                       help="chart reference for theta extraction")
        p.add_argument("--y01", action="store_true", help="labels are {0,1}")
        p.add_argument("--out", default=None)
        p.add_argument("--force", action="store_true")

    p = sub.add_parser("estimate", help="maximize the score objective exactly")
    estimation_flags(p)
    p.set_defaults(fn=_cmd_estimate)

    p = sub.add_parser("bootstrap", help="multiplier bootstrap inference")
    estimation_flags(p)
    p.add_argument("--distribution", default="exponential1",
                   choices=("exponential1", "poisson1"))
    p.add_argument("--B", type=int, default=500)
    p.add_argument("--levels", default="0.9,0.95")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--draws-out", default=None, help="CSV of bootstrap draws")
    p.set_defaults(fn=_cmd_bootstrap)

    p = sub.add_parser("montecarlo", help="run a simulation study from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output prefix (.json and .csv)")
    p.add_argument("--force", action="store_true")
    p.set_defaults(fn=_cmd_montecarlo)

    p = sub.add_parser("hoeffding-check", help="latent-pattern decomposition table")
    p.add_argument("--dgp", required=True, choices=VARIANTS)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--n2", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--draws", type=int, default=1000)
    p.add_argument("--out", default=None)
    p.add_argument("--force", action="store_true")
    p.set_defaults(fn=_cmd_hoeffding_check)

    p = sub.add_parser("oracle", help="asymptotic variance constants")
    p.add_argument("--dgp", required=True, choices=("mult-scale", "add-shock"))
    p.add_argument("--lambda", dest="lam", default="1,1")
    p.add_argument("--u-draws", type=int, default=10**4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--nodes", type=int, default=512)
    p.add_argument("--out", default=None)
    p.add_argument("--force", action="store_true")
    p.set_defaults(fn=_cmd_oracle)

    return parser


def run_command(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.fn(args)
    except (ValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))
