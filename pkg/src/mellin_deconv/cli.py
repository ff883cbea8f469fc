"""Command-line front end: ``mellin-deconv <subcommand> ...``."""

from __future__ import annotations

import argparse
import os
import sys
from typing import Sequence

import numpy as np

from . import harness
from .distributions import ProductModel, SampleMatrix, parse_model
from .estimator import DensityEstimate
from .harness import ExperimentConfig, dump_config, fmt_float, load_config
from .quadrature import MellinContext, QuadratureConfig
from .selection import SelectionConfig, select_cutoff


def read_dataset(path: str) -> SampleMatrix:
    """Headered CSV of positive reals, one observation per row."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return SampleMatrix(data)


def _noise(specs: Sequence[str], d: int) -> ProductModel:
    specs = list(specs) or ["none()"]
    if len(specs) == 1 and d > 1:
        specs = specs * d
    if len(specs) != d:
        raise ValueError(f"dataset has {d} columns but {len(specs)} noise specs were given")
    return ProductModel([parse_model(s) for s in specs])


def _vector(values, d: int, name: str) -> list[float]:
    values = [float(v) for v in values]
    if len(values) == 1 and d > 1:
        values = values * d
    if len(values) != d:
        raise ValueError(f"{name} needs 1 or {d} values")
    return values


def _quad(args) -> QuadratureConfig:
    changes = {}
    if args.step_t is not None:
        changes["step_t"] = args.step_t
    if args.points_per_decade is not None:
        changes["points_per_decade"] = args.points_per_decade
    if args.tol_zero is not None:
        changes["tol_zero"] = args.tol_zero
    return QuadratureConfig(**changes)


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", newline="\n"), True


def cmd_estimate(args) -> int:
    Y = read_dataset(args.data)
    d = Y.d
    ctx = MellinContext(_vector(args.c, d, "--c"))
    noise = _noise(args.noise, d)
    est = DensityEstimate(Y, noise, ctx, _vector(args.k, d, "--k"), _quad(args))
    if args.points:
        pts = np.loadtxt(args.points, delimiter=",", skiprows=1, ndmin=2)
    else:
        lo, hi = args.range if args.range else (np.quantile(Y, 0.001, axis=0).min(), np.quantile(Y, 0.999, axis=0).max())
        axis = np.linspace(lo, hi, args.eval_points)
        mesh = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1)
        pts = mesh.reshape(-1, d)
    vals = est.on_grid(pts)
    fh, close = _open_out(args.out)
    try:
        fh.write(",".join([f"x{j + 1}" for j in range(d)] + ["estimate"]) + "\n")
        for p, v in zip(pts, vals):
            fh.write(",".join([fmt_float(x) for x in p] + [fmt_float(v)]) + "\n")
    finally:
        if close:
            fh.close()
    return 0


def cmd_select(args) -> int:
    Y = read_dataset(args.data)
    d = Y.d
    ctx = MellinContext(_vector(args.c, d, "--c"))
    noise = _noise(args.noise, d)
    config = SelectionConfig(chi1=args.chi1, chi2=args.chi2, grid_cap=args.grid_cap)
    trace, _ = select_cutoff(Y, noise, ctx, config, _quad(args))
    fh, close = _open_out(args.out)
    try:
        fh.write(",".join([f"k{j + 1}" for j in range(d)] + ["v_hat", "a_hat", "objective", "selected"]) + "\n")
        for k, v, a, obj, chosen in trace.rows():
            fh.write(",".join([*map(str, k), fmt_float(v), fmt_float(a), fmt_float(obj), str(int(chosen))]) + "\n")
    finally:
        if close:
            fh.close()
    print(f"selected k = {trace.k_selected}, sigma_hat = {fmt_float(trace.sigma_hat)}", file=sys.stderr)
    return 0


def _load_with_overrides(args) -> ExperimentConfig:
    config = load_config(args.config)
    changes = {}
    for key in ("n", "replicates", "seed", "workers"):
        value = getattr(args, key, None)
        if value is not None:
            changes[key] = value
    if getattr(args, "out", None):
        changes["outputs"] = args.out
    return config.with_(**changes) if changes else config


def cmd_simulate(args) -> int:
    config = _load_with_overrides(args)
    outdir = config.outputs or os.path.join("runs", config.name)
    report = harness.run_experiment(config)
    report.write(outdir, plot_script=args.plot_script)
    summary = report.summary()
    print(
        f"{config.name}: {summary['replicates']} replicates, median risk {fmt_float(summary['risk_median'])}, "
        f"wall time {report.wall_time:.1f}s -> {outdir}",
        file=sys.stderr,
    )
    return 0


def cmd_rates(args) -> int:
    config = _load_with_overrides(args)
    table = harness.rate_study(config, args.n_list, n_boot=args.bootstrap)
    out = args.table or "-"
    if out == "-":
        sys.stdout.write("n,mean_risk,median_risk\n")
        for n, mean, med in table.rows():
            sys.stdout.write(f"{n},{fmt_float(mean)},{fmt_float(med)}\n")
        sys.stdout.write(f"# slope,{fmt_float(table.slope)}\n")
        sys.stdout.write(f"# slope_ci95,{fmt_float(table.slope_ci[0])},{fmt_float(table.slope_ci[1])}\n")
    else:
        table.write(out)
    return 0


def cmd_transforms(args) -> int:
    rows = harness.transforms_report(args.model, args.c, args.t)
    fh, close = _open_out(args.out)
    try:
        fh.write("t,closed_re,closed_im,quad_re,quad_im,abs_diff\n")
        for t, exact, numeric, diff in rows:
            vals = [t, exact.real, exact.imag, numeric.real, numeric.imag, diff]
            fh.write(",".join(fmt_float(v) for v in vals) + "\n")
    finally:
        if close:
            fh.close()
    return 0


def cmd_recipe(args) -> int:
    panels = harness.figure_panels(args.figure)
    if args.all:
        chosen = panels
    else:
        if not 0 <= args.panel < len(panels):
            raise ValueError(f"{args.figure} has panels 0..{len(panels) - 1}")
        chosen = [panels[args.panel]]
    if args.out and len(chosen) > 1:
        os.makedirs(args.out, exist_ok=True)
        for cfg in chosen:
            dump_config(cfg, os.path.join(args.out, f"{cfg.name}.yaml"))
        return 0
    text = "---\n".join(dump_config(cfg) for cfg in chosen)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _add_quad_flags(p):
    p.add_argument("--step-t", type=float, help="frequency grid spacing (default 0.05)")
    p.add_argument("--points-per-decade", type=int, help="spatial grid density")
    p.add_argument("--tol-zero", type=float, help="smallest admissible |M_c[g]|")


def _add_data_flags(p):
    p.add_argument("data", help="headered CSV of positive observations, one column per axis")
    p.add_argument("--noise", nargs="+", default=["none()"], help="noise spec per axis, e.g. 'uniform()'")
    p.add_argument("--c", nargs="+", type=float, default=[1.0], help="development point (one value or one per axis)")
    p.add_argument("--out", "-o", help="output CSV (default stdout)")
    _add_quad_flags(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mellin-deconv", description="Multiplicative deconvolution by spectral cut-off in the Mellin domain."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="density estimate at fixed cut-off")
    _add_data_flags(p)
    p.add_argument("--k", nargs="+", type=float, required=True, help="cut-off (one value or one per axis)")
    p.add_argument("--points", help="headered CSV of evaluation points")
    p.add_argument("--range", nargs=2, type=float, metavar=("LO", "HI"), help="evaluation range per axis")
    p.add_argument("--eval-points", type=int, default=400, help="points per axis (default 400)")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("select", help="data-driven cut-off selection trace")
    _add_data_flags(p)
    p.add_argument("--chi1", type=float, default=1.2)
    p.add_argument("--chi2", type=float)
    p.add_argument("--grid-cap", type=int, default=50)
    p.set_defaults(func=cmd_select)

    for name, func, helptext in (
        ("simulate", cmd_simulate, "Monte-Carlo run from a config file"),
        ("rates", cmd_rates, "risk versus sample size"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("config", help="YAML experiment config")
        p.add_argument("--n", type=int)
        p.add_argument("--replicates", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--out", "-o", help="output directory (overrides 'outputs')")
        p.set_defaults(func=func)
        if name == "simulate":
            p.add_argument("--plot-script", action="store_true", help="also write a gnuplot script")
        else:
            p.add_argument("--n-list", nargs="+", type=int, required=True)
            p.add_argument("--bootstrap", type=int, default=1000)
            p.add_argument("--table", help="rate table CSV (default stdout)")

    p = sub.add_parser("transforms", help="closed-form vs quadrature Mellin transform table")
    p.add_argument("model", help="model spec, e.g. 'gamma(shape=4,scale=2)'")
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--t", nargs="+", type=float, default=[-5, -2, -1, 0, 1, 2, 5])
    p.add_argument("--out", "-o")
    p.set_defaults(func=cmd_transforms)

    p = sub.add_parser("recipe", help="emit a canned figure configuration")
    p.add_argument("figure", help="fig1, fig2, fig4, fig5 or fig6")
    p.add_argument("--panel", type=int, default=0)
    p.add_argument("--all", action="store_true", help="emit every panel")
    p.add_argument("--out", "-o")
    p.set_defaults(func=cmd_recipe)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FloatingPointError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
