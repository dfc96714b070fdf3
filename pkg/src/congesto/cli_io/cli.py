"""Command-line entry points: laws, simulate, sweep, check.

``laws`` tabulates the constitutive laws over a density grid, ``simulate``
integrates one configured scenario and persists its time series, snapshots,
and manifest, ``sweep`` runs a parameter ladder and fits decay rates, and
``check`` runs the named invariant suite.  Every simulation or sweep writes a
``manifest.json`` from which the run can be reproduced bit-for-bit.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from dataclasses import replace

import numpy as np

from .. import constitutive as laws_mod
from ..diagnostics import TIMESERIES_COLUMNS
from ..errors import CongestoError
from ..limits import run_sweep, write_rates_csv
from ..solver import run
from .config import (
    RunConfig,
    load_run_input,
    scenario_from_config,
    scenario_kwargs,
    write_manifest,
)
from .snapshots import write_snapshot

LAW_COLUMNS = ("rho", "mu", "mu1", "dmu", "lambda", "pi", "dpi", "rho_e")

__all__ = ["LAW_COLUMNS", "main", "write_laws_csv", "write_timeseries_csv"]


def write_timeseries_csv(series: dict, path) -> None:
    """Write the per-step diagnostic series in the canonical column order."""
    rows = np.column_stack([series[c] for c in TIMESERIES_COLUMNS])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TIMESERIES_COLUMNS)
        for row in rows:
            writer.writerow(["%.17g" % v for v in row])


def write_laws_csv(p, rhos, path) -> None:
    """Tabulate every law over a density grid, one row per density."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(LAW_COLUMNS)
        for rho in rhos:
            s = laws_mod.sample_laws(rho, p)
            writer.writerow(
                "%.17g" % v
                for v in (s.rho, s.mu, s.mu1, s.dmu, s.lam, s.pi, s.dpi, s.rho_e)
            )


def _cmd_laws(args) -> int:
    p = laws_mod.ConstitutiveParams(
        eps=args.eps, a=args.a, gamma=args.gamma,
        phi_star=args.phi_star, delta=args.delta,
    )
    hi = args.max_ratio * p.phi_star
    rhos = np.linspace(hi / args.samples, hi, args.samples)
    write_laws_csv(p, rhos, args.out)
    print(f"wrote {args.samples} law samples up to rho/phi* = {args.max_ratio} to {args.out}")
    return 0


def _cmd_simulate(args) -> int:
    cfg = load_run_input(args.config)
    overrides = {}
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.snapshots is not None:
        overrides["snapshots"] = args.snapshots
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        cfg = replace(cfg, **overrides)
    os.makedirs(cfg.out_dir, exist_ok=True)
    scenario = scenario_from_config(cfg)
    traj = run(scenario)
    write_timeseries_csv(traj.series, os.path.join(cfg.out_dir, "timeseries.csv"))
    for i, state in enumerate(traj.states):
        write_snapshot(state, os.path.join(cfg.out_dir, f"snap_{i:04d}.cgsf"))
    write_manifest(os.path.join(cfg.out_dir, "manifest.json"), cfg, command="simulate")
    s = traj.series
    print(
        f"{cfg.scenario}: {len(s['t']) - 1} steps to t = {s['t'][-1]:.6g}, "
        f"max rho/phi* = {np.max(s['max_rho_ratio']):.6f}, "
        f"{len(traj.states)} snapshots in {cfg.out_dir}"
    )
    return 0


def _parse_values(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _cmd_sweep(args) -> int:
    if args.config is not None:
        cfg = load_run_input(args.config)
        if args.scenario is not None:
            cfg = replace(cfg, scenario=args.scenario)
    else:
        if args.scenario is None:
            print("sweep needs --scenario or --config", file=sys.stderr)
            return 2
        cfg = RunConfig(scenario=args.scenario, eps=0.05)
    cfg = replace(cfg, out_dir=args.out)
    os.makedirs(cfg.out_dir, exist_ok=True)
    grid = cfg.grid()
    records, fits = run_sweep(
        cfg.scenario, grid, cfg.flow(), args.param, _parse_values(args.values),
        cfg.out_dir, scenario_kwargs=scenario_kwargs(cfg, grid),
    )
    write_rates_csv(fits, os.path.join(cfg.out_dir, "rates.csv"))
    write_manifest(
        os.path.join(cfg.out_dir, "manifest.json"), cfg, command="sweep",
        extra={"sweep": {"param": args.param, "values": _parse_values(args.values)}},
    )
    for r in records:
        print(
            f"{r.param_name} = {r.param_value:<10g} peak_excl = {r.peak_excl_resid:.6e}  "
            f"avg_div = {r.avg_div_on_congested:.6e}  overshoot = {r.entropy_overshoot:.3e}"
        )
    for fit in fits.values():
        flag = "" if fit.reliable else "  (unreliable fit)"
        print(f"rate {fit.metric}: slope {fit.slope:.4f}, residual {fit.residual:.4f}{flag}")
    print(f"sweep.csv, rates.csv, manifest.json in {cfg.out_dir}")
    return 0


def _cmd_check(_args) -> int:
    from .checks import run_checks

    return 1 if run_checks() else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="congesto",
        description="Singular-viscosity congested-flow simulator on the 2D torus.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_laws = sub.add_parser("laws", help="tabulate the constitutive laws to CSV")
    p_laws.add_argument("--eps", type=float, required=True, help="stiffness parameter")
    p_laws.add_argument("--a", type=float, default=2.0, help="singularity exponent (> 1)")
    p_laws.add_argument("--gamma", type=float, default=1.0, help="pressure density exponent")
    p_laws.add_argument("--phi-star", type=float, default=0.64, dest="phi_star",
                        help="maximal packing fraction")
    p_laws.add_argument("--delta", type=float, default=0.0, help="truncation width")
    p_laws.add_argument("--samples", type=int, default=200, help="number of density samples")
    p_laws.add_argument("--max-ratio", type=float, default=0.99, dest="max_ratio",
                        help="largest rho/phi* sampled")
    p_laws.add_argument("--out", default="laws.csv", help="output CSV path")
    p_laws.set_defaults(fn=_cmd_laws)

    p_sim = sub.add_parser("simulate", help="integrate one configured scenario")
    p_sim.add_argument("--config", required=True,
                       help="key=value config file or a manifest.json")
    p_sim.add_argument("--out", default=None, help="output directory (overrides config)")
    p_sim.add_argument("--snapshots", type=int, default=None,
                       help="stored snapshot count (overrides config)")
    p_sim.add_argument("--seed", type=int, default=None,
                       help="scenario rng seed (overrides config)")
    p_sim.set_defaults(fn=_cmd_simulate)

    p_sweep = sub.add_parser("sweep", help="run a decreasing parameter ladder")
    p_sweep.add_argument("--param", required=True, choices=("eps", "delta", "theta"))
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated strictly decreasing values")
    p_sweep.add_argument("--scenario", default=None, help="scenario name")
    p_sweep.add_argument("--config", default=None,
                         help="base config for grid and flow parameters")
    p_sweep.add_argument("--out", required=True, help="output directory")
    p_sweep.set_defaults(fn=_cmd_sweep)

    p_check = sub.add_parser("check", help="run the named invariant suite")
    p_check.set_defaults(fn=_cmd_check)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except CongestoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
