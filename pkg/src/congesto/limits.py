"""Stiffness-limit probes and the parameter-sweep harness.

Three small pure functions turn the laws' limiting behavior into checkable
numbers: ``regime_product`` evaluates the exclusion product (1 - rho/phi*) *
mu1 along prescribed near-packing scalings rho = phi*(1 - eps**s);
``incompressible_profile`` and friends evaluate the pressure expansion around
the uniform-pressure density profile.  ``run_sweep`` integrates a scenario
family across a decreasing parameter ladder, records congestion metrics per
member, writes the final singular-pressure field of each run to disk, and fits
log-log decay rates across the ladder.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import FIRST_EXCEPTION, ProcessPoolExecutor, wait
from dataclasses import dataclass, replace

import numpy as np

from . import constitutive as laws
from .constitutive import ConstitutiveParams
from .cli_io.config import worker_count
from .cli_io.snapshots import write_fields
from .diagnostics import CongestionMetrics, FlowParams, congestion_metrics
from .errors import DomainError, RateFitError, SweepError
from .fields import PeriodicGrid2D
from .solver import SolverNumerics, build_scenario, run

SWEEP_PARAMS = ("eps", "delta", "theta")

__all__ = [
    "MassWindow",
    "RateFit",
    "SWEEP_PARAMS",
    "SweepRecord",
    "expansion_first_order_coeff",
    "fit_rate",
    "incompressible_expansion_residual",
    "incompressible_profile",
    "mass_window_bounds",
    "mass_window_check",
    "regime_product",
    "run_sweep",
    "write_rates_csv",
    "write_sweep_csv",
]


# ---------------------------------------------------------------------------
# pointwise limit probes
# ---------------------------------------------------------------------------


def regime_product(eps: float, s: float, p: ConstitutiveParams) -> float:
    """Exclusion product (1 - rho/phi*) * mu1(rho) at rho = phi*(1 - eps**s).

    Equals phi*(1 - eps**s) * eps**a * (e**X - 1)/X with X = eps**(1 + a - s),
    so it decays like eps**a for every scaling exponent s in (0, 1 + a].  For
    s > 1 + a the exponent X blows up; past X = 700 the law itself raises an
    overflow error rather than returning a meaningless huge float.
    """
    if not 0.0 < eps < 0.5:
        raise DomainError(f"constraint 0 < eps < 0.5 violated: eps = {eps}")
    if s <= 0.0:
        raise DomainError(f"constraint s > 0 violated: s = {s}")
    q = replace(p, eps=eps)
    rho = q.phi_star * (1.0 - eps**s)
    gap = 1.0 - rho / q.phi_star
    return float(gap * laws.mu1_eps(np.float64(rho), q))


def incompressible_profile(eps: float, pi0, p: ConstitutiveParams):
    """Density profile rho = phi*(1 - eps**a phi*/pi0) with pressure near pi0.

    pi0 may be a positive scalar or array.  Requires eps**a phi* < pi0 so the
    profile stays strictly below packing.
    """
    q = replace(p, eps=eps)
    pi0 = np.asarray(pi0, dtype=np.float64)
    if np.any(pi0 <= 0.0):
        raise DomainError("constraint pi0 > 0 violated")
    slack = 1.0 - eps**q.a * q.phi_star / pi0
    if np.any(slack <= 0.0):
        raise DomainError(
            f"positivity condition 1 - eps**a*phi_star/pi0 > 0 violated: "
            f"eps = {eps}, min pi0 = {np.min(pi0)}"
        )
    rho = q.phi_star * slack
    return float(rho) if rho.ndim == 0 else rho


def expansion_first_order_coeff(eps: float, pi0: float, p: ConstitutiveParams) -> float:
    """First-order pressure coefficient (pi(rho_eps) - pi0)/eps.

    Converges to pi0**2/(2 phi*) as eps -> 0: expanding pi at the profile
    density gives pi = pi0 + eps*pi0**2/(2 phi*) + O(eps**min(2, a)).
    """
    q = replace(p, eps=eps)
    rho = incompressible_profile(eps, pi0, q)
    return float((laws.pi_eps(np.float64(rho), q) - pi0) / eps)


def incompressible_expansion_residual(eps: float, pi0: float, p: ConstitutiveParams) -> float:
    """Remainder |pi(rho_eps) - pi0 - eps*pi0**2/(2 phi*)| of the expansion.

    Decays like eps**min(2, a): the eps**2 term of the exponential series and
    the eps**a correction from gamma * log(rho/phi*) compete for second order.
    """
    q = replace(p, eps=eps)
    rho = incompressible_profile(eps, pi0, q)
    first = eps * pi0**2 / (2.0 * q.phi_star)
    return float(abs(laws.pi_eps(np.float64(rho), q) - pi0 - first))


# ---------------------------------------------------------------------------
# rate fits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RateFit:
    """Least-squares log-log decay rate of one metric across a ladder.

    x_space "log" fits log(value) against log(param); "neg_log" fits against
    log(-log(param)) for truncation ladders whose bounds are logarithmic in
    the parameter.  A fit with rms residual above 0.1 is flagged unreliable
    and must not be used to pass a rate check.
    """

    metric: str
    params: tuple[float, ...]
    values: tuple[float, ...]
    slope: float
    residual: float
    x_space: str = "log"

    @property
    def reliable(self) -> bool:
        return self.residual <= 0.1


def fit_rate(params, values, *, metric: str = "metric", x_space: str = "log") -> RateFit:
    """Fit a log-log slope across a strictly decreasing parameter ladder."""
    params = tuple(float(v) for v in params)
    values = tuple(float(v) for v in values)
    if len(params) != len(values):
        raise RateFitError(
            f"{metric}: {len(params)} params but {len(values)} values"
        )
    if len(params) < 3:
        raise RateFitError(f"{metric}: rate fit needs >= 3 points, got {len(params)}")
    if any(b >= a for a, b in zip(params, params[1:])):
        raise RateFitError(f"{metric}: params must be strictly decreasing: {params}")
    if params[-1] <= 0.0:
        raise RateFitError(f"{metric}: params must be positive: {params}")
    if any(v <= 0.0 or not np.isfinite(v) for v in values):
        raise RateFitError(
            f"{metric}: values must be positive and finite for a log-log fit: {values}"
        )
    if x_space == "log":
        x = np.log(params)
    elif x_space == "neg_log":
        if params[0] >= 1.0:
            raise RateFitError(
                f"{metric}: neg_log fits need params < 1, got {params}"
            )
        x = np.log(-np.log(params))
    else:
        raise RateFitError(f"{metric}: unknown x_space {x_space!r}")
    y = np.log(values)
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return RateFit(
        metric=metric,
        params=params,
        values=values,
        slope=float(slope),
        residual=resid,
        x_space=x_space,
    )


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRecord:
    """Congestion summary of one sweep member.

    peak_excl_resid is the run maximum of ||(1 - rho/phi*) pi||_inf,
    avg_div_on_congested the trapezoid time average of max|div u| over the
    congested set, entropy_overshoot the relative excursion of the entropy
    budget above its initial value, and peak_congested_fraction the run
    maximum of the congested-set area fraction.  pi_snapshot points at the
    final singular-pressure field on disk.
    """

    param_name: str
    param_value: float
    scenario: str
    final_metrics: CongestionMetrics
    peak_excl_resid: float
    avg_div_on_congested: float
    entropy_overshoot: float
    peak_congested_fraction: float
    pi_snapshot: str

    def __post_init__(self):
        if self.param_name not in SWEEP_PARAMS:
            raise SweepError(
                f"param_name must be one of {SWEEP_PARAMS}, got {self.param_name!r}"
            )
        if self.param_value <= 0.0:
            raise SweepError(f"constraint param_value > 0 violated: {self.param_value}")
        if not os.path.exists(self.pi_snapshot):
            raise SweepError(f"pi snapshot {self.pi_snapshot!r} does not exist")


def _member_flow(flow: FlowParams, param_name: str, value: float) -> FlowParams:
    if param_name == "eps":
        return replace(flow, cons=replace(flow.cons, eps=value))
    if param_name == "delta":
        return replace(flow, cons=replace(flow.cons, delta=value))
    if param_name == "theta":
        return replace(flow, theta=value)
    raise SweepError(f"param_name must be one of {SWEEP_PARAMS}, got {param_name!r}")


def _run_member(job) -> SweepRecord:
    """Integrate one sweep member and summarize it (top level: pickles)."""
    (scenario_name, grid, flow, param_name, value, eta, ordering,
     numerics, scenario_kwargs, out_dir) = job
    member_flow = _member_flow(flow, param_name, value)
    scenario = build_scenario(scenario_name, grid, member_flow, **scenario_kwargs)
    traj = run(scenario, numerics, snapshots=2, eta=eta, ordering=ordering)
    s = traj.series
    t = s["t"]
    span = t[-1] - t[0]
    avg_div = float(np.trapezoid(s["div_on_congested"], t) / span) if span > 0 else 0.0
    total = s["total_lhs"]
    overshoot = float(max(0.0, np.max(total / total[0]) - 1.0))
    final = traj.final
    metrics = congestion_metrics(final.rho, final.u, member_flow.cons, eta)
    pi = laws.pi_eps(final.rho.values, member_flow.cons)
    path = os.path.join(out_dir, f"pi_{param_name}_{value:.6g}.cgsf")
    write_fields(
        path, grid, {"pi": pi}, t=final.t, phi_star=member_flow.cons.phi_star
    )
    return SweepRecord(
        param_name=param_name,
        param_value=value,
        scenario=scenario_name,
        final_metrics=metrics,
        peak_excl_resid=float(np.max(s["excl_resid_pi"])),
        avg_div_on_congested=avg_div,
        entropy_overshoot=overshoot,
        peak_congested_fraction=float(np.max(s["congested_frac"])),
        pi_snapshot=path,
    )


def run_sweep(
    scenario_name: str,
    grid: PeriodicGrid2D,
    flow: FlowParams,
    param_name: str,
    values,
    out_dir,
    *,
    eta: float | None = None,
    ordering: str = "strang",
    numerics: SolverNumerics | None = None,
    scenario_kwargs: dict | None = None,
) -> tuple[list[SweepRecord], dict[str, RateFit]]:
    """Run one scenario across a decreasing parameter ladder and fit rates.

    Each member run gets the base flow with `param_name` replaced by its
    ladder value; everything else (grid, scenario, seeds) is held fixed.  The
    congested-set threshold eta defaults to 0.01, except on delta ladders
    where each member is measured at its own truncation width.  Completed
    records are appended to sweep.csv as they finish, so a member failure
    aborts the sweep but leaves every finished record and pi snapshot on
    disk (the raised error carries the completed records).

    Rate fits (ladders of >= 3 points): peak_excl_resid and
    avg_div_on_congested against the parameter, plus congested_overshoot
    against -log(delta) on delta ladders.  Metrics that vanish somewhere on
    the ladder get no fit (log of zero).
    """
    values = [float(v) for v in values]
    if not values:
        raise SweepError("sweep needs at least one parameter value")
    if any(b >= a for a, b in zip(values, values[1:])):
        raise SweepError(f"sweep values must be strictly decreasing: {values}")
    if values[-1] <= 0.0:
        raise SweepError(f"sweep values must be positive: {values}")
    if param_name not in SWEEP_PARAMS:
        raise SweepError(f"param_name must be one of {SWEEP_PARAMS}, got {param_name!r}")
    os.makedirs(out_dir, exist_ok=True)
    kwargs = dict(scenario_kwargs or {})
    jobs = [
        (
            scenario_name, grid, flow, param_name, value,
            (value if param_name == "delta" else 0.01) if eta is None else eta,
            ordering, numerics, kwargs, str(out_dir),
        )
        for value in values
    ]
    records: list[SweepRecord] = []
    csv_path = os.path.join(out_dir, "sweep.csv")
    workers = min(worker_count(), len(jobs))
    try:
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = {pool.submit(_run_member, job): job for job in jobs}
                done, pending = wait(futures, return_when=FIRST_EXCEPTION)
                by_value = {}
                failure = None
                for fut in done:
                    if fut.exception() is not None:
                        failure = (futures[fut][4], fut.exception())
                    else:
                        rec = fut.result()
                        by_value[rec.param_value] = rec
                for fut in pending:
                    fut.cancel()
                records = [by_value[v] for v in values if v in by_value]
                write_sweep_csv(records, csv_path)
                if failure is not None:
                    value, exc = failure
                    raise SweepError(
                        f"sweep member {param_name} = {value:g} failed: {exc}"
                    ) from exc
        else:
            for job in jobs:
                try:
                    records.append(_run_member(job))
                except Exception as exc:
                    write_sweep_csv(records, csv_path)
                    err = SweepError(
                        f"sweep member {param_name} = {job[4]:g} failed: {exc}"
                    )
                    raise err from exc
                write_sweep_csv(records, csv_path)
    except SweepError as exc:
        exc.records = records
        raise
    fits: dict[str, RateFit] = {}
    if len(records) >= 3:
        ladders = [
            ("peak_excl_resid", [r.peak_excl_resid for r in records], "log"),
            ("avg_div_on_congested", [r.avg_div_on_congested for r in records], "log"),
        ]
        if param_name == "delta":
            ladders.append(
                ("congested_overshoot",
                 [r.peak_congested_fraction for r in records], "neg_log")
            )
        for metric, series, x_space in ladders:
            if all(v > 0.0 for v in series):
                fits[metric] = fit_rate(values, series, metric=metric, x_space=x_space)
    return records, fits


_SWEEP_COLUMNS = (
    "param_name", "param_value", "scenario",
    "max_rho_ratio", "congested_fraction", "excl_resid_mu", "excl_resid_pi",
    "div_on_congested",
    "peak_excl_resid", "avg_div_on_congested", "entropy_overshoot",
    "peak_congested_fraction", "pi_snapshot",
)


def write_sweep_csv(records, path) -> None:
    """One row per record: ladder coordinates, final metrics, run summaries."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_SWEEP_COLUMNS)
        for r in records:
            m = r.final_metrics
            writer.writerow([
                r.param_name, "%.17g" % r.param_value, r.scenario,
                "%.17g" % m.max_rho_ratio, "%.17g" % m.congested_fraction,
                "%.17g" % m.excl_resid_mu, "%.17g" % m.excl_resid_pi,
                "%.17g" % m.div_on_congested,
                "%.17g" % r.peak_excl_resid, "%.17g" % r.avg_div_on_congested,
                "%.17g" % r.entropy_overshoot, "%.17g" % r.peak_congested_fraction,
                r.pi_snapshot,
            ])


def write_rates_csv(fits: dict[str, RateFit], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "slope", "residual"])
        for fit in fits.values():
            writer.writerow([fit.metric, "%.17g" % fit.slope, "%.17g" % fit.residual])


# ---------------------------------------------------------------------------
# mass window
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MassWindow:
    """Conserved-mass window check for near-packing starts."""

    passed: bool
    margin: float
    lower: float
    upper: float


def mass_window_bounds(
    eps: float, a: float, phi_star: float, pi0_min: float, area: float
) -> tuple[float, float]:
    """Window [phi*(1 - eps**a phi*/pi0_min)|O|, phi*|O|) for the total mass."""
    if pi0_min <= 0.0:
        raise DomainError(f"constraint pi0_min > 0 violated: {pi0_min}")
    slack = 1.0 - eps**a * phi_star / pi0_min
    if slack <= 0.0:
        raise DomainError(
            f"positivity condition 1 - eps**a*phi_star/pi0_min > 0 violated: "
            f"eps = {eps}, pi0_min = {pi0_min}"
        )
    return phi_star * slack * area, phi_star * area


def mass_window_check(traj, pi0_min: float | None = None) -> MassWindow:
    """Verify the total mass stays inside the near-packing window for all t.

    Only meaningful for the near-packing start: its density profile encodes
    the limit pressure, so the window's lower edge is the initial mass at the
    pressure minimum.  When pi0_min is not given it is recovered from the
    initial density (the profile is monotone in pi0).  The margin is the
    distance from the run's largest mass to the packing mass phi*|O|.
    """
    scenario = traj.scenario
    if scenario.name != "incompressible_start":
        raise DomainError(
            f"mass window applies to incompressible_start, got {scenario.name!r}"
        )
    cons = scenario.flow.cons
    if pi0_min is None:
        gap = 1.0 - float(np.min(scenario.rho0.values)) / cons.phi_star
        pi0_min = cons.eps**cons.a * cons.phi_star / gap
    area = scenario.grid.lx * scenario.grid.ly
    lower, upper = mass_window_bounds(cons.eps, cons.a, cons.phi_star, pi0_min, area)
    masses = traj.series["mass"]
    # tiny quadrature slack on the lower edge: the initial mass IS the bound
    tol = 1e-12 * upper
    passed = bool(np.all(masses >= lower - tol) and np.all(masses < upper))
    return MassWindow(
        passed=passed, margin=float(upper - np.max(masses)), lower=lower, upper=upper
    )
