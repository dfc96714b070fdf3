"""Time integration of the congested-flow system on the periodic grid.

Prognostic variables are density rho and momentum m = rho*u at cell centers.
One accepted step of size dt applies, in order:

(i)   explicit second-order (Heun) update of (rho, m) under convection and
      the pressure gradient (singular pressure plus artificial
      theta*rho**2/2), in divergence form so mass is conserved to rounding;
(ii)  a semi-implicit viscous solve for u with both viscosities frozen at
      the post-convection density -- a Crank-Nicolson-weighted system
      (rho - dt/2 L) u = rho u* + dt/2 L u*,
      L u = 2 div(mu D(u)) + grad(lambda div u), which is symmetric positive
      definite and solved by Jacobi-preconditioned conjugate gradients;
(iii) the pointwise exact implicit drag  u (1 + dt*r*|u|) = u*,  whose
      closed-form positive root contracts every cell's speed.

The time step follows a CFL rule on |u| + sqrt(dpi/rho + theta); it shrinks
automatically as the density approaches the packing threshold and the run
stalls (with an error, not silent corruption) if the step collapses.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import constitutive as laws
from .constitutive import ConstitutiveParams
from .diagnostics import FlowParams, RunningDiagnostics, TIMESERIES_COLUMNS
from .errors import (
    ConstraintBreachError,
    LinearSolveError,
    ScenarioError,
    StallError,
    VacuumError,
)
from .fields import (
    PeriodicGrid2D,
    ScalarField,
    VectorField2,
    d_dx,
    d_dy,
    project_divergence_free,
)

__all__ = [
    "FlowParams",
    "SolverNumerics",
    "SolverState",
    "Scenario",
    "Trajectory",
    "SCENARIO_NAMES",
    "make_state",
    "build_scenario",
    "compute_dt",
    "step",
    "run",
    "kinematic_run",
]


@dataclass(frozen=True)
class SolverNumerics:
    """Step-control and linear-solver knobs.

    dt_min and dt_max default to fixed fractions of the reference time
    min(lx, ly) (the domain crossing time at unit speed): dt_min = 1e-10 of
    it, dt_max a tenth of it.
    """

    cfl: float = 0.4
    dt_min_factor: float = 1e-10
    dt_max_factor: float = 0.1
    headroom_fraction: float = 0.25
    cg_tol: float = 1e-10
    cg_maxiter: int = 800
    max_steps: int = 2_000_000
    max_retries: int = 40

    def dt_min(self, grid: PeriodicGrid2D) -> float:
        return self.dt_min_factor * min(grid.lx, grid.ly)

    def dt_max(self, grid: PeriodicGrid2D) -> float:
        return self.dt_max_factor * min(grid.lx, grid.ly)


@dataclass(frozen=True)
class SolverState:
    """Flow state at one instant; u is derived from (rho, m) at construction."""

    t: float
    rho: ScalarField
    m: VectorField2
    u: VectorField2
    phi_star: float
    step_count: int = 0

    @property
    def headroom(self) -> float:
        """Distance of the densest cell from the packing threshold, 1 - max rho/phi*.

        Positive for every valid delta = 0 state; truncated runs may drive
        it to zero or below.
        """
        return 1.0 - float(np.max(self.rho.values)) / self.phi_star


def make_state(
    t: float,
    rho: ScalarField,
    m: VectorField2,
    cons: ConstitutiveParams,
    step_count: int = 0,
) -> SolverState:
    """Validate (rho, m) and derive u = m/rho."""
    if np.any(rho.values < cons.rho_floor):
        raise VacuumError(
            f"density below vacuum floor {cons.rho_floor:.3e} at t = {t:.6g}: "
            f"min rho = {float(np.min(rho.values)):.3e}"
        )
    if cons.delta == 0.0 and np.any(rho.values >= cons.phi_star):
        raise ConstraintBreachError(
            f"density reached the packing threshold at t = {t:.6g}: "
            f"max rho/phi_star = {float(np.max(rho.values)) / cons.phi_star:.12g}",
            t=t,
        )
    u = VectorField2(rho.grid, m.x / rho.values, m.y / rho.values)
    return SolverState(
        t=t, rho=rho, m=m, u=u, phi_star=cons.phi_star, step_count=step_count
    )


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------

SCENARIO_NAMES = (
    "uniform",
    "gaussian_bump",
    "colliding_blobs",
    "shear_layer",
    "incompressible_start",
)

# colliding_blobs constants: background and peak density (fractions of
# phi_star), blob width (fraction of lx) and approach speed.  The law pins
# the kinematic viscosity at mu/rho >= 1, so the approach speed must be
# large for inertia to carry the blobs through their own momentum diffusion
# and actually reach the packing threshold.
_BLOB_BASE = 0.2
_BLOB_PEAK = 0.90
_BLOB_WIDTH = 0.18
_BLOB_SPEED = 14.0

_BUMP_MIN = 0.2  # gaussian_bump extremes (fractions of phi_star)
_BUMP_MAX = 0.8

_SHEAR_SPEED = 1.0
_INCOMP_SPEED = 0.5
_INCOMP_PI_CONTRAST = 0.25


@dataclass(frozen=True)
class Scenario:
    """Initial data plus run horizon for one named flow configuration.

    snapshots is the default output cadence: the total number of stored
    states (including initial and final) when run() is not told otherwise.
    """

    name: str
    grid: PeriodicGrid2D
    flow: FlowParams
    t_end: float
    rho0: ScalarField
    m0: VectorField2
    snapshots: int = 10

    def initial_state(self) -> SolverState:
        return make_state(0.0, self.rho0.copy(), self.m0.copy(), self.flow.cons)


def _periodic_bump(grid: PeriodicGrid2D, cx: float, cy: float, width: float) -> np.ndarray:
    """Smooth periodic bump in [~0, 1], peaked at (cx, cy) with given width."""
    X, Y = grid.cell_centers()
    kx = (grid.lx / (2.0 * math.pi * width)) ** 2
    ky = (grid.ly / (2.0 * math.pi * width)) ** 2
    return np.exp(
        kx * (np.cos(2.0 * math.pi * (X - cx) / grid.lx) - 1.0)
        + ky * (np.cos(2.0 * math.pi * (Y - cy) / grid.ly) - 1.0)
    )


def _rescale(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Affinely map sampled extremes onto [lo, hi] exactly."""
    vmin, vmax = float(np.min(values)), float(np.max(values))
    return lo + (hi - lo) * (values - vmin) / (vmax - vmin)


def _solenoidal_noise(grid: PeriodicGrid2D, rng: np.random.Generator, amplitude: float):
    """Divergence-free velocity noise from a random low-mode streamfunction."""
    X, Y = grid.cell_centers()
    psi = np.zeros((grid.nx, grid.ny))
    for kx in range(1, 4):
        for ky in range(1, 4):
            phase = rng.uniform(0.0, 2.0 * math.pi)
            amp = rng.normal() / (kx * kx + ky * ky)
            psi += amp * np.sin(
                2.0 * math.pi * (kx * X / grid.lx + ky * Y / grid.ly) + phase
            )
    scale = amplitude / max(float(np.max(np.abs(psi))), 1e-300)
    psi *= scale
    return d_dy(psi, grid.hy), -d_dx(psi, grid.hx)


def build_scenario(
    name: str,
    grid: PeriodicGrid2D,
    flow: FlowParams,
    *,
    t_end: float | None = None,
    seed: int | None = None,
    snapshots: int = 10,
    velocity_scale: float | None = None,
    peak_fraction: float | None = None,
    plateau_sharpness: float | None = None,
    solenoidal_start: bool = False,
    pi0: ScalarField | None = None,
) -> Scenario:
    """Construct one of the named scenarios on the given grid.

    seed adds a small (1e-3 of the velocity scale) divergence-free momentum
    perturbation; without a seed construction is fully deterministic.

    colliding_blobs accepts three shape knobs: velocity_scale (approach
    speed), peak_fraction (peak density as a fraction of the packing
    threshold), and plateau_sharpness, which saturates the blob tops through
    tanh(s*b)/tanh(s) so the near-threshold region is a resolved plateau of
    many cells rather than a one-cell tip.  The defaults give an inertial
    collision; a slow, dense, plateaued configuration (e.g. speed 0.2, peak
    0.995, sharpness 4) isolates the pressure-driven relaxation of an
    already congested core.  solenoidal_start projects the initial velocity
    onto the stencil-divergence-free subspace, so any compression on the
    congested set develops through the dynamics rather than being painted
    into the initial data.
    """
    p = flow.cons
    ph = p.phi_star
    lx, ly = grid.lx, grid.ly

    if name != "colliding_blobs" and (
        peak_fraction is not None or plateau_sharpness is not None or solenoidal_start
    ):
        raise ScenarioError(
            "peak_fraction, plateau_sharpness and solenoidal_start are "
            f"colliding_blobs shape knobs; scenario {name!r} does not accept them"
        )
    if pi0 is not None and name != "incompressible_start":
        raise ScenarioError(
            f"pi0 prescribes the incompressible_start limit pressure; "
            f"scenario {name!r} does not accept it"
        )

    if name == "uniform":
        rho = ScalarField.full(grid, 0.5 * ph)
        mx = np.zeros((grid.nx, grid.ny))
        my = np.zeros((grid.nx, grid.ny))
        u_scale = 1.0
        default_t_end = 1.0

    elif name == "gaussian_bump":
        bump = _periodic_bump(grid, 0.5 * lx, 0.5 * ly, 0.12 * lx)
        rho = ScalarField(grid, _rescale(bump, _BUMP_MIN * ph, _BUMP_MAX * ph))
        mx = np.zeros((grid.nx, grid.ny))
        my = np.zeros((grid.nx, grid.ny))
        u_scale = 1.0
        default_t_end = 0.25

    elif name == "colliding_blobs":
        U = _BLOB_SPEED if velocity_scale is None else velocity_scale
        peak = _BLOB_PEAK if peak_fraction is None else peak_fraction
        if not 0.0 < peak < 1.0:
            raise ScenarioError(
                f"constraint 0 < peak_fraction < 1 violated: {peak}"
            )
        b1 = _periodic_bump(grid, 0.25 * lx, 0.5 * ly, _BLOB_WIDTH * lx)
        b2 = _periodic_bump(grid, 0.75 * lx, 0.5 * ly, _BLOB_WIDTH * lx)
        profile = b1 + b2
        if plateau_sharpness is not None:
            if plateau_sharpness <= 0.0:
                raise ScenarioError(
                    f"constraint plateau_sharpness > 0 violated: {plateau_sharpness}"
                )
            profile = np.tanh(plateau_sharpness * profile)
        rho_vals = _rescale(profile, _BLOB_BASE * ph, peak * ph)
        ux = U * (b1 / np.max(b1) - b2 / np.max(b2))
        uy = np.zeros((grid.nx, grid.ny))
        if solenoidal_start:
            proj = project_divergence_free(VectorField2(grid, ux, uy))
            ux, uy = proj.x, proj.y
        mx = rho_vals * ux
        my = rho_vals * uy
        # enforce the mirror symmetry exactly so total momentum is zero in
        # floating point, not just analytically
        rho_vals = 0.5 * (rho_vals + np.flip(rho_vals, axis=0))
        mx = 0.5 * (mx - np.flip(mx, axis=0))
        my = 0.5 * (my + np.flip(my, axis=0))
        rho = ScalarField(grid, rho_vals)
        u_scale = U
        default_t_end = 0.5 * lx / U  # one crossing time

    elif name == "shear_layer":
        U = _SHEAR_SPEED if velocity_scale is None else velocity_scale
        X, Y = grid.cell_centers()
        rho = ScalarField(
            grid, 0.5 * ph * (1.0 + 0.1 * np.cos(2.0 * math.pi * X / lx))
        )
        ux = U * np.sin(2.0 * math.pi * Y / ly)
        uy = 0.05 * U * np.sin(2.0 * math.pi * X / lx)
        mx = rho.values * ux
        my = rho.values * uy
        u_scale = U
        default_t_end = lx / U

    elif name == "incompressible_start":
        U = _INCOMP_SPEED if velocity_scale is None else velocity_scale
        X, Y = grid.cell_centers()
        if pi0 is None:
            pi0_vals = ph * (
                1.0
                + _INCOMP_PI_CONTRAST
                * np.cos(2.0 * math.pi * X / lx)
                * np.cos(2.0 * math.pi * Y / ly)
            )
        else:
            if pi0.grid != grid:
                raise ScenarioError("pi0 must live on the scenario grid")
            pi0_vals = pi0.values
            if np.any(pi0_vals <= 0.0):
                raise ScenarioError(
                    "constraint pi0 > 0 violated: the prescribed limit "
                    "pressure must be strictly positive"
                )
        if 1.0 - p.eps**p.a * ph / float(np.min(pi0_vals)) <= 0.0:
            raise ScenarioError(
                "constraint 1 - eps**a * phi_star / min(pi0) > 0 violated: "
                f"eps = {p.eps} too large for the prescribed pressure field"
            )
        rho = ScalarField(grid, ph * (1.0 - p.eps**p.a * ph / pi0_vals))
        psi = (U * lx / (2.0 * math.pi)) * np.sin(2.0 * math.pi * X / lx) * np.sin(
            2.0 * math.pi * Y / ly
        )
        ux = d_dy(psi, grid.hy)
        uy = -d_dx(psi, grid.hx)
        mx = rho.values * ux
        my = rho.values * uy
        u_scale = U
        default_t_end = 0.2 * lx / max(U, 1e-12)

    else:
        raise ScenarioError(
            f"unknown scenario {name!r}; expected one of {', '.join(SCENARIO_NAMES)}"
        )

    if seed is not None:
        rng = np.random.default_rng(seed)
        nx_noise, ny_noise = _solenoidal_noise(grid, rng, 1e-3 * u_scale)
        mx = mx + rho.values * nx_noise
        my = my + rho.values * ny_noise

    if t_end is None:
        t_end = default_t_end
    if t_end < 0:
        raise ScenarioError(f"constraint t_end >= 0 violated: t_end = {t_end}")

    if snapshots < 2:
        raise ScenarioError(f"constraint snapshots >= 2 violated: {snapshots}")
    scen = Scenario(
        name=name,
        grid=grid,
        flow=flow,
        t_end=float(t_end),
        rho0=rho,
        m0=VectorField2(grid, mx, my),
        snapshots=snapshots,
    )
    scen.initial_state()  # validate against floor/threshold straight away
    return scen


# ---------------------------------------------------------------------------
# single step
# ---------------------------------------------------------------------------


def compute_dt(state: SolverState, flow: FlowParams, numerics: SolverNumerics) -> float:
    """CFL step from |u| + sqrt(dpi(rho)/rho + theta), capped by dt_max.

    A second, headroom-aware cap keeps any cell from consuming more than a
    fixed fraction of its remaining distance to the packing threshold in one
    step (compression rate estimated by rho |div u|): near the threshold the
    pressure ramp is thinner than one acoustic CFL step, and the plain CFL
    number is blind to it until after the wall has been crossed.

    Raises StallError when the admissible step falls below dt_min, the
    signature of a state pinned against the packing threshold.
    """
    g = state.rho.grid
    p = flow.cons
    rho = state.rho.values
    c_eff = np.sqrt(laws.dpi_eps(rho, p) / rho + flow.theta)
    speed = float(np.max(state.u.magnitude() + c_eff))
    dt = numerics.dt_max(g)
    if speed > 0.0:
        dt = min(dt, numerics.cfl * min(g.hx, g.hy) / speed)
    if p.delta == 0.0:
        div_u = d_dx(state.u.x, g.hx) + d_dy(state.u.y, g.hy)
        compression = np.maximum(-div_u, 0.0) * rho / p.phi_star
        headroom = 1.0 - rho / p.phi_star
        rate = float(np.max(compression / headroom))
        if rate > 0.0:
            dt = min(dt, numerics.headroom_fraction / rate)
    if dt < numerics.dt_min(g):
        raise StallError(
            f"time step {dt:.3e} fell below dt_min {numerics.dt_min(g):.3e} "
            f"at t = {state.t:.6g} (singularity approach)",
            t=state.t,
        )
    return dt


def _check_density(rho_vals: np.ndarray, p: ConstitutiveParams, t: float) -> None:
    if not np.all(np.isfinite(rho_vals)):
        raise ConstraintBreachError(f"non-finite density at t = {t:.6g}", t=t)
    if np.any(rho_vals < p.rho_floor):
        raise ConstraintBreachError(
            f"density fell below the vacuum floor {p.rho_floor:.3e} at t = {t:.6g}",
            t=t,
        )
    if p.delta == 0.0 and np.any(rho_vals >= p.phi_star):
        raise ConstraintBreachError(
            f"density reached the packing threshold at t = {t:.6g}: "
            f"max rho/phi_star = {float(np.max(rho_vals)) / p.phi_star:.12g}",
            t=t,
        )


def _conv_pressure_rhs(rho, mx, my, grid: PeriodicGrid2D, flow: FlowParams):
    """Divergence-form RHS of the convection + pressure subsystem."""
    hx, hy = grid.hx, grid.hy
    ux = mx / rho
    uy = my / rho
    pres = laws.pi_eps(rho, flow.cons) + 0.5 * flow.theta * rho * rho
    f_rho = -(d_dx(mx, hx) + d_dy(my, hy))
    f_mx = -(d_dx(mx * ux, hx) + d_dy(mx * uy, hy)) - d_dx(pres, hx)
    f_my = -(d_dx(my * ux, hx) + d_dy(my * uy, hy)) - d_dy(pres, hy)
    return f_rho, f_mx, f_my


def _convection_substep(rho, mx, my, dt, grid, flow, t):
    """Heun (explicit trapezoid) update of (rho, m)."""
    f1 = _conv_pressure_rhs(rho, mx, my, grid, flow)
    rho1 = rho + dt * f1[0]
    _check_density(rho1, flow.cons, t)
    f2 = _conv_pressure_rhs(rho1, mx + dt * f1[1], my + dt * f1[2], grid, flow)
    rho_new = rho + 0.5 * dt * (f1[0] + f2[0])
    mx_new = mx + 0.5 * dt * (f1[1] + f2[1])
    my_new = my + 0.5 * dt * (f1[2] + f2[2])
    _check_density(rho_new, flow.cons, t)
    return rho_new, mx_new, my_new


def _visc_operator(ux, uy, mu, lam, grid: PeriodicGrid2D):
    """L u = 2 div(mu D(u)) + grad(lambda div u) on raw arrays."""
    hx, hy = grid.hx, grid.hy
    dxux = d_dx(ux, hx)
    dyux = d_dy(ux, hy)
    dxuy = d_dx(uy, hx)
    dyuy = d_dy(uy, hy)
    txx = 2.0 * mu * dxux
    tyy = 2.0 * mu * dyuy
    txy = mu * (dyux + dxuy)
    ldiv = lam * (dxux + dyuy)
    out_x = d_dx(txx + ldiv, hx) + d_dy(txy, hy)
    out_y = d_dx(txy, hx) + d_dy(tyy + ldiv, hy)
    return out_x, out_y


# diagonal weight of the composite (fourth-order stencil applied twice)
_STENCIL_DIAG = 130.0 / 144.0


def _viscous_substep(rho, ux, uy, dt, grid, flow, weight=0.5):
    """Crank-Nicolson-weighted implicit viscous solve, coefficients frozen at rho."""
    p = flow.cons
    mu = laws.mu_eps(rho, p)
    lam = laws.lambda_eps(rho, p)

    lx0, ly0 = _visc_operator(ux, uy, mu, lam, grid)
    bx = rho * ux + (1.0 - weight) * dt * lx0
    by = rho * uy + (1.0 - weight) * dt * ly0

    def apply_op(vx, vy):
        ax, ay = _visc_operator(vx, vy, mu, lam, grid)
        return rho * vx - weight * dt * ax, rho * vy - weight * dt * ay

    diag_x = rho + weight * dt * _STENCIL_DIAG * (
        (2.0 * mu + lam) / grid.hx**2 + mu / grid.hy**2
    )
    diag_y = rho + weight * dt * _STENCIL_DIAG * (
        mu / grid.hx**2 + (2.0 * mu + lam) / grid.hy**2
    )

    return _cg_solve(apply_op, bx, by, diag_x, diag_y, ux, uy, flow)


def _cg_solve(apply_op, bx, by, diag_x, diag_y, x0x, x0y, flow,
              tol=1e-10, maxiter=800):
    """Jacobi-preconditioned CG on the two-component SPD system."""
    b_norm = math.sqrt(float(np.vdot(bx, bx) + np.vdot(by, by)))
    if b_norm == 0.0:
        return np.zeros_like(bx), np.zeros_like(by)
    xx, xy = x0x.copy(), x0y.copy()
    ax, ay = apply_op(xx, xy)
    rx, ry = bx - ax, by - ay
    zx, zy = rx / diag_x, ry / diag_y
    px, py = zx.copy(), zy.copy()
    rz = float(np.vdot(rx, zx) + np.vdot(ry, zy))
    for _ in range(maxiter):
        res = math.sqrt(float(np.vdot(rx, rx) + np.vdot(ry, ry)))
        if res <= tol * b_norm:
            return xx, xy
        apx, apy = apply_op(px, py)
        pap = float(np.vdot(px, apx) + np.vdot(py, apy))
        alpha = rz / pap
        xx += alpha * px
        xy += alpha * py
        rx -= alpha * apx
        ry -= alpha * apy
        zx, zy = rx / diag_x, ry / diag_y
        rz_new = float(np.vdot(rx, zx) + np.vdot(ry, zy))
        beta = rz_new / rz
        rz = rz_new
        px = zx + beta * px
        py = zy + beta * py
    raise LinearSolveError(
        f"viscous CG did not reach tolerance {tol:g} in {maxiter} iterations "
        f"(relative residual {res / b_norm:.3e})"
    )


def _drag_substep(ux, uy, dt, r):
    """Exact pointwise root of u (1 + dt*r*|u|) = u*; contracts speeds."""
    if r == 0.0 or dt == 0.0:
        return ux, uy
    speed = np.hypot(ux, uy)
    factor = 2.0 / (1.0 + np.sqrt(1.0 + 4.0 * dt * r * speed))
    return ux * factor, uy * factor


def step(
    state: SolverState,
    flow: FlowParams,
    numerics: SolverNumerics,
    dt: float,
    ordering: str = "strang",
) -> SolverState:
    """Advance one operator-split step of size dt.

    ordering "lie" runs convection, viscosity, drag once each in that order
    (first-order splitting); "strang" (default) symmetrizes with half steps
    of drag and viscosity around the convection step, which restores
    second-order accuracy of the composition.  Substance is identical: the
    same three substeps, the same frozen-coefficient viscous solve.
    """
    if dt <= 0.0:
        raise ValueError(f"constraint dt > 0 violated: dt = {dt}")
    g = state.rho.grid
    p = flow.cons
    t_new = state.t + dt
    rho = state.rho.values
    mx = state.m.x
    my = state.m.y

    if ordering == "lie":
        rho, mx, my = _convection_substep(rho, mx, my, dt, g, flow, t_new)
        ux, uy = mx / rho, my / rho
        ux, uy = _viscous_substep(rho, ux, uy, dt, g, flow)
        ux, uy = _drag_substep(ux, uy, dt, flow.r)
    elif ordering == "strang":
        ux, uy = mx / rho, my / rho
        ux, uy = _drag_substep(ux, uy, 0.5 * dt, flow.r)
        ux, uy = _viscous_substep(rho, ux, uy, 0.5 * dt, g, flow)
        rho, mx, my = _convection_substep(rho, rho * ux, rho * uy, dt, g, flow, t_new)
        ux, uy = mx / rho, my / rho
        ux, uy = _viscous_substep(rho, ux, uy, 0.5 * dt, g, flow)
        ux, uy = _drag_substep(ux, uy, 0.5 * dt, flow.r)
    else:
        raise ValueError(f"unknown splitting ordering {ordering!r}")

    rho_f = ScalarField(g, rho)
    m_f = VectorField2(g, rho * ux, rho * uy)
    return make_state(t_new, rho_f, m_f, p, step_count=state.step_count + 1)


def kinematic_run(
    rho0: ScalarField,
    u_star: VectorField2,
    cons: ConstitutiveParams,
    t_end: float,
    cfl: float = 0.4,
) -> list[SolverState]:
    """Transport rho through a frozen velocity field; keep every step's state.

    With u held fixed the only dynamics is the continuity equation
    d rho/dt + div(rho u*) = 0, advanced with the same Heun scheme and
    derivative stencils as the full solver.  This isolates the renormalized
    viscosity balance d/dt int mu = -int (lambda/2) div u from momentum
    dynamics; the caller is responsible for a velocity field that keeps the
    density inside the law domain.  The step is tied to the mesh
    (dt = cfl*h/max(1, |u*|)) so grid refinement refines time as well.
    """
    if t_end <= 0.0:
        raise ValueError(f"constraint t_end > 0 violated: t_end = {t_end}")
    grid = rho0.grid
    u_max = float(np.max(u_star.magnitude()))
    dt = cfl * min(grid.hx, grid.hy) / max(1.0, u_max)
    ux, uy = u_star.x, u_star.y
    rho = rho0.values

    def rhs(r):
        return -(d_dx(r * ux, grid.hx) + d_dy(r * uy, grid.hy))

    def as_state(t, r, n):
        return make_state(
            t,
            ScalarField(grid, r),
            VectorField2(grid, r * ux, r * uy),
            cons,
            step_count=n,
        )

    states = [as_state(0.0, rho, 0)]
    t = 0.0
    while t < t_end * (1.0 - 1e-12):
        h = min(dt, t_end - t)
        f1 = rhs(rho)
        mid = rho + h * f1
        _check_density(mid, cons, t + h)
        rho = rho + 0.5 * h * (f1 + rhs(mid))
        _check_density(rho, cons, t + h)
        t += h
        states.append(as_state(t, rho, len(states)))
    return states


# ---------------------------------------------------------------------------
# run loop
# ---------------------------------------------------------------------------


@dataclass
class Trajectory:
    """Result of a run: snapshot states plus the per-step diagnostic series."""

    scenario: Scenario
    states: list[SolverState]
    series: dict[str, np.ndarray]

    @property
    def final(self) -> SolverState:
        return self.states[-1]


def run(
    scenario: Scenario,
    numerics: SolverNumerics | None = None,
    *,
    snapshots: int | None = None,
    eta: float = 0.01,
    ordering: str = "strang",
    keep_all_states: bool = False,
) -> Trajectory:
    """Integrate a scenario to t_end, collecting snapshots and per-step diagnostics.

    snapshots sets the storage cadence: states are stored at the first
    accepted step past each of snapshots - 1 equispaced times (default: the
    scenario's cadence), and the initial and final states are always kept.
    A step that crosses several snapshot times stores one state, so the
    stored count can fall short of the request on coarse runs.  Diagnostics
    rows are emitted every accepted step regardless.  keep_all_states stores
    every step's state (memory permitting) for convergence and budget
    studies.

    A warning is emitted the first time the packing headroom 1 - max rho/phi*
    drops below 1e-6: past that point the singular-pressure stiffness, not
    accuracy, controls the step size.
    """
    if numerics is None:
        numerics = SolverNumerics()
    if snapshots is None:
        snapshots = scenario.snapshots
    if snapshots < 2:
        raise ValueError(f"constraint snapshots >= 2 violated: snapshots = {snapshots}")
    state = scenario.initial_state()
    diag = RunningDiagnostics(scenario.flow, eta=eta)
    rows = [diag.row(state, 0.0)]
    stored = [state]
    t_end = scenario.t_end
    warned_headroom = False

    if t_end > 0.0:
        snap_times = [t_end * k / (snapshots - 1) for k in range(1, snapshots)]
        next_snap = 0
        for n_steps in range(numerics.max_steps):
            remaining = t_end - state.t
            if remaining <= 1e-12 * max(t_end, 1.0):
                break
            dt = min(compute_dt(state, scenario.flow, numerics), remaining)
            for _ in range(numerics.max_retries):
                try:
                    new_state = step(
                        state, scenario.flow, numerics, dt, ordering=ordering
                    )
                    break
                except ConstraintBreachError as breach:
                    # the headroom cap under-predicted the compression of this
                    # step; resolve the pressure wall by halving
                    dt *= 0.5
                    if dt < numerics.dt_min(scenario.grid):
                        raise StallError(
                            f"constraint breach persists down to dt_min at "
                            f"t = {state.t:.6g}: {breach}",
                            t=state.t,
                        ) from breach
            else:
                raise StallError(
                    f"constraint breach persists after {numerics.max_retries} "
                    f"step halvings at t = {state.t:.6g}",
                    t=state.t,
                )
            state = new_state
            if not warned_headroom and state.headroom < 1e-6:
                warned_headroom = True
                warnings.warn(
                    f"packing headroom below 1e-6 at t = {state.t:.6g}; "
                    "entering the congestion-pressure blow-up regime",
                    RuntimeWarning,
                    stacklevel=2,
                )
            rows.append(diag.row(state, dt))
            if keep_all_states:
                stored.append(state)
            elif next_snap < len(snap_times) and state.t >= snap_times[next_snap] * (
                1.0 - 1e-12
            ):
                stored.append(state)
                while next_snap < len(snap_times) and state.t >= snap_times[
                    next_snap
                ] * (1.0 - 1e-12):
                    next_snap += 1
        else:
            raise StallError(
                f"step budget {numerics.max_steps} exhausted at t = {state.t:.6g}",
                t=state.t,
            )
        if stored[-1] is not state:
            stored.append(state)

    series = {
        k: np.array([row[k] for row in rows]) for k in TIMESERIES_COLUMNS
    }
    return Trajectory(scenario=scenario, states=stored, series=series)
