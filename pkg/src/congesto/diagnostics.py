"""Entropy budget, congestion indicators, and balance residuals.

The central object is a tilted energy ("kappa-entropy") built on the
effective velocity ``w = u + 2*kappa*grad(phi(rho))`` where the potential
gradient is realized through the chain rule ``grad(phi) = (dmu(rho)/rho) *
grad(rho)`` (phi itself is never tabulated).  At each instant the budget sums

* kinetic energy of w,                 integral rho |w|^2 / 2
* a tilt cross-term,                   integral rho kappa(1-kappa) |2 grad phi|^2 / 2
* potential energy,                    integral rho e(rho)
* weighted viscous mass,               r * integral mu(rho)
* artificial pressure energy,          theta * integral rho^2 / 2

plus time-cumulated dissipation channels (drag r*rho*|u|^3, antisymmetric
strain kappa*mu*|A(u)|^2, density gradients 2*kappa*dmu*(theta + dpi/rho)*
|grad rho|^2, symmetric strain (1-kappa)*mu*|D(u)|^2, and dilation
(1-kappa)*(dmu*rho - mu)*(div u)^2).  For the exact dynamics the total is
controlled by its initial value; the discrete budget is expected to stay
within a few percent and tightens under grid refinement.

Cumulative integrals use the trapezoid rule on the solver's own accepted
steps -- never on resampled times -- so diagnostics align exactly with the
run that produced them.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import constitutive as laws
from .constitutive import ConstitutiveParams, PotentialTable
from .errors import DomainError
from .fields import (
    ScalarField,
    VectorField2,
    d_dx,
    d_dy,
    gradient,
    integrate,
    sym_asym_grad,
)

__all__ = [
    "FlowParams",
    "EntropyReport",
    "CongestionMetrics",
    "TIMESERIES_COLUMNS",
    "DIV_MOMENT_EXPONENTS",
    "effective_velocity",
    "congestion_metrics",
    "entropy_report",
    "mu_balance_residual",
    "RunningDiagnostics",
]

#: Exponents of the density-weighted divergence moments integral (rho/phi_star)**k |div u|.
DIV_MOMENT_EXPONENTS = (4, 16, 64, 256)

#: Column order of the per-step time series (and of timeseries.csv).
TIMESERIES_COLUMNS = [
    "t",
    "dt",
    "mass",
    "px",
    "py",
    "max_rho_ratio",
    "kin_w",
    "cross",
    "potential",
    "visc_mass",
    "theta_term",
    "drag_cum",
    "asym_cum",
    "gradrho_cum",
    "sym_cum",
    "bulk_cum",
    "total_lhs",
    "excl_resid_mu",
    "excl_resid_pi",
    "congested_frac",
    "div_on_congested",
    "divmom_k4",
    "divmom_k16",
    "divmom_k64",
    "divmom_k256",
    "mu_balance_resid",
]


@dataclass(frozen=True)
class FlowParams:
    """Constitutive laws plus the flow coefficients entering the entropy.

    r is the quadratic drag coefficient, theta the artificial-pressure
    coefficient, and kappa in (0, 1) the entropy tilt.
    """

    cons: ConstitutiveParams
    r: float = 1.0
    theta: float = 0.0
    kappa: float = 0.5

    def __post_init__(self):
        if not self.r >= 0:
            raise DomainError(f"constraint r >= 0 violated: r = {self.r}")
        if not self.theta >= 0:
            raise DomainError(f"constraint theta >= 0 violated: theta = {self.theta}")
        if not 0.0 < self.kappa < 1.0:
            raise DomainError(f"constraint 0 < kappa < 1 violated: kappa = {self.kappa}")


@dataclass(frozen=True)
class EntropyReport:
    """Entropy budget at one instant, with dissipation cumulated from a slice start."""

    t: float
    kin_w: float
    cross: float
    potential: float
    visc_mass: float
    theta_term: float
    drag_cum: float
    asym_cum: float
    gradrho_cum: float
    sym_cum: float
    bulk_cum: float

    @property
    def total_lhs(self) -> float:
        return (
            self.kin_w
            + self.cross
            + self.potential
            + self.visc_mass
            + self.theta_term
            + self.drag_cum
            + self.asym_cum
            + self.gradrho_cum
            + self.sym_cum
            + self.bulk_cum
        )


@dataclass(frozen=True)
class CongestionMetrics:
    """Pointwise congestion indicators of one state."""

    max_rho_ratio: float
    congested_fraction: float
    excl_resid_mu: float
    excl_resid_pi: float
    div_on_congested: float
    div_moments: dict[int, float] = field(default_factory=dict)


def effective_velocity(rho: ScalarField, u: VectorField2, flow: FlowParams) -> VectorField2:
    """w = u + 2*kappa*(dmu(rho)/rho)*grad(rho); constant density gives w = u."""
    grad_rho = gradient(rho)
    weight = 2.0 * flow.kappa * laws.dmu_eps(rho.values, flow.cons) / rho.values
    return VectorField2(u.grid, u.x + weight * grad_rho.x, u.y + weight * grad_rho.y)


def congestion_metrics(
    rho: ScalarField, u: VectorField2, cons: ConstitutiveParams, eta: float = 0.01
) -> CongestionMetrics:
    """Congestion indicators: threshold proximity, exclusion residuals, divergence moments.

    The congested set is {rho >= (1 - eta) * phi_star}; div_on_congested is 0
    when that set is empty.
    """
    if not 0.0 < eta < 1.0:
        raise DomainError(f"constraint 0 < eta < 1 violated: eta = {eta}")
    g = rho.grid
    ratio = rho.values / cons.phi_star
    mu1 = laws.mu1_eps(rho.values, cons)
    pi = laws.pi_eps(rho.values, cons)
    div_u = d_dx(u.x, g.hx) + d_dy(u.y, g.hy)
    mask = ratio >= 1.0 - eta
    moments = {
        k: float(np.sum(ratio**k * np.abs(div_u)) * g.cell_area)
        for k in DIV_MOMENT_EXPONENTS
    }
    return CongestionMetrics(
        max_rho_ratio=float(np.max(ratio)),
        congested_fraction=float(np.count_nonzero(mask)) / ratio.size,
        excl_resid_mu=float(np.max(np.abs((1.0 - ratio) * mu1))),
        excl_resid_pi=float(np.max(np.abs((1.0 - ratio) * pi))),
        div_on_congested=float(np.max(np.abs(div_u[mask]))) if np.any(mask) else 0.0,
        div_moments=moments,
    )


def _instantaneous(rho: ScalarField, u: VectorField2, flow: FlowParams, table: PotentialTable):
    """The five instantaneous entropy terms."""
    p = flow.cons
    grad_rho = gradient(rho)
    dmu = laws.dmu_eps(rho.values, p)
    wphi = dmu / rho.values  # grad(phi) = wphi * grad(rho)
    gx = wphi * grad_rho.x
    gy = wphi * grad_rho.y
    wx = u.x + 2.0 * flow.kappa * gx
    wy = u.y + 2.0 * flow.kappa * gy
    area = rho.grid.cell_area
    kin_w = 0.5 * float(np.sum(rho.values * (wx * wx + wy * wy))) * area
    cross = (
        2.0
        * flow.kappa
        * (1.0 - flow.kappa)
        * float(np.sum(rho.values * (gx * gx + gy * gy)))
        * area
    )
    potential = float(np.sum(rho.values * table(rho.values))) * area
    visc_mass = flow.r * float(np.sum(laws.mu_eps(rho.values, p))) * area
    theta_term = 0.5 * flow.theta * float(np.sum(rho.values**2)) * area
    return kin_w, cross, potential, visc_mass, theta_term


def _dissipation_rates(rho: ScalarField, u: VectorField2, flow: FlowParams):
    """Instantaneous values of the five dissipation integrands (all >= 0)."""
    p = flow.cons
    area = rho.grid.cell_area
    mu = laws.mu_eps(rho.values, p)
    dmu = laws.dmu_eps(rho.values, p)
    dpi = laws.dpi_eps(rho.values, p)
    grad_rho = gradient(rho)
    D, A = sym_asym_grad(u)
    div_u = D.trace()
    speed = np.hypot(u.x, u.y)
    k = flow.kappa
    drag = flow.r * float(np.sum(rho.values * speed**3)) * area
    asym = k * float(np.sum(mu * 2.0 * A.values**2)) * area
    gradrho = (
        2.0
        * k
        * float(
            np.sum(
                dmu
                * (flow.theta + dpi / rho.values)
                * (grad_rho.x**2 + grad_rho.y**2)
            )
        )
        * area
    )
    sym = (1.0 - k) * float(np.sum(mu * D.frobenius_sq())) * area
    # dmu*rho - mu = lambda/2 >= 0; clamp rounding noise on the frozen branch
    bulk = (1.0 - k) * float(np.sum(np.maximum(dmu * rho.values - mu, 0.0) * div_u**2)) * area
    lam_div = 0.5 * float(np.sum(laws.lambda_eps(rho.values, p) * div_u)) * area
    return np.array([drag, asym, gradrho, sym, bulk, lam_div])


def entropy_report(states, flow: FlowParams, table: PotentialTable | None = None) -> EntropyReport:
    """Entropy budget at the last state of a slice, cumulating over the slice.

    ``states`` is a sequence of solver states (talking .t, .rho, .u) sampled
    densely enough that the trapezoid rule resolves the dissipation
    integrals; a coarse slice triggers a quadrature-cadence warning.
    """
    states = list(states)
    if not states:
        raise ValueError("entropy_report requires at least one state")
    if table is None:
        table = PotentialTable(flow.cons)
    span = states[-1].t - states[0].t
    if span > 0 and len(states) < 8:
        warnings.warn(
            f"entropy_report: only {len(states)} samples over span {span:.3g}; "
            "cumulative trapezoid integrals may be under-resolved",
            stacklevel=2,
        )
    cums = np.zeros(5)
    prev_rates = _dissipation_rates(states[0].rho, states[0].u, flow)[:5]
    prev_t = states[0].t
    for s in states[1:]:
        rates = _dissipation_rates(s.rho, s.u, flow)[:5]
        cums += 0.5 * (s.t - prev_t) * (prev_rates + rates)
        prev_rates, prev_t = rates, s.t
    last = states[-1]
    kin_w, cross, potential, visc_mass, theta_term = _instantaneous(
        last.rho, last.u, flow, table
    )
    return EntropyReport(
        t=last.t,
        kin_w=kin_w,
        cross=cross,
        potential=potential,
        visc_mass=visc_mass,
        theta_term=theta_term,
        drag_cum=float(cums[0]),
        asym_cum=float(cums[1]),
        gradrho_cum=float(cums[2]),
        sym_cum=float(cums[3]),
        bulk_cum=float(cums[4]),
    )


def mu_balance_residual(states, cons: ConstitutiveParams) -> float:
    """Residual of the integrated viscosity transport identity.

    For exact dynamics  integral mu(rho(t)) - integral mu(rho(0))
    + int_0^t integral (lambda(rho)/2) div u  vanishes; returns the relative
    residual |...| / integral mu(rho(0)) cumulated over the given slice by
    the trapezoid rule.
    """
    states = list(states)
    if len(states) < 2:
        return 0.0
    area = states[0].rho.grid.cell_area

    def lam_div(s):
        g = s.rho.grid
        div_u = d_dx(s.u.x, g.hx) + d_dy(s.u.y, g.hy)
        return 0.5 * float(np.sum(laws.lambda_eps(s.rho.values, cons) * div_u)) * area

    mu0 = float(np.sum(laws.mu_eps(states[0].rho.values, cons))) * area
    mu_t = float(np.sum(laws.mu_eps(states[-1].rho.values, cons))) * area
    cum = 0.0
    prev = lam_div(states[0])
    prev_t = states[0].t
    for s in states[1:]:
        cur = lam_div(s)
        cum += 0.5 * (s.t - prev_t) * (prev + cur)
        prev, prev_t = cur, s.t
    return abs(mu_t - mu0 + cum) / mu0


class RunningDiagnostics:
    """Per-step diagnostic rows for a run, with exact-step trapezoid cumulation.

    The solver feeds every accepted step in order; rows follow
    TIMESERIES_COLUMNS.  Construction precomputes the potential-energy table
    once per run.
    """

    def __init__(self, flow: FlowParams, eta: float = 0.01):
        self.flow = flow
        self.eta = eta
        self.table = PotentialTable(flow.cons)
        self._cums = np.zeros(6)  # drag, asym, gradrho, sym, bulk, lam_div
        self._prev_rates: np.ndarray | None = None
        self._mu0: float | None = None

    def row(self, state, dt: float) -> dict[str, float]:
        flow = self.flow
        p = flow.cons
        rho, u = state.rho, state.u
        g = rho.grid
        area = g.cell_area

        rates = _dissipation_rates(rho, u, flow)
        if self._prev_rates is None:
            self._mu0 = float(np.sum(laws.mu_eps(rho.values, p))) * area
        else:
            self._cums += 0.5 * dt * (self._prev_rates + rates)
        self._prev_rates = rates

        kin_w, cross, potential, visc_mass, theta_term = _instantaneous(
            rho, u, flow, self.table
        )
        mu_t = float(np.sum(laws.mu_eps(rho.values, p))) * area
        metrics = congestion_metrics(rho, u, p, self.eta)
        out = {
            "t": state.t,
            "dt": dt,
            "mass": integrate(rho),
            "px": float(np.sum(state.m.x)) * area,
            "py": float(np.sum(state.m.y)) * area,
            "max_rho_ratio": metrics.max_rho_ratio,
            "kin_w": kin_w,
            "cross": cross,
            "potential": potential,
            "visc_mass": visc_mass,
            "theta_term": theta_term,
            "drag_cum": float(self._cums[0]),
            "asym_cum": float(self._cums[1]),
            "gradrho_cum": float(self._cums[2]),
            "sym_cum": float(self._cums[3]),
            "bulk_cum": float(self._cums[4]),
            "excl_resid_mu": metrics.excl_resid_mu,
            "excl_resid_pi": metrics.excl_resid_pi,
            "congested_frac": metrics.congested_fraction,
            "div_on_congested": metrics.div_on_congested,
            "divmom_k4": metrics.div_moments[4],
            "divmom_k16": metrics.div_moments[16],
            "divmom_k64": metrics.div_moments[64],
            "divmom_k256": metrics.div_moments[256],
            "mu_balance_resid": abs(mu_t - self._mu0 + self._cums[5]) / self._mu0,
        }
        out["total_lhs"] = (
            kin_w + cross + potential + visc_mass + theta_term + float(np.sum(self._cums[:5]))
        )
        return {k: out[k] for k in TIMESERIES_COLUMNS}
