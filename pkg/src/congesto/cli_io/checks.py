"""Named invariant checks behind the ``check`` subcommand.

Each check is a small, fast assertion of one identity or convergence property
the package is built on; together they cover the laws, the discrete operators,
the solver, the diagnostics, the limit probes, and the I/O layer.  The full
registry runs in well under a minute.
"""

from __future__ import annotations

import math
import os
import tempfile
import time

import numpy as np

from .. import constitutive as laws
from .. import limits
from ..constitutive import ConstitutiveParams
from ..diagnostics import (
    FlowParams,
    congestion_metrics,
    effective_velocity,
)
from ..errors import CongestoError, SnapshotFormatError
from ..fields import (
    PeriodicGrid2D,
    ScalarField,
    VectorField2,
    d_dx,
    d_dy,
    inv_laplacian_mean_zero,
    laplacian,
    project_divergence_free,
)
from ..solver import build_scenario, run, step
from . import config as cfg_mod
from . import snapshots as snap_mod
from ..errors import ConfigError

__all__ = ["CHECKS", "run_checks"]


def _cons(**kw) -> ConstitutiveParams:
    kw.setdefault("eps", 0.05)
    return ConstitutiveParams(**kw)


# --- laws -------------------------------------------------------------------


def check_bd_relation():
    """lambda = 2(rho mu' - mu) to 1e-10 relative on a dense density sample.

    The reference side is evaluated as 2(rho (mu' - 1) - (mu - rho)): the
    linear part of mu drops out of rho mu' - mu exactly, and removing it
    before the float subtraction keeps the comparison meaningful near vacuum.
    """
    p = _cons()
    rho = np.linspace(0.0, 0.95 * p.phi_star, 1000)
    lam = laws.lambda_eps(rho, p)
    alt = 2.0 * (rho * (laws.dmu_eps(rho, p) - 1.0) - laws.mu1_eps(rho, p))
    denom = np.where(lam != 0.0, np.abs(lam), 1.0)
    rel = np.max(np.abs(lam - alt) / denom)
    assert rel <= 1e-10, f"BD relation relative error {rel:.3e} > 1e-10"


def check_pressure_viscosity_link():
    """pi == (rho/phi*)**gamma * (mu - rho) bit-identically."""
    p = _cons(gamma=1.7)
    rho = np.linspace(1e-6, 0.95 * p.phi_star, 1000)
    pi = laws.pi_eps(rho, p)
    alt = (rho / p.phi_star) ** p.gamma * (laws.mu_eps(rho, p) - rho)
    assert np.array_equal(pi, alt), "pressure-viscosity link not bit-identical"


def check_truncation_continuity():
    """Truncated laws are continuous at the knee and lambda vanishes past it."""
    p = _cons(delta=0.2)
    knee = p.phi_star * (1.0 - p.delta)
    below, above = knee * (1.0 - 1e-12), knee * (1.0 + 1e-12)
    for fn in (laws.mu_eps, laws.pi_eps):
        jump = abs(fn(above, p) - fn(below, p)) / abs(fn(below, p))
        assert jump <= 1e-9, f"{fn.__name__} jumps {jump:.2e} at the knee"
    assert laws.lambda_eps(above, p) == 0.0, "lambda nonzero on the frozen branch"
    assert laws.lambda_eps(np.float64(knee), p) == 0.0, "lambda nonzero at the knee"


def check_law_derivatives():
    """dmu and dpi match central finite differences of mu and pi."""
    p = _cons()
    for rho in (0.1, 0.3, 0.55, 0.62):
        h = 1e-7
        for f, df in ((laws.mu_eps, laws.dmu_eps), (laws.pi_eps, laws.dpi_eps)):
            fd = (f(rho + h, p) - f(rho - h, p)) / (2.0 * h)
            rel = abs(df(rho, p) - fd) / max(abs(fd), 1e-30)
            assert rel <= 1e-6, f"{df.__name__}({rho}) off by {rel:.2e}"


# --- fields -----------------------------------------------------------------


def check_stencil_order():
    """First-derivative stencil converges at fourth order on a smooth field."""
    errs = []
    for n in (16, 32, 64):
        g = PeriodicGrid2D(n, n)
        X, _ = g.cell_centers()
        f = np.sin(2.0 * np.pi * X)
        exact = 2.0 * np.pi * np.cos(2.0 * np.pi * X)
        errs.append(np.max(np.abs(d_dx(f, g.hx) - exact)))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(orders) >= 3.8, f"stencil orders {orders} below 3.8"


def check_spectral_roundtrip():
    """Poisson round trip to 1e-10; first-derivative adjointness to 1e-12."""
    g = PeriodicGrid2D(48, 48)
    X, Y = g.cell_centers()
    f = np.sin(2.0 * np.pi * X) * np.cos(4.0 * np.pi * Y) + np.cos(6.0 * np.pi * Y)
    src = ScalarField(g, f - f.mean())
    phi = inv_laplacian_mean_zero(src)   # solves -Lap(phi) = src
    resid = np.max(np.abs(laplacian(phi).values + src.values))
    assert resid <= 1e-10, f"Poisson round-trip residual {resid:.2e} > 1e-10"
    rng = np.random.default_rng(7)
    a, b = rng.standard_normal((2, g.nx, g.ny))
    skew = abs(np.sum(a * d_dx(b, g.hx)) + np.sum(b * d_dx(a, g.hx))) * g.cell_area
    assert skew <= 1e-12, f"d_dx adjointness defect {skew:.2e} > 1e-12"


def check_solenoidal_projection():
    """Projected velocities are stencil-divergence-free and idempotent."""
    g = PeriodicGrid2D(32, 32)
    rng = np.random.default_rng(3)
    v = VectorField2(g, rng.standard_normal((g.nx, g.ny)), rng.standard_normal((g.nx, g.ny)))
    w = project_divergence_free(v)
    div = np.max(np.abs(d_dx(w.x, g.hx) + d_dy(w.y, g.hy)))
    assert div <= 1e-12, f"projected divergence {div:.2e} > 1e-12"
    w2 = project_divergence_free(w)
    drift = max(np.max(np.abs(w2.x - w.x)), np.max(np.abs(w2.y - w.y)))
    assert drift <= 1e-12, f"projection not idempotent: {drift:.2e}"


# --- solver -----------------------------------------------------------------


def check_drag_closed_form():
    """Implicit drag on a uniform state: dt=1, r=1, |u|=1 gives (sqrt(5)-1)/2."""
    from ..solver import SolverNumerics, make_state

    g = PeriodicGrid2D(16, 16)
    flow = FlowParams(cons=_cons())
    rho = ScalarField(g, np.full((16, 16), 0.32))
    m = VectorField2(g, rho.values.copy(), np.zeros_like(rho.values))  # u = 1
    state = make_state(0.0, rho, m, flow.cons)
    out = step(state, flow, SolverNumerics(), 1.0, ordering="lie")
    want = (math.sqrt(5.0) - 1.0) / 2.0
    err = np.max(np.abs(out.u.x - want))
    assert err <= 1e-14, f"drag root off by {err:.2e}"


def check_uniform_stationarity():
    """A uniform state is bitwise stationary: zero drift in mass and budget."""
    g = PeriodicGrid2D(16, 16)
    flow = FlowParams(cons=_cons())
    scen = build_scenario("uniform", g, flow, t_end=0.05)
    traj = run(scen, snapshots=2)
    s = traj.series
    assert s["mass"][-1] == s["mass"][0], "uniform run mass drifted"
    drift = np.max(np.abs(s["total_lhs"] - s["total_lhs"][0]))
    assert drift == 0.0, f"uniform run entropy budget drifted by {drift:.2e}"


def check_blob_mass_conservation():
    """Colliding blobs conserve mass to 1e-13 and odd momentum to round-off."""
    g = PeriodicGrid2D(32, 32)
    flow = FlowParams(cons=_cons())
    scen = build_scenario("colliding_blobs", g, flow, t_end=0.01)
    traj = run(scen, snapshots=2)
    s = traj.series
    drift = abs(s["mass"][-1] / s["mass"][0] - 1.0)
    assert drift <= 1e-13, f"mass drift {drift:.2e} > 1e-13"
    assert np.max(np.abs(s["px"])) <= 1e-12, "mirror-symmetric momentum nonzero"


# --- diagnostics ------------------------------------------------------------


def check_effective_velocity_identity():
    """Constant density makes the effective velocity equal the velocity."""
    g = PeriodicGrid2D(24, 24)
    flow = FlowParams(cons=_cons())
    rho = ScalarField(g, np.full((24, 24), 0.3))
    X, Y = g.cell_centers()
    u = VectorField2(g, np.sin(2 * np.pi * X), np.cos(2 * np.pi * Y))
    w = effective_velocity(rho, u, flow)
    assert np.array_equal(w.x, u.x) and np.array_equal(w.y, u.y), (
        "effective velocity differs from velocity at constant density"
    )


def check_divergence_moments_monotone():
    """Density-weighted divergence moments decrease in the exponent."""
    g = PeriodicGrid2D(32, 32)
    p = _cons()
    flow = FlowParams(cons=p)
    scen = build_scenario("colliding_blobs", g, flow)
    st = scen.initial_state()
    m = congestion_metrics(st.rho, st.u, p)
    ks = sorted(m.div_moments)
    vals = [m.div_moments[k] for k in ks]
    assert all(a >= b for a, b in zip(vals, vals[1:])), (
        f"divergence moments not monotone: {dict(zip(ks, vals))}"
    )


# --- limits -----------------------------------------------------------------


def check_regime_slopes():
    """Exclusion product decays like eps**a along near-packing scalings."""
    p = _cons()
    ladder = [1e-1, 3e-2, 1e-2, 3e-3]
    for s in (1.0, 1.0 + p.a):
        vals = [limits.regime_product(e, s, p) for e in ladder]
        fit = limits.fit_rate(ladder, vals, metric=f"regime s={s}")
        assert abs(fit.slope - p.a) <= 0.05, (
            f"regime slope {fit.slope:.4f} at s={s} not within {p.a} +- 0.05"
        )


def check_expansion_slope():
    """Pressure-expansion remainder decays like eps**min(2, a)."""
    p = _cons()
    ladder = [1e-1, 3e-2, 1e-2, 3e-3]
    vals = [limits.incompressible_expansion_residual(e, p.phi_star, p) for e in ladder]
    fit = limits.fit_rate(ladder, vals, metric="expansion")
    want = min(2.0, p.a)
    assert abs(fit.slope - want) <= 0.05, (
        f"expansion slope {fit.slope:.4f} not within {want} +- 0.05"
    )


def check_expansion_coefficient():
    """First-order pressure coefficient matches pi0**2/(2 phi*) within 1%."""
    p = _cons()
    pi0 = p.phi_star
    coeff = limits.expansion_first_order_coeff(1e-4, pi0, p)
    want = pi0**2 / (2.0 * p.phi_star)
    rel = abs(coeff / want - 1.0)
    assert rel <= 0.01, f"first-order coefficient off by {rel:.2%}"


def check_mass_window_arithmetic():
    """Closed-form mass window at eps=0.05, a=2, pi0=phi*=0.64 is [0.6384, 0.64)."""
    lo, hi = limits.mass_window_bounds(0.05, 2.0, 0.64, 0.64, 1.0)
    assert abs(lo - 0.6384) <= 1e-15 and hi == 0.64, f"window ({lo}, {hi}) wrong"


# --- cli_io -----------------------------------------------------------------


def check_config_roundtrip():
    """Configs survive serialize/parse; violations name their constraint."""
    text = "scenario = shear_layer\neps = 0.07\nnx = 48\ntheta = 0.2\n"
    cfg = cfg_mod.parse_config(text)
    again = cfg_mod.parse_config(cfg_mod.serialize_config(cfg))
    assert again == cfg, "config round trip not identical"
    try:
        cfg_mod.parse_config("scenario = uniform\neps = 0.05\na = 0.5")
    except ConfigError as exc:
        assert "a > 1" in str(exc), f"constraint name missing from: {exc}"
    else:
        raise AssertionError("a = 0.5 accepted")


def check_snapshot_roundtrip():
    """Snapshots round-trip bit-exactly and reject foreign bytes."""
    g = PeriodicGrid2D(12, 10, 2.0, 1.0)
    rng = np.random.default_rng(11)
    data = rng.random((12, 10))
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "f.cgsf")
        snap_mod.write_fields(path, g, {"rho": data}, t=0.25, phi_star=0.64)
        g2, t, ph, fields = snap_mod.read_fields(path)
        assert np.array_equal(fields["rho"], data) and t == 0.25, "round trip changed bits"
        with open(path, "r+b") as fh:
            fh.write(b"XXXX")
        try:
            snap_mod.read_fields(path)
        except SnapshotFormatError:
            pass
        else:
            raise AssertionError("bad magic accepted")


CHECKS = (
    ("bd_relation", check_bd_relation),
    ("pressure_viscosity_link", check_pressure_viscosity_link),
    ("truncation_continuity", check_truncation_continuity),
    ("law_derivatives", check_law_derivatives),
    ("stencil_order", check_stencil_order),
    ("spectral_roundtrip", check_spectral_roundtrip),
    ("solenoidal_projection", check_solenoidal_projection),
    ("drag_closed_form", check_drag_closed_form),
    ("uniform_stationarity", check_uniform_stationarity),
    ("blob_mass_conservation", check_blob_mass_conservation),
    ("effective_velocity_identity", check_effective_velocity_identity),
    ("divergence_moments_monotone", check_divergence_moments_monotone),
    ("regime_slopes", check_regime_slopes),
    ("expansion_slope", check_expansion_slope),
    ("expansion_coefficient", check_expansion_coefficient),
    ("mass_window_arithmetic", check_mass_window_arithmetic),
    ("config_roundtrip", check_config_roundtrip),
    ("snapshot_roundtrip", check_snapshot_roundtrip),
)


def run_checks(emit=print) -> int:
    """Run every named check; returns the number of failures."""
    failures = 0
    t_all = time.perf_counter()
    for name, fn in CHECKS:
        t0 = time.perf_counter()
        try:
            fn()
        except (AssertionError, CongestoError) as exc:
            failures += 1
            emit(f"FAIL  {name:32s} {time.perf_counter() - t0:6.2f}s  {exc}")
        else:
            emit(f"PASS  {name:32s} {time.perf_counter() - t0:6.2f}s")
    verdict = "all passed" if failures == 0 else f"{failures} failed"
    emit(f"{len(CHECKS)} checks, {verdict} in {time.perf_counter() - t_all:.1f}s")
    return failures
