"""Solver tests: state validation, scenarios, step control, substeps,
run-loop behaviour, and the order of accuracy of the operator splitting."""

import math

import numpy as np
import pytest

from congesto.constitutive import ConstitutiveParams, dpi_eps
from congesto.diagnostics import FlowParams
from congesto.errors import ConstraintBreachError, ScenarioError, StallError, VacuumError
from congesto.fields import (
    PeriodicGrid2D,
    ScalarField,
    VectorField2,
    d_dx,
    d_dy,
    integrate,
)
from congesto.solver import (
    SCENARIO_NAMES,
    SolverNumerics,
    build_scenario,
    compute_dt,
    kinematic_run,
    make_state,
    run,
    step,
)

EPS = 0.05
PARAMS = ConstitutiveParams(eps=EPS)
FLOW = FlowParams(cons=PARAMS)


def uniform_state(grid, rho_val, ux=0.0, uy=0.0, cons=PARAMS):
    shape = (grid.nx, grid.ny)
    rho = ScalarField.full(grid, rho_val)
    m = VectorField2(grid, np.full(shape, rho_val * ux),
                     np.full(shape, rho_val * uy))
    return make_state(0.0, rho, m, cons)


class TestMakeState:
    def test_velocity_is_momentum_over_density(self):
        g = PeriodicGrid2D(8, 8)
        rng = np.random.default_rng(1)
        rho = ScalarField(g, 0.3 + 0.1 * rng.random((8, 8)))
        m = VectorField2(g, rng.standard_normal((8, 8)), rng.standard_normal((8, 8)))
        st = make_state(0.0, rho, m, PARAMS)
        assert np.array_equal(st.u.x, m.x / rho.values)
        assert np.array_equal(st.u.y, m.y / rho.values)

    def test_vacuum_rejected(self):
        g = PeriodicGrid2D(8, 8)
        vals = np.full((8, 8), 0.3)
        vals[3, 3] = 0.0
        with pytest.raises(VacuumError):
            make_state(0.0, ScalarField(g, vals), VectorField2.zeros(g), PARAMS)

    def test_packing_rejected_without_truncation(self):
        g = PeriodicGrid2D(8, 8)
        vals = np.full((8, 8), 0.3)
        vals[2, 5] = PARAMS.phi_star
        with pytest.raises(ConstraintBreachError):
            make_state(0.0, ScalarField(g, vals), VectorField2.zeros(g), PARAMS)

    def test_past_packing_allowed_with_truncation(self):
        g = PeriodicGrid2D(8, 8)
        trunc = ConstitutiveParams(eps=EPS, delta=0.1)
        vals = np.full((8, 8), 1.05 * trunc.phi_star)
        st = make_state(0.0, ScalarField(g, vals), VectorField2.zeros(g), trunc)
        assert st.headroom < 0.0

    def test_headroom(self):
        g = PeriodicGrid2D(8, 8)
        st = uniform_state(g, 0.5 * PARAMS.phi_star)
        assert st.headroom == pytest.approx(0.5)


class TestScenarios:
    def test_all_names_construct(self):
        g = PeriodicGrid2D(16, 16)
        for name in SCENARIO_NAMES:
            sc = build_scenario(name, g, FLOW)
            assert sc.name == name
            assert sc.t_end > 0
            sc.initial_state()

    def test_unknown_name_rejected(self):
        g = PeriodicGrid2D(16, 16)
        with pytest.raises(ScenarioError, match="unknown scenario"):
            build_scenario("vortex_street", g, FLOW)

    def test_blob_shape_knobs_are_blob_only(self):
        g = PeriodicGrid2D(16, 16)
        for kw in (dict(peak_fraction=0.9), dict(plateau_sharpness=4.0),
                   dict(solenoidal_start=True)):
            with pytest.raises(ScenarioError):
                build_scenario("shear_layer", g, FLOW, **kw)

    def test_limit_pressure_knob_is_incompressible_only(self):
        g = PeriodicGrid2D(16, 16)
        with pytest.raises(ScenarioError):
            build_scenario("uniform", g, FLOW, pi0=ScalarField.full(g, 0.64))

    def test_blob_mirror_symmetry_kills_net_momentum(self):
        g = PeriodicGrid2D(32, 32)
        sc = build_scenario("colliding_blobs", g, FLOW)
        px = float(np.sum(sc.m0.x)) * g.cell_area
        py = float(np.sum(sc.m0.y)) * g.cell_area
        scale = float(np.max(np.abs(sc.m0.x)))
        assert abs(px) <= 1e-14 * scale
        assert py == 0.0

    def test_blob_peak_fraction_is_respected(self):
        g = PeriodicGrid2D(32, 32)
        sc = build_scenario("colliding_blobs", g, FLOW, peak_fraction=0.7)
        assert float(np.max(sc.rho0.values)) == pytest.approx(0.7 * PARAMS.phi_star)
        with pytest.raises(ScenarioError, match="peak_fraction"):
            build_scenario("colliding_blobs", g, FLOW, peak_fraction=1.0)

    def test_solenoidal_start_projects(self):
        g = PeriodicGrid2D(32, 32)
        sc = build_scenario("colliding_blobs", g, FLOW, solenoidal_start=True)
        st = sc.initial_state()
        div = d_dx(st.u.x, g.hx) + d_dy(st.u.y, g.hy)
        assert np.max(np.abs(div)) <= 1e-10 * np.max(np.abs(st.u.x))

    def test_incompressible_start_matches_limit_profile(self):
        # the initial density is exactly the limit-pressure inversion
        from congesto.limits import incompressible_profile

        g = PeriodicGrid2D(32, 32)
        sc = build_scenario("incompressible_start", g, FLOW)
        X, Y = g.cell_centers()
        pi0 = PARAMS.phi_star * (
            1.0 + 0.25 * np.cos(2 * math.pi * X) * np.cos(2 * math.pi * Y)
        )
        assert np.array_equal(
            sc.rho0.values, incompressible_profile(EPS, pi0, PARAMS)
        )

    def test_incompressible_start_rejects_large_eps(self):
        g = PeriodicGrid2D(16, 16)
        lo = ScalarField.full(g, 1e-3)
        with pytest.raises(ScenarioError, match="positiv|violated"):
            build_scenario("incompressible_start", g, FLOW, pi0=lo)

    def test_seeded_noise_is_deterministic(self):
        g = PeriodicGrid2D(16, 16)
        a = build_scenario("colliding_blobs", g, FLOW, seed=42)
        b = build_scenario("colliding_blobs", g, FLOW, seed=42)
        c = build_scenario("colliding_blobs", g, FLOW, seed=43)
        assert np.array_equal(a.m0.x, b.m0.x)
        assert np.array_equal(a.m0.y, b.m0.y)
        assert not np.array_equal(a.m0.x, c.m0.x)
        assert np.array_equal(a.rho0.values, c.rho0.values)  # noise is momentum-only

    def test_bad_horizon_and_cadence_rejected(self):
        g = PeriodicGrid2D(16, 16)
        with pytest.raises(ScenarioError, match="t_end"):
            build_scenario("uniform", g, FLOW, t_end=-1.0)
        with pytest.raises(ScenarioError, match="snapshots"):
            build_scenario("uniform", g, FLOW, snapshots=1)


class TestStepControl:
    def test_acoustic_cfl_formula(self):
        g = PeriodicGrid2D(32, 32)
        st = uniform_state(g, 0.5 * PARAMS.phi_star, ux=2.0)
        flow = FlowParams(cons=PARAMS, theta=0.2)
        num = SolverNumerics()
        rho = 0.5 * PARAMS.phi_star
        speed = 2.0 + math.sqrt(dpi_eps(rho, PARAMS) / rho + 0.2)
        expected = min(num.dt_max(g), num.cfl * g.hx / speed)
        assert compute_dt(st, flow, num) == pytest.approx(expected, rel=1e-14)

    def test_quiescent_state_gets_dt_max(self):
        g = PeriodicGrid2D(32, 32)
        # theta = 0 keeps the sound speed from dpi alone
        st = uniform_state(g, 0.5 * PARAMS.phi_star)
        rho = 0.5 * PARAMS.phi_star
        c = math.sqrt(dpi_eps(rho, PARAMS) / rho)
        num = SolverNumerics(cfl=1e6)  # CFL cap pushed out of the way
        assert compute_dt(st, FLOW, num) == num.dt_max(g)
        assert c > 0.0

    def test_headroom_cap_engages_near_threshold(self):
        # a compressing cell near packing must tighten dt below the plain CFL
        g = PeriodicGrid2D(32, 32)
        X, _ = g.cell_centers()
        rho = ScalarField.full(g, 0.98 * PARAMS.phi_star)
        ux = -0.01 * np.sin(2 * math.pi * X)
        m = VectorField2(g, rho.values * ux, np.zeros((g.nx, g.ny)))
        st = make_state(0.0, rho, m, PARAMS)
        num = SolverNumerics()
        dt = compute_dt(st, FLOW, num)

        div = d_dx(st.u.x, g.hx)
        rate = np.max(np.maximum(-div, 0.0) * rho.values / PARAMS.phi_star
                      / (1.0 - rho.values / PARAMS.phi_star))
        assert dt <= num.headroom_fraction / rate * (1 + 1e-12)

        # the truncated law has no hard wall, so no headroom cap applies
        trunc = ConstitutiveParams(eps=EPS, delta=0.1)
        st_t = make_state(0.0, rho, m, trunc)
        assert compute_dt(st_t, FlowParams(cons=trunc), num) > dt

    def test_stall_when_floor_exceeds_step(self):
        g = PeriodicGrid2D(32, 32)
        st = uniform_state(g, 0.5 * PARAMS.phi_star, ux=1.0)
        with pytest.raises(StallError):
            compute_dt(st, FLOW, SolverNumerics(dt_min_factor=1.0))


class TestStep:
    def test_drag_closed_form(self):
        # uniform density and velocity: convection and viscosity are inert,
        # the quadratic drag root is u * 2/(1 + sqrt(1 + 4 dt r |u|))
        g = PeriodicGrid2D(16, 16)
        st = uniform_state(g, 0.32, ux=1.0)
        out = step(st, FLOW, SolverNumerics(), dt=1.0, ordering="lie")
        expected = (math.sqrt(5.0) - 1.0) / 2.0
        assert np.max(np.abs(out.u.x - expected)) <= 1e-14

    def test_drag_depends_on_dt_r_product(self):
        g = PeriodicGrid2D(16, 16)
        st = uniform_state(g, 0.32, ux=1.0)
        a = step(st, FlowParams(cons=PARAMS, r=4.0), SolverNumerics(), dt=0.25,
                 ordering="lie")
        b = step(st, FlowParams(cons=PARAMS, r=1.0), SolverNumerics(), dt=1.0,
                 ordering="lie")
        assert np.allclose(a.u.x, b.u.x, rtol=1e-15)

    def test_drag_preserves_direction(self):
        g = PeriodicGrid2D(16, 16)
        st = uniform_state(g, 0.32, ux=3.0, uy=4.0)
        out = step(st, FLOW, SolverNumerics(), dt=0.2, ordering="lie")
        # both components shrink by the same factor, so the ratio is frozen
        assert np.allclose(out.u.y / out.u.x, 4.0 / 3.0, rtol=1e-14)
        assert float(np.max(out.u.magnitude())) < 5.0

    def test_orderings_agree_to_first_order_only(self):
        g = PeriodicGrid2D(32, 32)
        sc = build_scenario("shear_layer", g, FLOW, t_end=0.05)
        st = sc.initial_state()
        dt = 1e-3
        a = step(st, FLOW, SolverNumerics(), dt, ordering="strang")
        b = step(st, FLOW, SolverNumerics(), dt, ordering="lie")
        diff = float(np.max(np.abs(a.rho.values - b.rho.values)))
        assert 0.0 < diff < 1e-5
        assert a.step_count == b.step_count == 1
        assert a.t == b.t == pytest.approx(dt)

    def test_unknown_ordering_and_bad_dt_rejected(self):
        g = PeriodicGrid2D(16, 16)
        st = uniform_state(g, 0.32)
        with pytest.raises(ValueError, match="ordering"):
            step(st, FLOW, SolverNumerics(), 1e-3, ordering="yoshida")
        with pytest.raises(ValueError, match="dt"):
            step(st, FLOW, SolverNumerics(), 0.0)

    def test_absurd_step_breaches_packing(self):
        g = PeriodicGrid2D(32, 32)
        sc = build_scenario("colliding_blobs", g, FLOW)
        with pytest.raises(ConstraintBreachError):
            step(sc.initial_state(), FLOW, SolverNumerics(), dt=0.05)


class TestRunLoop:
    def test_uniform_state_is_stationary_bitwise(self):
        g = PeriodicGrid2D(16, 16)
        sc = build_scenario("uniform", g, FLOW, t_end=0.05)
        traj = run(sc, snapshots=2)
        assert np.array_equal(traj.final.rho.values, sc.rho0.values)
        assert float(np.max(np.abs(traj.final.u.x))) == 0.0
        assert float(np.max(np.abs(traj.final.u.y))) == 0.0

    def test_mass_and_momentum_conserved(self):
        g = PeriodicGrid2D(32, 32)
        sc = build_scenario("colliding_blobs", g, FLOW, t_end=0.01)
        traj = run(sc, snapshots=2)
        m0 = integrate(sc.rho0)
        drift = abs(integrate(traj.final.rho) - m0) / m0
        assert drift <= 1e-13
        px = float(np.sum(traj.final.m.x)) * g.cell_area
        assert abs(px) <= 1e-12

    def test_snapshot_cadence(self):
        g = PeriodicGrid2D(32, 32)
        sc = build_scenario("colliding_blobs", g, FLOW)
        traj = run(sc, snapshots=5)
        assert 2 <= len(traj.states) <= 5
        assert traj.states[0].t == 0.0
        assert traj.final.t == sc.t_end
        ts = [s.t for s in traj.states]
        assert ts == sorted(ts)

    def test_keep_all_states(self):
        g = PeriodicGrid2D(32, 32)
        sc = build_scenario("colliding_blobs", g, FLOW, t_end=0.005)
        traj = run(sc, snapshots=2, keep_all_states=True)
        assert len(traj.states) == traj.final.step_count + 1
        # one diagnostics row per state, the initial one included
        assert len(traj.series["t"]) == traj.final.step_count + 1

    def test_series_columns_and_lengths(self):
        from congesto.diagnostics import TIMESERIES_COLUMNS

        g = PeriodicGrid2D(32, 32)
        sc = build_scenario("colliding_blobs", g, FLOW, t_end=0.005)
        traj = run(sc, snapshots=2)
        assert set(traj.series) == set(TIMESERIES_COLUMNS)
        n = len(traj.series["t"])
        assert all(len(v) == n for v in traj.series.values())

    def test_aggressive_cfl_recovers_by_halving(self):
        # cfl = 4 overshoots repeatedly; halve-and-retry must still deliver
        # a complete run that never touches the packing threshold
        g = PeriodicGrid2D(32, 32)
        sc = build_scenario("colliding_blobs", g, FLOW)
        traj = run(sc, SolverNumerics(cfl=4.0), snapshots=2)
        assert traj.final.t == sc.t_end
        maxr = max(float(np.max(s.rho.values)) for s in traj.states)
        assert maxr < PARAMS.phi_star

    def test_step_budget_exhaustion_stalls(self):
        g = PeriodicGrid2D(32, 32)
        sc = build_scenario("colliding_blobs", g, FLOW)
        with pytest.raises(StallError, match="budget"):
            run(sc, SolverNumerics(max_steps=3), snapshots=2)


class TestKinematicRun:
    def test_transport_conserves_mass_and_freezes_velocity(self):
        g = PeriodicGrid2D(32, 32)
        X, Y = g.cell_centers()
        rho0 = ScalarField(g, PARAMS.phi_star * (0.3 + 0.05 * np.cos(2 * math.pi * X)))
        psi = 0.1 * np.sin(2 * math.pi * X) * np.sin(2 * math.pi * Y)
        u = VectorField2(g, d_dy(psi, g.hy), -d_dx(psi, g.hx))
        states = kinematic_run(rho0, u, PARAMS, t_end=0.1)
        assert len(states) >= 3
        m0 = integrate(states[0].rho)
        assert max(abs(integrate(s.rho) - m0) for s in states) <= 1e-13 * m0
        for s in states:
            assert np.max(np.abs(s.u.x - u.x)) <= 1e-14
            assert np.max(np.abs(s.u.y - u.y)) <= 1e-14
        assert states[-1].t == pytest.approx(0.1, rel=1e-12)

    def test_horizon_validated(self):
        g = PeriodicGrid2D(16, 16)
        rho0 = ScalarField.full(g, 0.32)
        with pytest.raises(ValueError, match="t_end"):
            kinematic_run(rho0, VectorField2.zeros(g), PARAMS, t_end=0.0)


class TestSplittingOrder:
    def test_strang_is_second_order_lie_first(self):
        # self-convergence on a 32/64/128 ladder of the same smooth flow;
        # the step is tied to the mesh, so halving h halves dt as well
        flow = FlowParams(cons=ConstitutiveParams(eps=0.1), theta=0.2)

        def final_rho(n, ordering):
            g = PeriodicGrid2D(n, n)
            sc = build_scenario("shear_layer", g, flow, t_end=0.05,
                                velocity_scale=1.0)
            return run(sc, snapshots=2, ordering=ordering).final.rho.values

        def coarsen(a, f):
            n = a.shape[0] // f
            return a.reshape(n, f, n, f).mean(axis=(1, 3))

        orders = {}
        errs = {}
        for ordering in ("strang", "lie"):
            r32 = final_rho(32, ordering)
            r64 = final_rho(64, ordering)
            r128 = final_rho(128, ordering)
            e1 = float(np.max(np.abs(coarsen(r64, 2) - r32)))
            e2 = float(np.max(np.abs(coarsen(r128, 2) - r64)))
            orders[ordering] = math.log2(e1 / e2)
            errs[ordering] = e2
        assert orders["strang"] >= 1.8
        assert orders["lie"] <= 1.2
        assert errs["strang"] < errs["lie"]
