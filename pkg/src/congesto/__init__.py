"""congesto: 2D periodic compressible flow with singular pressure and viscosity.

A numpy/scipy library for simulating dense suspensions on the flat torus.
Shear viscosity and pressure blow up at a close-packing density, keeping the
flow strictly below the threshold; diagnostics track a kappa-entropy budget,
congestion indicators, and the stiff and truncation limits of the laws.
"""

__version__ = "0.1.0"

from .constitutive import (
    ConstitutiveParams,
    LawSample,
    PotentialTable,
    dmu_eps,
    dpi_eps,
    e_eps,
    grad_phi_weight,
    lambda_eps,
    mu1_eps,
    mu_eps,
    pi_eps,
    sample_laws,
)
from .diagnostics import (
    DIV_MOMENT_EXPONENTS,
    TIMESERIES_COLUMNS,
    CongestionMetrics,
    EntropyReport,
    FlowParams,
    RunningDiagnostics,
    congestion_metrics,
    effective_velocity,
    entropy_report,
    mu_balance_residual,
)
from .errors import (
    CongestoError,
    ConfigError,
    ConstraintBreachError,
    DomainError,
    GridError,
    LinearSolveError,
    MeanZeroError,
    OverflowDomainError,
    QuadratureError,
    RateFitError,
    ScenarioError,
    SnapshotFormatError,
    StallError,
    SweepError,
    VacuumError,
)
from .fields import (
    PeriodicGrid2D,
    ScalarField,
    SymTensorField2,
    VectorField2,
    d_dx,
    d_dy,
    divergence,
    gradient,
    integrate,
    inv_laplacian_mean_zero,
    laplacian,
    lp_norm,
    project_divergence_free,
    sym_asym_grad,
)
from .solver import (
    SCENARIO_NAMES,
    Scenario,
    SolverNumerics,
    SolverState,
    Trajectory,
    build_scenario,
    compute_dt,
    kinematic_run,
    make_state,
    run,
    step,
)
from .limits import (
    SWEEP_PARAMS,
    MassWindow,
    RateFit,
    SweepRecord,
    expansion_first_order_coeff,
    fit_rate,
    incompressible_expansion_residual,
    incompressible_profile,
    mass_window_bounds,
    mass_window_check,
    regime_product,
    run_sweep,
)
