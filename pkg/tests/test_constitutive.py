"""Law-level tests: high-precision value oracles, algebraic identities,
truncation behavior, and parameter validation."""

import numpy as np
import pytest

import congesto.constitutive as laws
from congesto.constitutive import (
    EXP_CAP,
    ConstitutiveParams,
    PotentialTable,
    sample_laws,
)
from congesto.errors import DomainError, OverflowDomainError


# Frozen 50-digit quadrature/closed-form values of (mu, mu1, dmu, lambda, pi,
# dpi), computed independently of the float implementation.
ORACLE_ROWS = [
    # (rho, params, (mu, mu1, dmu, lam, pi, dpi))
    (0.3, dict(eps=0.05),
     (0.30141193080887517, 0.0014119308088751812, 1.0088596622792787,
      0.0024919357498168338, 0.00066184256666024113, 0.0063591085822793424)),
    (0.6, dict(eps=0.05),
     (0.62402401600800316, 0.024024016008003182, 1.6412412274804045,
      0.72144144096047895, 0.022522515007502982, 0.63870117577538411)),
    (0.635, dict(eps=0.05),
     (0.83983430465740409, 0.20483430465740408, 42.618043483025522,
      52.445246614127605, 0.20323403665226811, 41.612956119341579)),
    (0.2, dict(eps=0.1, a=1.5, gamma=0.5),
     (0.20922054269383709, 0.009220542693837075, 1.067106724168399,
      0.0084016042796854343, 0.0051544400632146828, 0.050399899405003735)),
    (0.5, dict(eps=0.01, a=3.0, gamma=2.0, phi_star=0.7),
     (0.50000175000003063, 1.7500000306250007e-06, 1.0000122500003675,
      8.7500003062500092e-06, 8.9285715848214335e-07, 9.8214288214285797e-06)),
    # frozen branch: ratio above 1 - delta, including past packing
    (0.62, dict(eps=0.05, delta=0.1),
     (0.63550969153772004, 0.015509691537720043, 1.0250156315124517,
      0.0, 0.015025013677166291, 0.048467786055375133)),
    (0.7, dict(eps=0.05, delta=0.1),
     (0.71751094205871613, 0.017510942058716176, 1.0250156315124517,
      0.0, 0.019152592876720816, 0.05472169393348805)),
]


@pytest.mark.parametrize("rho,kw,want", ORACLE_ROWS)
def test_law_values_match_high_precision_table(rho, kw, want):
    p = ConstitutiveParams(**kw)
    got = (
        laws.mu_eps(rho, p), laws.mu1_eps(rho, p), laws.dmu_eps(rho, p),
        laws.lambda_eps(rho, p), laws.pi_eps(rho, p), laws.dpi_eps(rho, p),
    )
    for g, w in zip(got, want):
        assert g == pytest.approx(w, rel=1e-9, abs=1e-300)


def test_energy_quadrature_matches_reference_values():
    p = ConstitutiveParams(eps=0.05)
    assert laws.e_eps(0.3, p, 0.32) == pytest.approx(-0.00015157993838092661, rel=1e-9)
    assert laws.e_eps(0.6, p, 0.32) == pytest.approx(0.0052007921747894068, rel=1e-9)
    # default base point is vacuum (integrable for gamma = 1)
    assert laws.e_eps(0.3, p) == pytest.approx(0.0015814442727850365, rel=1e-9)
    assert laws.e_eps(0.6, p) == pytest.approx(0.0069338163859553714, rel=1e-9)


def test_sample_laws_row_is_consistent():
    p = ConstitutiveParams(eps=0.05)
    s = sample_laws(0.6, p)
    assert s.mu == laws.mu_eps(0.6, p)
    assert s.mu1 == s.mu - 0.6
    assert s.lam == laws.lambda_eps(0.6, p)
    assert s.pi == laws.pi_eps(0.6, p)
    assert s.rho_e == pytest.approx(0.0041602898315732228, rel=1e-9)


def test_bd_relation_on_dense_sample():
    # lambda = 2(rho mu' - mu); the linear part of mu cancels exactly in the
    # algebra, so it is removed before the float subtraction to keep the
    # comparison meaningful near vacuum.
    p = ConstitutiveParams(eps=0.05)
    rho = np.linspace(0.0, 0.95 * p.phi_star, 1000)
    lam = laws.lambda_eps(rho, p)
    alt = 2.0 * (rho * (laws.dmu_eps(rho, p) - 1.0) - laws.mu1_eps(rho, p))
    denom = np.where(lam != 0.0, np.abs(lam), 1.0)
    assert np.max(np.abs(lam - alt) / denom) <= 1e-10


@pytest.mark.parametrize("gamma", [1.0, 1.7, 3.0])
def test_pressure_viscosity_link_bit_identical(gamma):
    p = ConstitutiveParams(eps=0.05, gamma=gamma)
    rho = np.linspace(1e-8, 0.95 * p.phi_star, 1000)
    pi = laws.pi_eps(rho, p)
    alt = (rho / p.phi_star) ** p.gamma * (laws.mu_eps(rho, p) - rho)
    assert np.array_equal(pi, alt)


def test_derivatives_match_finite_differences():
    p = ConstitutiveParams(eps=0.05, gamma=1.3)
    h = 1e-7
    for rho in np.linspace(0.05, 0.62, 25):
        for f, df in ((laws.mu_eps, laws.dmu_eps), (laws.pi_eps, laws.dpi_eps)):
            fd = (f(rho + h, p) - f(rho - h, p)) / (2.0 * h)
            assert df(rho, p) == pytest.approx(fd, rel=2e-6)


def test_scalar_and_array_paths_agree():
    # non-integer gamma goes through pow, whose vectorized and scalar numpy
    # paths can differ in the last ulp; everything else must agree bitwise
    p = ConstitutiveParams(eps=0.07, a=2.5, gamma=1.2)
    rho = np.linspace(0.01, 0.6, 40)
    for fn in (laws.mu_eps, laws.mu1_eps, laws.dmu_eps, laws.lambda_eps):
        vec = fn(rho, p)
        scal = np.array([fn(float(r), p) for r in rho])
        assert np.array_equal(vec, scal), fn.__name__
    for fn in (laws.pi_eps, laws.dpi_eps):
        vec = fn(rho, p)
        scal = np.array([fn(float(r), p) for r in rho])
        assert np.allclose(vec, scal, rtol=5e-16, atol=0.0), fn.__name__


def test_monotone_blow_up_toward_packing():
    # each law grows monotonically on a density ladder approaching packing
    p = ConstitutiveParams(eps=0.05)
    rho = p.phi_star * (1.0 - np.geomspace(0.5, 1e-6, 60))
    for fn in (laws.mu_eps, laws.dmu_eps, laws.lambda_eps, laws.pi_eps):
        vals = fn(rho, p)
        assert np.all(np.diff(vals) > 0.0), fn.__name__
    # and the blow-up dwarfs the low-density values
    assert laws.mu_eps(rho[-1], p) > 1e3 * laws.mu_eps(0.3, p)


class TestTruncation:
    def test_laws_continuous_at_knee(self):
        p = ConstitutiveParams(eps=0.05, delta=0.2)
        knee = p.phi_star * (1.0 - p.delta)
        lo, hi = knee * (1 - 1e-12), knee * (1 + 1e-12)
        for fn in (laws.mu_eps, laws.mu1_eps, laws.pi_eps):
            assert fn(hi, p) == pytest.approx(fn(lo, p), rel=1e-9)

    def test_lambda_vanishes_on_closed_congested_set(self):
        p = ConstitutiveParams(eps=0.05, delta=0.1)
        knee = p.phi_star * (1.0 - p.delta)
        rho = np.linspace(knee, 1.2 * p.phi_star, 50)
        assert np.all(laws.lambda_eps(rho, p) == 0.0)
        # strictly below the knee the bulk viscosity is strictly positive
        assert laws.lambda_eps(knee * (1 - 1e-9), p) > 0.0

    def test_frozen_branch_is_linear_in_rho(self):
        p = ConstitutiveParams(eps=0.05, delta=0.1)
        r1, r2 = 0.6, 0.7  # both past the knee at 0.576
        slope = (laws.mu_eps(r2, p) - laws.mu_eps(r1, p)) / (r2 - r1)
        assert slope == pytest.approx(laws.dmu_eps(r1, p), rel=1e-12)
        assert laws.dmu_eps(r1, p) == laws.dmu_eps(r2, p)

    def test_untruncated_law_rejects_packing(self):
        p = ConstitutiveParams(eps=0.05)
        with pytest.raises(DomainError):
            laws.mu_eps(p.phi_star, p)
        with pytest.raises(DomainError):
            laws.pi_eps(1.1 * p.phi_star, p)

    def test_truncated_law_accepts_packing(self):
        p = ConstitutiveParams(eps=0.05, delta=0.05)
        assert np.isfinite(laws.mu_eps(1.3 * p.phi_star, p))


class TestOverflowGuard:
    def test_deep_singularity_raises(self):
        p = ConstitutiveParams(eps=0.05)
        # gap so small the exponent eps**(1+a)/gap would exceed 700
        rho = p.phi_star * (1.0 - p.eps ** 3 / (2 * EXP_CAP))
        with pytest.raises(OverflowDomainError):
            laws.mu_eps(rho, p)

    def test_cap_boundary_is_finite(self):
        p = ConstitutiveParams(eps=0.05)
        rho = p.phi_star * (1.0 - p.eps ** 3 / (0.9 * EXP_CAP))
        assert np.isfinite(laws.mu_eps(rho, p))

    def test_frozen_branch_exponent_checked_at_construction(self):
        with pytest.raises(OverflowDomainError):
            ConstitutiveParams(eps=0.5, a=1.5, delta=1e-7)


class TestParamValidation:
    @pytest.mark.parametrize("kw,frag", [
        (dict(eps=0.0), "eps > 0"),
        (dict(eps=-0.1), "eps > 0"),
        (dict(eps=0.05, a=1.0), "a > 1"),
        (dict(eps=0.05, a=0.5), "a > 1"),
        (dict(eps=0.05, gamma=-0.2), "gamma >= 0"),
        (dict(eps=0.05, phi_star=0.0), "phi_star > 0"),
        (dict(eps=0.05, delta=1.0), "0 <= delta < 1"),
        (dict(eps=0.05, delta=-0.1), "0 <= delta < 1"),
    ])
    def test_constraint_named_in_error(self, kw, frag):
        with pytest.raises(DomainError, match=frag.replace(">", ">")):
            ConstitutiveParams(**kw)

    def test_low_gamma_accepted_but_flagged(self):
        p = ConstitutiveParams(eps=0.05, gamma=0.5)
        assert any("gamma" in f for f in p.flags())
        assert ConstitutiveParams(eps=0.05, gamma=1.0).flags() == []

    def test_vacuum_floor_scales_with_packing(self):
        p = ConstitutiveParams(eps=0.05, phi_star=0.8)
        assert p.rho_floor == pytest.approx(1e-12 * 0.8)


def test_potential_table_matches_adaptive_quadrature():
    p = ConstitutiveParams(eps=0.05)
    table = PotentialTable(p)
    for rho in (0.05, 0.2, 0.45, 0.6, 0.635):
        assert table(rho) == pytest.approx(laws.e_eps(rho, p), rel=1e-8, abs=1e-12)
    # vectorized call agrees with per-point evaluation
    rho = np.linspace(0.02, 0.63, 200)
    vec = table(rho)
    assert np.allclose(vec, [table(float(r)) for r in rho], rtol=1e-14)


def test_potential_table_truncated_branch_extends_past_packing():
    p = ConstitutiveParams(eps=0.05, delta=0.1)
    table = PotentialTable(p)
    assert np.isfinite(table(1.1 * p.phi_star))
    assert table(1.1 * p.phi_star) == pytest.approx(
        laws.e_eps(1.1 * p.phi_star, p), rel=1e-8
    )


def test_grad_phi_weight_identity():
    p = ConstitutiveParams(eps=0.05)
    rho = np.linspace(0.05, 0.6, 30)
    w = laws.grad_phi_weight(rho, p)
    assert np.allclose(w, laws.dmu_eps(rho, p) / np.sqrt(rho), rtol=1e-14)
