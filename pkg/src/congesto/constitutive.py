"""Singular constitutive laws linking density to viscosity and pressure.

The shear viscosity blows up as the density approaches the close-packing
threshold ``phi_star``::

    mu(rho)  = (rho/eps) * (exp(E) - 1) + rho,   E = eps**(1+a) / (1 - rho/phi_star)

The singular pressure is slaved to the excess viscosity,
``pi(rho) = (rho/phi_star)**gamma * (mu(rho) - rho)``, and the bulk
viscosity follows from the algebraic relation ``lambda = 2*(dmu*rho - mu)``.

A truncation parameter ``delta`` freezes the exponent at ``eps**(1+a)/delta``
on the congested branch ``rho/phi_star > 1 - delta``.  That bounds every law,
extends their domain past ``phi_star``, and turns the hard packing constraint
into a stiff penalty; ``lambda`` vanishes identically on the closed set
``rho/phi_star >= 1 - delta`` (the frozen branch is linear in ``rho``, and
derivatives there are understood as right-derivatives).

All laws accept scalars or numpy arrays and are elementwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import DomainError, OverflowDomainError, QuadratureError, VacuumError

__all__ = [
    "EXP_CAP",
    "RHO_FLOOR_FRACTION",
    "ConstitutiveParams",
    "LawSample",
    "mu_eps",
    "mu1_eps",
    "dmu_eps",
    "lambda_eps",
    "pi_eps",
    "dpi_eps",
    "e_eps",
    "grad_phi_weight",
    "sample_laws",
    "PotentialTable",
]

#: Largest exponent fed to exp(); beyond this the laws are treated as out of
#: domain (a diverged state, not a float infinity).
EXP_CAP = 700.0

#: Vacuum floor, as a fraction of phi_star.
RHO_FLOOR_FRACTION = 1e-12


@dataclass(frozen=True)
class ConstitutiveParams:
    """Parameters of the singular laws.

    Attributes
    ----------
    eps : float
        Stiffness scale of the singular branch; the pressure and excess
        viscosity collapse like ``eps**a`` away from the threshold.
    a : float
        Exponent coupling the stiffness scale to the blow-up, ``a > 1``.
    gamma : float
        Pressure exponent, ``gamma >= 0``.  Values below 1 are accepted but
        flagged (see :meth:`flags`): the low-density behaviour of the
        pressure derivative is then outside the documented envelope.
    phi_star : float
        Close-packing threshold (default 0.64, random close packing).
    delta : float
        Truncation width in ``[0, 1)``; 0 means no truncation.
    """

    eps: float
    a: float = 2.0
    gamma: float = 1.0
    phi_star: float = 0.64
    delta: float = 0.0

    def __post_init__(self):
        if not self.eps > 0:
            raise DomainError(f"constraint eps > 0 violated: eps = {self.eps}")
        if not self.a > 1:
            raise DomainError(f"constraint a > 1 violated: a = {self.a}")
        if not self.gamma >= 0:
            raise DomainError(f"constraint gamma >= 0 violated: gamma = {self.gamma}")
        if not self.phi_star > 0:
            raise DomainError(f"constraint phi_star > 0 violated: phi_star = {self.phi_star}")
        if not 0.0 <= self.delta < 1.0:
            raise DomainError(f"constraint 0 <= delta < 1 violated: delta = {self.delta}")
        if self.delta > 0.0 and self.eps ** (1.0 + self.a) / self.delta > EXP_CAP:
            raise OverflowDomainError(
                "frozen-branch exponent eps**(1+a)/delta = "
                f"{self.eps ** (1.0 + self.a) / self.delta:.3g} exceeds the safe bound {EXP_CAP}"
            )

    @property
    def rho_floor(self) -> float:
        """Vacuum floor below which velocity reconstruction is refused."""
        return RHO_FLOOR_FRACTION * self.phi_star

    def flags(self) -> list[str]:
        """Advisory flags for accepted-but-unusual parameter choices."""
        notes = []
        if self.gamma < 1.0:
            notes.append(
                f"gamma = {self.gamma} < 1: accepted, but the pressure law is only "
                "documented for gamma >= 1; low-density derivatives degenerate"
            )
        return notes


@dataclass(frozen=True)
class LawSample:
    """All law values at a single density (one row of a law table)."""

    rho: float
    mu: float
    mu1: float
    dmu: float
    lam: float
    pi: float
    dpi: float
    rho_e: float


def _as_array(rho):
    arr = np.asarray(rho, dtype=float)
    return arr, arr.ndim == 0


def _ratio(arr: np.ndarray, p: ConstitutiveParams) -> np.ndarray:
    """Validate density and return rho/phi_star."""
    if not np.all(np.isfinite(arr)):
        raise DomainError("density must be finite")
    if np.any(arr < 0):
        raise DomainError(f"constraint rho >= 0 violated: min rho = {float(np.min(arr))}")
    ratio = arr / p.phi_star
    if p.delta == 0.0 and np.any(ratio >= 1.0):
        raise DomainError(
            "constraint rho/phi_star < 1 violated (delta = 0): "
            f"max rho/phi_star = {float(np.max(ratio))}"
        )
    return ratio


def _branches(ratio: np.ndarray, p: ConstitutiveParams):
    """Return (frozen mask, gap) with gap = 1 - ratio clamped at delta.

    On the frozen branch the gap is exactly delta, so the exponent is the
    constant eps**(1+a)/delta there; elsewhere gap = 1 - ratio > 0.
    """
    if p.delta > 0.0:
        frozen = ratio >= 1.0 - p.delta
        gap = np.where(frozen, p.delta, 1.0 - ratio)
    else:
        frozen = np.zeros(np.shape(ratio), dtype=bool)
        gap = 1.0 - ratio
    return frozen, gap


def _exponent(ratio: np.ndarray, p: ConstitutiveParams):
    frozen, gap = _branches(ratio, p)
    E = p.eps ** (1.0 + p.a) / gap
    if np.any(E > EXP_CAP):
        raise OverflowDomainError(
            f"singular exponent exceeds the safe bound {EXP_CAP:.0f}: "
            f"max exponent = {float(np.max(E)):.6g} (state too close to phi_star)"
        )
    return frozen, gap, E


def mu_eps(rho, p: ConstitutiveParams):
    """Shear viscosity mu(rho).  Domain: rho/phi_star < 1 when delta = 0."""
    arr, scalar = _as_array(rho)
    ratio = _ratio(arr, p)
    _, _, E = _exponent(ratio, p)
    val = arr / p.eps * np.expm1(E) + arr
    return float(val) if scalar else val


def mu1_eps(rho, p: ConstitutiveParams):
    """Excess (singular) part of the viscosity: mu(rho) - rho, same arithmetic path."""
    arr, scalar = _as_array(rho)
    val = mu_eps(arr, p) - arr
    return float(val) if scalar else val


def dmu_eps(rho, p: ConstitutiveParams):
    """Derivative of mu.  On the closed congested set rho/phi_star >= 1 - delta
    (delta > 0) this is the right-derivative of the frozen, linear branch.

    Satisfies dmu >= 1 everywhere.
    """
    arr, scalar = _as_array(rho)
    ratio = _ratio(arr, p)
    frozen, gap, E = _exponent(ratio, p)
    expm = np.expm1(E)
    dE = np.where(frozen, 0.0, p.eps ** (1.0 + p.a) / (p.phi_star * gap * gap))
    val = expm / p.eps + 1.0 + arr / p.eps * (expm + 1.0) * dE
    return float(val) if scalar else val


def lambda_eps(rho, p: ConstitutiveParams):
    """Bulk viscosity lambda(rho) = 2*(dmu(rho)*rho - mu(rho)), in closed form.

    Equals 2*eps**a * rho**2 * exp(E) / (phi_star*(1-rho/phi_star)**2) below
    the truncation knee and is identically zero on the closed set
    rho/phi_star >= 1 - delta when delta > 0.
    """
    arr, scalar = _as_array(rho)
    ratio = _ratio(arr, p)
    if p.delta > 0.0:
        frozen = ratio >= 1.0 - p.delta
    else:
        frozen = np.zeros(np.shape(ratio), dtype=bool)
    gap = np.where(frozen, 1.0, 1.0 - ratio)  # placeholder 1.0 where lambda = 0
    E = p.eps ** (1.0 + p.a) / gap
    if np.any(~frozen & (E > EXP_CAP)):
        raise OverflowDomainError(
            f"singular exponent exceeds the safe bound {EXP_CAP:.0f} "
            "(state too close to phi_star)"
        )
    val = np.where(
        frozen,
        0.0,
        2.0 * p.eps**p.a * arr * arr * np.exp(np.where(frozen, 0.0, E))
        / (p.phi_star * gap * gap),
    )
    return float(val) if scalar else val


def pi_eps(rho, p: ConstitutiveParams):
    """Singular pressure pi(rho) = (rho/phi_star)**gamma * (mu(rho) - rho).

    Computed literally through mu_eps so the pressure-viscosity link holds
    bit-for-bit, not merely to rounding.
    """
    arr, scalar = _as_array(rho)
    val = (arr / p.phi_star) ** p.gamma * (mu_eps(arr, p) - arr)
    return float(val) if scalar else val


def dpi_eps(rho, p: ConstitutiveParams):
    """Derivative of the singular pressure (right-derivative on the frozen branch)."""
    arr, scalar = _as_array(rho)
    ratio = _ratio(arr, p)
    frozen, gap, E = _exponent(ratio, p)
    expm = np.expm1(E)
    mu1 = arr / p.eps * expm
    dE = np.where(frozen, 0.0, p.eps ** (1.0 + p.a) / (p.phi_star * gap * gap))
    dmu1 = expm / p.eps + arr / p.eps * (expm + 1.0) * dE
    # gamma * ratio**(gamma-1) * mu1 / phi_star vanishes as rho -> 0 for any
    # gamma > 0 (mu1 ~ rho); guard the 0**negative evaluation at rho == 0.
    positive = arr > 0.0
    safe_ratio = np.where(positive, ratio, 1.0)
    term1 = np.where(
        positive,
        p.gamma / p.phi_star * safe_ratio ** (p.gamma - 1.0) * mu1,
        0.0,
    )
    val = term1 + ratio**p.gamma * dmu1
    return float(val) if scalar else val


def e_eps(rho, p: ConstitutiveParams, rho_ref: float | None = None) -> float:
    """Specific potential energy e(rho): integral of pi(s)/s**2 from rho_ref to rho.

    Adaptive quadrature with relative tolerance 1e-10.  The base point
    rho_ref defaults to 0, which is integrable only for gamma > 0; pass a
    positive rho_ref when gamma == 0.
    """
    if rho_ref is None:
        rho_ref = 0.0
    if rho_ref == 0.0 and p.gamma == 0.0:
        raise DomainError(
            "constraint gamma > 0 violated for base point rho_ref = 0; "
            "pi(s)/s**2 is not integrable at 0 when gamma == 0"
        )
    if rho_ref < 0:
        raise DomainError(f"constraint rho_ref >= 0 violated: rho_ref = {rho_ref}")
    rho = float(rho)
    _ratio(np.asarray(rho, dtype=float), p)  # validate the target density
    if rho == rho_ref:
        return 0.0

    def integrand(s: float) -> float:
        return pi_eps(s, p) / (s * s)

    lo, hi = (rho_ref, rho) if rho >= rho_ref else (rho, rho_ref)
    sign = 1.0 if rho >= rho_ref else -1.0
    knee = p.phi_star * (1.0 - p.delta)
    points = [knee] if (p.delta > 0.0 and lo < knee < hi) else None
    val, abserr = integrate.quad(
        integrand, lo, hi, epsabs=1e-300, epsrel=1e-10, limit=400, points=points
    )
    if abs(abserr) > 1e-8 * max(abs(val), 1e-300):
        raise QuadratureError(
            f"potential-energy quadrature did not reach tolerance: value {val:.6g}, "
            f"error estimate {abserr:.3g}"
        )
    return sign * val


def grad_phi_weight(rho, p: ConstitutiveParams):
    """Weight dmu(rho)/sqrt(rho) turning grad(rho) into sqrt(rho)*grad(phi(rho)).

    The effective-velocity shift uses grad(phi) = (dmu(rho)/rho) grad(rho);
    this weight is the square-root-density form of the same chain rule.
    Raises below the vacuum floor.
    """
    arr, scalar = _as_array(rho)
    if np.any(arr < p.rho_floor):
        raise VacuumError(
            f"density below the vacuum floor {p.rho_floor:.3e}: "
            f"min rho = {float(np.min(arr)):.3e}"
        )
    val = dmu_eps(arr, p) / np.sqrt(arr)
    return float(val) if scalar else val


def sample_laws(rho: float, p: ConstitutiveParams, rho_ref: float | None = None) -> LawSample:
    """Evaluate every law at one density (one row of a law table)."""
    rho = float(rho)
    mu = mu_eps(rho, p)
    return LawSample(
        rho=rho,
        mu=mu,
        mu1=mu - rho,
        dmu=dmu_eps(rho, p),
        lam=lambda_eps(rho, p),
        pi=pi_eps(rho, p),
        dpi=dpi_eps(rho, p),
        rho_e=rho * e_eps(rho, p, rho_ref) if rho > 0 else 0.0,
    )


# ---------------------------------------------------------------------------
# Fast vectorized potential energy
# ---------------------------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


class PotentialTable:
    """Precomputed primitive of pi(s)/s**2 for vectorized field evaluation.

    ``e_eps`` runs one adaptive quadrature per scalar, which is far too slow
    to evaluate on a whole grid every step.  This table integrates the same
    integrand once with per-interval Gauss-Legendre panels on a mesh graded
    toward the singular threshold and then answers vectorized queries with a
    cubic Hermite interpolant whose endpoint slopes are the exact integrand.

    Agreement with ``e_eps`` is part of the test suite (relative 1e-8).
    """

    def __init__(self, p: ConstitutiveParams, rho_ref: float | None = None):
        if rho_ref is None:
            rho_ref = 0.0
        if rho_ref == 0.0 and p.gamma == 0.0:
            raise DomainError(
                "constraint gamma > 0 violated for base point rho_ref = 0"
            )
        self.params = p
        self.rho_ref = float(rho_ref)
        ph = p.phi_star
        lo = p.rho_floor
        shoulder = 0.85 * ph

        nodes = [np.linspace(lo, shoulder, 1600, endpoint=False)]
        if p.delta > 0.0:
            # geometric grading down to the truncation knee, then a linear
            # stretch across the frozen (bounded) branch
            if p.delta < 0.15:
                gaps = np.geomspace(0.15, p.delta, 1600)
                nodes.append(ph * (1.0 - gaps))
            else:
                nodes.append(np.linspace(shoulder, ph * (1.0 - p.delta), 200))
            nodes.append(np.linspace(ph * (1.0 - p.delta), 2.0 * ph, 800)[1:])
        else:
            # stay strictly inside the exponent cap: the topmost node keeps
            # a ~1.5% margin so rounding can never push exp's argument over
            gap_min = max(p.eps ** (1.0 + p.a) / (0.985 * EXP_CAP), 1e-13)
            gaps = np.geomspace(0.15, gap_min, 3200)
            nodes.append(ph * (1.0 - gaps))
        x = np.unique(np.concatenate(nodes))
        g = pi_eps(x, p) / (x * x)

        # 8-point Gauss-Legendre on every interval, vectorized over intervals
        x0, x1 = x[:-1], x[1:]
        mid = 0.5 * (x0 + x1)
        half = 0.5 * (x1 - x0)
        s = mid[:, None] + half[:, None] * _GL_NODES[None, :]
        gs = pi_eps(s.ravel(), p) / (s.ravel() ** 2)
        panel = half * (gs.reshape(s.shape) @ _GL_WEIGHTS)
        F = np.concatenate([[0.0], np.cumsum(panel)])

        # shift so values are relative to rho_ref: F(rho) - F(rho_ref)
        offset = e_eps(float(x[0]), p, rho_ref) if x[0] != rho_ref else 0.0
        self._x = x
        self._g = g
        self._F = F + offset

    def __call__(self, rho):
        """Vectorized e(rho); domain is the table range."""
        arr, scalar = _as_array(rho)
        if np.any(arr < self._x[0]) or np.any(arr > self._x[-1]):
            raise DomainError(
                f"density outside potential-table range [{self._x[0]:.3e}, {self._x[-1]:.6g}]: "
                f"range of rho = [{float(np.min(arr)):.3e}, {float(np.max(arr)):.6g}]"
            )
        idx = np.clip(np.searchsorted(self._x, arr, side="right") - 1, 0, len(self._x) - 2)
        x0 = self._x[idx]
        h = self._x[idx + 1] - x0
        t = (arr - x0) / h
        t2 = t * t
        t3 = t2 * t
        h00 = 2 * t3 - 3 * t2 + 1
        h10 = t3 - 2 * t2 + t
        h01 = -2 * t3 + 3 * t2
        h11 = t3 - t2
        val = (
            h00 * self._F[idx]
            + h10 * h * self._g[idx]
            + h01 * self._F[idx + 1]
            + h11 * h * self._g[idx + 1]
        )
        return float(val) if scalar else val
