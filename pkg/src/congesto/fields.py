"""Periodic cell-centered fields and discrete operators on the flat torus.

Scalars and vectors live at cell centers ``x_i = (i + 1/2) hx``,
``y_j = (j + 1/2) hy`` of a uniform ``nx x ny`` grid with spacings
``hx = lx/nx``, ``hy = ly/ny``; arrays are indexed ``values[i, j]`` with the
first axis along x.  First derivatives use fourth-order centered stencils
with periodic wraparound, integrals use the midpoint rule (spectrally
accurate for smooth periodic data), and the mean-zero inverse Laplacian is
spectral via the FFT.

The centered stencils are exactly antisymmetric as matrices, so the discrete
integration-by-parts identity  integrate(f * divergence(v)) ==
-integrate(dot(gradient(f), v))  holds to rounding, which downstream energy
estimates rely on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridError, MeanZeroError

__all__ = [
    "PeriodicGrid2D",
    "ScalarField",
    "VectorField2",
    "SymTensorField2",
    "d_dx",
    "d_dy",
    "gradient",
    "divergence",
    "sym_asym_grad",
    "laplacian",
    "inv_laplacian_mean_zero",
    "integrate",
    "lp_norm",
    "to_csv",
]


@dataclass(frozen=True)
class PeriodicGrid2D:
    """Uniform periodic grid on [0, lx) x [0, ly); nx, ny even and >= 8."""

    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self):
        for name, n in (("nx", self.nx), ("ny", self.ny)):
            if not (isinstance(n, (int, np.integer)) and n >= 8 and n % 2 == 0):
                raise GridError(f"constraint {name} even and >= 8 violated: {name} = {n}")
        for name, extent in (("lx", self.lx), ("ly", self.ly)):
            if not (np.isfinite(extent) and extent > 0):
                raise GridError(f"constraint {name} > 0 violated: {name} = {extent}")

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def area(self) -> float:
        return self.lx * self.ly

    def cell_centers(self):
        """Meshgrid arrays X, Y of shape (nx, ny)."""
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y, indexing="ij")


def _check_values(grid: PeriodicGrid2D, values) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.shape != (grid.nx, grid.ny):
        raise GridError(
            f"field shape {arr.shape} does not match grid ({grid.nx}, {grid.ny})"
        )
    if not np.all(np.isfinite(arr)):
        raise GridError("field values must be finite")
    return arr


@dataclass
class ScalarField:
    """A scalar sampled at cell centers."""

    grid: PeriodicGrid2D
    values: np.ndarray

    def __post_init__(self):
        self.values = _check_values(self.grid, self.values)

    @classmethod
    def from_function(cls, grid: PeriodicGrid2D, fn) -> "ScalarField":
        X, Y = grid.cell_centers()
        return cls(grid, fn(X, Y))

    @classmethod
    def full(cls, grid: PeriodicGrid2D, value: float) -> "ScalarField":
        return cls(grid, np.full((grid.nx, grid.ny), float(value)))

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())


@dataclass
class VectorField2:
    """A 2-vector sampled at cell centers (components x, y)."""

    grid: PeriodicGrid2D
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.x = _check_values(self.grid, self.x)
        self.y = _check_values(self.grid, self.y)

    @classmethod
    def from_functions(cls, grid: PeriodicGrid2D, fx, fy) -> "VectorField2":
        X, Y = grid.cell_centers()
        return cls(grid, fx(X, Y), fy(X, Y))

    @classmethod
    def zeros(cls, grid: PeriodicGrid2D) -> "VectorField2":
        z = np.zeros((grid.nx, grid.ny))
        return cls(grid, z, z.copy())

    def copy(self) -> "VectorField2":
        return VectorField2(self.grid, self.x.copy(), self.y.copy())

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.x, self.y)


@dataclass
class SymTensorField2:
    """Symmetric 2x2 tensor at cell centers, stored as (xx, xy, yy)."""

    grid: PeriodicGrid2D
    xx: np.ndarray
    xy: np.ndarray
    yy: np.ndarray

    def __post_init__(self):
        self.xx = _check_values(self.grid, self.xx)
        self.xy = _check_values(self.grid, self.xy)
        self.yy = _check_values(self.grid, self.yy)

    def frobenius_sq(self) -> np.ndarray:
        """|T|^2 = T_xx^2 + 2 T_xy^2 + T_yy^2 pointwise."""
        return self.xx**2 + 2.0 * self.xy**2 + self.yy**2

    def trace(self) -> np.ndarray:
        return self.xx + self.yy


# ---------------------------------------------------------------------------
# stencil kernels on raw arrays (periodic, fourth-order centered)
# ---------------------------------------------------------------------------


def d_dx(values: np.ndarray, hx: float) -> np.ndarray:
    """Fourth-order centered x-derivative of a periodic array (axis 0).

    The paired-difference grouping makes the derivative of a constant array
    exactly zero in floating point, not just to rounding.
    """
    return (
        8.0 * (np.roll(values, -1, axis=0) - np.roll(values, 1, axis=0))
        - (np.roll(values, -2, axis=0) - np.roll(values, 2, axis=0))
    ) / (12.0 * hx)


def d_dy(values: np.ndarray, hy: float) -> np.ndarray:
    """Fourth-order centered y-derivative of a periodic array (axis 1)."""
    return (
        8.0 * (np.roll(values, -1, axis=1) - np.roll(values, 1, axis=1))
        - (np.roll(values, -2, axis=1) - np.roll(values, 2, axis=1))
    ) / (12.0 * hy)


def gradient(f: ScalarField) -> VectorField2:
    """Pointwise gradient (fourth order)."""
    g = f.grid
    return VectorField2(g, d_dx(f.values, g.hx), d_dy(f.values, g.hy))


def divergence(v: VectorField2) -> ScalarField:
    """Pointwise divergence (fourth order), same stencil as gradient."""
    g = v.grid
    return ScalarField(g, d_dx(v.x, g.hx) + d_dy(v.y, g.hy))


def sym_asym_grad(v: VectorField2):
    """Symmetric and antisymmetric parts of the velocity gradient.

    Returns (D, A) with D the symmetric tensor and A the scalar off-diagonal
    entry of the antisymmetric part, A = (d_y v_x - d_x v_y)/2, so
    |A(v)|^2 = 2*A**2 pointwise and trace(D) equals divergence(v).
    """
    g = v.grid
    dxvx = d_dx(v.x, g.hx)
    dyvx = d_dy(v.x, g.hy)
    dxvy = d_dx(v.y, g.hx)
    dyvy = d_dy(v.y, g.hy)
    D = SymTensorField2(g, dxvx, 0.5 * (dyvx + dxvy), dyvy)
    A = ScalarField(g, 0.5 * (dyvx - dxvy))
    return D, A


# ---------------------------------------------------------------------------
# spectral operators
# ---------------------------------------------------------------------------


def _wavenumbers_sq(grid: PeriodicGrid2D) -> np.ndarray:
    kx = 2.0 * np.pi * np.fft.fftfreq(grid.nx, d=grid.hx)
    ky = 2.0 * np.pi * np.fft.rfftfreq(grid.ny, d=grid.hy)
    return kx[:, None] ** 2 + ky[None, :] ** 2


def _stencil_symbol(k: np.ndarray, h: float) -> np.ndarray:
    """Fourier symbol of the fourth-order centered first-derivative stencil.

    d_dx acts on the mode exp(i k x) as multiplication by i*sigma(k); Nyquist
    modes have sigma = 0 (the stencil cannot see a checkerboard).
    """
    return (8.0 * np.sin(k * h) - np.sin(2.0 * k * h)) / (6.0 * h)


def project_divergence_free(v: VectorField2) -> VectorField2:
    """Remove the part of v seen as divergence by the derivative stencils.

    The projection solves the potential problem with the stencil's own
    Fourier symbol, so d_dx(out.x) + d_dy(out.y) vanishes to rounding --
    stronger than a spectral Helmholtz projection, which leaves O(h^4)
    stencil divergence behind.  The mean (k = 0) velocity and the stencil's
    null modes are untouched.
    """
    g = v.grid
    kx = 2.0 * np.pi * np.fft.fftfreq(g.nx, d=g.hx)
    ky = 2.0 * np.pi * np.fft.rfftfreq(g.ny, d=g.hy)
    sx = _stencil_symbol(kx, g.hx)[:, None]
    sy = _stencil_symbol(ky, g.hy)[None, :]
    s2 = sx * sx + sy * sy
    vx_h = np.fft.rfft2(v.x)
    vy_h = np.fft.rfft2(v.y)
    with np.errstate(invalid="ignore", divide="ignore"):
        phi_h = np.where(s2 > 0.0, (sx * vx_h + sy * vy_h) / s2, 0.0)
    out_x = np.fft.irfft2(vx_h - sx * phi_h, s=v.x.shape)
    out_y = np.fft.irfft2(vy_h - sy * phi_h, s=v.y.shape)
    return VectorField2(g, out_x, out_y)


def laplacian(f: ScalarField) -> ScalarField:
    """Spectral Laplacian; the exact inverse partner of inv_laplacian_mean_zero."""
    k2 = _wavenumbers_sq(f.grid)
    fh = np.fft.rfft2(f.values)
    out = np.fft.irfft2(-k2 * fh, s=f.values.shape)
    return ScalarField(f.grid, out)


def inv_laplacian_mean_zero(f: ScalarField) -> ScalarField:
    """Solve -Lap(g) = f spectrally for mean-zero f; g has zero mean.

    Precondition: |integrate(f)| <= 1e-10 * lp_norm(f, 1).
    """
    total = integrate(f)
    l1 = lp_norm(f, 1.0)
    if abs(total) > 1e-10 * max(l1, 1e-300):
        raise MeanZeroError(
            f"field is not mean-zero: integral = {total:.3e}, L1 norm = {l1:.3e}"
        )
    k2 = _wavenumbers_sq(f.grid)
    fh = np.fft.rfft2(f.values)
    with np.errstate(divide="ignore", invalid="ignore"):
        gh = np.where(k2 > 0.0, fh / k2, 0.0)
    out = np.fft.irfft2(gh, s=f.values.shape)
    return ScalarField(f.grid, out)


# ---------------------------------------------------------------------------
# integrals, norms, export
# ---------------------------------------------------------------------------


def integrate(f: ScalarField) -> float:
    """Midpoint-rule integral over the torus."""
    return float(np.sum(f.values)) * f.grid.cell_area


def lp_norm(f: ScalarField, p: float) -> float:
    """L^p norm with the midpoint rule; p = inf gives the max norm."""
    if p == np.inf:
        return float(np.max(np.abs(f.values)))
    if p <= 0:
        raise ValueError(f"constraint p > 0 violated: p = {p}")
    return float((np.sum(np.abs(f.values) ** p) * f.grid.cell_area) ** (1.0 / p))


def to_csv(f: ScalarField, path) -> None:
    """Write (x, y, value) rows; intended for small grids."""
    X, Y = f.grid.cell_centers()
    data = np.column_stack([X.ravel(), Y.ravel(), f.values.ravel()])
    np.savetxt(path, data, delimiter=",", header="x,y,value", comments="", fmt="%.17g")
