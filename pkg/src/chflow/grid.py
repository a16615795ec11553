"""Cell-centered rectangular grid and Neumann-compatible discrete calculus.

The domain is the rectangle [0, lx] x [0, ly] split into nx * ny cells with
centers at ((i + 1/2) hx, (j + 1/2) hy).  Homogeneous Neumann boundary
conditions are built in through ghost-cell reflection, which makes the
5-point Laplacian diagonal in the type-II cosine basis: the 1D eigenvalues
are -(2/h^2) (1 - cos(pi k / n)).  That exact diagonalization is what the
fast constant-coefficient solver below exploits.

Field arrays are stored as float64 matrices of shape (ny, nx); entry [j, i]
is the cell centered at x = (i + 1/2) hx, y = (j + 1/2) hy.  Flattening in C
order gives the row-major vector of nx * ny values used by the snapshot
format.

All quadratures are midpoint quadratures with weight hx * hy.  The gradient
quadrature lives on cell faces and is chosen so that summation by parts is
exact: (-lap(f), g) == grad_inner(f, g) up to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.fft import dctn, idctn

__all__ = [
    "Grid",
    "ScalarField",
    "FaceCoeffs",
    "make_grid",
    "make_field",
    "zeros",
    "full",
    "from_function",
    "integral",
    "mean",
    "inner",
    "norm_l2",
    "norm_lr",
    "laplacian_neumann",
    "face_average",
    "mobility_div_grad",
    "grad_sq",
    "grad_inner",
    "weighted_grad_sq",
    "weighted_grad_inner",
    "dct_helmholtz_solve",
    "neg_laplacian_symbol",
]


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered rectangular grid."""

    nx: int
    ny: int
    lx: float
    ly: float

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise ValueError(f"grid needs at least 4 cells per axis, got {self.nx}x{self.ny}")
        if not (self.lx > 0 and self.ly > 0) or not np.isfinite([self.lx, self.ly]).all():
            raise ValueError(f"side lengths must be positive finite, got {self.lx}, {self.ly}")

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

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrids (X, Y) of cell-center coordinates, each of shape (ny, nx)."""
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y)


def make_grid(nx: int, ny: int, lx: float, ly: float) -> Grid:
    """Build a grid, rejecting non-positive or too-small dimensions."""
    if int(nx) != nx or int(ny) != ny:
        raise ValueError("cell counts must be integers")
    return Grid(int(nx), int(ny), float(lx), float(ly))


@dataclass
class ScalarField:
    """Scalar cell data (order parameter, chemical potential, sources)."""

    grid: Grid
    values: np.ndarray  # shape (ny, nx), float64

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())

    @property
    def values_flat(self) -> np.ndarray:
        """Row-major vector of the nx * ny cell values."""
        return self.values.reshape(-1)


def make_field(grid: Grid, values: np.ndarray, check: bool = True) -> ScalarField:
    """Wrap an array (shape (ny, nx) or flat nx*ny) as a field on ``grid``."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.shape == (grid.ny * grid.nx,):
        arr = arr.reshape(grid.ny, grid.nx)
    if arr.shape != (grid.ny, grid.nx):
        raise ValueError(f"expected shape {(grid.ny, grid.nx)} or flat, got {arr.shape}")
    if check and not np.isfinite(arr).all():
        raise ValueError("field values must be finite")
    return ScalarField(grid, np.ascontiguousarray(arr))


def zeros(grid: Grid) -> ScalarField:
    return ScalarField(grid, np.zeros(grid.shape))


def full(grid: Grid, value: float) -> ScalarField:
    return ScalarField(grid, np.full(grid.shape, float(value)))


def from_function(grid: Grid, fn) -> ScalarField:
    """Sample ``fn(x, y)`` at cell centers."""
    X, Y = grid.cell_centers()
    return make_field(grid, fn(X, Y))


def integral(f: ScalarField) -> float:
    return float(f.values.sum()) * f.grid.cell_area


def mean(f: ScalarField) -> float:
    return float(f.values.mean())


def inner(f: ScalarField, g: ScalarField) -> float:
    """L2 inner product (f, g) with midpoint quadrature."""
    _same_grid(f, g)
    return float(np.vdot(f.values, g.values)) * f.grid.cell_area


def norm_l2(f: ScalarField) -> float:
    return float(np.sqrt(max(inner(f, f), 0.0)))


def norm_lr(f: ScalarField, r: float) -> float:
    """L^r norm with midpoint quadrature (r >= 1)."""
    if r < 1:
        raise ValueError("r must be >= 1")
    a = np.abs(f.values)
    m = a.max()
    if m == 0.0:
        return 0.0
    # factor out the max to avoid overflow for large r
    return float(m * (np.sum((a / m) ** r) * f.grid.cell_area) ** (1.0 / r))


def _same_grid(f: ScalarField, g) -> None:
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")


# ---------------------------------------------------------------------------
# difference operators
# ---------------------------------------------------------------------------


def _lap_values(v: np.ndarray, hx: float, hy: float) -> np.ndarray:
    """5-point Laplacian with ghost-cell reflection, on raw (ny, nx) data."""
    out = np.empty_like(v)
    ihx2 = 1.0 / (hx * hx)
    ihy2 = 1.0 / (hy * hy)
    # x-direction second difference
    out[:, 1:-1] = (v[:, 2:] - 2.0 * v[:, 1:-1] + v[:, :-2]) * ihx2
    out[:, 0] = (v[:, 1] - v[:, 0]) * ihx2
    out[:, -1] = (v[:, -2] - v[:, -1]) * ihx2
    # y-direction second difference
    out[1:-1, :] += (v[2:, :] - 2.0 * v[1:-1, :] + v[:-2, :]) * ihy2
    out[0, :] += (v[1, :] - v[0, :]) * ihy2
    out[-1, :] += (v[-2, :] - v[-1, :]) * ihy2
    return out


def laplacian_neumann(f: ScalarField) -> ScalarField:
    """Discrete Laplacian with homogeneous Neumann boundary conditions.

    Second-order consistent; the output sums to zero up to rounding (discrete
    divergence theorem), and the operator is symmetric negative semidefinite.
    """
    if not np.isfinite(f.values).all():
        raise ValueError("non-finite input field")
    return ScalarField(f.grid, _lap_values(f.values, f.grid.hx, f.grid.hy))


@dataclass
class FaceCoeffs:
    """Nonnegative coefficients on cell faces; boundary faces are zero.

    ``x`` has shape (ny, nx+1) (faces normal to x), ``y`` has shape
    (ny+1, nx).  Zero boundary entries encode the no-flux condition
    b * du/dn = 0.
    """

    grid: Grid
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        if self.x.shape != (self.grid.ny, self.grid.nx + 1):
            raise ValueError("x-face array has wrong shape")
        if self.y.shape != (self.grid.ny + 1, self.grid.nx):
            raise ValueError("y-face array has wrong shape")

    @classmethod
    def constant(cls, grid: Grid, value: float = 1.0) -> "FaceCoeffs":
        x = np.full((grid.ny, grid.nx + 1), float(value))
        y = np.full((grid.ny + 1, grid.nx), float(value))
        x[:, 0] = x[:, -1] = 0.0
        y[0, :] = y[-1, :] = 0.0
        return cls(grid, x, y)


def face_average(b_cell: ScalarField, mode: str = "harmonic") -> FaceCoeffs:
    """Average cell coefficients onto interior faces; boundary faces zeroed.

    ``harmonic`` (default) keeps each face value between the adjacent cell
    values and bounds the flux by the smaller one; it requires positive cell
    values.  ``arithmetic`` is the midpoint.
    """
    v = b_cell.values
    g = b_cell.grid
    bx = np.zeros((g.ny, g.nx + 1))
    by = np.zeros((g.ny + 1, g.nx))
    if mode == "arithmetic":
        bx[:, 1:-1] = 0.5 * (v[:, 1:] + v[:, :-1])
        by[1:-1, :] = 0.5 * (v[1:, :] + v[:-1, :])
    elif mode == "harmonic":
        if np.any(v <= 0.0):
            raise ValueError("harmonic face averaging needs positive cell values")
        bx[:, 1:-1] = 2.0 * v[:, 1:] * v[:, :-1] / (v[:, 1:] + v[:, :-1])
        by[1:-1, :] = 2.0 * v[1:, :] * v[:-1, :] / (v[1:, :] + v[:-1, :])
    else:
        raise ValueError(f"unknown averaging mode {mode!r}")
    return FaceCoeffs(g, bx, by)


def _div_b_grad_values(bx: np.ndarray, by: np.ndarray, v: np.ndarray,
                       hx: float, hy: float) -> np.ndarray:
    """div(b grad v) with face coefficients and zero boundary flux (raw data)."""
    ihx2 = 1.0 / (hx * hx)
    ihy2 = 1.0 / (hy * hy)
    fx = np.zeros_like(bx)
    fy = np.zeros_like(by)
    fx[:, 1:-1] = bx[:, 1:-1] * (v[:, 1:] - v[:, :-1])
    fy[1:-1, :] = by[1:-1, :] * (v[1:, :] - v[:-1, :])
    return (fx[:, 1:] - fx[:, :-1]) * ihx2 + (fy[1:, :] - fy[:-1, :]) * ihy2


def mobility_div_grad(b_face: FaceCoeffs, p: ScalarField) -> ScalarField:
    """Conservative variable-coefficient operator div(b grad p).

    Reduces to ``laplacian_neumann`` for b == 1; the output sums to zero up
    to rounding for any coefficients (flux telescoping), and the operator is
    symmetric negative semidefinite.
    """
    if b_face.grid != p.grid:
        raise ValueError("face coefficients and field live on different grids")
    if not np.isfinite(p.values).all():
        raise ValueError("non-finite input field")
    g = p.grid
    return ScalarField(g, _div_b_grad_values(b_face.x, b_face.y, p.values, g.hx, g.hy))


def grad_sq(f: ScalarField) -> float:
    """Face-based quadrature of |grad f|^2, exact under summation by parts."""
    return grad_inner(f, f)


def grad_inner(f: ScalarField, g: ScalarField) -> float:
    """Face-based quadrature of grad f . grad g."""
    _same_grid(f, g)
    gr = f.grid
    dxf = (f.values[:, 1:] - f.values[:, :-1]) / gr.hx
    dxg = (g.values[:, 1:] - g.values[:, :-1]) / gr.hx
    dyf = (f.values[1:, :] - f.values[:-1, :]) / gr.hy
    dyg = (g.values[1:, :] - g.values[:-1, :]) / gr.hy
    return float((np.vdot(dxf, dxg) + np.vdot(dyf, dyg)) * gr.cell_area)


def weighted_grad_sq(b_face: FaceCoeffs, f: ScalarField) -> float:
    """Face-based quadrature of b |grad f|^2."""
    return weighted_grad_inner(b_face, f, f)


def weighted_grad_inner(b_face: FaceCoeffs, f: ScalarField, g: ScalarField) -> float:
    """Face-based quadrature of b grad f . grad g (interior faces only)."""
    _same_grid(f, g)
    gr = f.grid
    dxf = (f.values[:, 1:] - f.values[:, :-1]) / gr.hx
    dxg = (g.values[:, 1:] - g.values[:, :-1]) / gr.hx
    dyf = (f.values[1:, :] - f.values[:-1, :]) / gr.hy
    dyg = (g.values[1:, :] - g.values[:-1, :]) / gr.hy
    sx = np.vdot(b_face.x[:, 1:-1] * dxf, dxg)
    sy = np.vdot(b_face.y[1:-1, :] * dyf, dyg)
    return float((sx + sy) * gr.cell_area)


# ---------------------------------------------------------------------------
# cosine-transform constant-coefficient solver
# ---------------------------------------------------------------------------


@lru_cache(maxsize=32)
def _symbol_cached(nx: int, ny: int, lx: float, ly: float) -> np.ndarray:
    hx = lx / nx
    hy = ly / ny
    lx_modes = (2.0 / (hx * hx)) * (1.0 - np.cos(np.pi * np.arange(nx) / nx))
    ly_modes = (2.0 / (hy * hy)) * (1.0 - np.cos(np.pi * np.arange(ny) / ny))
    sym = ly_modes[:, None] + lx_modes[None, :]
    sym.flags.writeable = False
    return sym


def neg_laplacian_symbol(grid: Grid) -> np.ndarray:
    """Eigenvalues of -laplacian_neumann in the 2D DCT-II basis, shape (ny, nx)."""
    return _symbol_cached(grid.nx, grid.ny, grid.lx, grid.ly)


def dct_helmholtz_solve(alpha: float, beta: float, rhs: ScalarField) -> ScalarField:
    """Solve (alpha I - beta lap) u = rhs by modewise division in DCT space.

    Requires alpha > 0, beta >= 0, or the singular case alpha == 0, beta > 0
    with mean-zero right-hand side (then the unique zero-mean solution is
    returned).
    """
    if not np.isfinite(rhs.values).all():
        raise ValueError("non-finite right-hand side")
    if alpha < 0 or beta < 0:
        raise ValueError("need alpha >= 0 and beta >= 0")
    if alpha == 0 and beta == 0:
        raise ValueError("alpha and beta cannot both vanish")
    g = rhs.grid
    if alpha == 0:
        m = float(rhs.values.mean())
        scale = float(np.sqrt(np.mean(rhs.values ** 2))) or 1.0
        if abs(m) > 1e-10 * scale:
            raise ValueError(
                f"singular system: alpha = 0 needs a mean-zero right-hand side "
                f"(mass defect {m:.3e})"
            )
    fhat = dctn(rhs.values, type=2, norm="ortho")
    denom = alpha + beta * neg_laplacian_symbol(g)
    if alpha == 0:
        fhat = fhat.copy()
        fhat[0, 0] = 0.0
        denom = denom.copy()
        denom[0, 0] = 1.0
    u = idctn(fhat / denom, type=2, norm="ortho")
    if alpha == 0:
        u -= u.mean()
    return ScalarField(g, u)
