"""Uniform 1D cell-centered grids and the discrete calculus built on them.

Everything downstream (both solvers and all measurements) works with cell
averages on a fixed uniform mesh.  The mesh truncates the real line, so
compactly supported data must stay away from the boundary; solvers enforce
a 10% safety margin at runtime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Grid",
    "Field",
    "make_grid",
    "constant_field",
    "field_from_function",
    "derivative",
    "integrate",
    "antiderivative",
    "lp_norm",
    "check_support_margin",
    "write_field_csv",
    "read_field_csv",
]

FMT = "%.17g"


def _fmt(x: float) -> str:
    return FMT % x


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered mesh on [x_min, x_max] with n_cells cells.

    Cell i is centered at x_min + (i + 1/2) * dx.
    """

    x_min: float
    x_max: float
    n_cells: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x_min) and math.isfinite(self.x_max)):
            raise ValueError("grid bounds must be finite")
        if not self.x_min < self.x_max:
            raise ValueError(
                f"inverted bounds: x_min={self.x_min} must be < x_max={self.x_max}"
            )
        if int(self.n_cells) != self.n_cells or self.n_cells < 4:
            raise ValueError(f"n_cells must be an integer >= 4, got {self.n_cells}")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_cells

    @property
    def centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.n_cells) + 0.5) * self.dx


def make_grid(x_min: float, x_max: float, n_cells: int) -> Grid:
    return Grid(x_min, x_max, n_cells)


@dataclass(frozen=True)
class Field:
    """Real-valued function on a grid, stored as cell averages."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.shape != (self.grid.n_cells,):
            raise ValueError(
                f"field has {vals.shape} values for a grid of {self.grid.n_cells} cells"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("field contains non-finite values")


def constant_field(grid: Grid, value: float) -> Field:
    return Field(grid, np.full(grid.n_cells, float(value)))


def field_from_function(grid: Grid, fn) -> Field:
    return Field(grid, np.asarray(fn(grid.centers), dtype=float))


def derivative(f: Field) -> Field:
    """Spatial derivative: central differences inside, one-sided 3-point
    stencils at the two boundary cells.  Second order everywhere, exact on
    quadratics."""
    v = f.values
    dx = f.grid.dx
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - v[:-2]) / (2.0 * dx)
    # one-sided stencils written in difference form so constants give 0 exactly
    out[0] = (4.0 * (v[1] - v[0]) - (v[2] - v[0])) / (2.0 * dx)
    out[-1] = (4.0 * (v[-1] - v[-2]) - (v[-1] - v[-3])) / (2.0 * dx)
    return Field(f.grid, out)


def integrate(f: Field) -> float:
    """Midpoint quadrature over the whole domain."""
    return f.grid.dx * float(f.values.sum())


def antiderivative(f: Field) -> Field:
    """Left-anchored primitive: Phi_i = dx * sum_{j<=i} f_j.

    The anchor value at x_min is 0, which is the right normalization for
    fields that are compactly supported away from the boundary.
    """
    return Field(f.grid, f.grid.dx * np.cumsum(f.values))


def lp_norm(f: Field, p: float) -> float:
    """Discrete L^p norm; p = math.inf gives the max norm."""
    if p != math.inf and p < 1:
        raise ValueError(f"p must be >= 1 or inf, got {p}")
    a = np.abs(f.values)
    if p == math.inf:
        return float(a.max()) if a.size else 0.0
    if p == 1:
        return f.grid.dx * float(a.sum())
    if p == 2:
        return math.sqrt(f.grid.dx * float(np.dot(a, a)))
    return float((f.grid.dx * (a**p).sum()) ** (1.0 / p))


def check_support_margin(values: np.ndarray, grid: Grid, lo: float,
                         margin_frac: float = 0.1, strict: bool = False) -> None:
    """Raise if a compact support intrudes into the outer margin of the domain.

    The truncation of the real line is only faithful while supports stay
    clear of the boundary; intrusion is a hard error, not a warning.  Unless
    `strict`, data that are not compactly supported (boundary cells already
    above `lo`, e.g. constant states) are exempt: for them the zero-flux
    truncation is the caller's explicit modeling choice.  Initial data and
    test functions are validated strictly.
    """
    if not strict and (float(values[0]) > lo or float(values[-1]) > lo):
        return
    band = max(1, int(round(margin_frac * grid.n_cells)))
    if float(values[:band].max()) > lo or float(values[-band:].max()) > lo:
        raise RuntimeError(
            "support reached the outer "
            f"{margin_frac:.0%} margin of [{grid.x_min}, {grid.x_max}]; "
            "enlarge the domain"
        )


def write_field_csv(f: Field, path, header_comments: tuple[str, ...] = ()) -> None:
    """Write (x, value) columns with full double precision."""
    with open(path, "w") as fh:
        for line in header_comments:
            fh.write(f"# {line}\n")
        fh.write("x,value\n")
        for x, v in zip(f.grid.centers, f.values):
            fh.write(f"{_fmt(x)},{_fmt(v)}\n")


def read_field_csv(path) -> Field:
    """Read a field written by write_field_csv, reconstructing its grid."""
    xs: list[float] = []
    vs: list[float] = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("x,"):
                continue
            sx, sv = line.split(",")
            xs.append(float(sx))
            vs.append(float(sv))
    if len(xs) < 4:
        raise ValueError(f"{path}: need at least 4 rows to define a grid")
    x = np.asarray(xs)
    dx = x[1] - x[0]
    grid = Grid(float(x[0] - dx / 2), float(x[-1] + dx / 2), len(xs))
    return Field(grid, np.asarray(vs))
