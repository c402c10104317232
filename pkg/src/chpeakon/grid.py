"""Uniform one-dimensional grids and sampled fields."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MIN_NODES = 16


class DomainError(ValueError):
    """Input lies outside the domain where an operation is defined."""


class ResolutionError(ValueError):
    """A kernel support is not resolved by the grid spacing."""


@dataclass(frozen=True)
class Grid:
    origin: float
    dx: float
    n: int

    def __post_init__(self):
        if not self.dx > 0 or not np.isfinite(self.dx):
            raise DomainError(f"grid spacing must be positive, got {self.dx}")
        if self.n < 1:
            raise DomainError("empty grid")

    @classmethod
    def covering(cls, left: float, right: float, dx: float) -> "Grid":
        n = int(np.ceil((right - left) / dx)) + 1
        return cls(float(left), float(dx), n)

    @property
    def x(self) -> np.ndarray:
        return self.origin + self.dx * np.arange(self.n)

    @property
    def right(self) -> float:
        return self.origin + self.dx * (self.n - 1)

    def contains(self, x: float) -> bool:
        return self.origin <= x <= self.right

    def index_left(self, x: float) -> int:
        """Index of the node at or immediately left of ``x``."""
        return int(np.floor((x - self.origin) / self.dx + 1e-12))

    def nearest(self, x: float) -> int:
        return int(np.rint((x - self.origin) / self.dx))


@dataclass(frozen=True, eq=False)
class GridField:
    """Values of u at the nodes ``origin + i*dx``."""

    origin: float
    dx: float
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        s = np.array(self.samples, dtype=float)
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        if s.ndim != 1 or s.size < MIN_NODES:
            raise DomainError(f"a GridField needs at least {MIN_NODES} nodes")
        if not np.all(np.isfinite(s)):
            raise DomainError("non-finite samples")
        if not self.dx > 0:
            raise DomainError(f"grid spacing must be positive, got {self.dx}")

    @classmethod
    def on(cls, grid: Grid, samples) -> "GridField":
        return cls(grid.origin, grid.dx, samples)

    @property
    def grid(self) -> Grid:
        return Grid(self.origin, self.dx, self.samples.size)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def __len__(self):
        return self.samples.size

    def with_samples(self, samples) -> "GridField":
        return GridField(self.origin, self.dx, samples)

    def decay_ok(self, rel: float = 1e-10) -> bool:
        """True when both boundary samples are negligible against the peak."""
        s = self.samples
        top = np.max(np.abs(s))
        return top == 0.0 or max(abs(s[0]), abs(s[-1])) <= rel * top

    def interp(self, x):
        """Linear interpolation; zero outside the grid."""
        return np.interp(x, self.x, self.samples, left=0.0, right=0.0)

    def translated(self, shift: float) -> "GridField":
        """Same grid, samples of u(. - shift) by linear interpolation."""
        return self.with_samples(self.interp(self.x - shift))


def centered_gradient(u: np.ndarray, dx: float) -> np.ndarray:
    """Centered differences with one-sided two-node closure at the ends."""
    g = np.empty_like(u)
    g[1:-1] = (u[2:] - u[:-2]) / (2 * dx)
    g[0] = (u[1] - u[0]) / dx
    g[-1] = (u[-1] - u[-2]) / dx
    return g


def backward_slope(u: np.ndarray, dx: float) -> np.ndarray:
    """(u_i - u_{i-1})/dx with a zero ghost node left of the grid."""
    return np.diff(u, prepend=0.0) / dx


def forward_slope(u: np.ndarray, dx: float) -> np.ndarray:
    """(u_{i+1} - u_i)/dx with a zero ghost node right of the grid."""
    return np.diff(u, append=0.0) / dx


def squared_slope(u: np.ndarray, dx: float) -> np.ndarray:
    """Nodal u_x**2 as the mean of the squared one-sided slopes.

    Exact at a crest of a peaked profile where the centered stencil
    returns zero.
    """
    b = backward_slope(u, dx)
    f = forward_slope(u, dx)
    return 0.5 * (b * b + f * f)


def trapezoid(values: np.ndarray, dx: float) -> float:
    return float(dx * (values.sum() - 0.5 * (values[0] + values[-1])))
