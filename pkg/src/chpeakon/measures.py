"""State u and momentum density y = u - u_xx in atomic or sampled form."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from .grid import DomainError, Grid, GridField, centered_gradient
from .kernels import apply_helmholtz

ATOM_PADDING = 40.0


@dataclass(frozen=True, eq=False)
class AtomicMomentum:
    """y = sum of point masses; a peakon of height p is an atom of mass 2p."""

    positions: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        pos = np.atleast_1d(np.asarray(self.positions, dtype=float))
        mass = np.atleast_1d(np.asarray(self.masses, dtype=float))
        if pos.shape != mass.shape:
            raise DomainError("positions and masses differ in length")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(mass))):
            raise DomainError("non-finite atom")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "masses", mass)

    @classmethod
    def from_atoms(cls, atoms: Iterable[tuple[float, float]]) -> "AtomicMomentum":
        atoms = list(atoms)
        if not atoms:
            return cls(np.empty(0), np.empty(0))
        pos, mass = zip(*atoms)
        return cls(np.array(pos), np.array(mass))

    @property
    def total(self) -> float:
        return float(self.masses.sum())

    def pair(self, g) -> float:
        """<y, g> for a callable weight g."""
        if self.positions.size == 0:
            return 0.0
        return float(np.sum(self.masses * g(self.positions)))


@dataclass(frozen=True, eq=False)
class SampledMomentum:
    field: GridField

    @property
    def samples(self) -> np.ndarray:
        return self.field.samples

    @property
    def total(self) -> float:
        return float(self.field.dx * self.field.samples.sum())

    def pair(self, g) -> float:
        return float(self.field.dx * np.sum(self.samples * g(self.field.x)))


MomentumDensity = AtomicMomentum | SampledMomentum


class YplusReport(NamedTuple):
    is_nonnegative: bool
    worst_violation: float


def grid_for_atoms(positions, dx: float, padding: float = ATOM_PADDING) -> Grid:
    positions = np.atleast_1d(np.asarray(positions, dtype=float))
    lo = positions.min() if positions.size else 0.0
    hi = positions.max() if positions.size else 0.0
    return Grid.covering(lo - padding, hi + padding, dx)


def field_from_atoms(atoms, grid: Grid | None = None, dx: float = 0.01) -> GridField:
    """Evaluate u = sum (mass/2) exp(-|x - q|) at the grid nodes.

    Without an explicit grid one is built around the atoms with 40 units of
    padding on both sides.
    """
    if not isinstance(atoms, AtomicMomentum):
        atoms = AtomicMomentum.from_atoms(atoms)
    if np.any(atoms.masses <= 0):
        raise DomainError("atom masses must be positive")
    if grid is None:
        grid = grid_for_atoms(atoms.positions, dx)
    x = grid.x
    u = np.zeros(grid.n)
    for q, m in zip(atoms.positions, atoms.masses):
        u += 0.5 * m * np.exp(-np.abs(x - q))
    return GridField.on(grid, u)


def momentum_of_field(u: GridField) -> SampledMomentum:
    """y = u - D2 u with zero ghost nodes (the helmholtz_solve closure)."""
    return SampledMomentum(u.with_samples(apply_helmholtz(u.samples, u.dx)))


def yplus_tolerance(y: np.ndarray) -> float:
    return 1e-8 * max(1.0, float(np.max(y)))


def check_Yplus(y) -> YplusReport:
    if isinstance(y, AtomicMomentum):
        bad = y.masses[y.masses <= 0]
        return YplusReport(bad.size == 0, float(-bad.min()) if bad.size else 0.0)
    s = y.samples
    worst = max(0.0, -float(s.min()))
    return YplusReport(worst <= yplus_tolerance(s), worst)


def h1_norm(u: GridField, half_line_start: float | None = None) -> float:
    """Riemann-sum H^1 norm with centered u_x, optionally over [start, inf)."""
    s = u.samples
    ux = centered_gradient(s, u.dx)
    dens = s * s + ux * ux
    if half_line_start is not None:
        if not u.grid.contains(half_line_start):
            raise DomainError(f"half-line start {half_line_start} outside the grid")
        dens = dens[u.x >= half_line_start]
    return float(np.sqrt(dens.sum() * u.dx))


def cone_excess(u: GridField) -> float:
    """max over nodes of |u_x| - u, centered u_x."""
    s = u.samples
    return float(np.max(np.abs(centered_gradient(s, u.dx)) - s))


# --- CSV ------------------------------------------------------------------------

def write_field_csv(path, u: GridField, header_lines: Iterable[str] = ()) -> None:
    with open(path, "w", newline="\n") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("x,u\n")
        for x, v in zip(u.x, u.samples):
            fh.write(f"{x:.17g},{v:.17g}\n")


def read_field_csv(path) -> GridField:
    with open(path) as fh:
        lines = [line for line in fh if not line.startswith("#")]
    if not lines or lines[0].strip() != "x,u":
        raise ValueError(f"{path}: expected an 'x,u' header")
    x, u = np.loadtxt(lines[1:], delimiter=",", ndmin=2).T
    return GridField(float(x[0]), float((x[-1] - x[0]) / (x.size - 1)), u)
