"""Closed-form kernels: peakon profile, Green function of 1 - d_xx,
the bump mollifier and the arctan-exponential weight."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import quad
from scipy.linalg import solve_banded
from scipy.signal import lfilter

from .grid import DomainError, Grid, GridField, ResolutionError

PSI_SCALE = 6.0


def peakon_profile(c, offset):
    """c * exp(-|offset|); broadcasts over arrays."""
    return c * np.exp(-np.abs(offset))


def peakon_slope(c, offset):
    """Derivative of the peakon profile, taking the value 0 at the crest."""
    return -c * np.sign(offset) * np.exp(-np.abs(offset))


# --- Green function of (1 - d_xx) -------------------------------------------

def _as_grid(grid) -> Grid:
    if isinstance(grid, Grid):
        return grid
    if isinstance(grid, GridField):
        return grid.grid
    origin, dx, n = grid
    return Grid(float(origin), float(dx), int(n))


def green_convolve(f, grid=None) -> np.ndarray:
    """Convolve ``f`` with p(x) = exp(-|x|)/2 on a uniform grid.

    ``f`` is either a GridField / sample array (trapezoid quadrature of the
    exact kernel, evaluated with two exponential recursions) or a sequence
    of ``(position, mass)`` atoms, which are summed in closed form.
    Returns the node values of the convolution.
    """
    if isinstance(f, GridField):
        grid = f.grid if grid is None else _as_grid(grid)
        values = f.samples
    elif grid is None:
        raise DomainError("a grid is required")
    else:
        grid = _as_grid(grid)
        values = None if _is_atom_list(f) else np.asarray(f, dtype=float)

    if grid.n < 1:
        raise DomainError("empty grid")
    if values is None:
        x = grid.x
        out = np.zeros(grid.n)
        for pos, mass in f:
            out += 0.5 * mass * np.exp(-np.abs(x - pos))
        return out
    if values.shape != (grid.n,):
        raise DomainError("sample count does not match the grid")
    return _green_samples(values, grid.dx)


def _is_atom_list(f) -> bool:
    if isinstance(f, np.ndarray):
        return False
    f = list(f)
    return len(f) == 0 or all(np.ndim(a) == 1 and len(a) == 2 for a in f)


def _green_samples(values: np.ndarray, dx: float) -> np.ndarray:
    g = values.astype(float, copy=True)
    g[0] *= 0.5
    g[-1] *= 0.5
    r = np.exp(-dx)
    left = lfilter([1.0], [1.0, -r], g)
    right = lfilter([1.0], [1.0, -r], g[::-1])[::-1]
    return 0.5 * dx * (left + right - g)


def helmholtz_coefficients(dx: float) -> tuple[float, float]:
    """Diagonal and off-diagonal of the fitted three-point 1 - d_xx.

    (L u)_i = alpha u_i - beta (u_{i-1} - 2 u_i + u_{i+1}) with
    alpha = (2/dx) tanh(dx/2) and beta = 1/(dx sinh dx); both tend to the
    plain centered values (1, 1/dx^2) as O(dx^2).  The fitting makes
    sampled exp(+-x) exact null vectors away from the ends, so L is the
    inverse of the trapezoid Green convolution on the whole line and a
    sampled peakon has momentum only at its crest.
    """
    alpha = 2.0 / dx * np.tanh(0.5 * dx)
    beta = 1.0 / (dx * np.sinh(dx))
    return alpha + 2.0 * beta, -beta


def helmholtz_solve(f, dx: float | None = None) -> np.ndarray:
    """Solve L u = f for the fitted centered operator with homogeneous
    Dirichlet ghost nodes on both sides (a strictly diagonally dominant
    tridiagonal system)."""
    if isinstance(f, GridField):
        dx = f.dx
        f = f.samples
    f = np.asarray(f, dtype=float)
    if dx is None:
        raise DomainError("grid spacing required")
    if f.ndim != 1 or f.size < 3:
        raise DomainError("helmholtz_solve needs at least 3 nodes")
    diag, off = helmholtz_coefficients(dx)
    ab = np.empty((3, f.size))
    ab[0] = off
    ab[1] = diag
    ab[2] = off
    return solve_banded((1, 1), ab, f)


def apply_helmholtz(u: np.ndarray, dx: float) -> np.ndarray:
    """L u with the same zero-ghost closure as helmholtz_solve."""
    diag, off = helmholtz_coefficients(dx)
    padded = np.concatenate(([0.0], u, [0.0]))
    return diag * u + off * (padded[2:] + padded[:-2])


# --- mollifier ----------------------------------------------------------------

def bump(x):
    """exp(1/(x^2 - 1)) on |x| < 1, zero elsewhere."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1.0
    out[inside] = np.exp(1.0 / (x[inside] ** 2 - 1.0))
    return out


def bump_mass() -> float:
    """Integral of the unnormalized bump over [-1, 1]."""
    val, _ = quad(lambda s: float(np.exp(1.0 / (s * s - 1.0))), -1.0, 1.0,
                  epsabs=1e-14, epsrel=1e-13)
    return val


@dataclass(frozen=True, eq=False)
class MollifierKernel:
    n: int
    dx: float
    weights: np.ndarray

    @property
    def half_width(self) -> int:
        return (self.weights.size - 1) // 2

    @property
    def offsets(self) -> np.ndarray:
        return self.dx * np.arange(-self.half_width, self.half_width + 1)

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Discrete convolution, zero-padded, same length as ``values``."""
        return np.convolve(values, self.weights, mode="same")


def mollifier_kernel(n: int, dx: float) -> MollifierKernel:
    """Node weights of rho_n = n rho(n .) renormalized to sum to one."""
    if int(n) != n or n < 1:
        raise DomainError(f"mollifier index must be a positive integer, got {n}")
    n = int(n)
    if not dx < 1.0 / n:
        raise ResolutionError(
            f"spacing {dx} does not resolve the support [-1/{n}, 1/{n}]")
    half = int(np.ceil(1.0 / (n * dx))) - 1
    # nodes strictly inside the open support
    while (half + 1) * dx * n < 1.0:
        half += 1
    k = np.arange(-half, half + 1)
    w = bump(n * dx * k)
    w = 0.5 * (w + w[::-1])
    w /= w.sum()
    w.setflags(write=False)
    return MollifierKernel(n, float(dx), w)


# --- weight Psi -----------------------------------------------------------------

def weight_psi(x, order: int = 0):
    """(2/pi) arctan(exp(x/6)) and its first or third derivative.

    Closed forms in s = x/6:  Psi' = sech(s)/(6 pi),
    Psi''' = sech(s) (1 - 2 sech(s)^2) / (216 pi).
    """
    if order not in (0, 1, 3):
        raise ValueError(f"unsupported derivative order {order}")
    x = np.asarray(x, dtype=float)
    s = x / PSI_SCALE
    if order == 0:
        e = np.exp(-np.abs(s))
        tail = (2.0 / np.pi) * np.arctan(e)
        out = np.where(s > 0, 1.0 - tail, tail)
        return out if out.ndim else float(out)
    e = np.exp(-np.abs(s))
    sech = 2.0 * e / (1.0 + e * e)
    if order == 1:
        out = sech / (PSI_SCALE * np.pi)
    else:
        out = sech * (1.0 - 2.0 * sech * sech) / (PSI_SCALE ** 3 * np.pi)
    return out if out.ndim else float(out)


def psi_tail_constant(x: Sequence[float]) -> float:
    """Smallest C with Psi(x) + Psi'(x) <= C exp(x/6) on the given x <= 0."""
    x = np.asarray(x, dtype=float)
    x = x[x <= 0]
    ratio = (weight_psi(x) + weight_psi(x, 1)) * np.exp(-x / PSI_SCALE)
    return float(np.max(ratio))
