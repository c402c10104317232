"""Conserved quantities, Psi-localized functionals, monotonicity audits and
the weighted energy / momentum flux identities."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .grid import GridField, centered_gradient, squared_slope, trapezoid
from .kernels import green_convolve, weight_psi
from .measures import AtomicMomentum
from .multipeakon import exp_sums


class InvariantRecord(NamedTuple):
    t: float
    M: float
    E: float
    F: float


class FunctionalSample(NamedTuple):
    t: float
    J_right: float
    J_left: float
    I_value: float
    R: float
    gamma: float
    center: float


def _pair(y, g: Callable) -> float:
    """<y, g> for either momentum representation (zero for y=None)."""
    if y is None:
        return 0.0
    return y.pair(g)


def _energy_density(u: GridField, ux2: np.ndarray | None = None) -> np.ndarray:
    s = u.samples
    if ux2 is None:
        ux2 = squared_slope(s, u.dx)
    return s * s + ux2


def invariants(u: GridField, y, t: float = 0.0) -> InvariantRecord:
    """M = <y, 1>, E = int u^2 + u_x^2, F = int u^3 + u u_x^2 (trapezoid)."""
    s = u.samples
    ux2 = squared_slope(s, u.dx)
    E = trapezoid(s * s + ux2, u.dx)
    F = trapezoid(s ** 3 + s * ux2, u.dx)
    return InvariantRecord(t, y.total, E, F)


def localized_right(u: GridField, y, center: float, R: float, gamma: float) -> float:
    """<u^2 + u_x^2 + gamma y, Psi(. - center - R)>."""
    if gamma < 0 or R <= 0:
        raise ValueError("need gamma >= 0 and R > 0")
    w = lambda x: weight_psi(np.asarray(x) - center - R)
    return trapezoid(_energy_density(u) * w(u.x), u.dx) + gamma * _pair(y, w)


def localized_left(u: GridField, y, center: float, R: float, gamma: float) -> float:
    """<u^2 + u_x^2 + gamma y, 1 - Psi(. - center + R)>."""
    if gamma < 0 or R <= 0:
        raise ValueError("need gamma >= 0 and R > 0")
    w = lambda x: 1.0 - weight_psi(np.asarray(x) - center + R)
    return trapezoid(_energy_density(u) * w(u.x), u.dx) + gamma * _pair(y, w)


def localized_middle(u: GridField, y, center: float, R: float, gamma: float) -> float:
    """The complementary piece: weight Psi(. - center + R) - Psi(. - center - R)."""
    w = lambda x: (weight_psi(np.asarray(x) - center + R)
                   - weight_psi(np.asarray(x) - center - R))
    return trapezoid(_energy_density(u) * w(u.x), u.dx) + gamma * _pair(y, w)


# --- monotonicity audit -----------------------------------------------------------

@dataclass
class AuditReport:
    times: np.ndarray
    I: np.ndarray
    J_right: np.ndarray
    J_left: np.ndarray
    violation: np.ndarray  # I(t0) - I(t) for t <= t0, nan afterwards
    left_drop: np.ndarray  # J_l(t0) - J_l(t) for t >= t0, nan before
    R: float
    gamma: float
    t0_index: int
    K0: float | None = None

    @property
    def worst_increase(self) -> float:
        v = self.violation[np.isfinite(self.violation)]
        return float(max(0.0, v.max())) if v.size else 0.0

    @property
    def worst_left_drop(self) -> float:
        v = self.left_drop[np.isfinite(self.left_drop)]
        return float(max(0.0, v.max())) if v.size else 0.0

    @property
    def bound(self) -> float | None:
        return None if self.K0 is None else self.K0 * np.exp(-self.R / 6.0)

    @property
    def passed(self) -> bool | None:
        if self.K0 is None:
            return None
        return self.worst_increase <= self.bound and self.worst_left_drop <= self.bound

    def samples(self, centers) -> list[FunctionalSample]:
        return [FunctionalSample(float(t), float(jr), float(jl), float(i), self.R,
                                 self.gamma, float(c))
                for t, jr, jl, i, c in zip(self.times, self.J_right, self.J_left,
                                           self.I, centers)]


def monotonicity_audit(trajectory, center_track: Sequence[float], R: float,
                       gamma: float, z_speed_fraction: float, t0_index: int,
                       K0: float | None = None) -> AuditReport:
    """I(t) = <u^2 + u_x^2 + gamma y, Psi(. - z(t))> along the receding line
    z(t) = x(t0) + R + f (x(t) - x(t0)), f = ``z_speed_fraction``.

    ``violation`` is I(t0) - I(t) for t <= t0; ``left_drop`` tracks how much
    the left functional J_l(u(t, . + x(t))) falls below its t0 value for
    t >= t0.
    """
    n = len(trajectory)
    if not 0 <= t0_index < n:
        raise IndexError(f"t0 index {t0_index} outside trajectory of length {n}")
    if not 0 < z_speed_fraction < 1:
        raise ValueError("z_speed_fraction must lie in (0, 1)")
    centers = np.asarray(center_track, dtype=float)
    x0 = centers[t0_index]
    I = np.empty(n)
    Jr = np.empty(n)
    Jl = np.empty(n)
    for k in range(n):
        u = trajectory[k]
        y = trajectory.momentum(k)
        z = x0 + R + z_speed_fraction * (centers[k] - x0)
        I[k] = localized_right(u, y, z - R, R, gamma)
        Jr[k] = localized_right(u, y, centers[k], R, gamma)
        Jl[k] = localized_left(u, y, centers[k], R, gamma)
    idx = np.arange(n)
    violation = np.where(idx <= t0_index, I[t0_index] - I, np.nan)
    left_drop = np.where(idx >= t0_index, Jl[t0_index] - Jl, np.nan)
    return AuditReport(np.asarray(trajectory.times, dtype=float), I, Jr, Jl,
                       violation, left_drop, float(R), float(gamma), t0_index, K0)


def fit_K0(report: AuditReport) -> float:
    """Smallest K0 for which this report's defects meet K0 exp(-R/6)."""
    worst = max(report.worst_increase, report.worst_left_drop)
    return worst * np.exp(report.R / 6.0)


def write_audit_csv(path, report: AuditReport, header_lines=()) -> None:
    with open(path, "w", newline="\n") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write(f"# R = {report.R:.17g}\n# gamma = {report.gamma:.17g}\n")
        fh.write(f"# worst_increase = {report.worst_increase:.17g}\n")
        fh.write(f"# worst_left_drop = {report.worst_left_drop:.17g}\n")
        if report.K0 is not None:
            fh.write(f"# K0 = {report.K0:.17g}\n# bound = {report.bound:.17g}\n")
        fh.write("t,I,J_right,J_left,violation\n")
        for row in zip(report.times, report.I, report.J_right, report.J_left,
                       report.violation):
            fh.write(",".join("nan" if not np.isfinite(v) else f"{v:.17g}" for v in row)
                     + "\n")


# --- decay profile ---------------------------------------------------------------

@dataclass
class DecayProfile:
    R: np.ndarray
    tail: np.ndarray
    rate: float | None
    bound_rate: float = -1.0 / 6.0

    def satisfies(self, tol: float = 1e-3) -> bool | None:
        if self.rate is None:
            return None
        return self.rate <= self.bound_rate + tol


def decay_profile(u: GridField, y, center: float, R_values: Sequence[float],
                  gamma: float, floor: float = 1e-14) -> DecayProfile:
    """Energy-momentum outside [center - R, center + R] versus R.

    The tail at each R is int_{|x-center|>R} (u^2 + u_x^2) + gamma y(|x-center|>R),
    i.e. the cut-off weight supported off [-R, R].  The exponential rate is
    a least-squares fit of log(tail) on R over tails above ``floor``.
    """
    R_values = np.asarray(R_values, dtype=float)
    if np.any(np.diff(R_values) <= 0):
        raise ValueError("R values must increase")
    dens = _energy_density(u)
    x = u.x
    tails = []
    for R in R_values:
        out = lambda s, R=R: (np.abs(np.asarray(s) - center) > R).astype(float)
        tails.append(trapezoid(dens * out(x), u.dx) + gamma * _pair(y, out))
    tails = np.array(tails)
    keep = tails > floor
    rate = None
    if keep.sum() >= 2:
        rate = float(np.polyfit(R_values[keep], np.log(tails[keep]), 1)[0])
    return DecayProfile(R_values, tails, rate)


# --- flux identities -------------------------------------------------------------

@dataclass(frozen=True)
class Weight:
    """A time-independent weight g with its derivative."""

    f: Callable
    df: Callable

    @classmethod
    def psi(cls, shift: float = 0.0) -> "Weight":
        return cls(lambda x: weight_psi(np.asarray(x) - shift),
                   lambda x: weight_psi(np.asarray(x) - shift, 1))

    @classmethod
    def constant(cls) -> "Weight":
        return cls(lambda x: np.ones_like(np.asarray(x, dtype=float)),
                   lambda x: np.zeros_like(np.asarray(x, dtype=float)))

    @classmethod
    def from_field(cls, g: GridField) -> "Weight":
        dg = g.with_samples(centered_gradient(g.samples, g.dx))
        return cls(g.interp, dg.interp)


def _as_weight(g) -> Weight:
    return Weight.from_field(g) if isinstance(g, GridField) else g


def _slope_squared(trajectory, k: int) -> np.ndarray:
    exact = trajectory.exact_slope(k) if hasattr(trajectory, "exact_slope") else None
    if exact is not None:
        return exact * exact
    return squared_slope(trajectory.samples[k], trajectory.dx)


def _weighted_energy(trajectory, k: int, w: Weight) -> float:
    s = trajectory.samples[k]
    return trapezoid((s * s + _slope_squared(trajectory, k)) * w.f(trajectory.grid.x),
                     trajectory.dx)


def _check_interior(trajectory, k: int) -> None:
    if not 0 < k < len(trajectory) - 1:
        raise IndexError(f"time index {k} has no neighbours on both sides")


def _time_derivative(trajectory, k: int, q: Callable[[int], float]) -> float:
    t = trajectory.times
    return (q(k + 1) - q(k - 1)) / (t[k + 1] - t[k - 1])


def energy_flux_residual(trajectory, g, k: int) -> float:
    """|d/dt <u^2+u_x^2, g> - <u u_x^2, g'> - 2 <u h, g'>| at stored step k,
    h = (1 - d_xx)^{-1}(u^2 + u_x^2/2); d/dt by centered differences."""
    _check_interior(trajectory, k)
    w = _as_weight(g)
    x = trajectory.grid.x
    dx = trajectory.dx
    lhs = _time_derivative(trajectory, k, lambda j: _weighted_energy(trajectory, j, w))
    s = trajectory.samples[k]
    ux2 = _slope_squared(trajectory, k)
    h = green_convolve(s * s + 0.5 * ux2, trajectory.grid)
    dg = w.df(x)
    rhs = trapezoid(s * ux2 * dg, dx) + 2.0 * trapezoid(s * h * dg, dx)
    return abs(lhs - rhs)


def _weighted_momentum(y, w: Weight) -> float:
    return y.pair(w.f)


def _momentum_flux_rhs(u: np.ndarray, ux: np.ndarray, x: np.ndarray, dx: float, y,
                       w: Weight, u_at_atoms=None) -> float:
    dg = w.df(x)
    half = 0.5 * trapezoid((u * u - ux * ux) * dg, dx)
    if isinstance(y, AtomicMomentum):
        if u_at_atoms is None:
            u_at_atoms = np.interp(y.positions, x, u)
        transport = float(np.sum(y.masses * u_at_atoms * w.df(y.positions)))
    else:
        transport = trapezoid(y.samples * u * dg, dx)
    return transport + half


def momentum_flux_residual(trajectory, momenta, g, k: int) -> float:
    """|d/dt <y, g> - <y u, g'> - 1/2 <u^2 - u_x^2, g'>| at stored step k.

    ``momenta`` is a sequence of momentum densities matching the stored
    steps, or None to take them from the trajectory.
    """
    _check_interior(trajectory, k)
    w = _as_weight(g)
    mom = (lambda j: trajectory.momentum(j)) if momenta is None else (lambda j: momenta[j])
    lhs = _time_derivative(trajectory, k, lambda j: _weighted_momentum(mom(j), w))
    x = trajectory.grid.x
    s = trajectory.samples[k]
    exact = trajectory.exact_slope(k) if hasattr(trajectory, "exact_slope") else None
    ux = exact if exact is not None else centered_gradient(s, trajectory.dx)
    y = mom(k)
    u_at = None
    if isinstance(y, AtomicMomentum) and getattr(trajectory, "p", None) is not None:
        p, q = trajectory.p[k], trajectory.q[k]
        if q.size == y.positions.size and np.allclose(q, y.positions):
            left, right = exp_sums(p, q)
            u_at = p + left + right
    rhs = _momentum_flux_rhs(s, ux, x, trajectory.dx, y, w, u_at)
    return abs(lhs - rhs)


def flux_tolerance(dt: float, dx: float, E: float) -> float:
    return 20.0 * (dt * dt + dx) * E
