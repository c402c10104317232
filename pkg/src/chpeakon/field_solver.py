"""Evolution of nonnegative-momentum data on a uniform grid.

Two schemes share one interface:

``lagrangian`` (default)
    The grid momentum y = (1 - d_xx) u is deposited as point masses
    y_i dx at the nodes.  The masses ride the characteristics q' = u(q)
    and exchange momentum through the Green kernel, which is the transport
    form y_t + u y_x + 2 u_x y = 0 discretized along the flow.  Masses stay
    positive, the total momentum is exact and the energy is conserved to
    RK4 accuracy; u is re-evaluated on the grid in closed form.

``upwind``
    Eulerian method of lines for u_t + u u_x + d_x h = 0 with u u_x
    upwinded by the sign of u and h = (1 - d_xx)^{-1}(u^2 + u_x^2/2) by
    Green quadrature.  Kept as a reference; its numerical viscosity wears
    a crest down at a rate of order sqrt(dx).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import multipeakon as mp
from .grid import Grid, GridField, backward_slope, forward_slope, squared_slope
from .kernels import _green_samples, mollifier_kernel
from .measures import AtomicMomentum, check_Yplus, momentum_of_field, yplus_tolerance

log = logging.getLogger(__name__)

SCHEMES = ("lagrangian", "upwind")


class BlowUpError(RuntimeError):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


@dataclass
class SolverSettings:
    dx: float
    T: float
    cfl: float = 0.5
    stride: int = 1
    n: int | None = None
    scheme: str = "lagrangian"

    def __post_init__(self):
        if not self.dx > 0:
            raise ValueError("dx must be positive")
        if not 0 < self.cfl <= 1:
            raise ValueError("cfl must lie in (0, 1]")
        if not self.T > 0:
            raise ValueError("T must be positive")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.n is not None and self.n < 1:
            raise ValueError("mollifier index must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")


def default_mollifier_index(dx: float) -> int:
    """Support radius 1/n of about four grid cells."""
    return max(1, int(math.floor(1.0 / (4.0 * dx))))


def required_domain_length(support: float, umax: float, T: float) -> float:
    return 4.0 * (support + umax * T + 40.0)


@dataclass
class FieldTrajectory:
    """Stored snapshots of a field run on one fixed grid.

    ``p``/``q`` hold the particle state of a lagrangian run (one row per
    stored step), which gives the exact atomic momentum of each snapshot.
    """

    grid: Grid
    times: np.ndarray
    samples: np.ndarray  # (n_times, n_nodes)
    dt: float = float("nan")
    warnings: list = field(default_factory=list)
    p: list | None = None
    q: list | None = None

    def __len__(self):
        return len(self.times)

    def __getitem__(self, i) -> GridField:
        return GridField.on(self.grid, self.samples[i])

    @property
    def dx(self) -> float:
        return self.grid.dx

    def momentum(self, i):
        if self.p is not None:
            return AtomicMomentum(self.q[i], 2.0 * self.p[i])
        return momentum_of_field(self[i])

    def exact_slope(self, i) -> np.ndarray | None:
        """Closed-form u_x at the nodes when particles are stored."""
        if self.p is None:
            return None
        return mp.evaluate(self.p[i], self.q[i], self.grid.x)[1]

    def sample_at(self, t: float, x) -> np.ndarray:
        """u(t, x): linear in x, linear in t between stored snapshots."""
        k, w = self._bracket(t)
        a = self[k].interp(x)
        if w == 0.0:
            return a
        return (1.0 - w) * a + w * self[k + 1].interp(x)

    def _bracket(self, t: float):
        times = self.times
        if len(times) == 1 or t <= times[0]:
            return 0, 0.0
        if t >= times[-1]:
            return len(times) - 1, 0.0
        k = int(np.searchsorted(times, t, side="right")) - 1
        return k, (t - times[k]) / (times[k + 1] - times[k])

    def slice(self, start: int, stop: int | None = None) -> "FieldTrajectory":
        sl = slice(start, stop)
        return FieldTrajectory(
            self.grid, self.times[sl], self.samples[sl], self.dt, list(self.warnings),
            None if self.p is None else self.p[sl], None if self.q is None else self.q[sl])


def trajectory_from_peakons(traj: mp.PeakonTrajectory, grid: Grid,
                            stride: int = 1) -> FieldTrajectory:
    """Closed-form evaluation of an ODE trajectory on a grid."""
    idx = list(range(0, len(traj), stride))
    if idx[-1] != len(traj) - 1:
        idx.append(len(traj) - 1)
    x = grid.x
    samples = np.array([mp.evaluate(traj.p[i], traj.q[i], x)[0] for i in idx])
    return FieldTrajectory(grid, traj.t[idx].copy(), samples, traj.dt * stride,
                           p=[traj.p[i].copy() for i in idx],
                           q=[traj.q[i].copy() for i in idx])


# --- Eulerian right-hand side ---------------------------------------------------

def upwind_slope(u: np.ndarray, dx: float) -> np.ndarray:
    return np.where(u >= 0, backward_slope(u, dx), forward_slope(u, dx))


def nonlocal_pressure(u: np.ndarray, dx: float) -> np.ndarray:
    """h = (1 - d_xx)^{-1}(u^2 + u_x^2/2) by Green quadrature."""
    return _green_samples(u * u + 0.5 * squared_slope(u, dx), dx)


def _centered(h: np.ndarray, dx: float) -> np.ndarray:
    hx = np.empty_like(h)
    hx[1:-1] = (h[2:] - h[:-2]) / (2 * dx)
    hx[0] = (h[1] - h[0]) / dx
    hx[-1] = (h[-1] - h[-2]) / dx
    return hx


def _rhs(u: np.ndarray, dx: float) -> np.ndarray:
    return -u * upwind_slope(u, dx) - _centered(nonlocal_pressure(u, dx), dx)


def ch_rhs(u: GridField) -> GridField:
    """-u u_x - d_x h on the grid: u u_x upwinded by the sign of u, the
    smooth nonlocal term differentiated centrally."""
    return u.with_samples(_rhs(u.samples, u.dx))


# --- initial data ----------------------------------------------------------------

def mollify_initial(u0: GridField, n: int) -> GridField:
    k = mollifier_kernel(n, u0.dx)
    return u0.with_samples(k.apply(u0.samples))


def particles_from_field(u: GridField, rel_floor: float = 1e-12):
    """Node masses of the grid momentum as peakon heights p = y dx / 2."""
    y = momentum_of_field(u).samples
    top = float(np.max(y)) if y.size else 0.0
    keep = y > rel_floor * top if top > 0 else np.zeros(y.size, bool)
    return 0.5 * u.dx * y[keep], u.x[keep]


# --- time loop ---------------------------------------------------------------------

def _time_step(settings: SolverSettings, umax: float) -> float:
    return settings.cfl * settings.dx / max(1.0, umax)


def _particle_max(p, q) -> float:
    # u is convex between neighbouring masses, so its max sits on one
    if p.size == 0:
        return 0.0
    left, right = mp.exp_sums(p, q)
    return float(np.max(p + left + right))


def evolve_field(u0: GridField, settings: SolverSettings) -> FieldTrajectory:
    """RK4 with dt = cfl*dx/max(1, max|u|) recomputed every step.

    The initial datum is mollified first when ``settings.n`` is set.  Every
    ``stride``-th state and the final one are stored; the last step is
    shortened to land on T.
    """
    if settings.n is not None:
        u0 = mollify_initial(u0, settings.n)
    if not np.isclose(u0.dx, settings.dx, rtol=1e-12):
        raise ValueError("settings.dx does not match the grid spacing")
    ok, worst = check_Yplus(momentum_of_field(u0))
    if not ok:
        raise ValueError(f"initial momentum is not nonnegative (violation {worst:.3g})")
    if settings.scheme == "lagrangian":
        return _evolve_lagrangian(u0, settings)
    return _evolve_upwind(u0, settings)


def _evolve_lagrangian(u0: GridField, settings: SolverSettings) -> FieldTrajectory:
    grid = u0.grid
    x = grid.x
    p, q = particles_from_field(u0)
    umax0 = float(np.max(np.abs(u0.samples)))
    t = 0.0
    times, snaps, ps, qs = [0.0], [mp.evaluate(p, q, x)[0]], [p.copy()], [q.copy()]
    warnings = []
    step = 0
    while t < settings.T - 1e-12:
        dt = _time_step(settings, _particle_max(p, q))
        last = t + dt >= settings.T - 1e-12
        if last:
            dt = settings.T - t
        p, q = mp._rk4_step(p, q, dt, mp.ordered_rhs)
        t = settings.T if last else t + dt
        step += 1
        if q.size > 1 and np.min(np.diff(q)) <= 0:
            raise mp.CollisionError(f"characteristics crossed at t={t:.6g}")
        if p.size and float(np.min(p)) < 0:
            msg = f"t={t:.4g}: negative particle momentum {float(np.min(p)):.3g}"
            warnings.append(msg)
            log.warning(msg)
        if step % settings.stride == 0 or last:
            u = mp.evaluate(p, q, x)[0]
            umax = float(np.max(np.abs(u)))
            if not np.isfinite(umax) or (umax0 > 0 and umax > 2.0 * umax0):
                partial = FieldTrajectory(grid, np.array(times), np.array(snaps),
                                          _time_step(settings, umax0), warnings, ps, qs)
                raise BlowUpError(f"max|u| grew from {umax0:.4g} to {umax:.4g} at t={t:.4g}",
                                  partial)
            if q.size and not (grid.contains(q[0]) and grid.contains(q[-1])):
                msg = f"t={t:.4g}: momentum left the grid"
                warnings.append(msg)
                log.warning(msg)
            times.append(t)
            snaps.append(u)
            ps.append(p.copy())
            qs.append(q.copy())
    return FieldTrajectory(grid, np.array(times), np.array(snaps),
                           _time_step(settings, umax0), warnings, ps, qs)


def _evolve_upwind(u0: GridField, settings: SolverSettings) -> FieldTrajectory:
    dx = settings.dx
    tol_y = 100.0 * yplus_tolerance(momentum_of_field(u0).samples)
    u = u0.samples.copy()
    umax0 = float(np.max(np.abs(u)))
    t = 0.0
    times, snaps = [0.0], [u.copy()]
    warnings = []
    step = 0
    while t < settings.T - 1e-12:
        dt = _time_step(settings, float(np.max(np.abs(u))))
        last = t + dt >= settings.T - 1e-12
        if last:
            dt = settings.T - t
        k1 = _rhs(u, dx)
        k2 = _rhs(u + 0.5 * dt * k1, dx)
        k3 = _rhs(u + 0.5 * dt * k2, dx)
        k4 = _rhs(u + dt * k3, dx)
        u = u + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = settings.T if last else t + dt
        step += 1
        umax = float(np.max(np.abs(u)))
        if not np.isfinite(umax) or (umax0 > 0 and umax > 2.0 * umax0):
            partial = FieldTrajectory(u0.grid, np.array(times), np.array(snaps),
                                      _time_step(settings, umax0), warnings)
            raise BlowUpError(f"max|u| grew from {umax0:.4g} to {umax:.4g} at t={t:.4g}",
                              partial)
        if step % settings.stride == 0 or last:
            y_min = float(np.min(momentum_of_field(u0.with_samples(u)).samples))
            if -y_min > tol_y:
                msg = f"t={t:.4g}: momentum dips to {y_min:.3g}"
                warnings.append(msg)
                log.warning(msg)
            times.append(t)
            snaps.append(u.copy())
    return FieldTrajectory(u0.grid, np.array(times), np.array(snaps),
                           _time_step(settings, umax0), warnings)
