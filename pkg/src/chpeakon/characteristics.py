"""Characteristics q_t = u(t, q), their Jacobian q_x, momentum transport
along them and the derivative jump a(t) = u_x(q*-) - u_x(q*+).

Trajectories are either ``FieldTrajectory`` objects or ``PeakonTrajectory``
ODE solutions.  For ODE solutions the velocity is evaluated in closed form
from (p, q) interpolated linearly between stored steps; grid snapshots are
interpolated linearly in space and time, with u_x from centered
differences.  Jump quantities use the particle state whenever one is
stored.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import multipeakon as mp
from .grid import DomainError, GridField, centered_gradient
from .measures import momentum_of_field

JUMP_THRESHOLD = 0.05


class DomainExitError(DomainError):
    def __init__(self, message, last_time):
        super().__init__(message)
        self.last_time = last_time


class JumpLost(RuntimeError):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class _Source:
    """Uniform view of the velocity field behind a trajectory."""

    def __init__(self, trajectory):
        self.traj = trajectory
        if isinstance(trajectory, mp.PeakonTrajectory):
            self.times = trajectory.t
            self.p, self.q = trajectory.p, trajectory.q
            self.bounds = (-np.inf, np.inf)
        else:
            self.times = trajectory.times
            self.p, self.q = trajectory.p, trajectory.q
            g = trajectory.grid
            self.bounds = (g.origin, g.right)
            self._slopes = {}

    @property
    def particles(self) -> bool:
        return self.p is not None

    @property
    def closed_form(self) -> bool:
        # grid snapshots are smoother than a dense particle cloud, whose
        # slope has a kink of size 2 p_i at every particle
        return isinstance(self.traj, mp.PeakonTrajectory)

    def bracket(self, t):
        times = self.times
        if len(times) == 1 or t <= times[0]:
            return 0, 0.0
        if t >= times[-1]:
            return len(times) - 1, 0.0
        k = int(np.searchsorted(times, t, side="right")) - 1
        return k, (t - times[k]) / (times[k + 1] - times[k])

    def state(self, t):
        k, w = self.bracket(t)
        if w == 0.0:
            return np.asarray(self.p[k]), np.asarray(self.q[k])
        p = (1 - w) * np.asarray(self.p[k]) + w * np.asarray(self.p[k + 1])
        q = (1 - w) * np.asarray(self.q[k]) + w * np.asarray(self.q[k + 1])
        return p, q

    def _grid_slope(self, k):
        if k not in self._slopes:
            self._slopes[k] = self.traj[k].with_samples(
                centered_gradient(self.traj.samples[k], self.traj.dx))
        return self._slopes[k]

    def velocity(self, t, x):
        if self.closed_form:
            p, q = self.state(t)
            return mp.evaluate(p, q, np.atleast_1d(x))[0]
        return np.atleast_1d(self.traj.sample_at(t, x))

    def slope(self, t, x):
        if self.closed_form:
            p, q = self.state(t)
            return mp.evaluate(p, q, np.atleast_1d(x))[1]
        k, w = self.bracket(t)
        a = self._grid_slope(k).interp(x)
        if w:
            a = (1 - w) * a + w * self._grid_slope(k + 1).interp(x)
        return np.atleast_1d(a)


def _inside(src: _Source, x) -> bool:
    lo, hi = src.bounds
    return bool(np.all((x >= lo) & (x <= hi)))


def _integrate(src: _Source, x0, substeps: int = 1):
    """RK4 over the stored time levels; returns q with shape (n_times, len(x0))."""
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    if not _inside(src, x):
        raise DomainExitError("starting point outside the grid", src.times[0])
    out = [x.copy()]
    times = src.times
    for k in range(len(times) - 1):
        h = (times[k + 1] - times[k]) / substeps
        for j in range(substeps):
            t = times[k] + j * h
            k1 = src.velocity(t, x)
            k2 = src.velocity(t + 0.5 * h, x + 0.5 * h * k1)
            k3 = src.velocity(t + 0.5 * h, x + 0.5 * h * k2)
            k4 = src.velocity(t + h, x + h * k3)
            x = x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            if not _inside(src, x):
                raise DomainExitError(
                    f"characteristic left the grid after t={times[k]:.6g}", float(times[k]))
        out.append(x.copy())
    return np.array(out)


def flow(trajectory, x0, substeps: int = 1) -> np.ndarray:
    """q(t_k, x0) at every stored time (vector input gives one column per point)."""
    q = _integrate(_Source(trajectory), x0, substeps)
    return q[:, 0] if np.ndim(x0) == 0 else q


def _jacobian(src: _Source, q: np.ndarray) -> np.ndarray:
    ux = np.array([src.slope(t, qk) for t, qk in zip(src.times, q)])
    dt = np.diff(src.times)[:, None]
    integral = np.concatenate([np.zeros((1, q.shape[1])),
                               np.cumsum(0.5 * dt * (ux[1:] + ux[:-1]), axis=0)])
    return np.exp(integral)


def flow_jacobian(trajectory, x0, substeps: int = 1) -> np.ndarray:
    """exp of the trapezoid integral of u_x along the computed characteristic."""
    src = _Source(trajectory)
    q = _integrate(src, x0, substeps)
    J = _jacobian(src, q)
    return J[:, 0] if np.ndim(x0) == 0 else J


def particle_density(p: np.ndarray, q: np.ndarray):
    """Nodes and values of the momentum density of a particle cloud:
    mass 2 p_i spread over half the distance to each neighbour."""
    if p.size < 3:
        raise ValueError("a density needs at least three particles")
    width = np.empty_like(q)
    width[1:-1] = 0.5 * (q[2:] - q[:-2])
    width[0] = q[1] - q[0]
    width[-1] = q[-1] - q[-2]
    return q, 2.0 * p / width


def _momentum_profile(src: _Source, k: int):
    if src.particles:
        return particle_density(np.asarray(src.p[k]), np.asarray(src.q[k]))
    y = momentum_of_field(src.traj[k])
    return src.traj.grid.x, y.samples


def transport_check(trajectory, x0: float, t: float, momenta=None) -> float:
    """|y(0, x0) - y(t, q(t, x0)) q_x(t, x0)^2| / max y(0).

    y comes from ``momenta`` (one sampled momentum per stored step) when
    given, otherwise from the trajectory itself.  ``t`` is snapped to the
    nearest stored time.
    """
    src = _Source(trajectory)
    k = int(np.argmin(np.abs(src.times - t)))

    def profile(i):
        if momenta is None:
            return _momentum_profile(src, i)
        m = momenta[i]
        return m.field.x, m.samples

    x_init, y_init = profile(0)
    top = float(np.max(y_init))
    if top <= 0:
        return 0.0
    q = _integrate(src, x0)
    J = _jacobian(src, q)
    xs, ys = profile(k)
    y0 = np.interp(x0, x_init, y_init, left=0.0, right=0.0)
    yt = np.interp(q[k, 0], xs, ys, left=0.0, right=0.0)
    return abs(y0 - yt * J[k, 0] ** 2) / top


# --- derivative jump -------------------------------------------------------------------

def _one_sided(u: np.ndarray, k: int, dx: float):
    if k < 3 or k > u.size - 4:
        raise DomainError("jump stencil needs three nodes on each side")
    left = (u[k - 1] - u[k - 2]) / dx
    right = (u[k + 2] - u[k + 1]) / dx
    return left, right


def jump_at(u: GridField, x: float) -> float:
    """Backward two-node slope one node left of x minus the forward
    two-node slope one node right of x."""
    if not u.grid.contains(x):
        raise DomainError(f"{x} outside the grid")
    left, right = _one_sided(u.samples, u.grid.nearest(x), u.dx)
    return float(left - right)


@dataclass
class JumpTrack:
    times: np.ndarray
    q_star: np.ndarray
    a: np.ndarray
    u_at: np.ndarray
    ode_residual: np.ndarray
    left_slope: np.ndarray

    @property
    def liouville_gap(self) -> np.ndarray:
        """2 u(q*) - a, which drives a' = a (2u(q*) - a)/2."""
        return 2.0 * self.u_at - self.a

    @property
    def alpha0(self) -> float:
        """Measured lower bound of u along the jump."""
        return float(np.min(self.u_at))

    def worst_decrease(self) -> float:
        """Largest drop of a between consecutive steps (0 if non-decreasing)."""
        if self.a.size < 2:
            return 0.0
        return float(max(0.0, -np.min(np.diff(self.a))))

    def write_csv(self, path, header_lines=()) -> None:
        with open(path, "w", newline="\n") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            fh.write("t,q_star,a,u_at,ode_residual\n")
            for row in zip(self.times, self.q_star, self.a, self.u_at, self.ode_residual):
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def _finish(times, q, a, u, ul) -> JumpTrack:
    times, a, u, ul = map(np.asarray, (times, a, u, ul))
    if a.size >= 3:
        da = np.gradient(a, times, edge_order=2)
    elif a.size == 2:
        da = np.gradient(a, times)
    else:
        da = np.zeros_like(a)
    res = np.abs(da - 0.5 * (u * u - ul * ul))
    return JumpTrack(times, np.asarray(q), a, u, res, ul)


def track_jump(trajectory, x_init: float, threshold: float = JUMP_THRESHOLD) -> JumpTrack:
    """Follow the jump born at ``x_init`` along its characteristic.

    With particles the jump sits on the particle nearest ``x_init``:
    a = 2 p_i, u(q*) and u_x(q*-) are closed forms.  On plain grids the
    location is the characteristic snapped to the local argmax node.
    Raises JumpLost (carrying the partial track) once a < threshold max|u|.
    """
    src = _Source(trajectory)
    times, qs, a_s, us, uls = [], [], [], [], []

    def lost(t, a, top):
        partial = _finish(times, qs, a_s, us, uls) if times else None
        return JumpLost(f"jump {a:.3g} fell below {threshold}*max|u|={threshold * top:.3g} "
                        f"at t={t:.6g}", partial)

    if src.particles:
        i = int(np.argmin(np.abs(np.asarray(src.q[0]) - x_init)))
        for k, t in enumerate(src.times):
            p, q = np.asarray(src.p[k]), np.asarray(src.q[k])
            left, right = mp.exp_sums(p, q)
            u_all = p + left + right
            a = 2.0 * p[i]
            top = float(np.max(u_all))
            if a < threshold * top:
                raise lost(t, a, top)
            times.append(float(t))
            qs.append(float(q[i]))
            a_s.append(a)
            us.append(float(u_all[i]))
            uls.append(float(p[i] - left[i] + right[i]))
        return _finish(times, qs, a_s, us, uls)

    q = _integrate(src, x_init)[:, 0]
    dx = trajectory.dx
    for k, t in enumerate(src.times):
        u = trajectory.samples[k]
        c = trajectory.grid.nearest(q[k])
        lo, hi = max(0, c - 3), min(u.size, c + 4)
        c = lo + int(np.argmax(u[lo:hi]))
        left, right = _one_sided(u, c, dx)
        a = float(left - right)
        top = float(np.max(np.abs(u)))
        if a < threshold * top:
            raise lost(t, a, top)
        times.append(float(t))
        qs.append(float(trajectory.grid.x[c]))
        a_s.append(a)
        us.append(float(u[c]))
        uls.append(float(left))
    return _finish(times, qs, a_s, us, uls)


def support_radius(trajectory, centers, rel: float = 1e-6) -> np.ndarray:
    """Distance from the modulation center to the right edge of the momentum
    support (masses above ``rel`` times the largest), per stored step."""
    src = _Source(trajectory)
    out = []
    for k, x in enumerate(centers):
        if src.particles:
            p, q = np.asarray(src.p[k]), np.asarray(src.q[k])
            edge = q[p > rel * p.max()][-1]
        else:
            y = momentum_of_field(trajectory[k]).samples
            edge = trajectory.grid.x[np.nonzero(y > rel * y.max())[0][-1]]
        out.append(float(edge - x))
    return np.array(out)
