"""Modulation center from the mollified orthogonality condition

    int u(t) (rho_{n0} * phi')(. - x(t)) = 0,

peak height lambda(t) = max u(t) and the admissibility test for n0.

For peakon sums the pairing is exact: int phi(. - q) phi'(. - s) equals
F(s - q) with F(d) = d exp(-|d|), and the mollifier is a finite weighted
sum of translates.  Grid fields are paired through their momentum
y = (1 - d_xx) u against the continuous kernel (1 - d_xx)^{-1}(rho * phi'),
which reduces to the same closed form on a sampled peakon.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from . import multipeakon as mp
from .kernels import mollifier_kernel
from .measures import AtomicMomentum, momentum_of_field

N0_START = 4
SLOPE_BOUND = 0.25 * np.exp(-0.5)
BRACKET_HALF_WIDTH = 0.5
ROOT_TOL = 1e-10
# kernel tail beyond this offset is below exp(-40)
WINDOW = 40.0
# sub-grid resolution of the continuum mollifier inside its support
_MOLLIFIER_NODES = 20


class ModulationLost(RuntimeError):
    """No sign change of the orthogonality residual near the guess."""


@lru_cache(maxsize=None)
def _mollifier(n0: int):
    k = mollifier_kernel(n0, 1.0 / (_MOLLIFIER_NODES * n0))
    return k.offsets.copy(), k.weights.copy()


def pairing(d):
    """int phi(x) phi'(x - d) dx = d exp(-|d|)."""
    d = np.asarray(d, dtype=float)
    return d * np.exp(-np.abs(d))


def pairing_slope(d):
    """Derivative of ``pairing``: (1 - |d|) exp(-|d|)."""
    d = np.asarray(d, dtype=float)
    return (1.0 - np.abs(d)) * np.exp(-np.abs(d))


def mollified_pairing(y, n0: int):
    """y -> int phi(. - y) ... as the mollified profile F_n0(y) (odd in y)."""
    r, w = _mollifier(n0)
    y = np.asarray(y, dtype=float)
    return np.sum(w * pairing(y[..., None] + r), axis=-1)


def kernel(s, n0: int):
    """(rho_{n0} * phi')(s)."""
    r, w = _mollifier(n0)
    s = np.asarray(s, dtype=float)[..., None] - r
    return np.sum(w * (-np.sign(s) * np.exp(-np.abs(s))), axis=-1)


def momentum_kernel(s, n0: int):
    """(1 - d_xx)^{-1}(rho_{n0} * phi')(s) = -1/2 sum_j w_j (s - r_j) exp(-|s - r_j|).

    Unlike ``kernel`` it has no jumps, so pairing it with sampled momentum
    does not depend on where the nodes fall relative to the translates.
    """
    r, w = _mollifier(n0)
    s = np.asarray(s, dtype=float)[..., None] - r
    return -0.5 * np.sum(w * s * np.exp(-np.abs(s)), axis=-1)


def _atoms_of(u):
    if isinstance(u, mp.PeakonState):
        return u.p, u.q
    if isinstance(u, AtomicMomentum):
        return 0.5 * u.masses, u.positions
    if isinstance(u, tuple) and len(u) == 2:
        return np.asarray(u[0], float), np.asarray(u[1], float)
    return None


def orthogonality_residual(u, shift: float, n0: int) -> float:
    """int u (rho_{n0} * phi')(. - shift).

    ``u`` is a GridField (its momentum paired with ``momentum_kernel`` over a
    window) or a peakon sum given as a PeakonState, an AtomicMomentum or a
    ``(p, q)`` pair (closed form).
    """
    return _residual_function(u, n0)(shift)


def _residual_function(u, n0: int):
    atoms = _atoms_of(u)
    if atoms is not None:
        p, q = atoms

        def residual(shift):
            if p.size == 0:
                return 0.0
            near = np.abs(q - shift) < WINDOW
            return float(np.sum(p[near] * mollified_pairing(shift - q[near], n0)))
        return residual

    y = momentum_of_field(u).samples

    def residual(shift):
        if not u.grid.contains(shift):
            raise ValueError(f"shift {shift} outside the grid")
        i0 = max(0, int(np.floor((shift - WINDOW - u.origin) / u.dx)))
        i1 = min(len(u), int(np.ceil((shift + WINDOW - u.origin) / u.dx)) + 1)
        x = u.origin + u.dx * np.arange(i0, i1)
        return float(u.dx * np.sum(y[i0:i1] * momentum_kernel(x - shift, n0)))
    return residual


def locate(u, guess: float, n0: int) -> float:
    """Root of the orthogonality residual in [guess - 1/2, guess + 1/2]:
    bisection down to 1e-10 followed by one secant step."""
    f = _residual_function(u, n0)
    a, b = guess - BRACKET_HALF_WIDTH, guess + BRACKET_HALF_WIDTH
    fa, fb = f(a), f(b)
    if fa == 0.0 and fb == 0.0 or fa * fb > 0:
        raise ModulationLost(
            f"no sign change of the orthogonality residual on [{a:.6g}, {b:.6g}]")
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    while b - a > ROOT_TOL:
        m = 0.5 * (a + b)
        fm = f(m)
        if fm == 0.0:
            return m
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b, fb = m, fm
    root = b - fb * (b - a) / (fb - fa)
    return float(min(max(root, a), b))


class N0Report(NamedTuple):
    n0: int
    monotone: bool
    min_slope: float

    @property
    def admissible(self) -> bool:
        return self.monotone and self.min_slope >= SLOPE_BOUND


def verify_n0(n0: int, samples: int = 200) -> N0Report:
    """Sample y -> int phi (rho_{n0} * phi')(. - y) on [-1/2, 1/2]."""
    if n0 < 1:
        raise ValueError("n0 must be >= 1")
    y = np.linspace(-0.5, 0.5, samples)
    v = mollified_pairing(y, n0)
    slope = np.diff(v) / np.diff(y)
    return N0Report(int(n0), bool(np.all(slope > 0)), float(slope.min()))


def select_n0(start: int = N0_START, limit: int = 1000) -> int:
    for n0 in range(start, limit + 1):
        if verify_n0(n0).admissible:
            return n0
    raise RuntimeError(f"no admissible n0 in [{start}, {limit}]")


# --- tracking ---------------------------------------------------------------------

@dataclass
class ModulationTrack:
    times: np.ndarray
    x: np.ndarray
    xdot: np.ndarray
    lam: np.ndarray
    residual: np.ndarray
    n0: int
    lost_at: float | None = None

    def __len__(self):
        return self.times.size

    def write_csv(self, path, header_lines=()) -> None:
        with open(path, "w", newline="\n") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            fh.write(f"# n0 = {self.n0}\n")
            if self.lost_at is not None:
                fh.write(f"# modulation_lost_at = {self.lost_at:.17g}\n")
            fh.write("t,x,xdot,lambda,residual\n")
            for row in zip(self.times, self.x, self.xdot, self.lam, self.residual):
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def _state(trajectory, k):
    """Closed-form peakon sum for step k when the trajectory carries one."""
    if getattr(trajectory, "p", None) is not None:
        return trajectory.p[k], trajectory.q[k]
    return None


def peak_height(trajectory, k) -> float:
    """max u(t_k): exact on the masses of a peakon sum, else the node max."""
    st = _state(trajectory, k)
    if st is not None and st[0].size:
        p, q = st
        left, right = mp.exp_sums(p, q)
        return float(np.max(p + left + right))
    return float(np.max(trajectory.samples[k]))


def track(trajectory, n0: int, first_guess: float | None = None,
          reseed: bool = False) -> ModulationTrack:
    """locate() at every stored step, seeded by the previous root; the first
    guess defaults to the argmax node.  ``reseed`` seeds every step at the
    argmax node instead, for snapshots too far apart in time."""
    times, xs, lam, res = [], [], [], []
    lost = None
    guess = first_guess
    for k in range(len(trajectory)):
        st = _state(trajectory, k)
        target = st if st is not None else trajectory[k]
        if guess is None or (reseed and k > 0):
            guess = float(trajectory.grid.x[int(np.argmax(trajectory.samples[k]))])
        try:
            root = locate(target, guess, n0)
        except ModulationLost:
            lost = float(trajectory.times[k])
            break
        times.append(float(trajectory.times[k]))
        xs.append(root)
        lam.append(peak_height(trajectory, k))
        res.append(orthogonality_residual(target, root, n0))
        guess = root
    times = np.array(times)
    xs = np.array(xs)
    xdot = np.gradient(xs, times) if xs.size > 1 else np.zeros_like(xs)
    return ModulationTrack(times, xs, xdot, np.array(lam), np.array(res), int(n0), lost)
