"""Exact multipeakon dynamics u = sum_i p_i exp(-|x - q_i|).

The pair (p, q) follows the canonical equations of
H = 1/2 sum_{i,j} p_i p_j exp(-|q_i - q_j|).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_PEAKONS = 64
COLLISION_DISTANCE = 1e-12
# exponent span handled per block in the O(N) sums; exp(600) is finite
_SPAN = 600.0


class CollisionError(RuntimeError):
    """Two positions coincide or the ordering q_1 < ... < q_N broke."""


class EigenError(ArithmeticError):
    """QR iteration did not converge within its iteration cap."""


@dataclass(frozen=True, eq=False)
class PeakonState:
    p: np.ndarray
    q: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.p, dtype=float)).copy()
        q = np.atleast_1d(np.asarray(self.q, dtype=float)).copy()
        if p.shape != q.shape or p.ndim != 1:
            raise ValueError("p and q must be vectors of equal length")
        if p.size > MAX_PEAKONS:
            raise ValueError(f"at most {MAX_PEAKONS} peakons supported")
        if np.any(np.diff(q) <= 0):
            raise ValueError("positions must be strictly increasing")
        p.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @classmethod
    def create(cls, p, q, time: float = 0.0) -> "PeakonState":
        """Build a state from unordered (p_i, q_i) pairs by sorting on q."""
        p = np.atleast_1d(np.asarray(p, dtype=float))
        q = np.atleast_1d(np.asarray(q, dtype=float))
        order = np.argsort(q, kind="stable")
        return cls(p[order], q[order], time)

    @property
    def N(self) -> int:
        return self.p.size

    def atoms(self) -> list[tuple[float, float]]:
        return [(float(qi), 2.0 * float(pi)) for pi, qi in zip(self.p, self.q)]


def hamiltonian(s: PeakonState) -> float:
    d = np.abs(s.q[:, None] - s.q[None, :])
    return 0.5 * float(s.p @ np.exp(-d) @ s.p)


def exact_invariants(s: PeakonState) -> tuple[float, float]:
    """M = 2 sum p_i and E = 2 sum_{i,j} p_i p_j exp(-|q_i - q_j|)."""
    return 2.0 * float(s.p.sum()), 4.0 * hamiltonian(s)


def _check_collisions(q: np.ndarray) -> None:
    gaps = np.diff(q)
    if gaps.size and np.min(np.abs(gaps)) < COLLISION_DISTANCE:
        i = int(np.argmin(np.abs(gaps)))
        raise CollisionError(f"peakons {i} and {i + 1} coincide (gap {gaps[i]:.3g})")


def _pair_rhs(p: np.ndarray, q: np.ndarray):
    d = q[:, None] - q[None, :]
    e = np.exp(-np.abs(d))
    dq = e @ p
    dp = p * ((np.sign(d) * e) @ p)
    return dp, dq


def rhs(s: PeakonState):
    """(dp, dq) from the canonical equations."""
    _check_collisions(np.sort(s.q))
    return _pair_rhs(s.p, s.q)


# --- O(N) exponential sums for ordered positions -----------------------------

def _left_inclusive(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """L_m = sum_{j <= m} p_j exp(-(q_m - q_j)) for increasing q."""
    n = q.size
    out = np.empty(n)
    carry = 0.0
    i = 0
    while i < n:
        j = int(np.searchsorted(q, q[i] + _SPAN, side="right"))
        s = q[i:j] - q[i]
        out[i:j] = np.exp(-s) * (np.cumsum(p[i:j] * np.exp(s)) + carry)
        if j < n:
            carry = out[j - 1] * np.exp(-(q[j] - q[j - 1]))
        i = j
    return out


def exp_sums(p: np.ndarray, q: np.ndarray):
    """Strict left and right sums at each (ordered) position.

    Returns (left, right) with left_i = sum_{j<i} p_j e^{-(q_i-q_j)} and
    right_i = sum_{j>i} p_j e^{-(q_j-q_i)}.
    """
    left = _left_inclusive(p, q) - p
    right = _left_inclusive(p[::-1], -q[::-1])[::-1] - p
    return left, right


def ordered_rhs(p: np.ndarray, q: np.ndarray):
    """Same vector field as ``rhs`` in O(N), for increasing q."""
    left, right = exp_sums(p, q)
    return p * (left - right), p + left + right


def particle_invariants(p: np.ndarray, q: np.ndarray) -> tuple[float, float]:
    """(M, E) = (2 sum p, 2 sum p_i u(q_i)) for ordered q, in O(N)."""
    if p.size == 0:
        return 0.0, 0.0
    left, right = exp_sums(p, q)
    return 2.0 * float(p.sum()), 2.0 * float(np.sum(p * (p + left + right)))


def evaluate(p: np.ndarray, q: np.ndarray, x: np.ndarray):
    """u(x) and u_x(x) for ordered peakons at increasing points x.

    At a crest u_x is the mean of the one-sided limits.
    """
    x = np.asarray(x, dtype=float)
    u = np.zeros_like(x)
    ux = np.zeros_like(x)
    if p.size == 0:
        return u, ux
    lin = _left_inclusive(p, q)
    rin = _left_inclusive(p[::-1], -q[::-1])[::-1]
    k = np.searchsorted(q, x, side="right")
    has_left = k > 0
    kl = np.clip(k - 1, 0, q.size - 1)
    left = np.where(has_left, lin[kl] * np.exp(-np.abs(x - q[kl])), 0.0)
    has_right = k < q.size
    kr = np.clip(k, 0, q.size - 1)
    right = np.where(has_right, rin[kr] * np.exp(-np.abs(q[kr] - x)), 0.0)
    u = left + right
    ux = right - left
    at_crest = has_left & (x == q[kl])
    ux = np.where(at_crest, ux + p[kl], ux)
    return u, ux


# --- time integration ---------------------------------------------------------

@dataclass
class PeakonTrajectory:
    t: np.ndarray
    p: np.ndarray  # (n_steps, N)
    q: np.ndarray
    dt: float
    error_estimate: float = 0.0

    def __len__(self):
        return self.t.size

    def __getitem__(self, i) -> PeakonState:
        return PeakonState(self.p[i], self.q[i], float(self.t[i]))

    @property
    def final(self) -> PeakonState:
        return self[-1]


def _rk4_step(p, q, dt, f):
    k1p, k1q = f(p, q)
    k2p, k2q = f(p + 0.5 * dt * k1p, q + 0.5 * dt * k1q)
    k3p, k3q = f(p + 0.5 * dt * k2p, q + 0.5 * dt * k2q)
    k4p, k4q = f(p + dt * k3p, q + dt * k3q)
    return (p + dt / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p),
            q + dt / 6.0 * (k1q + 2 * k2q + 2 * k3q + k4q))


def evolve(s0: PeakonState, T: float, dt: float, store_every: int = 1,
           monitor_every: int = 1000) -> PeakonTrajectory:
    """Fixed-step classical RK4 from s0.time to s0.time + T.

    Every ``monitor_every`` steps a step is repeated as two half steps; the
    largest discrepancy is kept in ``error_estimate``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if s0.N and dt > 0.1 / float(np.max(np.abs(s0.p))) * (1 + 1e-12):
        raise ValueError(f"dt={dt} exceeds 0.1/max(p)")
    nsteps = max(1, int(round(T / dt)))
    h = T / nsteps
    f = _pair_rhs if s0.N <= 8 else ordered_rhs
    p, q = s0.p.copy(), s0.q.copy()
    ts, ps, qs = [s0.time], [p.copy()], [q.copy()]
    worst = 0.0
    for k in range(1, nsteps + 1):
        if monitor_every and k % monitor_every == 0:
            p1, q1 = _rk4_step(p, q, h, f)
            ph, qh = _rk4_step(p, q, 0.5 * h, f)
            ph, qh = _rk4_step(ph, qh, 0.5 * h, f)
            worst = max(worst, float(np.max(np.abs(np.concatenate([p1 - ph, q1 - qh])))))
            p, q = p1, q1
        else:
            p, q = _rk4_step(p, q, h, f)
        if q.size > 1 and np.min(np.diff(q)) < COLLISION_DISTANCE:
            raise CollisionError(
                f"ordering lost at t={s0.time + k * h:.6g}: q={q}, p={p}")
        if k % store_every == 0 or k == nsteps:
            ts.append(s0.time + k * h)
            ps.append(p.copy())
            qs.append(q.copy())
    return PeakonTrajectory(np.array(ts), np.array(ps), np.array(qs), h, worst)


# --- asymptotic speeds ----------------------------------------------------------

def symmetric_eigenvalues(S: np.ndarray, tol: float = 1e-12,
                          max_iter: int = 10000) -> np.ndarray:
    """Eigenvalues of a real symmetric matrix by Wilkinson-shifted QR
    iteration with deflation of the trailing row."""
    A = np.array(S, dtype=float)
    scale = max(np.linalg.norm(A), np.finfo(float).tiny)
    found = []
    its = 0
    while A.shape[0] > 1:
        n = A.shape[0]
        if np.max(np.abs(A[n - 1, : n - 1])) <= tol * scale:
            found.append(A[n - 1, n - 1])
            A = A[: n - 1, : n - 1]
            continue
        if its >= max_iter:
            raise EigenError(f"QR iteration did not converge in {max_iter} sweeps")
        a, b, c = A[n - 2, n - 2], A[n - 2, n - 1], A[n - 1, n - 1]
        d = 0.5 * (a - c)
        sgn = 1.0 if d >= 0 else -1.0
        mu = c - b * b / (d + sgn * np.hypot(d, b)) if b != 0 else c
        Q, R = np.linalg.qr(A - mu * np.eye(n))
        A = R @ Q + mu * np.eye(n)
        A = 0.5 * (A + A.T)
        its += 1
    found.append(A[0, 0])
    return np.sort(np.array(found))


def speed_matrix(s: PeakonState) -> np.ndarray:
    """A_ij = p_j exp(-|q_i - q_j|/2)."""
    return s.p[None, :] * np.exp(-0.5 * np.abs(s.q[:, None] - s.q[None, :]))


def asymptotic_speeds(s0: PeakonState) -> np.ndarray:
    """Sorted eigenvalues of A_ij = p_j exp(-|q_i - q_j|/2).

    A = K P with K symmetric and P = diag(p) > 0, so A is similar to the
    symmetric P^{1/2} K P^{1/2}, which is what gets iterated.
    """
    r = np.sqrt(s0.p)
    K = np.exp(-0.5 * np.abs(s0.q[:, None] - s0.q[None, :]))
    return symmetric_eigenvalues(r[:, None] * K * r[None, :])


def write_trajectory_csv(path, traj: PeakonTrajectory, header_lines=()) -> None:
    N = traj.p.shape[1]
    cols = ["t"] + [f"p{i + 1}" for i in range(N)] + [f"q{i + 1}" for i in range(N)]
    with open(path, "w", newline="\n") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write(",".join(cols) + "\n")
        for t, p, q in zip(traj.t, traj.p, traj.q):
            fh.write(",".join(f"{v:.17g}" for v in (t, *p, *q)) + "\n")
