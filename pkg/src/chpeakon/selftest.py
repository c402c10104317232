"""Fast consistency checks run by ``chpeakon selftest`` (a few seconds)."""

from __future__ import annotations

import numpy as np

from . import characteristics as ch
from . import multipeakon as mp
from .kernels import apply_helmholtz, helmholtz_solve, weight_psi
from .modulation import SLOPE_BOUND, select_n0, verify_n0


def _fd_gradient(p, q, h=1e-6):
    s = lambda p, q: mp.hamiltonian(mp.PeakonState(p, q))
    gp = np.array([(s(p + h * e, q) - s(p - h * e, q)) / (2 * h) for e in np.eye(p.size)])
    gq = np.array([(s(p, q + h * e) - s(p, q - h * e)) / (2 * h) for e in np.eye(p.size)])
    return gp, gq


def run_selftest(seed: int = 0):
    rng = np.random.default_rng(seed)
    results = []

    def check(name, value, bound):
        results.append((name, bool(value <= bound), float(value), float(bound)))

    worst = 0.0
    for _ in range(10):
        N = int(rng.integers(2, 6))
        p = rng.uniform(0.2, 2.0, N)
        q = np.cumsum(rng.uniform(0.3, 3.0, N))
        dp, dq = mp.rhs(mp.PeakonState(p, q))
        gp, gq = _fd_gradient(p, q)
        worst = max(worst, np.max(np.abs(dq - gp)), np.max(np.abs(dp + gq)))
    check("hamiltonian_gradient", worst, 1e-7)

    s0 = mp.PeakonState.create([1.0, 2.0], [5.0, 0.0])
    tr = mp.evolve(s0, 10.0, 1e-2, store_every=10)
    H = [mp.hamiltonian(tr[k]) for k in range(len(tr))]
    check("hamiltonian_drift", abs(H[-1] - H[0]) / H[0], 1e-8)

    for _ in range(5):
        N = int(rng.integers(2, 7))
        s = mp.PeakonState(rng.uniform(0.2, 2.0, N), np.cumsum(rng.uniform(0.3, 3.0, N)))
        ref = np.sort(np.linalg.eigvals(mp.speed_matrix(s)).real)
        check("eigen_speeds", float(np.max(np.abs(mp.asymptotic_speeds(s) - ref))), 1e-10)

    x = np.linspace(-60, 60, 10001)
    check("psi_third_derivative", float(np.max(np.abs(weight_psi(x, 3))
                                               - 0.5 * weight_psi(x, 1))), 1e-14)
    check("psi_reflection", float(np.max(np.abs(weight_psi(-x) - (1 - weight_psi(x))))), 1e-14)

    f = rng.standard_normal(200)
    check("helmholtz_roundtrip", float(np.max(np.abs(apply_helmholtz(helmholtz_solve(f, 0.05),
                                                                     0.05) - f))), 1e-10)

    rep = verify_n0(select_n0())
    check("n0_slope", SLOPE_BOUND - rep.min_slope, 0.0)

    jt = ch.track_jump(mp.evolve(mp.PeakonState([1.0], [0.0]), 5.0, 1e-2), 0.0)
    check("single_peakon_jump", float(np.max(np.abs(jt.a - 2.0))), 1e-12)

    lines = [f"CHECK {n} {'PASS' if ok else 'FAIL'} {v:.6g} {b:.6g}" for n, ok, v, b in results]
    return lines, all(r[1] for r in results)
