import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chpeakon import multipeakon as mp

H_TWO = 1.13533528323661269189399949497           # 1 + e^{-2}
SPEEDS_TWO = (0.778424940513306416435377136793483,  # roots of l^2 - 3l + 2 - 2e^{-2}
              2.22157505948669358356462286320662)


def states(min_n=1, max_n=6):
    return st.integers(min_n, max_n).flatmap(lambda n: st.tuples(
        st.lists(st.floats(0.1, 3.0), min_size=n, max_size=n),
        st.lists(st.floats(0.2, 3.0), min_size=n, max_size=n)))


def _state(pg):
    p, gaps = pg
    return mp.PeakonState(np.array(p), np.cumsum(gaps))


def test_hamiltonian_examples():
    assert mp.hamiltonian(mp.PeakonState([1.5], [0.0])) == pytest.approx(1.125)
    assert mp.hamiltonian(mp.PeakonState([1.0, 1.0], [-1.0, 1.0])) == pytest.approx(H_TWO,
                                                                                     abs=1e-15)


def test_rhs_examples():
    dp, dq = mp.rhs(mp.PeakonState([2.0], [0.0]))
    assert dq[0] == 2.0 and dp[0] == 0.0
    dp, dq = mp.rhs(mp.PeakonState([1.0, 1.0], [-1.0, 1.0]))
    e = np.exp(-2.0)
    assert np.allclose(dq, [1 + e, 1 + e], atol=1e-15)
    assert np.allclose(dp, [-e, e], atol=1e-15)


def test_collision_rejected():
    with pytest.raises(mp.CollisionError):
        mp.rhs(mp.PeakonState([1.0, 1.0], [0.0, 1e-13]))


def test_create_sorts_pairs():
    s = mp.PeakonState.create([1.0, 2.0], [5.0, 0.0])
    assert s.q.tolist() == [0.0, 5.0]
    assert s.p.tolist() == [2.0, 1.0]
    with pytest.raises(ValueError):
        mp.PeakonState([1.0, 2.0], [5.0, 0.0])


@settings(max_examples=60, deadline=None)
@given(states())
def test_rhs_is_the_hamiltonian_gradient(pg):
    s = _state(pg)
    dp, dq = mp.rhs(s)
    h = 1e-6
    for i in range(s.N):
        e = np.zeros(s.N)
        e[i] = h
        dHdp = (mp.hamiltonian(mp.PeakonState(s.p + e, s.q))
                - mp.hamiltonian(mp.PeakonState(s.p - e, s.q))) / (2 * h)
        dHdq = (mp.hamiltonian(mp.PeakonState(s.p, s.q + e))
                - mp.hamiltonian(mp.PeakonState(s.p, s.q - e))) / (2 * h)
        assert dq[i] == pytest.approx(dHdp, abs=1e-7)
        assert dp[i] == pytest.approx(-dHdq, abs=1e-7)


@settings(max_examples=60, deadline=None)
@given(states(1, 20))
def test_ordered_sums_match_dense_formulas(pg):
    s = _state(pg)
    a = mp.ordered_rhs(s.p, s.q)
    b = mp._pair_rhs(s.p, s.q)
    assert np.allclose(a[0], b[0], rtol=1e-12, atol=1e-13)
    assert np.allclose(a[1], b[1], rtol=1e-12, atol=1e-13)
    M, E = mp.particle_invariants(s.p, s.q)
    assert (M, E) == pytest.approx(mp.exact_invariants(s), rel=1e-12)


def test_exp_sums_survive_huge_separations():
    q = np.array([0.0, 800.0, 1600.0])
    left, right = mp.exp_sums(np.ones(3), q)
    assert np.all(np.isfinite(left)) and np.all(np.isfinite(right))
    assert np.allclose(left, 0.0) and np.allclose(right, 0.0)


def test_evaluate_matches_direct_sum():
    p = np.array([1.0, 0.5, 2.0])
    q = np.array([-1.0, 0.5, 3.0])
    x = np.linspace(-10, 10, 2001)
    u, ux = mp.evaluate(p, q, x)
    d = x[:, None] - q[None, :]
    assert np.allclose(u, np.exp(-np.abs(d)) @ p, atol=1e-14)
    off = ~np.isin(x, q)
    assert np.allclose(ux[off], (-np.sign(d) * np.exp(-np.abs(d)) @ p)[off], atol=1e-14)


def test_invariant_examples():
    assert mp.exact_invariants(mp.PeakonState([1.5], [0.0])) == pytest.approx((3.0, 4.5))
    M, E = mp.exact_invariants(mp.PeakonState([1.0, 2.0], [0.0, 40.0]))
    assert E == pytest.approx(2 * (1 + 4), abs=1e-15 * 10 + 8 * np.exp(-40))


def test_single_peakon_moves_at_its_height():
    tr = mp.evolve(mp.PeakonState([1.0], [0.0]), 5.0, 1e-2)
    assert tr.q[-1, 0] == pytest.approx(5.0, abs=1e-10)
    assert np.all(tr.p == 1.0)


def test_overtaking_keeps_order_and_is_richardson_consistent():
    s0 = mp.PeakonState.create([1.0, 2.0], [5.0, 0.0])
    a = mp.evolve(s0, 30.0, 2e-3)
    b = mp.evolve(s0, 30.0, 1e-3)
    assert np.all(np.diff(a.q, axis=1) > 0)
    assert np.max(np.abs(a.final.q - b.final.q)) < 1e-9
    # the faster peakon ends in front with the larger height
    assert a.final.p[1] > a.final.p[0]


def test_evolve_rejects_large_steps():
    with pytest.raises(ValueError):
        mp.evolve(mp.PeakonState([20.0], [0.0]), 1.0, 0.01)


def test_asymptotic_speed_examples():
    assert mp.asymptotic_speeds(mp.PeakonState([1.7], [0.0])) == pytest.approx([1.7])
    far = mp.asymptotic_speeds(mp.PeakonState([1.0, 2.0], [0.0, 200.0]))
    assert np.allclose(far, [1.0, 2.0], atol=1e-12)
    near = mp.asymptotic_speeds(mp.PeakonState([1.0, 2.0], [0.0, 2.0]))
    assert np.allclose(near, SPEEDS_TWO, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(states(1, 8))
def test_eigensolver_matches_numpy(pg):
    s = _state(pg)
    ref = np.sort(np.linalg.eigvals(mp.speed_matrix(s)).real)
    assert np.allclose(mp.asymptotic_speeds(s), ref, rtol=1e-10, atol=1e-10)


def test_trajectory_csv(tmp_path):
    tr = mp.evolve(mp.PeakonState([1.0, 2.0], [0.0, 5.0]), 1.0, 0.05)
    path = tmp_path / "t.csv"
    mp.write_trajectory_csv(path, tr, ["seed = 0"])
    lines = path.read_text().splitlines()
    assert lines[:2] == ["# seed = 0", "t,p1,p2,q1,q2"]
    assert len(lines) == 2 + len(tr)
