import numpy as np
import pytest

from chpeakon import characteristics as ch
from chpeakon import multipeakon as mp
from chpeakon.field_solver import FieldTrajectory, SolverSettings, evolve_field
from chpeakon.grid import DomainError, Grid, GridField
from chpeakon.measures import field_from_atoms, h1_norm
from chpeakon.scenarios import peakon_initial


@pytest.fixture(scope="module")
def peakon_run():
    dx, T = 0.02, 6.0
    return evolve_field(peakon_initial(1.0, dx, T), SolverSettings(dx=dx, T=T, n=12, stride=5))


def _zero(n=6):
    g = Grid.covering(-10, 10, 0.1)
    return FieldTrajectory(g, np.linspace(0, 1, n), np.zeros((n, g.n)), 0.2)


def test_zero_trajectory():
    ft = _zero()
    assert np.all(ch.flow(ft, 1.3) == 1.3)
    assert np.all(ch.flow_jacobian(ft, 1.3) == 1.0)
    assert ch.transport_check(ft, 1.3, 0.5) == 0.0


def test_peak_rides_at_speed_c():
    tr = mp.evolve(mp.PeakonState([1.5], [0.0]), 5.0, 0.01)
    q = ch.flow(tr, 0.0)
    assert np.max(np.abs(q - 1.5 * tr.t)) < 1e-8


def test_points_ahead_fall_behind_the_peak():
    tr = mp.evolve(mp.PeakonState([1.0], [0.0]), 5.0, 0.01)
    q = ch.flow(tr, 2.0)
    assert np.all(np.diff(q) > 0)
    assert np.all(q[1:] - 2.0 < tr.t[1:])


def test_vector_start_points():
    tr = mp.evolve(mp.PeakonState([1.0], [0.0]), 1.0, 0.01)
    q = ch.flow(tr, np.array([-1.0, 0.0, 1.0]))
    assert q.shape == (len(tr), 3)


def test_jacobian_matches_finite_differences(peakon_run):
    h = 2 * peakon_run.dx
    x0 = -2.0
    J = ch.flow_jacobian(peakon_run, x0)
    fd = (ch.flow(peakon_run, x0 + h) - ch.flow(peakon_run, x0 - h)) / (2 * h)
    assert np.max(np.abs(J - fd) / fd) < 1e-3
    tr = mp.evolve(mp.PeakonState([1.0, 2.0], [0.0, 4.0]), 4.0, 0.01)
    for x0 in (-1.0, 2.0):
        J = ch.flow_jacobian(tr, x0)
        fd = (ch.flow(tr, x0 + 0.04) - ch.flow(tr, x0 - 0.04)) / 0.08
        assert np.max(np.abs(J - fd) / fd) < 1e-3


def test_jacobian_bounds(peakon_run):
    H1 = h1_norm(peakon_run[0])
    t = peakon_run.times
    for x0 in (-3.0, -0.5, 0.5, 2.0):
        J = ch.flow_jacobian(peakon_run, x0)
        assert np.all(J >= np.exp(-2 * H1 * t) * (1 - 1e-12))
        assert np.all(J <= np.exp(2 * H1 * t) * (1 + 1e-12))


def test_transport_identity_at_random_points(peakon_run):
    rng = np.random.default_rng(7)
    tol = 50 * (peakon_run.dx + peakon_run.dt)
    for _ in range(10):
        x0 = rng.uniform(-2.0, 0.5)
        t = rng.uniform(0.5, peakon_run.times[-1])
        assert ch.transport_check(peakon_run, x0, t) <= tol


def test_transport_residual_shrinks_under_refinement():
    res = []
    for dx in (0.04, 0.02, 0.01):
        ft = evolve_field(peakon_initial(1.0, dx, 2.0),
                          SolverSettings(dx=dx, T=2.0, n=2, stride=1))
        res.append(ch.transport_check(ft, -0.1, 2.0))
    assert res[2] < res[0]
    assert res[2] < 50 * 0.01 * 1.5


def test_leaving_the_grid():
    g = Grid.covering(-10, 10, 0.1)
    ft = FieldTrajectory(g, np.linspace(0, 2, 21), np.ones((21, g.n)))
    with pytest.raises(ch.DomainExitError) as info:
        ch.flow(ft, 9.0)
    # reaches the edge x = 10 at t = 1 and leaves during the next step
    assert info.value.last_time == pytest.approx(1.0)
    with pytest.raises(ch.DomainExitError):
        ch.flow(ft, 11.0)


def test_jump_of_sampled_peakon():
    for c in (1.0, 2.5):
        u = field_from_atoms([(0.0, 2 * c)], dx=0.01)
        assert ch.jump_at(u, 0.0) == pytest.approx(2 * c, abs=10 * c * 0.01)


def test_no_jump_on_smooth_data():
    g = Grid.covering(-10, 10, 0.01)
    u = GridField.on(g, np.exp(-g.x ** 2))
    for x in (-1.0, 0.0, 0.7):
        assert abs(ch.jump_at(u, x)) <= 10 * 0.01 * 2.0


def test_jump_at_each_crest_of_a_multipeakon():
    p = np.array([0.5, 1.0, 2.0])
    q = np.array([-3.0, 0.0, 4.0])
    g = Grid.covering(-40, 40, 0.005)
    u = GridField.on(g, mp.evaluate(p, q, g.x)[0])
    for pi, qi in zip(p, q):
        assert ch.jump_at(u, qi) == pytest.approx(2 * pi, abs=10 * 0.005 * 2)
    with pytest.raises(DomainError):
        ch.jump_at(u, 100.0)


def test_single_peakon_jump_is_constant():
    tr = mp.evolve(mp.PeakonState([1.3], [0.0]), 5.0, 0.01)
    jt = ch.track_jump(tr, 0.0)
    assert np.allclose(jt.a, 2.6, atol=1e-14)
    assert np.max(jt.ode_residual) <= 1e-8
    assert jt.worst_decrease() == 0.0


def test_two_peakon_jump_follows_its_ode():
    s0 = mp.PeakonState([1.0, 2.0], [0.0, 3.0])
    res = []
    for dt in (0.02, 0.01, 0.005):
        tr = mp.evolve(s0, 4.0, dt)
        jt = ch.track_jump(tr, 3.0)
        assert np.allclose(jt.a, 2 * tr.p[:, -1])
        assert np.all(jt.a <= 2 * jt.u_at + 1e-12)
        res.append(np.max(jt.ode_residual))
    assert res[0] / res[1] >= 1.8 and res[1] / res[2] >= 1.8


def test_jump_on_field_run():
    # an unmollified crest keeps its jump along the run
    ft = evolve_field(peakon_initial(1.0, 0.02, 4.0), SolverSettings(dx=0.02, T=4.0, stride=5))
    jt = ch.track_jump(ft, 0.0)
    assert np.allclose(jt.a, 2.0, atol=1e-12)
    assert jt.worst_decrease() <= 1e-6 * jt.a.max()
    E = 2.0
    assert jt.a.max() <= 2 * np.sqrt(E)


def test_smooth_data_loses_the_jump():
    g = Grid.covering(-20, 20, 0.02)
    samples = np.tile(np.exp(-(g.x / 2) ** 2), (3, 1))
    ft = FieldTrajectory(g, np.array([0.0, 0.1, 0.2]), samples)
    with pytest.raises(ch.JumpLost):
        ch.track_jump(ft, 0.0)


def test_grid_jump_tracker_without_particles():
    tr = mp.evolve(mp.PeakonState([1.0], [0.0]), 2.0, 0.01)
    g = Grid.covering(-20, 30, 0.01)
    from chpeakon.field_solver import trajectory_from_peakons
    ft = trajectory_from_peakons(tr, g)
    plain = FieldTrajectory(g, ft.times, ft.samples)
    jt = ch.track_jump(plain, 0.0)
    assert np.allclose(jt.a, 2.0, atol=10 * g.dx)
    assert np.allclose(jt.q_star, ft.times, atol=g.dx)


def test_jump_csv(tmp_path):
    tr = mp.evolve(mp.PeakonState([1.0], [0.0]), 1.0, 0.1)
    jt = ch.track_jump(tr, 0.0)
    path = tmp_path / "jump.csv"
    jt.write_csv(path, ["n0 = 4"])
    assert path.read_text().splitlines()[:2] == ["# n0 = 4", "t,q_star,a,u_at,ode_residual"]


def test_support_radius_of_exact_peakon():
    tr = mp.evolve(mp.PeakonState([1.0], [0.0]), 1.0, 0.1)
    r = ch.support_radius(tr, tr.q[:, 0])
    assert np.allclose(r, 0.0)
