import numpy as np
import pytest

from chpeakon.field_solver import mollify_initial
from chpeakon.grid import DomainError, Grid, GridField
from chpeakon.kernels import helmholtz_solve
from chpeakon.measures import (AtomicMomentum, check_Yplus, cone_excess, field_from_atoms,
                               h1_norm, momentum_of_field, read_field_csv, write_field_csv)


def test_single_atom_is_unit_peakon():
    u = field_from_atoms([(0.0, 2.0)], dx=0.05)
    assert np.max(np.abs(u.samples - np.exp(-np.abs(u.x)))) < 1e-15


def test_two_atoms_at_midpoint():
    g = Grid.covering(-30, 30, 0.05)
    u = field_from_atoms([(-1.0, 2.0), (1.0, 2.0)], g)
    assert u.samples[g.nearest(0.0)] == pytest.approx(2 * np.exp(-1.0), abs=1e-12)


def test_empty_atom_list_and_bad_mass():
    g = Grid.covering(-20, 20, 0.1)
    assert np.all(field_from_atoms([], g).samples == 0.0)
    with pytest.raises(DomainError):
        field_from_atoms([(0.0, -1.0)], g)


def test_momentum_inverts_helmholtz_solve():
    g = Grid.covering(-30, 30, 0.05)
    f = np.exp(-g.x ** 2)
    u = GridField.on(g, helmholtz_solve(f, g.dx))
    assert np.max(np.abs(momentum_of_field(u).samples - f)) < 1e-10


def test_mollified_peakon_is_in_Yplus():
    g = Grid.covering(-30, 30, 0.02)
    u = mollify_initial(GridField.on(g, np.exp(-np.abs(g.x))), 12)
    y = momentum_of_field(u)
    assert y.samples.min() >= -1e-10
    assert check_Yplus(y).is_nonnegative


def test_gaussian_is_flagged():
    g = Grid.covering(-20, 20, 0.02)
    rep = check_Yplus(momentum_of_field(GridField.on(g, np.exp(-g.x ** 2))))
    assert not rep.is_nonnegative
    # y = (3 - 4x^2) exp(-x^2) has its minimum -4 exp(-7/4) at x^2 = 7/4
    assert rep.worst_violation == pytest.approx(4 * np.exp(-1.75), rel=1e-3)


def test_atomic_Yplus():
    assert check_Yplus(AtomicMomentum([0.0, 1.0], [1.0, 2.0])) == (True, 0.0)


def test_h1_norm_of_peakon():
    for c in (1.0, 2.0):
        u = field_from_atoms([(0.0, 2 * c)], dx=0.01)
        assert h1_norm(u) == pytest.approx(np.sqrt(2) * c, rel=0.02)
    u = field_from_atoms([(0.0, 2.0)], dx=0.01)
    assert h1_norm(u.with_samples(np.zeros(len(u)))) == 0.0
    assert h1_norm(u, half_line_start=30.0) <= 1e-8 * 1e3
    with pytest.raises(DomainError):
        h1_norm(u, half_line_start=1e3)


def test_h1_half_line_far_right_is_tiny():
    u = field_from_atoms([(0.0, 2.0)], Grid.covering(-40, 80, 0.02))
    assert h1_norm(u, half_line_start=40.0) <= 1e-8


def test_cone_property_of_peakon_sum():
    # centered slopes next to a crest overshoot by O(dx^2)
    u = field_from_atoms([(-2.0, 1.0), (3.0, 4.0)], dx=0.01)
    assert cone_excess(u) <= u.dx ** 2


def test_pairing_of_atoms():
    y = AtomicMomentum([0.0, 2.0], [2.0, 4.0])
    assert y.total == 6.0
    assert y.pair(lambda x: x) == pytest.approx(8.0)


def test_field_csv_roundtrip(tmp_path):
    u = field_from_atoms([(0.3, 2.0)], dx=0.05)
    path = tmp_path / "u.csv"
    write_field_csv(path, u, ["kind = demo", "n0 = 4"])
    text = path.read_text()
    assert text.startswith("# kind = demo\n# n0 = 4\nx,u\n")
    v = read_field_csv(path)
    assert np.array_equal(v.samples, u.samples)
    assert v.origin == u.origin
    assert v.dx == pytest.approx(u.dx, rel=1e-12)


def test_field_csv_needs_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1,2\n3,4\n")
    with pytest.raises(ValueError):
        read_field_csv(path)
