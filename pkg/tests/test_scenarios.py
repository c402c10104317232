import os

import numpy as np
import pytest
from hypothesis import given, strategies as st

from chpeakon import scenarios as sc
from chpeakon.config import parse_config
from chpeakon.field_solver import BlowUpError, FieldTrajectory
from chpeakon.grid import Grid
from chpeakon.measures import h1_norm
from chpeakon.kernels import peakon_profile


def test_peakon_grid_puts_the_crest_on_a_node():
    g = sc.peakon_grid(-3.01, 7.0, 0.03, 1.234)
    k = int(round((1.234 - g.origin) / g.dx))
    assert g.x[k] == pytest.approx(1.234, abs=1e-12)
    assert g.x[0] <= -3.01 and g.x[-1] >= 7.0


@given(st.integers(2, 12), st.integers(0, 10_000))
def test_random_positions_are_ordered_with_bounded_gaps(N, seed):
    q = sc.random_positions(N, seed)
    gaps = np.diff(q)
    assert q[0] == 0.0 and np.all(gaps >= 1.0) and np.all(gaps <= 4.0)
    assert np.array_equal(q, sc.random_positions(N, seed))


def test_perturbation_has_the_requested_size():
    u = sc.perturbed_initial(1.0, 0.02, 5.0, 0.0, 0.05, seed=3)
    bump = u.with_samples(u.samples - peakon_profile(1.0, u.x))
    assert h1_norm(bump) == pytest.approx(0.05, rel=1e-12)
    # the bump sits behind the crest
    assert np.argmax(np.abs(bump.samples)) < np.argmax(u.samples)


def test_running_drop_and_drift_helpers():
    assert sc.worst_running_drop([1, 3, 2, 5, 4.5]) == 1.0
    assert sc.worst_running_drop([1, 2, 3]) == 0.0
    assert sc.relative_drift([2.0, 2.2, 1.9]) == pytest.approx(0.1)
    assert sc.step_index([0, 1, 2, 3], 1.6) == 2


def test_subsample_keeps_both_ends():
    ft = FieldTrajectory(Grid(0.0, 1.0, 3), np.linspace(0, 1, 101), np.zeros((101, 3)))
    idx = sc.subsample(ft, 40)
    assert idx[0] == 0 and idx[-1] == 100
    assert 40 <= len(idx) <= 52


def test_lambda_settles_picks_the_quarter_points():
    class T:
        times = np.linspace(0, 8, 9)
        lam = np.array([0, 0, 1.0, 0, 3.0, 0, 0, 0, 3.5])
    assert sc.lambda_settles(T) == (0.5, 2.0)


def test_single_peakon_scenario_writes_outputs(tmp_path):
    cfg = parse_config("kind = single_peakon\nc = 1\ndx = 0.04\nT = 2\nstride = 5\nh1_band = 0.9\n")
    rep = sc.run_scenario(cfg, str(tmp_path))
    assert rep.ok, [c.line() for c in rep.checks]
    names = {os.path.relpath(f, tmp_path) for f in rep.files}
    assert {"invariants.csv", "track.csv", "summary.txt"} <= names
    text = (tmp_path / "summary.txt").read_text()
    assert text.startswith("# kind = single_peakon")
    assert "CHECK h1_error PASS" in text


def test_blow_up_aborts_with_partial_snapshots(tmp_path, monkeypatch):
    g = Grid(0.0, 0.5, 20)
    partial = FieldTrajectory(g, np.array([0.0, 0.1]), np.ones((2, 20)))

    def explode(u0, settings):
        raise BlowUpError("non-finite samples at t=0.2", partial=partial)

    monkeypatch.setattr(sc, "evolve_field", explode)
    cfg = parse_config("kind = single_peakon\nc = 1\ndx = 0.04\nT = 2\n")
    rep = sc.run_scenario(cfg, str(tmp_path))
    assert not rep.ok and rep.aborted.startswith("BlowUpError")
    assert (tmp_path / "fields" / "index.csv").exists()
    text = (tmp_path / "summary.txt").read_text()
    assert "# aborted: BlowUpError" in text
    assert "CHECK completed FAIL" in text
