import math

import pytest
from hypothesis import given, strategies as st

from chpeakon.config import DEFAULTS, KINDS, ConfigError, load_config, parse_config


def test_minimal_single_peakon_gets_defaults():
    cfg = parse_config("kind = single_peakon\nc = 1\ndx = 0.02\nT = 10\n")
    assert cfg.kind == "single_peakon"
    for key, value in DEFAULTS["single_peakon"].items():
        assert cfg[key] == value
    assert cfg.out == "out"


def test_theta_must_be_below_c():
    with pytest.raises(ConfigError) as info:
        parse_config("kind = perturbed_peakon\nc = 1\ntheta = 2\nT = 10\n")
    assert "theta < c" in str(info.value)
    assert info.value.line == 3


def test_unknown_key_reports_its_line():
    with pytest.raises(ConfigError) as info:
        parse_config("kind = single_peakon\nc = 1\n\nunknown_key = 3\ndx = 0.02\nT = 1\n")
    assert info.value.line == 4
    assert str(info.value).startswith("line 4:")


@pytest.mark.parametrize("text, fragment", [
    ("c = 1\n", "kind"),
    ("kind = wave\n", "unknown scenario kind"),
    ("kind = single_peakon\nc = 1\nT = 1\n", "missing required key 'dx'"),
    ("kind = single_peakon\nc = 1\nc = 2\ndx = 0.1\nT = 1\n", "duplicate"),
    ("kind = single_peakon\nc = inf\ndx = 0.1\nT = 1\n", "finite"),
    ("kind = single_peakon\nc = nan\ndx = 0.1\nT = 1\n", "finite"),
    ("kind = single_peakon\nc = one\ndx = 0.1\nT = 1\n", "cannot read"),
    ("kind = single_peakon\nc 1\n", "key = value"),
    ("kind = multipeakon_exact\np = 1, -2\n", "positive"),
    ("kind = multipeakon_exact\np = 1, 2\nq = 0\n", "same length"),
    ("kind = peakon_train\np = 2, 1\n", "increase"),
    ("kind = single_peakon\nc = 1\ndx = 0.1\nT = -1\n", "positive"),
])
def test_rejections(text, fragment):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert fragment in str(info.value)


def test_lists_comments_and_gamma_default():
    cfg = parse_config("# audit\nkind = monotonicity_audit  # trailing\nc = 2\nT = 4\n"
                       "R = 5, 10\n")
    assert cfg["R"] == [5.0, 10.0]
    assert cfg["gamma"] == [0.0, 1.0]
    assert cfg["theta"] == 0.25


def test_integer_keys_are_integers():
    cfg = parse_config("kind = perturbed_peakon\nc = 1\ntheta = 0.2\nT = 4\nseed = 3\n")
    assert cfg["seed"] == 3 and isinstance(cfg["seed"], int)
    with pytest.raises(ConfigError):
        parse_config("kind = perturbed_peakon\nc = 1\ntheta = 0.2\nT = 4\nseed = 1.5\n")


def test_header_lines_are_sorted_and_stable():
    text = "kind = eigen_speed_check\nT = 5\np = 1, 2\nq = 5, 0\n"
    a = parse_config(text).header_lines()
    b = parse_config("\n".join(reversed(text.strip().splitlines()))).header_lines()
    assert a == b
    assert a[0] == "kind = eigen_speed_check"
    assert "p = 1.0, 2.0" in a


def test_shipped_configs_parse():
    import pathlib
    root = pathlib.Path(__file__).resolve().parents[1] / "configs"
    kinds = {load_config(p).kind for p in root.glob("*.cfg")}
    assert kinds == set(KINDS)


@given(st.floats(0.01, 10.0), st.floats(0.0, 20.0))
def test_theta_rule(c, theta):
    text = f"kind = liouville_probe\nc = {c!r}\ntheta = {theta!r}\nT = 1\n"
    if 0 < theta < c:
        assert parse_config(text)["theta"] == theta
    else:
        with pytest.raises(ConfigError):
            parse_config(text)
