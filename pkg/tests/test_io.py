import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from devshell.errors import ConfigError
from devshell.io import (load_config, parse_config_text, parse_number, read_profile_csv, write_csv,
                         write_json, write_obj)
from devshell.profiles import Profile, parse_profile

CYL = "R = 1\nT = 2*pi\ns_minus = 0.5\ns_plus = 0.5\n"


# --------------------------------------------------------------------------- profiles

@pytest.mark.parametrize("kind", ["sin", "cos"])
def test_harmonic_derivatives_against_differences(kind):
    p = Profile.harmonic(kind, 0.7, 2, 3.0, phase=0.3, offset=0.1)
    t = np.linspace(0.2, 2.8, 50)
    h = 1e-5
    for k in (1, 2):
        fd = (p(t + h, k - 1) - p(t - h, k - 1)) / (2 * h)
        assert np.max(np.abs(p(t, k) - fd)) < 1e-6


def test_parse_profile_vocabulary():
    T = 2.0
    t = np.linspace(0, T, 7)
    assert np.allclose(parse_profile("0.25", T)(t), 0.25)
    assert np.allclose(parse_profile("const -1", T)(t), -1.0)
    assert np.allclose(parse_profile("cos", T)(t), np.cos(np.pi * t))
    assert np.allclose(parse_profile("sin 0.3 2 0 1", T)(t), 1 + 0.3 * np.sin(2 * np.pi * t))
    assert np.allclose(parse_profile("poly 1 0 2", T)(t, 1), 4 * t)
    for bad in ("", "wave 1", "const", "poly", "sin 1 2 3 4 5", "cos x"):
        with pytest.raises(ConfigError):
            parse_profile(bad, T)


def test_table_profile_reproduces_smooth_data(tmp_path):
    t = np.linspace(0, 2, 41)
    path = tmp_path / "k.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "kappa"])
        w.writerows(zip(t, np.sin(t)))
    tt, vv = read_profile_csv(path)
    assert np.array_equal(tt, t)
    p = parse_profile(f"table {path}", 2.0)
    x = np.linspace(0.1, 1.9, 17)
    assert np.max(np.abs(p(x) - np.sin(x))) < 1e-5
    assert not p.closed_form
    with pytest.raises(ConfigError):
        Profile.table([0, 1, 2], [1, 2, 3])


# --------------------------------------------------------------------------- config

@settings(max_examples=40, deadline=None)
@given(st.floats(-1e6, 1e6, allow_nan=False))
def test_parse_number_roundtrip(x):
    assert parse_number(repr(x)) == x


def test_parse_number_expressions():
    assert parse_number("2*pi") == pytest.approx(2 * np.pi)
    assert parse_number("-pi/4 + 1") == pytest.approx(1 - np.pi / 4)
    for bad in ("__import__('os')", "e", "2**", "abs(1)"):
        with pytest.raises(ConfigError):
            parse_number(bad)


def test_cylinder_config():
    cfg = parse_config_text(CYL + "grid.nt = 32\ngrid.ns = 16\n")
    assert cfg.spec.T == pytest.approx(2 * np.pi)
    assert cfg.nt == 32 and cfg.ns == 16 and cfg.order == 4
    assert cfg.spec.kappa_n(np.array([0.0]))[0] == 1.0
    js = cfg.to_json()
    assert js["grid"] == {"nt": 32, "ns": 16, "order": 4}
    json.dumps(js)


def test_shipped_configs_parse():
    from pathlib import Path

    root = Path(__file__).resolve().parents[1] / "configs"
    for name in ("cylinder.cfg", "variable.cfg"):
        cfg = load_config(root / name)
        assert not cfg.spec.violations()


@pytest.mark.parametrize("text", [
    "T = 1\ns_minus = 0.5\ns_plus = 0.5\n",                    # no kappa_n
    CYL + "kappa_n = 1\n",                                      # R and kappa_n
    CYL + "colour = red\n",                                     # unknown key
    CYL + "R = 2\n",                                            # duplicate
    CYL + "grid.nt = 4\n",                                      # grid too small
    CYL + "grid.order = 3\n",                                   # odd order
    "R = -1\ns_minus = 0.5\ns_plus = 0.5\n",                    # negative radius
    "R = 1\ns_minus = 0.5\n",                                   # missing s_plus
    CYL + "just text\n",                                        # no '='
])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.cfg")


# --------------------------------------------------------------------------- writers

def test_writers_are_deterministic_and_parseable(tmp_path):
    rows = [(0.1, 1 / 3, "x,y"), (np.float64(2.0), 1e-300, "q\"uote")]
    a = write_csv(tmp_path / "a.csv", ["p", "q", "label"], rows).read_bytes()
    b = write_csv(tmp_path / "b.csv", ["p", "q", "label"], rows).read_bytes()
    assert a == b
    with open(tmp_path / "a.csv", newline="") as fh:
        back = list(csv.reader(fh))
    assert back[1] == ["0.1", repr(1 / 3), "x,y"] and back[2][2] == 'q"uote'
    payload = {"b": np.arange(3), "a": {"x": np.float32(0.5), "nan": float("nan")}}
    write_json(tmp_path / "p.json", payload)
    loaded = json.loads((tmp_path / "p.json").read_text())
    assert loaded == {"a": {"nan": "nan", "x": 0.5}, "b": [0, 1, 2]}


def test_obj_mesh_counts(tmp_path):
    V = np.random.default_rng(0).normal(size=(4, 3, 3))
    lines = write_obj(tmp_path / "m.obj", V).read_text().splitlines()
    assert sum(l.startswith("v ") for l in lines) == 12
    assert sum(l.startswith("f ") for l in lines) == 2 * 3 * 2
    assert all(l[0] in "vf" for l in lines)
