import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from obstacle_mbo.cli import main
from obstacle_mbo.config import ConfigError, build_initial, build_obstacles, validate
from obstacle_mbo.fileio import (FormatError, load_mask, load_phase, read_pgm, read_rows,
                                 render, save_mask, save_phase, write_pgm)
from obstacle_mbo.grid import GridGeometry


def write_config(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


MINIMAL = {"grid": {"n": 64}, "scheme": {"h": 0.001, "max_iters": 200},
           "initial": {"type": "disks", "centers": [[0.5, 0.5]], "radius": 0.25},
           "experiment": {"seed": 3, "run_id": "disk"},
           "output": {"snapshot_stride": 10}}


@settings(max_examples=30, deadline=None)
@given(arrays(np.int8, st.tuples(st.integers(1, 9), st.integers(1, 9)).map(lambda s: (s[0], s[0])),
              elements=st.sampled_from([-1, 1])))
def test_phase_round_trip(u):
    import tempfile
    import os
    with tempfile.TemporaryDirectory() as d:
        p = os.path.join(d, "u.pgm")
        save_phase(p, u)
        np.testing.assert_array_equal(load_phase(p), u)


def test_pgm_format_details(tmp_path):
    u = np.array([[1, -1, -1], [1, 1, -1], [-1, -1, 1]], np.int8)
    p = tmp_path / "u.pgm"
    save_phase(p, u)
    data = p.read_bytes()
    assert data.startswith(b"P5\n3 3\n255\n")
    assert data[-9:] == bytes([255, 0, 0, 255, 255, 0, 0, 0, 255])
    mask = u == 1
    save_mask(tmp_path / "m.pgm", mask)
    np.testing.assert_array_equal(load_mask(tmp_path / "m.pgm"), mask)


def test_pgm_errors(tmp_path):
    p = tmp_path / "bad.pgm"
    p.write_bytes(b"P5\n4 4\n255\n" + bytes(5))
    with pytest.raises(FormatError, match="truncated"):
        read_pgm(p)
    p.write_bytes(b"P2\n1 1\n255\n0")
    with pytest.raises(FormatError):
        read_pgm(p)
    write_pgm(p, np.full((2, 2), 7))
    with pytest.raises(FormatError):
        load_phase(p)


def test_render_overlay():
    u = -np.ones((8, 8), np.int8)
    u[2:6, 2:6] = 1
    plain = render(u)
    assert set(np.unique(plain)) == {0, 255}
    empty = np.zeros((8, 8), bool)
    np.testing.assert_array_equal(render(u, empty, empty), plain)
    phi = np.zeros((8, 8), bool)
    phi[3:5, 3:5] = True
    img = render(u, phi)
    assert np.all(img[phi] == 128)


def test_config_validation_names_the_field():
    with pytest.raises(ConfigError) as err:
        validate({"grid": {"n": 64}, "scheme": {"h": -1}})
    assert err.value.field == "scheme.h"
    with pytest.raises(ConfigError) as err:
        validate({"grid": {"n": 64}, "scheme": {"h": 0.1, "colour": 1}})
    assert err.value.field == "scheme.colour"
    with pytest.raises(ConfigError) as err:
        validate({"grid": {}, "scheme": {"h": 0.1}})
    assert err.value.field == "grid.n"
    with pytest.raises(ConfigError) as err:
        validate({"grid": {"n": 8}, "scheme": {"h": 0.1}, "extra": {}})
    assert err.value.field == "extra"


def test_config_builds_obstacles_and_initial_states():
    cfg = validate({"grid": {"n": 32}, "scheme": {"h": 0.01},
                    "initial": {"type": "band", "width": 0.25},
                    "obstacles": {"phi": {"centers": [[0.1, 0.1]], "radius": 0.05}}})
    g = GridGeometry(32)
    u = build_initial(cfg, g)
    assert np.count_nonzero(u == 1) == 8 * 32
    obs = build_obstacles(cfg, g)
    assert obs.phi.any() and not obs.psi.any()
    cfg["obstacles"]["psi"] = {"centers": [[0.1, 0.1]], "radius": 0.05}
    with pytest.raises(ConfigError, match="obstacles overlap"):
        build_obstacles(cfg, g)


def test_cmd_run_writes_outputs(tmp_path):
    cfg = write_config(tmp_path / "c.json", MINIMAL)
    out = tmp_path / "out"
    assert main(["run", cfg, "--out", str(out)]) == 0
    rows = read_rows(out / "disk_metrics.csv")
    assert len(rows) >= 1
    assert list(rows[0]) == ["iter", "area_fraction", "energy", "movement", "flips"]
    manifest = json.loads((out / "disk_manifest.json").read_text())
    assert manifest["seed"] == 3 and manifest["rng"] == "PCG64"
    for name in manifest["outputs"]:
        assert (out / name).exists()
    assert (out / "disk_0.pgm").exists() and (out / "disk_10.pgm").exists()
    assert manifest["termination"] in ("steady_state", "max_iters")


def test_cmd_run_is_byte_identical(tmp_path):
    cfg = write_config(tmp_path / "c.json", MINIMAL)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", cfg, "--out", str(a)]) == 0
    assert main(["run", cfg, "--out", str(b)]) == 0
    files = sorted(p.name for p in a.iterdir() if not p.name.endswith("manifest.json"))
    assert files
    for name in files:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


@pytest.mark.parametrize("doc, needle", [
    ({"grid": {"n": 64}, "scheme": {"h": 0.001},
      "initial": {"type": "constant", "value": -1},
      "obstacles": {"phi": {"centers": [[0.5, 0.5]], "radius": 0.1},
                    "psi": {"centers": [[0.55, 0.5]], "radius": 0.1}}}, "obstacles overlap"),
    ({"grid": {"n": 64}, "scheme": {"h": 0}}, "scheme.h"),
    ({"grid": {"n": 64}, "scheme": {"h": -0.5}}, "scheme.h"),
    ({"grid": {"n": 64}, "scheme": {"h": 0.1, "colour": 1}}, "scheme.colour"),
])
def test_cmd_run_config_errors_exit_2(tmp_path, capsys, doc, needle):
    cfg = write_config(tmp_path / "c.json", doc)
    assert main(["run", cfg, "--out", str(tmp_path / "o")]) == 2
    assert needle in capsys.readouterr().err


def test_missing_config_exits_2(tmp_path):
    assert main(["run", str(tmp_path / "nope.json")]) == 2


def test_cmd_render(tmp_path):
    u = -np.ones((16, 16), np.int8)
    u[4:10, 4:10] = 1
    state = tmp_path / "s.pgm"
    save_phase(state, u)
    phi = np.zeros((16, 16), bool)
    phi[5:8, 5:8] = True
    save_mask(tmp_path / "phi.pgm", phi)
    out = tmp_path / "r.pgm"
    assert main(["render", str(state), str(out), "--phi", str(tmp_path / "phi.pgm")]) == 0
    assert read_pgm(out).shape == (16, 16)
    (tmp_path / "t.pgm").write_bytes(state.read_bytes()[:40])
    assert main(["render", str(tmp_path / "t.pgm"), str(out)]) == 1


def test_cmd_bench_two_sizes(capsys):
    assert main(["bench", "--sizes", "32,64", "--iters", "2"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "n,N,seconds_per_iter" and len(lines) == 3


def test_cmd_verify_minimizer(capsys):
    assert main(["verify", "minimizer"]) == 0
    assert "[PASS] minimizer: 100 checks" in capsys.readouterr().out


def test_cmd_verify_spectral(capsys):
    assert main(["verify", "spectral", "--instances", "3"]) == 0


def test_cmd_study_one_row(tmp_path):
    doc = {"grid": {"n": 200}, "scheme": {"h": 9e-4},
           "experiment": {"kind": "study", "hs": [9e-4], "expected": [], "run_id": "st"}}
    cfg = write_config(tmp_path / "s.json", doc)
    assert main(["study", cfg, "--out", str(tmp_path / "o")]) == 0
    rows = read_rows(tmp_path / "o" / "st_study.csv")
    assert len(rows) == 1
    assert list(rows[0]) == ["h", "iterations", "components", "hull_error",
                             "area_fraction_final"]


def test_cmd_invasion_small(tmp_path):
    doc = {"grid": {"n": 128}, "scheme": {"max_iters": 400},
           "experiment": {"kind": "invasion", "A_syst": 60, "C": 0.3, "seed": 5,
                          "run_id": "inv"}}
    cfg = write_config(tmp_path / "i.json", doc)
    assert main(["invasion", cfg, "--out", str(tmp_path / "o")]) == 0
    manifest = json.loads((tmp_path / "o" / "inv_manifest.json").read_text())
    assert manifest["derived"]["N_d"] == 18
    assert (tmp_path / "o" / "inv_final.pgm").exists()
