import io
import json
from pathlib import Path

import numpy as np
import pytest

from helmdec.cli import main
from helmdec.mesh import build_complex, read_mesh


def write_cfg(tmp_path, body, name="exp.cfg"):
    path = tmp_path / name
    path.write_text(body)
    return str(path)


BASE = """
[experiment]
geometry = unit_cube
trace = z=0
route = auto
levels = 1,2,3
samples = 3
seed = 11
input = random
"""


def run(cmd, cfg, out, extra=()):
    return main([cmd, "--config", cfg, "--out", str(out), *extra])


def test_mesh_roundtrip(tmp_path):
    cfg = write_cfg(tmp_path, BASE)
    assert run("mesh", cfg, tmp_path / "m") == 0
    text = (tmp_path / "m" / "unit_cube_L2.mesh.txt").read_text()
    buf = io.StringIO(text[text.index("helmdec-mesh"):])
    mesh, tags = read_mesh(buf)
    ref = build_complex("unit_cube", 0.25)
    assert (mesh.nv, mesh.ne, mesh.nf, mesh.nt) == (ref.nv, ref.ne, ref.nf, ref.nt)
    assert tags == ["z=0"]
    assert text.startswith("# config=")


def test_mesh_three_cube_reimport(tmp_path):
    cfg = write_cfg(tmp_path, BASE.replace("unit_cube", "three_cube_L")
                    .replace("trace = z=0", "trace = concave"))
    assert run("mesh", cfg, tmp_path / "m") == 0
    text = (tmp_path / "m" / "three_cube_L_L1.mesh.txt").read_text()
    buf = io.StringIO(text[text.index("helmdec-mesh"):])
    mesh, _ = read_mesh(buf)
    ref = build_complex("three_cube_L", 0.5)
    assert (mesh.nv, mesh.nt) == (ref.nv, ref.nt)


def test_unknown_key_is_config_error(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "[experiment]\ngeometry = unit_cube\nwobble = 3\n")
    assert run("mesh", cfg, tmp_path / "x") == 2


def test_unknown_geometry_is_config_error(tmp_path):
    cfg = write_cfg(tmp_path, "[experiment]\ngeometry = torus\n")
    assert run("mesh", cfg, tmp_path / "x") == 2


def test_malformed_trace_is_config_error(tmp_path):
    cfg = write_cfg(tmp_path, BASE.replace("trace = z=0", "trace = z=9"))
    assert run("mesh", cfg, tmp_path / "x") == 2


def test_decompose_gradient_summary(tmp_path, capsys):
    cfg = write_cfg(tmp_path, BASE.replace("input = random", "input = gradient")
                    .replace("levels = 1,2,3", "levels = 2"))
    assert run("decompose", cfg, tmp_path / "d") == 0
    summary = json.loads(next((tmp_path / "d").glob("*.summary.json")).read_text())
    assert summary["norms"]["w_h1"] < 1e-10
    assert summary["norms"]["R_l2"] < 1e-10
    assert summary["identity_residual"] <= 1e-10


def test_decompose_no_log_banner(tmp_path, capsys):
    cfg = write_cfg(tmp_path, BASE.replace("trace = z=0", "trace = boundary")
                    .replace("levels = 1,2,3", "levels = 2"))
    assert run("decompose", cfg, tmp_path / "d") == 0
    out = capsys.readouterr().out
    assert "no-log claim" in out


def test_decompose_compatibility_violation_exit4(tmp_path, capsys):
    body = """
[experiment]
geometry = vertex_junction_pair
trace = x=0;x=2
levels = 2
samples = 1
seed = 3
input = perturbed
"""
    cfg = write_cfg(tmp_path, body)
    assert run("decompose", cfg, tmp_path / "d") == 4
    out = capsys.readouterr().out
    assert "functionals:" in out


def test_precondition_violation_exit3(tmp_path):
    # four parallel edges at h=1/2: no element-aligned subdomain split
    body = """
[experiment]
geometry = four_edge_cube
trace = e:x=0,y=0;e:x=1,y=0;e:x=1,y=1;e:x=0,y=1
levels = 1
samples = 1
seed = 3
"""
    cfg = write_cfg(tmp_path, body)
    assert run("decompose", cfg, tmp_path / "d") == 3


def test_sweep_two_levels_rejected(tmp_path):
    cfg = write_cfg(tmp_path, BASE.replace("levels = 1,2,3", "levels = 1,2"))
    assert run("sweep", cfg, tmp_path / "s") == 2


def _tree_bytes(root: Path):
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.mark.parametrize("command", ["mesh", "decompose", "sweep", "battery"])
def test_rerun_outputs_byte_identical(tmp_path, command):
    cfg = write_cfg(tmp_path, BASE)
    a = tmp_path / "a"
    b = tmp_path / "b"
    assert run(command, cfg, a) in (0,)
    assert run(command, cfg, b) in (0,)
    ta, tb = _tree_bytes(a), _tree_bytes(b)
    assert list(ta) == list(tb)
    for k in ta:
        assert ta[k] == tb[k], k


def test_hx_jump_rows_and_determinism(tmp_path):
    body = """
[experiment]
geometry = unit_cube
trace = boundary
levels = 2
seed = 5

[hx]
alpha = 1
beta = 1
jumps = 1,100,10000,1000000
tol = 1e-8
"""
    cfg = write_cfg(tmp_path, body)
    a = tmp_path / "a"
    b = tmp_path / "b"
    assert run("hx", cfg, a) == 0
    assert run("hx", cfg, b) == 0
    csv = next(a.glob("hx__*.csv")).read_text().splitlines()
    assert len(csv) == 2 + 4  # config line + header + 4 jump rows
    assert _tree_bytes(a) == _tree_bytes(b)
    data = json.loads(next(a.glob("hx__*.json")).read_text())
    assert all(r["hx_iterations"] < r["cg_iterations"] for r in data["runs"])


def test_seed_override_changes_hash(tmp_path):
    cfg = write_cfg(tmp_path, BASE)
    a = tmp_path / "a"
    b = tmp_path / "b"
    assert run("battery", cfg, a) == 0
    assert run("battery", cfg, b, extra=["--seed", "99"]) == 0
    ja = json.loads(next(a.glob("battery__*.json")).read_text())
    jb = json.loads(next(b.glob("battery__*.json")).read_text())
    assert ja["config"] != jb["config"]
