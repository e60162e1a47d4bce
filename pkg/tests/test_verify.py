import numpy as np
import pytest

from helmdec import fem, operators as ops, verify
from helmdec.mesh import build_complex


def test_fit_constant_series():
    a, b, rel = verify.fit_log_growth([0.5, 0.25, 0.125], [2.0, 2.0, 2.0])
    assert a == pytest.approx(2.0)
    assert abs(b) < 1e-12
    assert rel < 1e-12


def test_fit_pure_log():
    hs = [0.5, 0.25, 0.125, 0.0625]
    r = [1.0 + 0.5 * np.log(1 / h) for h in hs]
    a, b, rel = verify.fit_log_growth(hs, r)
    assert a == pytest.approx(1.0) and b == pytest.approx(0.5) and rel < 1e-12


def test_monotone_verdict_under_extension():
    # appending a finer level with an unchanged ratio cannot break the fit
    hs = [0.5, 0.25, 0.125]
    r = [1.5, 1.5, 1.5]
    _, b1, rel1 = verify.fit_log_growth(hs, r)
    _, b2, rel2 = verify.fit_log_growth(hs + [0.0625], r + [1.5])
    assert rel2 <= rel1 + 1e-12
    assert abs(b2) <= abs(b1) + 1e-12


def test_sweep_needs_three_levels():
    with pytest.raises(ValueError):
        verify.sweep("unit_cube", ["z=0"], "auto", [1, 2], 2, 0)


def test_sweep_reproducible():
    r1 = verify.sweep("unit_cube", ["z=0"], "kernel", [1, 2, 3], 3, 42)
    r2 = verify.sweep("unit_cube", ["z=0"], "kernel", [1, 2, 3], 3, 42)
    assert r1.to_json() == r2.to_json()
    assert r1.to_csv() == r2.to_csv()
    assert len(r1.levels) == 3
    assert [lv["level"] for lv in r1.levels] == [1, 2, 3]


def test_sweep_unknown_route():
    with pytest.raises(ValueError):
        verify.sweep("unit_cube", ["z=0"], "bogus", [1, 2, 3], 2, 0)


def test_battery_all_pass():
    ledger = verify.invariant_battery("three_cube_L", ["x=0"], "auto", 7)
    assert all(item["passed"] for item in ledger), ledger
    names = {item["check"] for item in ledger}
    assert {"dof_identity", "trace_p_exact", "gradient_absorption",
            "curl_of_interpolation", "loop_average_vs_flux"} <= names


def test_battery_edge_route():
    ledger = verify.invariant_battery("unit_cube", ["e:x=0,y=0"], "auto", 8)
    assert all(item["passed"] for item in ledger), ledger


def test_trace_probe_bounded_and_guarded():
    rep = verify.trace_inequality_probe("unit_cube", [1, 2, 3], 3, 5)
    assert len(rep["levels"]) == 3
    assert all(0 < lv["ratio"] <= 1.5 for lv in rep["levels"])
    # the surrogate quotient does not grow across levels
    assert rep["fit_b"] <= 0.05
    assert rep["fit_residual"] <= 0.2
    with pytest.raises(ValueError):
        verify.trace_inequality_probe("unit_cube", [1, 2], 3, 5)


def test_trace_probe_gradient_data():
    # gradient tangential data has a curl-free extension
    mesh = build_complex("unit_cube", 0.25)
    rng = np.random.default_rng(9)
    gv = fem.EdgeField(mesh, fem.gradient_map(mesh).mat @ rng.uniform(-1, 1, mesh.nv))
    be = mesh.boundary_edge_mask()
    data = np.zeros(mesh.ne)
    data[be] = gv.values[be]
    ext = ops.curl_harmonic_extend(mesh, data)
    assert fem.norm(ext, "curl_semi") < 1e-10


def test_threaded_sweep_matches_serial(monkeypatch):
    serial = verify.sweep("unit_cube", ["z=0"], "kernel", [1, 2, 3], 4, 6)
    monkeypatch.setenv("HELMDEC_THREADS", "3")
    threaded = verify.sweep("unit_cube", ["z=0"], "kernel", [1, 2, 3], 4, 6)
    assert serial.to_json() == threaded.to_json()


def test_edge_tets_adjacency(cube4):
    ptr, tids = cube4.edge_tets()
    assert ptr[-1] == 6 * cube4.nt
    e = 0
    incident = set(tids[ptr[e]:ptr[e + 1]].tolist())
    ref = {t for t in range(cube4.nt) if e in cube4.tet_edges[t]}
    assert incident == ref
