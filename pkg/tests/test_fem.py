import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helmdec import fem
from helmdec.mesh import build_complex
from helmdec.trace import tag_trace


def test_curl_grad_is_zero_integer_identity(cube4):
    G = fem.gradient_map(cube4).mat
    C = fem.curl_map(cube4).mat
    assert abs(C @ G).max() == 0.0


def test_gradient_map_examples(cube4):
    G = fem.gradient_map(cube4).mat
    p = np.ones(cube4.nv)
    assert abs(G @ p).max() == 0.0
    px = cube4.verts[:, 0].copy()
    lam = G @ px
    d = cube4.edge_vectors()
    assert np.allclose(lam, d[:, 0])  # lambda_e = h on x-aligned unit-h edges


def test_constant_mass_is_volume(cube4, lshape4):
    for mesh, vol in ((cube4, 1.0), (lshape4, 3.0)):
        one = np.ones(mesh.nv)
        M = fem.assemble(mesh, "Z", "mass")
        K = fem.assemble(mesh, "Z", "stiffness")
        assert M.quadratic(one) == pytest.approx(vol, rel=1e-12)
        assert abs(K.quadratic(one)) < 1e-12


def test_unit_circulation_single_face_flux(cube2):
    C = fem.curl_map(cube2).mat
    f = 7
    tri = cube2.faces[f]
    v = np.zeros(cube2.ne)
    # circulate around face f following its canonical boundary orientation
    pairs = [(tri[0], tri[1], 1.0), (tri[1], tri[2], 1.0), (tri[0], tri[2], -1.0)]
    for a, b, s in pairs:
        e = fem.np.searchsorted(cube2.edge_id_map(), int(a) * cube2.nv + int(b))
        v[e] = s
    flux = C @ v
    assert flux[f] == pytest.approx(3.0)  # each edge contributes its moment
    # gradients map to zero
    G = fem.gradient_map(cube2).mat
    rng = np.random.default_rng(3)
    assert abs(C @ (G @ rng.uniform(-1, 1, cube2.nv))).max() == 0.0


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_quadratic_forms_match_quadrature_oracle(seed):
    mesh = build_complex("unit_cube", 0.25)
    rng = np.random.default_rng(seed)
    checks = [
        (fem.EdgeField(mesh, rng.uniform(-1, 1, mesh.ne)),
         fem.EdgeField(mesh, rng.uniform(-1, 1, mesh.ne)), "V"),
        (fem.NodalField(mesh, rng.uniform(-1, 1, mesh.nv)),
         fem.NodalField(mesh, rng.uniform(-1, 1, mesh.nv)), "Z"),
        (fem.NodalVectorField(mesh, rng.uniform(-1, 1, (mesh.nv, 3))),
         fem.NodalVectorField(mesh, rng.uniform(-1, 1, (mesh.nv, 3))), "Z3"),
    ]
    for u, v, space in checks:
        for kind in ("mass", "stiffness"):
            lhs = fem.assemble(mesh, space, kind).quadratic(u.values, v.values)
            rhs = fem.quadrature_form(u, v, kind)
            assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_face_mass_matches_piecewise_constant_curl(cube4, rng):
    v = fem.EdgeField(cube4, rng.uniform(-1, 1, cube4.ne))
    flux = fem.curl_map(cube4).mat @ v.values
    Mw = fem.assemble(cube4, "W", "mass")
    vol, _ = fem.tet_geometry(cube4)
    ct = fem.curl_of_edge_field(v)
    direct = float(np.sum(vol * np.einsum("td,td->t", ct, ct)))
    assert Mw.quadratic(flux) == pytest.approx(direct, rel=1e-12)


def test_norms(cube4, rng):
    d = cube4.edge_vectors()
    const = fem.EdgeField(cube4, d[:, 0].copy())
    assert fem.norm(const, "L2") == pytest.approx(1.0, rel=1e-12)
    assert fem.norm(const, "curl_semi") < 1e-12
    G = fem.gradient_map(cube4).mat
    gv = fem.EdgeField(cube4, G @ rng.uniform(-1, 1, cube4.nv))
    assert fem.norm(gv, "curl_semi") < 1e-12
    z = fem.EdgeField(cube4, np.zeros(cube4.ne))
    for which in ("L2", "curl", "curl_semi"):
        assert fem.norm(z, which) == 0.0
    with pytest.raises(ValueError):
        fem.norm(const, "H1")
    with pytest.raises(ValueError):
        fem.norm(fem.NodalField(cube4, np.zeros(cube4.nv)), "curl")


def test_moment_sign_flips_with_orientation(cube4, rng):
    w = fem.NodalVectorField(cube4, rng.uniform(-1, 1, (cube4.nv, 3)))
    from helmdec.operators import edge_interpolate_rh

    lam = edge_interpolate_rh(w).values
    a, b = cube4.edges[5]
    flipped = 0.5 * (w.values[a] + w.values[b]) @ (cube4.verts[a] - cube4.verts[b])
    assert flipped == pytest.approx(-lam[5], rel=1e-12)


def test_restrict_zero(cube4, rng):
    t = tag_trace(cube4, ["boundary"])
    v = fem.EdgeField(cube4, rng.uniform(-1, 1, cube4.ne))
    r = fem.restrict_zero(v, t)
    assert np.all(r.values[t.edge_mask] == 0.0)
    assert np.array_equal(r.values[~t.edge_mask], v.values[~t.edge_mask])
    rr = fem.restrict_zero(r, t)
    assert np.array_equal(r.values, rr.values)
    empty = tag_trace(cube4, [])
    same = fem.restrict_zero(v, empty)
    assert np.array_equal(same.values, v.values)


def test_zero_extension_preserves_norms():
    g = build_complex("cube_in_box", 0.25)
    from helmdec.decompose import _embed_nodes, _extended_mesh

    B = _extended_mesh(g, "cube_in_box_B")
    nmap = _embed_nodes(g, B)
    rng = np.random.default_rng(4)
    w = np.zeros((g.nv, 3))
    inner = ~g.boundary_node_mask()
    w[inner] = rng.uniform(-1, 1, (int(inner.sum()), 3))
    wg = fem.NodalVectorField(g, w)
    wb = np.zeros((B.nv, 3))
    wb[nmap] = w
    wB = fem.NodalVectorField(B, wb)
    for which in ("L2", "H1"):
        assert fem.norm(wB, which) == pytest.approx(fem.norm(wg, which), rel=1e-13)


def test_symmetry_flags(cube4):
    for space in ("Z", "Z3", "V", "W"):
        for kind in ("mass", "stiffness"):
            op = fem.assemble(cube4, space, kind)
            assert op.symmetric and op.check_symmetry()


def test_operator_export(cube2):
    op = fem.gradient_map(cube2)
    text = op.to_text()
    header = text.splitlines()[0].split()
    assert [int(x) for x in header[:2]] == [cube2.ne, cube2.nv]


def test_circulation_leaves_far_faces_untouched(cube4, rng):
    C = fem.curl_map(cube4).mat
    f = 3
    tri = cube4.faces[f]
    v = np.zeros(cube4.ne)
    for a, b, s in [(tri[0], tri[1], 1.0), (tri[1], tri[2], 1.0), (tri[0], tri[2], -1.0)]:
        e = np.searchsorted(cube4.edge_id_map(), int(a) * cube4.nv + int(b))
        v[e] = s
    flux = C @ v
    touched = set(cube4.tet_faces[np.unique(cube4.face_tets[f])].ravel().tolist())
    far = [g for g in range(cube4.nf) if not set(cube4.faces[g]) & set(tri)]
    assert flux[f] == 3.0
    assert np.abs(flux[far]).max() == 0.0


def test_curl_map_matches_analytic_tet_curls(cube4, rng):
    v = fem.EdgeField(cube4, rng.uniform(-1, 1, cube4.ne))
    flux = fem.curl_map(cube4).mat @ v.values
    ct = fem.curl_of_edge_field(v)
    verts = cube4.verts
    tri = cube4.faces
    nvec = 0.5 * np.cross(verts[tri[:, 1]] - verts[tri[:, 0]],
                          verts[tri[:, 2]] - verts[tri[:, 0]])
    own = cube4.face_tets[:, 0]
    direct = np.einsum("fd,fd->f", nvec, ct[own])
    assert np.abs(flux - direct).max() < 1e-12
