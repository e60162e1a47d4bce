import io
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helmdec.geometry import (BlockComplex, Brick, GeometryError, Pyramid,
                              catalog_info, catalog_names)
from helmdec.mesh import build_complex, extract_block, read_mesh, refine, write_mesh

CATALOG_8 = [
    "unit_cube", "three_cube_L", "pyramid", "cube_in_box", "four_edge_cube",
    "edge_junction_pair", "vertex_junction_pair", "vertex_junction_star3",
]


def brute_force_kuhn_counts(n):
    """Independent enumeration of the n x n x n Kuhn subdivision."""
    verts = {(i, j, k) for i in range(n + 1) for j in range(n + 1) for k in range(n + 1)}
    tets = 6 * n**3
    return len(verts), tets


def test_unit_cube_half():
    m = build_complex("unit_cube", 0.5)
    nv, nt = brute_force_kuhn_counts(2)
    assert (m.nv, m.nt) == (nv, nt) == (27, 48)


def test_unit_cube_single_cell():
    m = build_complex("unit_cube", 1)
    assert (m.nv, m.nt, m.ne) == (8, 6, 19)


def test_three_cube_block_labels():
    m = build_complex("three_cube_L", 0.5)
    assert sorted(set(m.block_of_tet.tolist())) == [0, 1, 2]
    # union connected: every block shares nodes with another
    masks = [extract_block(m, b).node_mask() for b in range(3)]
    assert (masks[0] & masks[1]).any() and (masks[0] & masks[2]).any()


def test_refine_halves_h_and_octuples():
    m = build_complex("unit_cube", 1)
    r = refine(m)
    assert r.h == 0.5
    assert r.nt == 8 * m.nt
    r2 = refine(r)
    assert r2.h == 0.25


def test_refined_mesh_is_conforming_and_quasi_uniform():
    for name in ("unit_cube", "pyramid", "three_cube_L"):
        m = build_complex(name, 0.5)
        for _ in range(2):
            m = refine(m)  # the TetMesh constructor rejects non-conforming input
            assert m.quasi_uniformity_ratio() <= 4.0


def test_euler_characteristic_catalog():
    for name in CATALOG_8:
        m = build_complex(name, 0.5)
        assert m.euler_characteristic() == 1, name


def test_quasi_uniformity_all_catalog():
    for name in CATALOG_8:
        m = build_complex(name, 0.5)
        assert m.quasi_uniformity_ratio() <= 4.0, name


def test_refine_preserves_ratio():
    m = build_complex("unit_cube", 0.5)
    r = refine(m)
    assert r.quasi_uniformity_ratio() == pytest.approx(m.quasi_uniformity_ratio())


def test_bad_geometry_and_bad_h():
    with pytest.raises(GeometryError):
        build_complex("dodecahedron", 0.5)
    with pytest.raises(GeometryError):
        build_complex("unit_cube", 0.3)
    with pytest.raises(GeometryError):
        build_complex("unit_cube", Fraction(2, 3))


def test_vertex_junction_blocks_share_one_node():
    m = build_complex("vertex_junction_pair", 0.25)
    shared = extract_block(m, 0).node_mask() & extract_block(m, 1).node_mask()
    assert shared.sum() == 1
    s3 = build_complex("vertex_junction_star3", 0.25)
    for a in range(3):
        for b in range(a + 1, 3):
            shared = extract_block(s3, a).node_mask() & extract_block(s3, b).node_mask()
            assert shared.sum() == 1


def test_edge_junction_blocks_share_edge_nodes():
    m = build_complex("edge_junction_pair", 0.25)
    shared = extract_block(m, 0).node_mask() & extract_block(m, 1).node_mask()
    # the common edge has 1/h + 1 lattice nodes
    assert shared.sum() == 5


def test_junction_declaration_mismatch_rejected():
    bad = BlockComplex(
        "bad",
        (Brick((0, 0, 0), (1, 1, 1)), Brick((1, 0, 0), (2, 1, 1))),
        ((0, 1, "edge"),),  # actually a face junction
    )
    with pytest.raises(GeometryError):
        bad.validate()


def test_disconnected_union_rejected():
    bad = BlockComplex(
        "bad2",
        (Brick((0, 0, 0), (1, 1, 1)), Brick((3, 3, 3), (4, 4, 4))),
        (),
    )
    with pytest.raises(GeometryError):
        bad.validate()


def test_pyramid_shape_is_catalogued():
    info = catalog_info("pyramid")
    pyr = info.complex.blocks[0]
    assert isinstance(pyr, Pyramid)
    assert pyr.base_corners().min() == 0 and pyr.base_corners().max() == 2


@settings(max_examples=10, deadline=None)
@given(st.sampled_from(CATALOG_8))
def test_export_import_roundtrip(name):
    m = build_complex(name, 0.5)
    buf = io.StringIO()
    write_mesh(m, buf, ["z=0"])
    buf.seek(0)
    m2, tags = read_mesh(buf)
    assert tags == ["z=0"]
    assert np.array_equal(m.verts_int, m2.verts_int)
    assert np.array_equal(m.tets, m2.tets)
    assert np.array_equal(m.block_of_tet, m2.block_of_tet)
    assert (m.nv, m.ne, m.nf, m.nt) == (m2.nv, m2.ne, m2.nf, m2.nt)


def test_catalog_is_closed():
    assert set(CATALOG_8) <= set(catalog_names())
