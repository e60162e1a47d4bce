import numpy as np
import pytest

from helmdec.mesh import build_complex
from helmdec.trace import (TraceError, check_assumption31, interface_faces,
                           surface, tag_trace, trace_from_fine)


def test_single_face_component(cube4):
    t = tag_trace(cube4, ["z=0"])
    assert t.J == 1 and t.lipschitz


def test_two_disjoint_faces(cube4):
    t = tag_trace(cube4, ["z=0", "z=1"])
    assert t.J == 2


def test_pyramid_isolated_vertex(pyramid4):
    t = tag_trace(pyramid4, ["lat:x-", "lat:x+"])
    assert t.J == 1
    assert not t.lipschitz
    assert t.isolated_vertex_union


def test_adjacent_faces_are_lipschitz(cube4):
    t = tag_trace(cube4, ["z=0", "y=0"])
    assert t.J == 1 and t.lipschitz


def test_assumption31_cube_face(cube4):
    rep = check_assumption31(cube4, tag_trace(cube4, ["z=0"]))
    assert rep.satisfiable and rep.extended_domain_convex


def test_assumption31_pyramid_opposite(pyramid4):
    rep = check_assumption31(pyramid4, tag_trace(pyramid4, ["lat:x-", "lat:x+"]))
    assert not rep.satisfiable


def test_assumption31_l_concave(lshape4):
    t = tag_trace(lshape4, ["concave"])
    assert t.contains_concave
    rep = check_assumption31(lshape4, t)
    assert rep.satisfiable and rep.extended_domain_convex
    rep2 = check_assumption31(lshape4, tag_trace(lshape4, ["x=0"]))
    assert rep2.satisfiable and not rep2.extended_domain_convex


def test_concave_classification(lshape4):
    surf = surface(lshape4)
    concave = sorted(f.name for f in surf.faces if f.concave)
    assert concave == ["x=1", "y=1"]


def test_unknown_entity_rejected(cube4):
    with pytest.raises(TraceError):
        tag_trace(cube4, ["z=7"])
    with pytest.raises(TraceError):
        tag_trace(cube4, ["e:x=9,y=9"])


def test_fine_sets_closed_and_idempotent(cube4):
    t = tag_trace(cube4, ["z=0"])
    # closure: every fine edge of a tagged face has both endpoints tagged
    for e in np.nonzero(t.edge_mask)[0]:
        assert t.node_mask[cube4.edges[e]].all()
    t2 = tag_trace(cube4, ["z=0"])
    assert np.array_equal(t.node_mask, t2.node_mask)
    assert np.array_equal(t.edge_mask, t2.edge_mask)


def test_trace_from_fine_reconstructs(cube4):
    t = tag_trace(cube4, ["z=0", "e:x=1,y=1"])
    r = trace_from_fine(cube4, t.node_mask, t.edge_mask)
    assert np.array_equal(r.node_mask, t.node_mask)
    assert np.array_equal(r.edge_mask, t.edge_mask)
    assert {f.name for f in r.coarse_faces} == {"z=0"}
    assert {e.name for e in r.coarse_edges} == {"e:x=1,y=1"}


def test_interfaces_of_l(lshape4):
    ifs = interface_faces(lshape4)
    assert [i.blocks for i in ifs] == [(0, 1), (0, 2)]
    for i in ifs:
        # a full unit face: (1/h+1)^2 nodes
        assert len(i.fine_nodes) == 25


def test_coarse_edges_cube(cube4):
    surf = surface(cube4)
    assert len(surf.faces) == 6
    assert len(surf.edges) == 12
    assert len(surf.vertices) == 8


def test_group_aliases(cube4):
    t = tag_trace(cube4, ["boundary"])
    assert len(t.coarse_faces) == 6
    assert t.node_mask.sum() == cube4.boundary_node_mask().sum()
