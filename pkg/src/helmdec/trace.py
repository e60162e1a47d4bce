"""Coarse boundary entities and trace sets.

The complex boundary is decomposed into complete coarse faces (maximal
connected coplanar unions of boundary triangles with a common outward
normal), coarse edges (maximal collinear crease chains) and coarse
vertices.  All grouping is exact: plane and line keys are integer-reduced
lattice data.  A TraceSet tags a subset of these entities and derives the
fine node/edge/face sets plus the connectivity metadata the decomposition
dispatcher routes on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd

import numpy as np

from .geometry import GeometryInfo, catalog_info
from .mesh import TetMesh, _pack_pairs


def geometry_info(mesh: TetMesh) -> GeometryInfo:
    """Catalog entry of a mesh, or the synthetic entry attached to a
    submesh (single convex block, no junctions)."""
    info = mesh._cache.get("geometry_info")
    if info is not None:
        return info
    return catalog_info(mesh.name)

__all__ = [
    "CoarseFace",
    "CoarseEdge",
    "Surface",
    "surface",
    "TraceSet",
    "tag_trace",
    "check_assumption31",
    "TraceError",
]


class TraceError(ValueError):
    """Entity name not on the boundary / invalid trace spec."""


def _reduce_vec(v):
    g = gcd(gcd(abs(int(v[0])), abs(int(v[1]))), abs(int(v[2])))
    return tuple(int(x) // g for x in v) if g else tuple(int(x) for x in v)


def _canon_sign(v):
    for x in v:
        if x != 0:
            return v if x > 0 else tuple(-y for y in v)
    return v


@dataclass
class CoarseFace:
    id: int
    name: str
    plane: tuple          # (normal, offset) outward-oriented, lattice units
    fine_faces: np.ndarray
    fine_edges: np.ndarray
    fine_nodes: np.ndarray
    boundary_edges: np.ndarray  # fine edges of the patch boundary curve
    concave: bool
    outward_sign: np.ndarray    # +-1 per fine face vs canonical face normal


@dataclass
class CoarseEdge:
    id: int
    name: str
    fine_edges: np.ndarray  # ordered along the line
    fine_nodes: np.ndarray  # ordered along the line
    endpoints: tuple[int, int]


@dataclass
class Surface:
    """All coarse boundary entities of a meshed complex."""

    mesh: TetMesh
    faces: list[CoarseFace]
    edges: list[CoarseEdge]
    vertices: dict[str, int]       # name -> node id
    aliases: dict[str, str]

    def face_by_name(self, name: str) -> CoarseFace:
        name = self.aliases.get(name, name)
        for f in self.faces:
            if f.name == name:
                return f
        raise TraceError(f"no coarse face {name!r} on {self.mesh.name}; "
                         f"have {[f.name for f in self.faces]}")

    def edge_by_name(self, name: str) -> CoarseEdge:
        name = self.aliases.get(name, name)
        for e in self.edges:
            if e.name == name:
                return e
        raise TraceError(f"no coarse edge {name!r} on {self.mesh.name}; "
                         f"have {[e.name for e in self.edges]}")

    def faces_containing_edge(self, edge: CoarseEdge) -> list[CoarseFace]:
        out = []
        for f in self.faces:
            if np.all(np.isin(edge.fine_edges, f.fine_edges)):
                out.append(f)
        return out

    def faces_containing_node(self, node: int) -> list[CoarseFace]:
        return [f for f in self.faces if node in f.fine_nodes]

    def edges_containing_node(self, node: int) -> list[CoarseEdge]:
        return [e for e in self.edges if node in e.fine_nodes]


def _face_plane_keys(mesh: TetMesh, fids: np.ndarray):
    """Outward-oriented reduced plane key per boundary face id."""
    tri = mesh.faces[fids]
    v = mesh.verts_int
    n = np.cross(v[tri[:, 1]] - v[tri[:, 0]], v[tri[:, 2]] - v[tri[:, 0]])
    # orient away from the owning tet
    own = mesh.face_tets[fids, 0]
    opp = np.empty(len(fids), dtype=np.int64)
    tv = mesh.tets[own]
    for k in range(len(fids)):
        s = set(tv[k]) - set(tri[k])
        opp[k] = s.pop()
    inward = np.einsum("ij,ij->i", n, v[opp] - v[tri[:, 0]])
    n = np.where((inward > 0)[:, None], -n, n)
    keys = []
    for k in range(len(fids)):
        nr = _reduce_vec(n[k])
        c = int(np.dot(nr, v[tri[k, 0]]))
        keys.append((nr, c))
    return keys


def _interior_plane_set(mesh: TetMesh) -> set:
    ifids = np.nonzero(~mesh.boundary_face_mask())[0]
    tri = mesh.faces[ifids]
    v = mesh.verts_int
    n = np.cross(v[tri[:, 1]] - v[tri[:, 0]], v[tri[:, 2]] - v[tri[:, 0]])
    out = set()
    for k in range(len(ifids)):
        nr = _canon_sign(_reduce_vec(n[k]))
        c = int(np.dot(nr, v[tri[k, 0]]))
        out.add((nr, c))
    return out


def _fmt_block_val(num: int, denom: int) -> str:
    return str(Fraction(num, denom))


def _face_name(plane, denom: int) -> str:
    (n, c) = plane
    axes = "xyz"
    for a in range(3):
        unit = tuple(1 if d == a else 0 for d in range(3))
        if n == unit:
            return f"{axes[a]}={_fmt_block_val(c, denom)}"
        if n == tuple(-u for u in unit):
            return f"{axes[a]}={_fmt_block_val(-c, denom)}"
    cb = Fraction(c, denom)
    return f"p:{n[0]},{n[1]},{n[2]}:{cb}"


def _edge_name(mesh: TetMesh, nodes: np.ndarray) -> str:
    v = mesh.verts_int
    d = v[nodes[-1]] - v[nodes[0]]
    dr = _canon_sign(_reduce_vec(d))
    axes = "xyz"
    unit_axes = [a for a in range(3) if dr == tuple(1 if d2 == a else 0 for d2 in range(3))]
    if unit_axes:
        a = unit_axes[0]
        fixed = [b for b in range(3) if b != a]
        vals = [_fmt_block_val(int(v[nodes[0], b]), mesh.denom) for b in fixed]
        return f"e:{axes[fixed[0]]}={vals[0]},{axes[fixed[1]]}={vals[1]}"
    p0 = tuple(Fraction(int(x), mesh.denom) for x in v[nodes[0]])
    p1 = tuple(Fraction(int(x), mesh.denom) for x in v[nodes[-1]])
    if p1 < p0:
        p0, p1 = p1, p0
    fmt = lambda p: "(" + ",".join(str(x) for x in p) + ")"
    return f"e:{fmt(p0)}-{fmt(p1)}"


def _connected_components(items: list[int], adjacency) -> list[list[int]]:
    seen = set()
    comps = []
    for start in items:
        if start in seen:
            continue
        comp = [start]
        seen.add(start)
        stack = [start]
        while stack:
            for nb in adjacency(stack.pop()):
                if nb not in seen:
                    seen.add(nb)
                    comp.append(nb)
                    stack.append(nb)
        comps.append(sorted(comp))
    return comps


def surface(mesh: TetMesh) -> Surface:
    """Coarse entities of the mesh boundary (cached on the mesh)."""
    cached = mesh._cache.get("surface")
    if cached is not None:
        return cached

    bmask = mesh.boundary_face_mask()
    bfids = np.nonzero(bmask)[0]
    keys = _face_plane_keys(mesh, bfids)
    interior_planes = _interior_plane_set(mesh)

    # fine edges of each boundary face
    tri = mesh.faces[bfids]
    pairs = np.sort(tri[:, [[0, 1], [0, 2], [1, 2]]].reshape(-1, 2), axis=1)
    face_edge_ids = mesh.edge_ids(_pack_pairs(pairs, mesh.nv)).reshape(-1, 3)

    # group boundary faces by oriented plane key, then by edge connectivity
    groups: dict[tuple, list[int]] = {}
    for k, key in enumerate(keys):
        groups.setdefault(key, []).append(k)

    faces: list[CoarseFace] = []
    named: dict[str, list[CoarseFace]] = {}
    for key in sorted(groups, key=lambda p: (p[0], p[1])):
        members = groups[key]
        edge_to_faces: dict[int, list[int]] = {}
        for k in members:
            for e in face_edge_ids[k]:
                edge_to_faces.setdefault(int(e), []).append(k)

        def adj(k):
            out = []
            for e in face_edge_ids[k]:
                out.extend(edge_to_faces[int(e)])
            return out

        for comp in _connected_components(members, adj):
            ffaces = bfids[comp]
            fedges = np.unique(face_edge_ids[comp].ravel())
            fnodes = np.unique(mesh.faces[ffaces].ravel())
            counts = np.zeros(mesh.ne, dtype=np.int64)
            np.add.at(counts, face_edge_ids[comp].ravel(), 1)
            bedges = np.nonzero(counts == 1)[0]
            concave = (_canon_sign(key[0]), key[1] if key[0] == _canon_sign(key[0]) else -key[1]) in interior_planes
            cf = CoarseFace(
                id=-1,
                name=_face_name(key, mesh.denom),
                plane=key,
                fine_faces=ffaces,
                fine_edges=fedges,
                fine_nodes=fnodes,
                boundary_edges=bedges,
                concave=concave,
                outward_sign=np.ones(len(ffaces), dtype=np.int8),
            )
            named.setdefault(cf.name, []).append(cf)

    for name in sorted(named):
        group = named[name]
        if len(group) > 1:
            group.sort(key=lambda f: int(f.fine_nodes.min()))
            for i, f in enumerate(group):
                f.name = f"{name}#{i}"
        faces.extend(group)
    faces.sort(key=lambda f: f.name)
    for i, f in enumerate(faces):
        f.id = i

    # outward sign of the canonical fine-face normal per patch face
    v = mesh.verts_int
    for f in faces:
        tri = mesh.faces[f.fine_faces]
        n = np.cross(v[tri[:, 1]] - v[tri[:, 0]], v[tri[:, 2]] - v[tri[:, 0]])
        s = np.sign(n @ np.array(f.plane[0], dtype=np.int64)).astype(np.int8)
        f.outward_sign = s

    # crease fine edges -> coarse edges
    edge_planes: dict[int, set] = {}
    for k, key in enumerate(keys):
        for e in face_edge_ids[k]:
            edge_planes.setdefault(int(e), set()).add(key)
    crease = sorted(e for e, ps in edge_planes.items() if len(ps) >= 2)

    # chains split where the incident boundary planes change: collinear
    # crease edges of different dihedral structure (e.g. two blocks meeting
    # at a junction vertex) stay distinct coarse edges
    line_groups: dict[tuple, list[int]] = {}
    for e in crease:
        a, b = mesh.edges[e]
        d = _canon_sign(_reduce_vec(v[b] - v[a]))
        m = tuple(int(x) for x in np.cross(v[a], np.array(d, dtype=np.int64)))
        planes = tuple(sorted(edge_planes[e]))
        line_groups.setdefault((d, m, planes), []).append(e)

    edges: list[CoarseEdge] = []
    for key in sorted(line_groups):
        members = line_groups[key]
        node_to_edges: dict[int, list[int]] = {}
        for e in members:
            for nd in mesh.edges[e]:
                node_to_edges.setdefault(int(nd), []).append(e)

        def eadj(e):
            out = []
            for nd in mesh.edges[e]:
                out.extend(node_to_edges[int(nd)])
            return out

        d = np.array(key[0], dtype=np.int64)
        for comp in _connected_components(members, eadj):
            nodes = np.unique(mesh.edges[comp].ravel())
            order = np.argsort(v[nodes] @ d, kind="stable")
            nodes = nodes[order]
            fe = np.array(sorted(comp, key=lambda e: int(v[mesh.edges[e]].min(axis=0) @ d)))
            edges.append(
                CoarseEdge(
                    id=-1,
                    name=_edge_name(mesh, nodes),
                    fine_edges=fe,
                    fine_nodes=nodes,
                    endpoints=(int(nodes[0]), int(nodes[-1])),
                )
            )
    by_name: dict[str, list[CoarseEdge]] = {}
    for e in edges:
        by_name.setdefault(e.name, []).append(e)
    for name, group in by_name.items():
        if len(group) > 1:
            group.sort(key=lambda e: int(e.fine_nodes.min()))
            for i, e in enumerate(group):
                e.name = f"{name}#{i}"
    edges.sort(key=lambda e: e.name)
    for i, e in enumerate(edges):
        e.id = i

    # coarse vertices: block corners present on the boundary
    info = catalog_info(mesh.name) if mesh.name in _safe_catalog() else None
    vertices: dict[str, int] = {}
    if info is not None:
        idx = mesh.node_index()
        bn = mesh.boundary_node_mask()
        cset = set()
        for blk in info.complex.blocks:
            for c in blk.corners():
                cset.add(tuple(int(x) * mesh.denom for x in c))
        for c in sorted(cset):
            nid = idx.get(c)
            if nid is not None and bn[nid]:
                bu = tuple(Fraction(x, mesh.denom) for x in c)
                vertices[f"v:({bu[0]},{bu[1]},{bu[2]})"] = nid

    aliases = dict(info.aliases) if info is not None else {}
    surf = Surface(mesh, faces, edges, vertices, aliases)
    mesh._cache["surface"] = surf
    return surf


def _safe_catalog():
    from .geometry import CATALOG

    return CATALOG


# --------------------------------------------------------------------------
# trace sets
# --------------------------------------------------------------------------

@dataclass
class TraceSet:
    """A tagged subset of coarse boundary entities with derived fine sets."""

    mesh: TetMesh
    spec: tuple[str, ...]
    coarse_faces: list[CoarseFace]
    coarse_edges: list[CoarseEdge]
    vertex_nodes: list[int]
    node_mask: np.ndarray
    edge_mask: np.ndarray
    face_mask: np.ndarray
    components: list[dict] = field(default_factory=list)
    contains_concave: bool = False

    @property
    def J(self) -> int:
        return len(self.components)

    @property
    def empty(self) -> bool:
        return not (self.coarse_faces or self.coarse_edges or self.vertex_nodes)

    @property
    def lipschitz(self) -> bool:
        return all(c["lipschitz"] for c in self.components)

    @property
    def isolated_vertex_union(self) -> bool:
        return any(not c["lipschitz"] for c in self.components)

    def has_faces(self) -> bool:
        return bool(self.coarse_faces)

    def has_edges(self) -> bool:
        return bool(self.coarse_edges)


def _fine_closure(mesh: TetMesh, faces, edges, vnodes):
    nmask = np.zeros(mesh.nv, dtype=bool)
    emask = np.zeros(mesh.ne, dtype=bool)
    fmask = np.zeros(mesh.nf, dtype=bool)
    for f in faces:
        fmask[f.fine_faces] = True
        emask[f.fine_edges] = True
        nmask[f.fine_nodes] = True
    for e in edges:
        emask[e.fine_edges] = True
        nmask[e.fine_nodes] = True
    for nd in vnodes:
        nmask[nd] = True
    return nmask, emask, fmask


def trace_from_fine(mesh: TetMesh, node_mask: np.ndarray, edge_mask: np.ndarray) -> TraceSet:
    """Reconstruct a TraceSet from fine masks: tagged coarse faces are those
    fully covered, remaining covered coarse edges are tagged as edges, and
    leftover masked nodes become vertex entries.  Raises if the masks do not
    decompose into whole coarse entities (partial coverage)."""
    surf = surface(mesh)
    faces = [f for f in surf.faces if edge_mask[f.fine_edges].all() and node_mask[f.fine_nodes].all()]
    covered_e = np.zeros(mesh.ne, dtype=bool)
    covered_n = np.zeros(mesh.nv, dtype=bool)
    for f in faces:
        covered_e[f.fine_edges] = True
        covered_n[f.fine_nodes] = True
    edges = []
    for e in surf.edges:
        rest = edge_mask[e.fine_edges] & ~covered_e[e.fine_edges]
        if rest.any():
            if not edge_mask[e.fine_edges].all():
                continue
            edges.append(e)
            covered_e[e.fine_edges] = True
            covered_n[e.fine_nodes] = True
    if np.any(edge_mask & ~covered_e):
        bad = int(np.nonzero(edge_mask & ~covered_e)[0][0])
        raise TraceError(f"fine edge {bad} not covered by whole coarse entities")
    vnodes = sorted(int(n) for n in np.nonzero(node_mask & ~covered_n)[0])
    names = [f.name for f in faces] + [e.name for e in edges] + [f"@node{n}" for n in vnodes]
    return _assemble_trace(mesh, faces, edges, vnodes, tuple(names))


def tag_trace(mesh: TetMesh, spec) -> TraceSet:
    """Resolve coarse entity names into a TraceSet with connectivity
    metadata.  Names: face names / aliases, ``e:...`` edges, ``v:(...)``
    vertices, groups ``boundary`` and ``concave``."""
    surf = surface(mesh)
    if isinstance(spec, str):
        spec = [s.strip() for s in spec.split(";") if s.strip()]
    faces: list[CoarseFace] = []
    edges: list[CoarseEdge] = []
    vnodes: list[int] = []
    for raw in spec:
        name = surf.aliases.get(raw, raw)
        if name == "boundary":
            faces.extend(surf.faces)
        elif name == "concave":
            faces.extend(f for f in surf.faces if f.concave)
        elif name.startswith("e:"):
            edges.append(surf.edge_by_name(name))
        elif name.startswith("v:"):
            if name not in surf.vertices:
                raise TraceError(f"no coarse vertex {name!r} on {mesh.name}")
            vnodes.append(surf.vertices[name])
        else:
            faces.append(surf.face_by_name(name))
    # dedup, keep deterministic order
    faces = sorted({f.id: f for f in faces}.values(), key=lambda f: f.id)
    edges = sorted({e.id: e for e in edges}.values(), key=lambda e: e.id)
    vnodes = sorted(set(vnodes))
    return _assemble_trace(mesh, faces, edges, vnodes, tuple(spec))


def _assemble_trace(mesh, faces, edges, vnodes, spec) -> "TraceSet":
    nmask, emask, fmask = _fine_closure(mesh, faces, edges, vnodes)

    # connected components over tagged coarse entities via shared fine nodes
    ents = [("f", f) for f in faces] + [("e", e) for e in edges] + [("v", n) for n in vnodes]
    nodesets = []
    for kind, ent in ents:
        if kind == "f":
            nodesets.append(set(ent.fine_nodes.tolist()))
        elif kind == "e":
            nodesets.append(set(ent.fine_nodes.tolist()))
        else:
            nodesets.append({ent})

    def adj(i):
        return [j for j in range(len(ents)) if j != i and nodesets[i] & nodesets[j]]

    comps = _connected_components(list(range(len(ents))), adj)
    components = []
    for comp in comps:
        cf = [ents[i][1] for i in comp if ents[i][0] == "f"]
        ce = [ents[i][1] for i in comp if ents[i][0] == "e"]
        cv = [ents[i][1] for i in comp if ents[i][0] == "v"]
        # Lipschitz: the faces of the component are connected through shared
        # coarse-face *edges*; false iff two faces meet only at a vertex.
        lip = True
        if len(cf) > 1:
            esets = [set(f.fine_edges.tolist()) for f in cf]

            def fadj(i):
                return [j for j in range(len(cf)) if j != i and esets[i] & esets[j]]

            sub = _connected_components(list(range(len(cf))), fadj)
            lip = len(sub) == 1
        components.append(
            {
                "faces": cf,
                "edges": ce,
                "vertices": cv,
                "lipschitz": lip,
            }
        )

    surf = surface(mesh)
    concave_all = {f.id for f in surf.faces if f.concave}
    ts = TraceSet(
        mesh=mesh,
        spec=tuple(spec),
        coarse_faces=faces,
        coarse_edges=edges,
        vertex_nodes=vnodes,
        node_mask=nmask,
        edge_mask=emask,
        face_mask=fmask,
        components=components,
        contains_concave=bool(concave_all) and concave_all <= {f.id for f in faces},
    )
    return ts


@dataclass
class InterfaceFace:
    """A coarse face shared by two blocks (not part of the boundary)."""

    blocks: tuple[int, int]
    fine_faces: np.ndarray
    fine_edges: np.ndarray
    fine_nodes: np.ndarray
    boundary_edges: np.ndarray   # fine edges of the interface boundary curve
    boundary_nodes: np.ndarray
    plane: tuple                  # unoriented reduced plane key

    @property
    def name(self) -> str:
        return f"iface:{self.blocks[0]}:{self.blocks[1]}"


def interface_faces(mesh: TetMesh) -> list[InterfaceFace]:
    """Coarse block-interface faces (fine faces whose two tets carry
    different block labels), grouped per block pair."""
    cached = mesh._cache.get("interfaces")
    if cached is not None:
        return cached
    ft = mesh.face_tets
    inner = ft[:, 1] >= 0
    lab = mesh.block_of_tet
    diff = inner & (lab[ft[:, 0]] != lab[np.where(inner, ft[:, 1], 0)])
    fids = np.nonzero(diff)[0]
    groups: dict[tuple, list[int]] = {}
    for f in fids:
        a, b = sorted((int(lab[ft[f, 0]]), int(lab[ft[f, 1]])))
        groups.setdefault((a, b), []).append(int(f))
    out = []
    v = mesh.verts_int
    for pair in sorted(groups):
        ff = np.array(groups[pair])
        tri = mesh.faces[ff]
        pairs = np.sort(tri[:, [[0, 1], [0, 2], [1, 2]]].reshape(-1, 2), axis=1)
        eids = mesh.edge_ids(_pack_pairs(pairs, mesh.nv)).reshape(-1, 3)
        counts = np.zeros(mesh.ne, dtype=np.int64)
        np.add.at(counts, eids.ravel(), 1)
        bedges = np.nonzero(counts == 1)[0]
        n = _canon_sign(_reduce_vec(np.cross(v[tri[0, 1]] - v[tri[0, 0]], v[tri[0, 2]] - v[tri[0, 0]])))
        out.append(
            InterfaceFace(
                blocks=pair,
                fine_faces=ff,
                fine_edges=np.unique(eids.ravel()),
                fine_nodes=np.unique(tri.ravel()),
                boundary_edges=bedges,
                boundary_nodes=np.unique(mesh.edges[bedges].ravel()),
                plane=(n, int(np.dot(n, v[tri[0, 0]]))),
            )
        )
    mesh._cache["interfaces"] = out
    return out


@dataclass
class Assumption31Report:
    satisfiable: bool
    extended_domain_convex: bool
    reason: str = ""


def check_assumption31(mesh: TetMesh, trace: TraceSet) -> Assumption31Report:
    """Decide by catalog lookup whether Lipschitz extension blocks exist for
    every trace component and whether the extended domain can be convex
    (convex G, or the trace covering every concave part)."""
    info = geometry_info(mesh)
    if not info.lipschitz:
        return Assumption31Report(False, False, "domain itself is not Lipschitz")
    if trace.has_edges() or trace.vertex_nodes:
        return Assumption31Report(False, False, "trace contains edges/vertices")
    if not trace.lipschitz:
        return Assumption31Report(False, False, "trace component with isolated vertex")
    convex_b = info.convex or trace.contains_concave
    return Assumption31Report(True, convex_b)
