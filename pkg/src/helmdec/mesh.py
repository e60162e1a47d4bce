"""Tetrahedral meshes of the catalog block complexes.

Bricks are meshed by the 6-tet Kuhn subdivision of each lattice cell, the
pyramid by its canonical 4-tet split refined red (octasection).  All vertex
coordinates are kept as integers on a dyadic lattice (`coords_int / denom`),
so node identification across blocks and refinement levels is exact.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import permutations

import numpy as np

from .geometry import (BlockComplex, Brick, GeometryError, GeometryInfo,
                       Pyramid, catalog_info)

__all__ = ["TetMesh", "build_complex", "refine", "write_mesh", "read_mesh"]

# local vertex pairs of a tet, in lexicographic order
TET_EDGES = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
TET_FACES = [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)]


def _signed_volumes(verts: np.ndarray, tets: np.ndarray) -> np.ndarray:
    a = verts[tets[:, 1]] - verts[tets[:, 0]]
    b = verts[tets[:, 2]] - verts[tets[:, 0]]
    c = verts[tets[:, 3]] - verts[tets[:, 0]]
    return np.einsum("ij,ij->i", a, np.cross(b, c))


def _canonical_tets(verts_int: np.ndarray, tets: np.ndarray) -> np.ndarray:
    """Sort vertex ids ascending, then swap the last two where needed so the
    signed volume is positive (exact integer arithmetic)."""
    t = np.sort(tets, axis=1)
    vol = _signed_volumes(verts_int, t)
    if np.any(vol == 0):
        raise ValueError("degenerate tet")
    flip = vol < 0
    t[flip, 2], t[flip, 3] = t[flip, 3].copy(), t[flip, 2].copy()
    return t


def _pack_pairs(pairs: np.ndarray, nv: int) -> np.ndarray:
    return pairs[:, 0].astype(np.int64) * nv + pairs[:, 1]


def _pack_triples(tri: np.ndarray, nv: int) -> np.ndarray:
    return (tri[:, 0].astype(np.int64) * nv + tri[:, 1]) * nv + tri[:, 2]


@dataclass
class TetMesh:
    """Conforming tetrahedral mesh with full entity enumeration.

    vertices are `verts_int / denom` in block units; `h` is the dyadic grid
    spacing 1/2^level (`max_edge` is the realized max edge length).  Edges
    are globally oriented low id -> high id.
    """

    name: str
    verts_int: np.ndarray  # (nv,3) int64 lattice coords
    denom: int             # power of two: coords = verts_int/denom
    tets: np.ndarray       # (nt,4) canonical order, positive volume
    block_of_tet: np.ndarray
    level: int
    edges: np.ndarray = field(init=False)   # (ne,2) v0<v1, lexsorted
    faces: np.ndarray = field(init=False)   # (nf,3) sorted triples, lexsorted
    tet_edges: np.ndarray = field(init=False)      # (nt,6) edge ids
    tet_edge_sign: np.ndarray = field(init=False)  # (nt,6) +-1
    tet_faces: np.ndarray = field(init=False)      # (nt,4) face ids
    face_tets: np.ndarray = field(init=False)      # (nf,2) tet ids, -1 pad

    def __post_init__(self):
        self.tets = _canonical_tets(self.verts_int, np.asarray(self.tets))
        nv = self.nv
        # edges
        pair_idx = np.array(TET_EDGES)
        raw = self.tets[:, pair_idx]                       # (nt,6,2)
        lo = raw.min(axis=2)
        hi = raw.max(axis=2)
        keys = (lo.astype(np.int64) * nv + hi).ravel()
        ekeys, inv = np.unique(keys, return_inverse=True)
        self.edges = np.column_stack([ekeys // nv, ekeys % nv]).astype(np.int64)
        self.tet_edges = inv.reshape(-1, 6)
        self.tet_edge_sign = np.where(raw[:, :, 0] < raw[:, :, 1], 1, -1).astype(np.int8)
        # faces
        tri_idx = np.array(TET_FACES)
        rawf = np.sort(self.tets[:, tri_idx], axis=2)       # (nt,4,3) sorted
        fkeys = _pack_triples(rawf.reshape(-1, 3), nv)
        ufk, finv, counts = np.unique(fkeys, return_inverse=True, return_counts=True)
        f2 = ufk % nv
        f1 = (ufk // nv) % nv
        f0 = ufk // (nv * nv)
        self.faces = np.column_stack([f0, f1, f2]).astype(np.int64)
        self.tet_faces = finv.reshape(-1, 4)
        if counts.max(initial=0) > 2:
            raise ValueError("non-conforming mesh: face shared by >2 tets")
        ft = np.full((len(ufk), 2), -1, dtype=np.int64)
        order = np.argsort(finv, kind="stable")
        tid = order // 4
        pos = np.zeros(len(ufk), dtype=np.int64)
        for k in range(len(order)):
            f = finv[order[k]]
            ft[f, pos[f]] = tid[k]
            pos[f] += 1
        self.face_tets = ft
        for arr in (self.verts_int, self.tets, self.edges, self.faces,
                    self.tet_edges, self.tet_edge_sign, self.tet_faces,
                    self.face_tets, self.block_of_tet):
            arr.setflags(write=False)
        self._cache = {}

    # -- basic counts ----------------------------------------------------
    @property
    def nv(self) -> int:
        return len(self.verts_int)

    @property
    def ne(self) -> int:
        return len(self.edges)

    @property
    def nf(self) -> int:
        return len(self.faces)

    @property
    def nt(self) -> int:
        return len(self.tets)

    @property
    def h(self) -> float:
        return 1.0 / self.denom

    @property
    def verts(self) -> np.ndarray:
        """Float coordinates in block units (exact dyadic values)."""
        v = self._cache.get("verts")
        if v is None:
            v = self.verts_int / float(self.denom)
            v.setflags(write=False)
            self._cache["verts"] = v
        return v

    def edge_vectors(self) -> np.ndarray:
        v = self._cache.get("edge_vectors")
        if v is None:
            v = self.verts[self.edges[:, 1]] - self.verts[self.edges[:, 0]]
            v.setflags(write=False)
            self._cache["edge_vectors"] = v
        return v

    def edge_lengths(self) -> np.ndarray:
        v = self._cache.get("edge_lengths")
        if v is None:
            v = np.linalg.norm(self.edge_vectors(), axis=1)
            v.setflags(write=False)
            self._cache["edge_lengths"] = v
        return v

    @property
    def max_edge(self) -> float:
        return float(self.edge_lengths().max())

    def quasi_uniformity_ratio(self) -> float:
        ln = self.edge_lengths()
        return float(ln.max() / ln.min())

    def euler_characteristic(self) -> int:
        return self.nv - self.ne + self.nf - self.nt

    # -- adjacency maps --------------------------------------------------
    def boundary_face_mask(self) -> np.ndarray:
        m = self._cache.get("bface")
        if m is None:
            m = self.face_tets[:, 1] < 0
            m.setflags(write=False)
            self._cache["bface"] = m
        return m

    def boundary_node_mask(self) -> np.ndarray:
        m = self._cache.get("bnode")
        if m is None:
            m = np.zeros(self.nv, dtype=bool)
            m[self.faces[self.boundary_face_mask()].ravel()] = True
            m.setflags(write=False)
            self._cache["bnode"] = m
        return m

    def boundary_edge_mask(self) -> np.ndarray:
        m = self._cache.get("bedge")
        if m is None:
            bf = self.faces[self.boundary_face_mask()]
            pairs = np.sort(bf[:, [[0, 1], [0, 2], [1, 2]]].reshape(-1, 2), axis=1)
            keys = _pack_pairs(pairs, self.nv)
            ids = self.edge_ids(keys)
            m = np.zeros(self.ne, dtype=bool)
            m[ids] = True
            m.setflags(write=False)
            self._cache["bedge"] = m
        return m

    def edge_ids(self, packed_keys: np.ndarray) -> np.ndarray:
        """Edge ids for packed (lo*nv+hi) vertex-pair keys."""
        ekeys = _pack_pairs(self.edges, self.nv)
        idx = np.searchsorted(ekeys, packed_keys)
        if np.any(ekeys[idx] != packed_keys):
            raise KeyError("unknown edge")
        return idx

    def edge_id_map(self):
        """dict-free lookup helper: returns the sorted packed key array."""
        return _pack_pairs(self.edges, self.nv)

    def vertex_edges(self):
        """CSR-style vertex -> incident edge ids."""
        c = self._cache.get("vertex_edges")
        if c is None:
            ends = self.edges.ravel()
            eids = np.repeat(np.arange(self.ne), 2)
            order = np.argsort(ends, kind="stable")
            counts = np.bincount(ends, minlength=self.nv)
            ptr = np.concatenate([[0], np.cumsum(counts)])
            c = (ptr, eids[order])
            self._cache["vertex_edges"] = c
        return c

    def edge_tets(self):
        """CSR-style edge -> incident tet ids."""
        c = self._cache.get("edge_tets")
        if c is None:
            eids = self.tet_edges.ravel()
            tids = np.repeat(np.arange(self.nt), 6)
            order = np.argsort(eids, kind="stable")
            counts = np.bincount(eids, minlength=self.ne)
            ptr = np.concatenate([[0], np.cumsum(counts)])
            c = (ptr, tids[order])
            self._cache["edge_tets"] = c
        return c

    def node_index(self) -> dict:
        idx = self._cache.get("node_index")
        if idx is None:
            idx = {tuple(p): i for i, p in enumerate(self.verts_int)}
            self._cache["node_index"] = idx
        return idx


# --------------------------------------------------------------------------
# meshing of blocks
# --------------------------------------------------------------------------

def _kuhn_pattern() -> np.ndarray:
    """(6,4,3) corner offsets of the Kuhn subdivision of the unit cell."""
    pats = []
    for perm in sorted(permutations(range(3))):
        p = np.zeros((4, 3), dtype=np.int64)
        for k, axis in enumerate(perm):
            p[k + 1] = p[k]
            p[k + 1, axis] += 1
        pats.append(p)
    return np.array(pats)


_KUHN = _kuhn_pattern()


def _mesh_brick(b: Brick, n: int) -> np.ndarray:
    """All tets of the Kuhn mesh of brick b at n cells per block unit,
    as (nt,4,3) integer corner coordinates on the n-lattice."""
    lo = np.array(b.lo, dtype=np.int64) * n
    hi = np.array(b.hi, dtype=np.int64) * n
    axes = [np.arange(lo[d], hi[d]) for d in range(3)]
    ox, oy, oz = np.meshgrid(*axes, indexing="ij")
    origins = np.column_stack([ox.ravel(), oy.ravel(), oz.ravel()])  # (nc,3)
    # (nc,6,4,3)
    tets = origins[:, None, None, :] + _KUHN[None, :, :, :]
    return tets.reshape(-1, 4, 3)


def _mesh_pyramid(p: Pyramid, level: int) -> np.ndarray:
    """Canonical 4-tet split red-refined `level` times; (nt,4,3) coords on
    the 2^level lattice."""
    apex = np.array(p.apex, dtype=np.int64)
    bc = p.base_center()
    corners = p.base_corners()
    verts = [apex, bc] + [c for c in corners]
    tets = np.array([[0, 1, 2 + k, 2 + (k + 1) % 4] for k in range(4)])
    coords = np.array(verts, dtype=np.int64)
    for _ in range(level):
        coords, tets = _red_refine_arrays(coords, tets)
    return coords[tets]


def _octahedron_ring(diag: tuple, others: list) -> list:
    """Order the four non-diagonal midpoints so consecutive ones share a
    parent vertex (midpoints are frozensets of parent indices)."""
    ring = [others[0]]
    rest = others[1:]
    while rest:
        cur = ring[-1]
        for k, cand in enumerate(rest):
            if cur & cand:
                ring.append(cand)
                del rest[k]
                break
        else:  # pragma: no cover - cannot happen for an octahedron
            raise RuntimeError("broken octahedron ring")
    return ring


_MIDS = [frozenset(p) for p in TET_EDGES]
_DIAG_PRIORITY = [
    (frozenset((0, 2)), frozenset((1, 3))),
    (frozenset((0, 3)), frozenset((1, 2))),
    (frozenset((0, 1)), frozenset((2, 3))),
]


def _red_refine_arrays(verts_int: np.ndarray, tets: np.ndarray):
    """Red (octasection) refinement; returns coords on the doubled lattice.

    The interior diagonal is the shortest one (exact integer comparison),
    ties broken by a fixed priority that reproduces the Kuhn subdivision.
    """
    nv = len(verts_int)
    coords = verts_int.astype(np.int64) * 2
    pair_idx = np.array(TET_EDGES)
    raw = tets[:, pair_idx]
    lo = raw.min(axis=2)
    hi = raw.max(axis=2)
    keys = (lo.astype(np.int64) * nv + hi).ravel()
    ukeys, inv = np.unique(keys, return_inverse=True)
    mid_ids = nv + inv.reshape(-1, 6)  # (nt,6)
    mid_coords = coords[ukeys // nv] + coords[ukeys % nv]
    mid_coords //= 2
    new_coords = np.vstack([coords, mid_coords])

    # corner children (vectorized)
    corner_children = np.empty((len(tets), 4, 4), dtype=np.int64)
    for c in range(4):
        incident = [k for k, pr in enumerate(TET_EDGES) if c in pr]
        corner_children[:, c, 0] = tets[:, c]
        for j, k in enumerate(incident):
            corner_children[:, c, 1 + j] = mid_ids[:, k]

    # octahedron children: diagonal chosen per tet by exact squared length
    diag_pairs = [tuple(sorted((_MIDS.index(a), _MIDS.index(b)))) for a, b in _DIAG_PRIORITY]
    dvec = np.empty((len(tets), 3), dtype=np.int64)
    dlen = np.empty((len(tets), 3), dtype=np.int64)
    for j, (ka, kb) in enumerate(diag_pairs):
        d = new_coords[mid_ids[:, ka]] - new_coords[mid_ids[:, kb]]
        dlen[:, j] = np.einsum("ij,ij->i", d, d)
    choice = np.argmin(dlen, axis=1)  # argmin takes the first minimum: priority order

    oct_children = np.empty((len(tets), 4, 4), dtype=np.int64)
    for j, (ka, kb) in enumerate(diag_pairs):
        sel = choice == j
        if not np.any(sel):
            continue
        a, b = _DIAG_PRIORITY[j]
        ring_sets = _octahedron_ring(a, [m for m in _MIDS if m not in (a, b)])
        ring = [_MIDS.index(m) for m in ring_sets]
        for r in range(4):
            oct_children[sel, r, 0] = mid_ids[sel, _MIDS.index(a)]
            oct_children[sel, r, 1] = mid_ids[sel, _MIDS.index(b)]
            oct_children[sel, r, 2] = mid_ids[sel, ring[r]]
            oct_children[sel, r, 3] = mid_ids[sel, ring[(r + 1) % 4]]

    children = np.concatenate([corner_children, oct_children], axis=1).reshape(-1, 4)
    return new_coords, children


def _assemble_mesh(name: str, tet_coords: list[np.ndarray], labels: list[int],
                   denom: int, level: int) -> TetMesh:
    """Merge per-block (nt,4,3) coord tets, identifying nodes exactly."""
    allc = np.concatenate([tc.reshape(-1, 3) for tc in tet_coords])
    uverts, inv = np.unique(allc, axis=0, return_inverse=True)
    tets = inv.reshape(-1, 4)
    block = np.concatenate(
        [np.full(len(tc), lab, dtype=np.int64) for tc, lab in zip(tet_coords, labels)]
    )
    return TetMesh(name, uverts, denom, tets, block, level)


def build_complex(name: str, h: float | Fraction) -> TetMesh:
    """Mesh a catalog geometry at dyadic grid spacing h = 1/2^k.

    Bricks get the Kuhn subdivision of each h-cell; the pyramid its
    canonical 4-tet split refined k times.  Conforming across blocks by
    exact lattice-node identification.
    """
    info = catalog_info(name)
    frac = Fraction(h).limit_denominator(1 << 40) if not isinstance(h, Fraction) else h
    if frac != h or frac.numerator != 1 or frac.denominator & (frac.denominator - 1):
        raise GeometryError(f"h must be 1/2^k, got {h}")
    denom = frac.denominator
    level = denom.bit_length() - 1
    tet_coords = []
    labels = []
    for bid, blk in enumerate(info.complex.blocks):
        if isinstance(blk, Brick):
            tet_coords.append(_mesh_brick(blk, denom))
        else:
            tet_coords.append(_mesh_pyramid(blk, level))
        labels.append(bid)
    return _assemble_mesh(name, tet_coords, labels, denom, level)


def refine(mesh: TetMesh) -> TetMesh:
    """Uniform red refinement halving h; block labels inherited."""
    coords, children = _red_refine_arrays(mesh.verts_int, mesh.tets)
    block = np.repeat(mesh.block_of_tet, 8)
    return TetMesh(mesh.name, coords, mesh.denom * 2, children, block, mesh.level + 1)


# --------------------------------------------------------------------------
# text export / import
# --------------------------------------------------------------------------

def write_mesh(mesh: TetMesh, stream, trace_tags: list[str] | None = None) -> None:
    """Line-based text format; coordinates are dyadic and printed exactly
    (shortest round-tripping decimal of the exact binary value)."""
    w = stream.write
    w(f"helmdec-mesh 1 {mesh.name} level={mesh.level} denom={mesh.denom}\n")
    w(f"counts {mesh.nv} {mesh.nt} {mesh.ne} {mesh.nf} h={mesh.h!r}\n")
    verts = mesh.verts
    for i in range(mesh.nv):
        w(f"v {i} {float(verts[i,0])!r} {float(verts[i,1])!r} {float(verts[i,2])!r}\n")
    for i in range(mesh.nt):
        t = mesh.tets[i]
        w(f"t {i} {t[0]} {t[1]} {t[2]} {t[3]} {mesh.block_of_tet[i]}\n")
    for tag in trace_tags or []:
        w(f"g {tag}\n")


def read_mesh(stream) -> tuple[TetMesh, list[str]]:
    header = stream.readline().split()
    if not header or header[0] != "helmdec-mesh":
        raise ValueError("not a helmdec mesh file")
    name = header[2]
    level = int(header[3].split("=")[1])
    denom = int(header[4].split("=")[1])
    counts = stream.readline().split()
    nv, nt = int(counts[1]), int(counts[2])
    verts = np.empty((nv, 3), dtype=np.int64)
    tets = np.empty((nt, 4), dtype=np.int64)
    block = np.empty(nt, dtype=np.int64)
    tags = []
    for line in stream:
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            i = int(parts[1])
            for d in range(3):
                x = float(parts[2 + d]) * denom
                xi = int(round(x))
                if xi != x:
                    raise ValueError(f"non-dyadic coordinate in vertex {i}")
                verts[i, d] = xi
        elif parts[0] == "t":
            i = int(parts[1])
            tets[i] = [int(p) for p in parts[2:6]]
            block[i] = int(parts[6])
        elif parts[0] == "g":
            tags.append(line[2:].strip())
    return TetMesh(name, verts, denom, tets, block, level), tags


def mesh_to_text(mesh: TetMesh, trace_tags: list[str] | None = None) -> str:
    buf = io.StringIO()
    write_mesh(mesh, buf, trace_tags)
    return buf.getvalue()


# --------------------------------------------------------------------------
# submeshes
# --------------------------------------------------------------------------

@dataclass
class Submesh:
    """A TetMesh over a tet subset plus entity maps back to the parent."""

    mesh: TetMesh
    parent: TetMesh
    vert_map: np.ndarray  # sub vertex id -> parent vertex id
    edge_map: np.ndarray  # sub edge id -> parent edge id
    tet_map: np.ndarray   # sub tet id -> parent tet id

    def restrict_nodal(self, values: np.ndarray) -> np.ndarray:
        return values[self.vert_map].copy()

    def restrict_edge(self, values: np.ndarray) -> np.ndarray:
        return values[self.edge_map].copy()

    def extend_nodal(self, values: np.ndarray, out=None) -> np.ndarray:
        shape = (self.parent.nv,) + values.shape[1:]
        res = np.zeros(shape) if out is None else out
        res[self.vert_map] = values
        return res

    def extend_edge(self, values: np.ndarray, out=None) -> np.ndarray:
        res = np.zeros(self.parent.ne) if out is None else out
        res[self.edge_map] = values
        return res

    def node_mask(self) -> np.ndarray:
        m = np.zeros(self.parent.nv, dtype=bool)
        m[self.vert_map] = True
        return m

    def edge_mask(self) -> np.ndarray:
        m = np.zeros(self.parent.ne, dtype=bool)
        m[self.edge_map] = True
        return m


def extract_tets(mesh: TetMesh, tet_mask: np.ndarray, name: str) -> Submesh:
    """Submesh over the masked tets; vertex order inherited from the parent
    so fields map back deterministically."""
    tids = np.nonzero(tet_mask)[0]
    if len(tids) == 0:
        raise ValueError("empty submesh")
    tets = mesh.tets[tids]
    vmap = np.unique(tets.ravel())
    renum = np.full(mesh.nv, -1, dtype=np.int64)
    renum[vmap] = np.arange(len(vmap))
    sub = TetMesh(
        name,
        mesh.verts_int[vmap],
        mesh.denom,
        renum[tets],
        mesh.block_of_tet[tids].copy(),
        mesh.level,
    )
    # sub edge -> parent edge via parent vertex pairs
    pedges = vmap[sub.edges]
    keys = _pack_pairs(np.sort(pedges, axis=1), mesh.nv)
    emap = mesh.edge_ids(keys)
    return Submesh(sub, mesh, vmap, emap, tids)


def extract_block(mesh: TetMesh, block: int) -> Submesh:
    key = ("block_submesh", block)
    sub = mesh._cache.get(key)
    if sub is None:
        sub = extract_tets(mesh, mesh.block_of_tet == block, f"{mesh.name}[{block}]")
        try:
            blk = catalog_info(mesh.name).complex.blocks[block]
            sub.mesh._cache["geometry_info"] = GeometryInfo(
                BlockComplex(sub.mesh.name, (blk,), ()), convex=True
            )
        except GeometryError:
            pass
        mesh._cache[key] = sub
    return sub
