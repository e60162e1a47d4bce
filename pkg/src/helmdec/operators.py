"""Transfer and extension operators used by the decomposition routes.

Covers: the edge-moment interpolation onto the edge element space, a
Scott-Zhang quasi-interpolation preserving zero traces, face cut-off
functions, discrete harmonic and curl-harmonic extensions, and the
boundary-loop calculus (loop averages, cumulative potentials, constant
extensions, the piecewise-constant loop correction, and the
vertex-junction compatibility functionals).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from . import fem
from .fem import EdgeField, NodalField, NodalVectorField, cached_solver
from .mesh import TetMesh
from .trace import CoarseEdge, CoarseFace, TraceSet

__all__ = [
    "PreconditionError",
    "edge_interpolate_rh",
    "rh_matrix",
    "scott_zhang",
    "face_cutoff",
    "harmonic_extend",
    "curl_harmonic_extend",
    "BoundaryLoop",
    "LoopDecomposition",
    "build_loop",
    "loop_decompose",
    "loop_constant_extension",
    "epsilon_correction",
    "junction_functionals",
]


class PreconditionError(ValueError):
    """An operation's precondition failed; `entity` names the offender."""

    def __init__(self, msg, entity=None):
        super().__init__(msg)
        self.entity = entity


# --------------------------------------------------------------------------
# edge interpolation r_h
# --------------------------------------------------------------------------

def edge_interpolate_rh(w: NodalVectorField) -> EdgeField:
    """Edge moments of a continuous piecewise-linear field (trapezoid of
    the endpoint values; exact for linear integrands).  Exact zeros where
    both endpoint values vanish."""
    mesh = w.mesh
    d = mesh.edge_vectors()
    mid = w.values[mesh.edges[:, 0]] + w.values[mesh.edges[:, 1]]
    return EdgeField(mesh, 0.5 * np.einsum("ed,ed->e", mid, d))


def rh_matrix(mesh: TetMesh) -> sp.csr_matrix:
    """Sparse matrix of edge_interpolate_rh: (ne) x (3*nv)."""
    m = mesh._cache.get("rh_matrix")
    if m is None:
        d = mesh.edge_vectors()
        ne = mesh.ne
        rows = np.repeat(np.arange(ne), 6)
        cols = np.empty((ne, 6), dtype=np.int64)
        vals = np.empty((ne, 6))
        for side in (0, 1):
            for c in range(3):
                cols[:, 3 * side + c] = 3 * mesh.edges[:, side] + c
                vals[:, 3 * side + c] = 0.5 * d[:, c]
        m = sp.csr_matrix((vals.ravel(), (rows, cols.ravel())), shape=(ne, 3 * mesh.nv))
        mesh._cache["rh_matrix"] = m
    return m


# --------------------------------------------------------------------------
# Scott-Zhang quasi-interpolation
# --------------------------------------------------------------------------

_TRI_QP = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
_TRI_QW = np.full(3, 1.0 / 3.0)


def scott_zhang(f, mesh: TetMesh, trace: Optional[TraceSet] = None) -> NodalVectorField:
    """Nodal quasi-interpolation by dual-basis averages over one selection
    entity per node; nodes on the trace average over a fine face inside the
    trace, so zero trace data is preserved exactly.  Reproduces continuous
    piecewise-linear fields.

    `f` is a NodalVectorField (projection: returned unchanged up to exact
    re-imposition of trace zeros) or a callable points (m,3) -> (m,3).
    """
    gamma_nodes = trace.node_mask if trace is not None else np.zeros(mesh.nv, dtype=bool)
    if isinstance(f, NodalVectorField):
        # dual-basis averages of a field that is linear on every selection
        # entity reproduce the nodal values; skip the quadrature and only
        # re-impose the exact trace zeros
        out = f.values.copy()
        out[gamma_nodes] = 0.0
        return NodalVectorField(mesh, out)

    values = np.zeros((mesh.nv, 3))
    verts = mesh.verts
    # selection: lowest trace face for trace nodes, else lowest incident tet
    sel_face = np.full(mesh.nv, -1, dtype=np.int64)
    if trace is not None:
        for fid in np.nonzero(trace.face_mask)[0][::-1]:
            sel_face[mesh.faces[fid]] = fid
    sel_tet = np.full(mesh.nv, -1, dtype=np.int64)
    for t in range(mesh.nt - 1, -1, -1):
        sel_tet[mesh.tets[t]] = t
    for n in range(mesh.nv):
        if gamma_nodes[n] and sel_face[n] >= 0:
            tri = mesh.faces[sel_face[n]]
            loc = int(np.nonzero(tri == n)[0][0])
            pts = _TRI_QP @ verts[tri]
            fv = np.asarray(f(pts))
            # P1 dual basis on a triangle: psi_i = (12 lam_i - 3)/|sigma|
            psi = (12.0 * _TRI_QP[:, loc] - 3.0)
            values[n] = np.einsum("q,qc->c", _TRI_QW * psi, fv)
        else:
            t = sel_tet[n]
            tet = mesh.tets[t]
            loc = int(np.nonzero(tet == n)[0][0])
            pts = fem._QPTS @ verts[tet]
            fv = np.asarray(f(pts))
            psi = 20.0 * fem._QPTS[:, loc] - 4.0
            values[n] = np.einsum("q,qc->c", fem._QW * psi, fv)
    values[gamma_nodes & (sel_face < 0)] = 0.0
    return NodalVectorField(mesh, values)


# --------------------------------------------------------------------------
# face cut-off function
# --------------------------------------------------------------------------

def face_cutoff(mesh: TetMesh, face_nodes: np.ndarray, boundary_nodes: np.ndarray,
                block_nodes: np.ndarray, block_boundary_nodes: np.ndarray,
                layers: int = 2) -> NodalField:
    """Cut-off nodal function for an interface face inside one block:
    1 at the interior face nodes, 0 on the face boundary curve and at every
    other block-boundary node, linear layer decay inside the block.

    `face_nodes` / `boundary_nodes` are the interface's node set and its
    boundary-curve node set; `block_nodes` masks the block, and
    `block_boundary_nodes` its boundary nodes.
    """
    interior = np.setdiff1d(face_nodes, boundary_nodes)
    # graph distance (mesh edges restricted to the block) from interior-F
    dist = np.full(mesh.nv, -1, dtype=np.int64)
    dist[interior] = 0
    frontier = interior
    ptr, eids = mesh.vertex_edges()
    for d in range(1, layers + 1):
        nxt = []
        for n in frontier:
            for e in eids[ptr[n]:ptr[n + 1]]:
                for m in mesh.edges[e]:
                    if block_nodes[m] and dist[m] < 0:
                        dist[m] = d
                        nxt.append(m)
        frontier = np.array(nxt, dtype=np.int64)
        if len(frontier) == 0:
            break
    vals = np.zeros(mesh.nv)
    reached = dist >= 0
    vals[reached] = np.maximum(0.0, 1.0 - dist[reached] / layers)
    # hard zeros on the face boundary and the rest of the block boundary
    vals[boundary_nodes] = 0.0
    mask = block_boundary_nodes.copy()
    mask[face_nodes] = False
    vals[mask] = 0.0
    vals[interior] = 1.0
    return NodalField(mesh, vals)


# --------------------------------------------------------------------------
# harmonic extension
# --------------------------------------------------------------------------

def harmonic_extend(mesh: TetMesh, boundary_values: np.ndarray) -> NodalField:
    """Discrete harmonic extension of Dirichlet data given at all boundary
    nodes of `mesh` (interior entries of `boundary_values` are ignored)."""
    bn = mesh.boundary_node_mask()
    iidx = np.nonzero(~bn)[0]
    out = np.zeros(mesh.nv)
    out[bn] = boundary_values[bn]
    if len(iidx) == 0:
        return NodalField(mesh, out)
    K = fem.assemble(mesh, "Z", "stiffness").mat
    solver = cached_solver(mesh, ("harm", "interior"), lambda: K[iidx][:, iidx])
    rhs = -K[iidx][:, np.nonzero(bn)[0]] @ out[bn]
    out[iidx] = solver.solve(rhs)
    return NodalField(mesh, out)


def harmonic_extend_vector(mesh: TetMesh, boundary_values: np.ndarray) -> NodalVectorField:
    out = np.zeros((mesh.nv, 3))
    for c in range(3):
        out[:, c] = harmonic_extend(mesh, boundary_values[:, c]).values
    return NodalVectorField(mesh, out)


# --------------------------------------------------------------------------
# curl-harmonic extension
# --------------------------------------------------------------------------

def curl_harmonic_extend(mesh: TetMesh, boundary_moments: np.ndarray) -> EdgeField:
    """Among edge fields matching the prescribed moments on all boundary
    edges, minimize the curl energy; the remaining gradient gauge is fixed
    by minimizing the L2 norm over the solution set.  Both stages combine
    into one augmented sparse system

        [ K_ii   (M G)_i ] [v_i]   [-K_ib v_b      ]
        [ (M G)_i^T   0  ] [ q ] = [-(M G)_b^T v_b ]

    with G the gradient map of the interior nodal space (q = 0 at the
    solution; the block is nonsingular on simply connected domains).
    """
    be = mesh.boundary_edge_mask()
    if boundary_moments.shape != (mesh.ne,):
        raise PreconditionError(
            f"boundary data must be a full edge vector (ne={mesh.ne}), got {boundary_moments.shape}"
        )
    ie = np.nonzero(~be)[0]
    bidx = np.nonzero(be)[0]
    out = np.zeros(mesh.ne)
    out[bidx] = boundary_moments[bidx]
    if len(ie) == 0:
        return EdgeField(mesh, out)

    def build():
        K = fem.assemble(mesh, "V", "stiffness").mat
        M = fem.assemble(mesh, "V", "mass").mat
        G = fem.gradient_map(mesh).mat
        bn = mesh.boundary_node_mask()
        inodes = np.nonzero(~bn)[0]
        B = (M @ G[:, inodes]).tocsr()
        Kii = K[ie][:, ie]
        Bi = B[ie]
        sys = sp.bmat([[Kii, Bi], [Bi.T, None]], format="csc")
        mesh._cache[("curlharm", "parts")] = (K, B, ie, bidx, len(inodes))
        return sys

    solver = cached_solver(mesh, ("curlharm",), build)
    K, B, _, _, nint = mesh._cache[("curlharm", "parts")]
    rhs = np.concatenate([
        -(K[ie][:, bidx] @ out[bidx]),
        -(B[bidx].T @ out[bidx]),
    ])
    sol = solver.solve(rhs)
    out[ie] = sol[: len(ie)]
    return EdgeField(mesh, out)


# --------------------------------------------------------------------------
# boundary loops
# --------------------------------------------------------------------------

@dataclass
class BoundaryLoop:
    """Ordered fine-edge cycle along the boundary curve of a coarse face or
    face union, traversed with the surface-induced (Stokes) orientation.

    nodes[k] -> nodes[k+1] is edges[k] (cyclically); signs[k] flips the
    global edge orientation onto the loop direction; t[k] is the arc
    length of nodes[k] from the start (lowest node id).
    """

    mesh: TetMesh
    nodes: np.ndarray
    edges: np.ndarray
    signs: np.ndarray
    lengths: np.ndarray
    t: np.ndarray
    total_length: float
    face_fine_faces: np.ndarray

    @property
    def n(self) -> int:
        return len(self.nodes)

    def node_pos(self, node: int) -> int:
        pos = np.nonzero(self.nodes == node)[0]
        if len(pos) == 0:
            raise PreconditionError(f"node {node} not on loop", entity=node)
        return int(pos[0])

    def edge_positions(self, fine_edges: np.ndarray) -> np.ndarray:
        return np.nonzero(np.isin(self.edges, fine_edges))[0]


def build_loop(mesh: TetMesh, faces: Sequence[CoarseFace]) -> BoundaryLoop:
    """Boundary loop of a coarse face or a face union with one connected
    boundary curve."""
    from .trace import _pack_pairs  # local import keeps module deps one-way

    fset = np.concatenate([f.fine_faces for f in faces])
    tri = mesh.faces[fset]
    pairs = np.sort(tri[:, [[0, 1], [0, 2], [1, 2]]].reshape(-1, 2), axis=1)
    eids = mesh.edge_ids(_pack_pairs(pairs, mesh.nv)).reshape(-1, 3)
    counts = np.zeros(mesh.ne, dtype=np.int64)
    np.add.at(counts, eids.ravel(), 1)
    loop_edges = np.nonzero(counts == 1)[0]
    if len(loop_edges) == 0:
        raise PreconditionError("face union has no boundary curve (it is closed)")

    # chain into a cycle
    nbr: dict[int, list[tuple[int, int]]] = {}
    for e in loop_edges:
        a, b = (int(x) for x in mesh.edges[e])
        nbr.setdefault(a, []).append((b, int(e)))
        nbr.setdefault(b, []).append((a, int(e)))
    if any(len(v) != 2 for v in nbr.values()):
        raise PreconditionError("face-union boundary is not a single simple curve")

    start = min(nbr)
    # surface-induced direction at the start: the first loop edge appears in
    # exactly one patch triangle; traverse it as in that triangle's
    # outward-oriented vertex cycle
    cand = nbr[start]
    owner = {}
    sign_of = {}
    for f in faces:
        for k, fid in enumerate(f.fine_faces):
            owner[int(fid)] = f.outward_sign[k]
    first = None
    for nxt, e in sorted(cand):
        rows = np.nonzero(np.any(np.isin(eids, e), axis=1))[0]
        fid = int(fset[rows[0]])
        a, b, c = (int(x) for x in mesh.faces[fid])
        cyc = [a, b, c] if owner[fid] > 0 else [a, c, b]
        k = cyc.index(start)
        if cyc[(k + 1) % 3] == nxt:
            first = (nxt, e)
            break
    if first is None:
        raise PreconditionError("could not orient boundary loop")

    nodes = [start, first[0]]
    edges = [first[1]]
    while nodes[-1] != start:
        cur, prev_e = nodes[-1], edges[-1]
        (n1, e1), (n2, e2) = nbr[cur]
        nxt, e = (n1, e1) if e1 != prev_e else (n2, e2)
        nodes.append(nxt)
        edges.append(e)
    nodes = np.array(nodes[:-1])
    edges = np.array(edges)
    signs = np.where(mesh.edges[edges, 0] == nodes, 1.0, -1.0)
    lengths = mesh.edge_lengths()[edges]
    t = np.concatenate([[0.0], np.cumsum(lengths[:-1])])
    return BoundaryLoop(
        mesh, nodes, edges, signs, lengths, t, float(lengths.sum()), fset
    )


@dataclass
class LoopDecomposition:
    """Split of loop moments into a potential plus a constant drift:
    lambda_e(v) = (phi(head) - phi(tail)) + C * |e| on the working part of
    the loop.  phi is per loop node (aligned with loop.nodes)."""

    loop: BoundaryLoop
    C: float
    phi: np.ndarray
    c_shift: float
    l0: float

    def phi_at(self, node: int) -> float:
        return float(self.phi[self.loop.node_pos(node)])


def _loop_moments(v: EdgeField, loop: BoundaryLoop) -> np.ndarray:
    return v.values[loop.edges] * loop.signs


def _edge_fine_set(E) -> tuple[np.ndarray, str]:
    """Fine edges and a display name of a coarse edge or edge union."""
    if isinstance(E, CoarseEdge):
        return E.fine_edges, E.name
    fine = np.concatenate([e.fine_edges for e in E])
    return fine, "+".join(e.name for e in E)


def _edge_arc_positions(loop: BoundaryLoop, E) -> np.ndarray:
    fine, name = _edge_fine_set(E)
    pos = loop.edge_positions(fine)
    if len(pos) != len(fine):
        raise PreconditionError(f"edge {name} is not part of the loop", entity=name)
    return pos


def loop_decompose(
    v: EdgeField,
    loop: BoundaryLoop,
    zero_edge: Optional[CoarseEdge] = None,
    zero_mean_edge: Optional[CoarseEdge] = None,
    tol: float = 1e-12,
) -> LoopDecomposition:
    """Loop average C and cumulative potential phi of the tangential
    moments of v along the loop.

    With `zero_edge` (an edge-union where v has zero moments) the average
    is taken over the complement only and phi is extended by exact zeros
    onto the edge, so that the potential is continuous and vanishes there.
    With `zero_mean_edge` phi is shifted so its trapezoid mean over that
    edge vanishes (c_shift is the applied constant).
    """
    lam = _loop_moments(v, loop)
    scale = max(1.0, float(np.abs(v.values).max()))
    if zero_edge is not None and zero_mean_edge is not None:
        raise ValueError("zero_edge and zero_mean_edge are mutually exclusive")

    if zero_edge is not None:
        pos = _edge_arc_positions(loop, zero_edge)
        _, zname = _edge_fine_set(zero_edge)
        bad = np.nonzero(np.abs(lam[pos]) > tol * scale)[0]
        if len(bad):
            raise PreconditionError(
                f"nonzero moment on {zname} (fine edge {loop.edges[pos[bad[0]]]})",
                entity=int(loop.edges[pos[bad[0]]]),
            )
        onzero = np.zeros(loop.n, dtype=bool)
        onzero[pos] = True
        if not _cyclically_contiguous(onzero):
            raise PreconditionError(f"{zname} is not contiguous on the loop")
        l0 = float(loop.lengths[~onzero].sum())
        if l0 == 0.0:
            return LoopDecomposition(loop, 0.0, np.zeros(loop.n), 0.0, 0.0)
        C = float(lam[~onzero].sum() / l0)
        # walk the complement starting right after the zero arc
        order = _cyclic_order_after(onzero)
        phi = np.zeros(loop.n)
        acc = 0.0
        for k in order:
            nxt = (k + 1) % loop.n
            acc += lam[k] - C * loop.lengths[k]
            phi[nxt] = acc
        # exact zeros on the zero arc (closure residual is roundoff)
        zero_nodes = np.zeros(loop.n, dtype=bool)
        for k in np.nonzero(onzero)[0]:
            zero_nodes[k] = True
            zero_nodes[(k + 1) % loop.n] = True
        phi[zero_nodes] = 0.0
        return LoopDecomposition(loop, C, phi, 0.0, l0)

    l0 = loop.total_length
    C = float(lam.sum() / l0)
    phi = np.zeros(loop.n)
    acc = 0.0
    for k in range(loop.n - 1):
        acc += lam[k] - C * loop.lengths[k]
        phi[k + 1] = acc
    c_shift = 0.0
    if zero_mean_edge is not None:
        pos = _edge_arc_positions(loop, zero_mean_edge)
        ln = loop.lengths[pos]
        heads = (pos + 1) % loop.n
        mean = float(np.sum(ln * 0.5 * (phi[pos] + phi[heads])) / ln.sum())
        c_shift = -mean
        phi = phi + c_shift
    return LoopDecomposition(loop, C, phi, c_shift, l0)


def _cyclically_contiguous(mask: np.ndarray) -> bool:
    n = len(mask)
    runs = 0
    for k in range(n):
        if mask[k] and not mask[(k - 1) % n]:
            runs += 1
    return runs <= 1


def _cyclic_order_after(mask: np.ndarray) -> list[int]:
    """Indices of the unmasked positions, walking cyclically starting just
    after the masked arc."""
    n = len(mask)
    starts = [k for k in range(n) if not mask[k] and mask[(k - 1) % n]]
    start = starts[0] if starts else 0
    return [(start + j) % n for j in range(n) if not mask[(start + j) % n]]


# --------------------------------------------------------------------------
# minimum-norm constant extension along a loop
# --------------------------------------------------------------------------

def loop_constant_extension(
    C: float,
    loop: BoundaryLoop,
    pinned_nodes: np.ndarray,
    per_edge_values: Optional[np.ndarray] = None,
    rcond: float = 1e-12,
) -> NodalVectorField:
    """Nodal vector field on the loop nodes whose interpolated moments
    equal `per_edge_values[k] * |e_k|` (default: the constant C) on every
    loop edge with a free endpoint, minimizing the loop L2 norm; pinned
    nodes (the excluded edge and its endpoints, or the junction vertex)
    stay exactly zero.  Minimum-norm tie-break via pseudoinverse with
    singular values below rcond*sigma_max dropped.
    """
    mesh = loop.mesh
    if per_edge_values is None:
        per_edge_values = np.full(loop.n, C)
    pinned = set(int(p) for p in pinned_nodes)
    free = [int(nd) for nd in loop.nodes if nd not in pinned]
    if not free:
        if np.any(np.abs(per_edge_values) > 0):
            raise PreconditionError("all loop nodes pinned with nonzero target")
        return NodalVectorField(mesh, np.zeros((mesh.nv, 3)))
    col = {nd: 3 * k for k, nd in enumerate(free)}
    nfree = 3 * len(free)

    verts = mesh.verts
    rows_A = []
    rhs = []
    M = np.zeros((nfree, nfree))
    for k in range(loop.n):
        a = int(loop.nodes[k])
        b = int(loop.nodes[(k + 1) % loop.n])
        L = loop.lengths[k]
        tgt = per_edge_values[k] * L
        fa, fb = a in col, b in col
        if not fa and not fb:
            if abs(tgt) > 1e-13 * max(1.0, abs(C)):
                raise PreconditionError("pinned loop edge with nonzero target")
            continue
        d = (verts[b] - verts[a])
        row = np.zeros(nfree)
        if fa:
            row[col[a]:col[a] + 3] = 0.5 * d
        if fb:
            row[col[b]:col[b] + 3] = 0.5 * d
        rows_A.append(row)
        rhs.append(tgt)
        # consistent 1D P1 mass on the loop edge (vector-valued)
        for (na, nb, w) in ((a, a, L / 3.0), (b, b, L / 3.0), (a, b, L / 6.0), (b, a, L / 6.0)):
            if na in col and nb in col:
                ia, ib = col[na], col[nb]
                M[ia:ia + 3, ib:ib + 3] += w * np.eye(3)
    A = np.array(rows_A)
    b = np.array(rhs)
    Minv_At = np.linalg.solve(M, A.T)
    S = A @ Minv_At
    lam = np.linalg.pinv(S, rcond=rcond) @ b
    x = Minv_At @ lam
    out = np.zeros((mesh.nv, 3))
    for nd in free:
        out[nd] = x[col[nd]:col[nd] + 3]
    return NodalVectorField(mesh, out)


# --------------------------------------------------------------------------
# piecewise-constant loop correction
# --------------------------------------------------------------------------

def _cyclic_arc_bounds(n: int, pos: np.ndarray) -> tuple[int, int]:
    """(position before, position after) a cyclically contiguous arc."""
    mask = np.zeros(n, dtype=bool)
    mask[pos] = True
    starts = [k for k in pos if not mask[(k - 1) % n]]
    ends = [k for k in pos if not mask[(k + 1) % n]]
    if len(starts) != 1 or len(ends) != 1:
        raise PreconditionError("edge arc is not contiguous on the loop")
    return (starts[0] - 1) % n, (ends[0] + 1) % n


def epsilon_correction(
    loop: BoundaryLoop,
    E: CoarseEdge,
    E1: CoarseEdge,
    E2: CoarseEdge,
    C: float,
) -> np.ndarray:
    """Per-loop-edge piecewise-constant correction: -C on E, |E|/(2|E1|)*C
    on the preceding edge E1, |E|/(2|E2|)*C on the following edge E2, zero
    elsewhere; its loop integral vanishes."""
    posE = _edge_arc_positions(loop, E)
    pos1 = _edge_arc_positions(loop, E1)
    pos2 = _edge_arc_positions(loop, E2)
    lenE = float(loop.lengths[posE].sum())
    len1 = float(loop.lengths[pos1].sum())
    len2 = float(loop.lengths[pos2].sum())
    before, after = _cyclic_arc_bounds(loop.n, posE)
    if before not in pos1 or after not in pos2:
        raise PreconditionError("E1/E2 must be the loop edges adjacent to E")
    eps = np.zeros(loop.n)
    eps[posE] = -C
    eps[pos1] = lenE / (2.0 * len1) * C
    eps[pos2] = lenE / (2.0 * len2) * C
    return eps


# --------------------------------------------------------------------------
# vertex-junction compatibility functionals
# --------------------------------------------------------------------------

def junction_functionals(
    v: EdgeField,
    loops: Sequence[BoundaryLoop],
    vertex_node: int,
    zero_mean_edges: Sequence[Optional[CoarseEdge]],
) -> np.ndarray:
    """Per-block loop potentials evaluated at the junction vertex, returned
    as the s-1 successive differences; their vanishing is the gate for a
    decomposition continuous at the vertex.  A loop given as None stands
    for a block whose trace pins the vertex value to zero."""
    vals = []
    for loop, ze in zip(loops, zero_mean_edges):
        if loop is None:
            vals.append(0.0)
            continue
        dec = loop_decompose(v, loop, zero_mean_edge=ze)
        vals.append(dec.phi_at(vertex_node))
    vals = np.array(vals)
    return vals[1:] - vals[:-1]
