"""Discrete regular Helmholtz decompositions v = grad p + r_h w + R.

Every constructor returns a HelmholtzSplit with an exact DOF identity and
exact zero coefficients of p, w on the trace entities (zeros are placed,
never rounded).  The routes mirror the constructions the stability theory
is built on: a two-Poisson kernel on convex-extension traces, the chained
block construction for non-convex face traces, curl-harmonic face/edge
splittings, the boundary-loop subtraction for edges, and the edge/vertex
junction pipelines with their compatibility gate.  Stability is measured
(norm quotients against the claimed bound), not assumed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

from . import fem, operators as ops
from .fem import EdgeField, NodalField, NodalVectorField, cached_solver
from .geometry import GeometryError
from .mesh import Submesh, TetMesh, build_complex, extract_block, extract_tets
from .operators import PreconditionError
from .trace import (CoarseEdge, CoarseFace, TraceSet, geometry_info,
                    interface_faces, surface, trace_from_fine,
                    check_assumption31)

__all__ = [
    "HelmholtzSplit",
    "CompatibilityViolation",
    "kernel_convex",
    "decompose_face_trace",
    "decompose_loop",
    "decompose_edge",
    "decompose_isolated_vertex_union",
    "decompose_face_plus_edge",
    "decompose_disjoint_edges",
    "decompose",
    "decompose_edge_junction",
    "decompose_vertex_junction",
    "random_admissible_field",
]


@dataclass
class HelmholtzSplit:
    """The triple (p, w, R) with provenance and measured stability data.

    claims: {"rhs1": "curl_semi"|"curl", "rhs2": "l2"|"curl", "log": bool}
    ratios: quotients of the split norms against the claimed right-hand
    sides (empty for v = 0); norms: the raw ingredients; meta: route data
    such as recorded loop averages (C, l0, face flux) and functionals.
    """

    mesh: TetMesh
    p: NodalField
    w: NodalVectorField
    R: EdgeField
    path: str
    claims: dict
    norms: dict = field(default_factory=dict)
    ratios: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def identity_residual(self, v: EdgeField) -> float:
        lhs = v.values
        rhs = (
            fem.gradient_map(self.mesh).mat @ self.p.values
            + ops.edge_interpolate_rh(self.w).values
            + self.R.values
        )
        scale = max(np.abs(lhs).max(), 1.0e-300)
        return float(np.abs(lhs - rhs).max() / scale)


@dataclass
class CompatibilityViolation:
    """Typed refusal of a vertex-junction decomposition: the compatibility
    functionals do not vanish for the given field."""

    geometry: str
    functionals: np.ndarray
    tol: float

    @property
    def message(self) -> str:
        vals = ", ".join(f"{x:.3e}" for x in self.functionals)
        return (
            f"vertex-junction compatibility violated on {self.geometry}: "
            f"functionals [{vals}] exceed tol {self.tol:.3e}"
        )


# --------------------------------------------------------------------------
# shared machinery
# --------------------------------------------------------------------------

def _check_zero_moments(v: EdgeField, edge_mask: np.ndarray, what: str, tol=1e-12):
    if not edge_mask.any():
        return
    scale = max(1.0, float(np.abs(v.values).max()))
    bad = np.nonzero(edge_mask & (np.abs(v.values) > tol * scale))[0]
    if len(bad):
        raise PreconditionError(
            f"nonzero tangential moment on {what}: fine edge {int(bad[0])} "
            f"(|moment| = {abs(v.values[bad[0]]):.3e})",
            entity=int(bad[0]),
        )


def _curl_rhs_matrix(mesh: TetMesh) -> sp.csr_matrix:
    """(3*nt) x (3*nv) map: nodal vector field -> per-tet constant curl."""
    m = mesh._cache.get("curl_rhs")
    if m is None:
        vol, g = fem.tet_geometry(mesh)
        nt = mesh.nt
        rows, cols, vals = [], [], []
        eps = np.zeros((3, 3, 3))
        eps[0, 1, 2] = eps[1, 2, 0] = eps[2, 0, 1] = 1
        eps[0, 2, 1] = eps[1, 0, 2] = eps[2, 1, 0] = -1
        for a in range(4):
            nodes = mesh.tets[:, a]
            for d in range(3):
                for c in range(3):
                    for e in range(3):
                        if eps[d, c, e] == 0:
                            continue
                        rows.append(3 * np.arange(nt) + d)
                        cols.append(3 * nodes + e)
                        vals.append(eps[d, c, e] * g[:, a, c])
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        vals = np.concatenate(vals)
        m = sp.csr_matrix((vals, (rows, cols)), shape=(3 * nt, 3 * mesh.nv))
        mesh._cache["curl_rhs"] = m
    return m


def _kernel_fields(mesh: TetMesh, v: np.ndarray, gamma_nodes: np.ndarray):
    """Two constrained Poisson solves: p from (grad p, grad q) = (v, grad q)
    and w from (grad w, grad phi) = (curl v, curl phi), both over the
    nodal space vanishing at gamma_nodes (mean-zero gauge when empty)."""
    K = fem.assemble(mesh, "Z", "stiffness").mat
    G = fem.gradient_map(mesh).mat
    M = fem.assemble(mesh, "V", "mass").mat
    free = np.nonzero(~gamma_nodes)[0]
    key_mask = gamma_nodes.tobytes()
    gauge = len(free) == mesh.nv

    if gauge:
        mz = fem.assemble(mesh, "Z", "mass").mat @ np.ones(mesh.nv)

        def build():
            return sp.bmat([[K, mz[:, None]], [mz[None, :], None]], format="csc")

        solver = cached_solver(mesh, ("kernel", "gauge"), build)

        def solve(rhs):
            return solver.solve(np.concatenate([rhs, [0.0]]))[:-1]
    else:
        solver = cached_solver(mesh, ("kernel", key_mask), lambda: K[free][:, free])

        def solve(rhs):
            out = np.zeros(mesh.nv)
            out[free] = solver.solve(rhs[free])
            return out

    p = solve(G.T @ (M @ v))

    curl = fem.curl_of_edge_field(EdgeField(mesh, v))
    vol, _ = fem.tet_geometry(mesh)
    rhs_w = _curl_rhs_matrix(mesh).T @ (vol[:, None] * curl).ravel()
    rhs_w = rhs_w.reshape(mesh.nv, 3)
    w = np.zeros((mesh.nv, 3))
    for c in range(3):
        w[:, c] = solve(rhs_w[:, c])
    return p, w


def _finish(mesh, v: EdgeField, p: np.ndarray, w: np.ndarray, path: str,
            claims: dict, meta: Optional[dict] = None) -> HelmholtzSplit:
    pf = NodalField(mesh, p)
    wf = NodalVectorField(mesh, w)
    R = EdgeField(mesh, v.values - fem.gradient_map(mesh).mat @ p - ops.edge_interpolate_rh(wf).values)
    norms = {
        "h": mesh.h,
        "v_l2": fem.norm(v, "L2"),
        "v_curl_semi": fem.norm(v, "curl_semi"),
        "w_h1": fem.norm(wf, "H1"),
        "w_l2": fem.norm(wf, "L2"),
        "p_h1": fem.norm(pf, "H1"),
        "R_l2": fem.norm(R, "L2"),
    }
    norms["v_curl"] = float(np.hypot(norms["v_l2"], norms["v_curl_semi"]))
    ratios = {}
    rhs1 = norms["v_curl_semi"] if claims.get("rhs1") == "curl_semi" else norms["v_curl"]
    rhs2 = norms["v_l2"] if claims.get("rhs2") == "l2" else norms["v_curl"]
    if rhs1 > 0:
        ratios["w_h1"] = norms["w_h1"] / rhs1
        ratios["R_scaled"] = norms["R_l2"] / mesh.h / rhs1
    if rhs2 > 0:
        ratios["w_l2_p_h1"] = (norms["w_l2"] + norms["p_h1"]) / rhs2
    # both quotients of the open question: recorded, never gated
    if norms["v_curl"] > 0:
        ratios["w_h1_vs_curl_full"] = norms["w_h1"] / norms["v_curl"]
    if norms["v_l2"] > 0:
        ratios["w_l2_p_h1_vs_l2"] = (norms["w_l2"] + norms["p_h1"]) / norms["v_l2"]
    return HelmholtzSplit(mesh, pf, wf, R, path, dict(claims), norms, ratios, meta or {})


def _masks_from_trace(trace: Optional[TraceSet], mesh: TetMesh):
    if trace is None:
        return np.zeros(mesh.nv, dtype=bool), np.zeros(mesh.ne, dtype=bool)
    return trace.node_mask, trace.edge_mask


def _face_masks(mesh: TetMesh, faces: Sequence[CoarseFace]):
    nm = np.zeros(mesh.nv, dtype=bool)
    em = np.zeros(mesh.ne, dtype=bool)
    for f in faces:
        nm[f.fine_nodes] = True
        em[f.fine_edges] = True
    return nm, em


def _complement_masks(mesh: TetMesh, faces: Sequence[CoarseFace]):
    """(partial G \\ F) union boundary-of-F masks."""
    nm = mesh.boundary_node_mask().copy()
    em = mesh.boundary_edge_mask().copy()
    fn, fe = _face_masks(mesh, faces)
    nm &= ~fn
    em &= ~fe
    for f in faces:
        em[f.boundary_edges] = True
        nm[mesh.edges[f.boundary_edges].ravel()] = True
    return nm, em


def _loop_flux(mesh: TetMesh, v: EdgeField, faces: Sequence[CoarseFace]) -> float:
    """Outward flux of curl v through a face patch (exact Stokes mate of the
    loop average)."""
    flux = fem.curl_map(mesh).mat @ v.values
    tot = 0.0
    for f in faces:
        tot += float((flux[f.fine_faces] * f.outward_sign).sum())
    return tot


# --------------------------------------------------------------------------
# kernel route (convex / extension traces)
# --------------------------------------------------------------------------

def _kernel_split(mesh, v: EdgeField, nmask, emask, path, claims, trace=None, meta=None):
    p, w = _kernel_fields(mesh, v.values, nmask)
    # mirror the analytic pipeline: quasi-interpolate with exact trace zeros
    if trace is not None:
        w = ops.scott_zhang(NodalVectorField(mesh, w), mesh, trace).values
    w[nmask] = 0.0
    p[nmask] = 0.0
    return _finish(mesh, v, p, w, path, claims, meta)


def kernel_convex(v: EdgeField, trace: Optional[TraceSet]) -> HelmholtzSplit:
    """Computable decomposition kernel: constrained Poisson projection for
    p, constrained vector Poisson solve with curl data for w, exact
    residual R.  Valid whenever every trace component admits a Lipschitz
    extension (decided by catalog lookup)."""
    mesh = v.mesh
    if trace is not None and not trace.empty:
        rep = check_assumption31(mesh, trace)
        if not rep.satisfiable:
            raise PreconditionError(f"kernel route needs extension blocks: {rep.reason}")
        _check_zero_moments(v, trace.edge_mask, "the trace")
        convex_b = rep.extended_domain_convex
        J = trace.J
    else:
        convex_b = geometry_info(mesh).convex
        J = 0
    if J <= 1:
        claims = {"rhs1": "curl_semi", "rhs2": "l2" if convex_b else "curl", "log": False}
    else:
        claims = {"rhs1": "curl", "rhs2": "l2", "log": False}
    nmask, emask = _masks_from_trace(trace, mesh)
    return _kernel_split(mesh, v, nmask, emask, "kernel", claims, trace)


def _catalog_names():
    from .geometry import CATALOG

    return CATALOG


# --------------------------------------------------------------------------
# chained face-trace route on block unions
# --------------------------------------------------------------------------

def _axis_of_plane(plane) -> tuple[int, int]:
    n, c = plane
    for a in range(3):
        if tuple(abs(x) for x in n) == tuple(1 if d == a else 0 for d in range(3)):
            return a, c * (1 if n[a] > 0 else -1)
    raise GeometryError("interface plane is not axis-aligned")


def _layer_extension(mesh: TetMesh, face_nodes: np.ndarray, source: np.ndarray,
                     target_nodes: np.ndarray, plane, layers: int = 2) -> np.ndarray:
    """Extend nodal data given on an axis-aligned interface into a block by
    linear layer decay along the interface normal (exact zeros beyond)."""
    a, c = _axis_of_plane(plane)
    idx = mesh.node_index()
    fset = {}
    for n in face_nodes:
        key = tuple(mesh.verts_int[n])
        fset[key] = n
    out_nodes, out_vals = [], []
    for n in target_nodes:
        p = mesh.verts_int[n]
        layer = abs(int(p[a]) - c)
        if layer == 0 or layer >= layers:
            continue
        key = list(p)
        key[a] = c
        src = fset.get(tuple(key))
        if src is None:
            continue
        out_nodes.append(n)
        out_vals.append(source[src] * (1.0 - layer / layers))
    return np.array(out_nodes, dtype=np.int64), np.array(out_vals)


def decompose_face_trace(v: EdgeField, trace: TraceSet) -> HelmholtzSplit:
    """Face-trace decomposition on a non-convex block union: kernel on the
    first block set, cut-off interface extensions of w, harmonic extension
    of p, zero extension of R, then residual kernels on the second set."""
    mesh = v.mesh
    info = geometry_info(mesh)
    _check_zero_moments(v, trace.edge_mask, "the trace")
    rep = check_assumption31(mesh, trace)
    if rep.satisfiable and rep.extended_domain_convex:
        claims = {"rhs1": "curl_semi", "rhs2": "l2", "log": False}
        return _kernel_split(mesh, v, trace.node_mask, trace.edge_mask,
                             "face-chain/convex-ext", claims, trace)
    if not info.sigma2:
        raise PreconditionError(f"no block split recorded for {mesh.name}")

    ifaces = interface_faces(mesh)
    p_t = np.zeros(mesh.nv)
    w_t = np.zeros((mesh.nv, 3))
    R_t = np.zeros(mesh.ne)
    loops_meta = []

    for b1 in info.sigma1:
        sub = extract_block(mesh, b1)
        v1 = sub.restrict_edge(v.values)
        g1 = trace.node_mask[sub.vert_map]
        p1, w1 = _kernel_fields(sub.mesh, v1, g1)
        p1[g1] = 0.0
        w1[g1] = 0.0
        R1 = v1 - fem.gradient_map(sub.mesh).mat @ p1 - ops.edge_interpolate_rh(
            NodalVectorField(sub.mesh, w1)).values
        # global accumulators: block values on the block, extensions beyond
        sub_nodes = sub.vert_map
        p_t[sub_nodes] += p1
        w_t[sub_nodes] += w1
        R_t[sub.edge_map] += R1

        for iface in ifaces:
            if b1 not in iface.blocks:
                continue
            k = iface.blocks[0] if iface.blocks[1] == b1 else iface.blocks[1]
            subk = extract_block(mesh, k)
            kn_mask = subk.node_mask()
            # cut-off values on the interface: w1 at interior nodes, 0 on
            # the interface boundary curve
            src = np.zeros((mesh.nv, 3))
            src[sub_nodes] = w1
            src[iface.boundary_nodes] = 0.0
            targets = subk.vert_map[~np.isin(subk.vert_map, iface.fine_nodes)]
            nodes, vals = _layer_extension(mesh, iface.fine_nodes, src, targets, iface.plane)
            if len(nodes):
                w_t[nodes] += vals
            # discrete harmonic p-extension into the block
            bdata = np.zeros(subk.mesh.nv)
            on_iface = np.isin(subk.vert_map, iface.fine_nodes)
            gp = np.zeros(mesh.nv)
            gp[sub_nodes] = p1
            bdata[on_iface] = gp[subk.vert_map[on_iface]]
            pk = ops.harmonic_extend(subk.mesh, bdata)
            addmask = ~np.isin(subk.vert_map, sub_nodes)
            sel = addmask & (np.abs(pk.values) > 0)
            p_t[subk.vert_map[sel]] += pk.values[sel]

    v_res = EdgeField(mesh, v.values - fem.gradient_map(mesh).mat @ p_t
                      - ops.edge_interpolate_rh(NodalVectorField(mesh, w_t)).values - R_t)

    for k in info.sigma2:
        subk = extract_block(mesh, k)
        vk = subk.restrict_edge(v_res.values)
        gk = trace.node_mask[subk.vert_map].copy()
        for iface in ifaces:
            if k in iface.blocks and (iface.blocks[0] in info.sigma1 or iface.blocks[1] in info.sigma1):
                gk |= np.isin(subk.vert_map, iface.fine_nodes)
        pk, wk = _kernel_fields(subk.mesh, vk, gk)
        pk[gk] = 0.0
        wk[gk] = 0.0
        Rk = vk - fem.gradient_map(subk.mesh).mat @ pk - ops.edge_interpolate_rh(
            NodalVectorField(subk.mesh, wk)).values
        p_t[subk.vert_map] += pk
        w_t[subk.vert_map] += wk
        R_t[subk.edge_map] += Rk

    p_t[trace.node_mask] = 0.0
    w_t[trace.node_mask] = 0.0
    claims = {"rhs1": "curl_semi", "rhs2": "l2", "log": True}
    return _finish(mesh, v, p_t, w_t, "face-chain", claims, {"loops": loops_meta})


# --------------------------------------------------------------------------
# loop split (zero data on the boundary curve of a face patch)
# --------------------------------------------------------------------------

def decompose_loop(v: EdgeField, faces: Union[CoarseFace, Sequence[CoarseFace]],
                   extra: Optional[TraceSet] = None, path="face-loop-split",
                   claims=None, meta=None) -> HelmholtzSplit:
    """Split off the curl-harmonic part vanishing on a face patch, then run
    the kernel on both halves; p and w vanish on the patch boundary curve
    (and on `extra`, when the route embeds a larger trace)."""
    mesh = v.mesh
    if isinstance(faces, CoarseFace):
        faces = [faces]
    loop = ops.build_loop(mesh, faces)
    _check_zero_moments(v, _mask_from_ids(mesh.ne, loop.edges), "the patch boundary")

    xn, xe = _masks_from_trace(extra, mesh)
    fn, fe = _face_masks(mesh, faces)
    cn, ce = _complement_masks(mesh, faces)

    # curl-harmonic part carrying the data away from the patch
    bdata = np.zeros(mesh.ne)
    bmask = mesh.boundary_edge_mask() & ~fe
    bdata[bmask] = v.values[bmask]
    vFc_part = ops.curl_harmonic_extend(mesh, bdata)   # vanishes on the patch
    vF_part = EdgeField(mesh, v.values - vFc_part.values)  # vanishes off it

    pa, wa = _kernel_fields(mesh, vFc_part.values, fn | xn)
    pb, wb = _kernel_fields(mesh, vF_part.values, cn | xn)
    p = pa + pb
    w = wa + wb
    zero = (fn & cn) | xn
    p[zero] = 0.0
    w[zero] = 0.0
    if claims is None:
        claims = {"rhs1": "curl_semi", "rhs2": "curl", "log": True}
    return _finish(mesh, v, p, w, path, claims, meta)


def _mask_from_ids(n, ids):
    m = np.zeros(n, dtype=bool)
    m[ids] = True
    return m


# --------------------------------------------------------------------------
# edge routes
# --------------------------------------------------------------------------

def _edge_list(E) -> list[CoarseEdge]:
    return [E] if isinstance(E, CoarseEdge) else list(E)


def _find_face_for_edge(mesh, E: list[CoarseEdge], forbidden_nodes=None) -> CoarseFace:
    surf = surface(mesh)
    fine = np.concatenate([e.fine_edges for e in E])
    for f in surf.faces:
        if not np.all(np.isin(fine, f.boundary_edges)):
            continue
        if forbidden_nodes is not None and forbidden_nodes[f.fine_nodes].any():
            continue
        return f
    raise PreconditionError(
        f"no admissible face has {'+'.join(e.name for e in E)} on its boundary"
    )


def _edge_subtraction(v: EdgeField, E: list[CoarseEdge], F: CoarseFace):
    """Boundary-loop subtraction for zero-moment edge data: returns the
    subtracted field, the global potential, the constant extension and the
    loop record (C, l0, flux)."""
    mesh = v.mesh
    loop = ops.build_loop(mesh, [F])
    dec = ops.loop_decompose(v, loop, zero_edge=E if len(E) > 1 else E[0])
    phi = np.zeros(mesh.nv)
    phi[loop.nodes] = dec.phi
    per_edge = np.full(loop.n, dec.C)
    pos = ops._edge_arc_positions(loop, E if len(E) > 1 else E[0])
    per_edge[pos] = 0.0
    pinned = np.unique(np.concatenate([e.fine_nodes for e in E]))
    ctilde = ops.loop_constant_extension(dec.C, loop, pinned, per_edge)
    vhat = EdgeField(mesh, v.values - fem.gradient_map(mesh).mat @ phi
                     - ops.edge_interpolate_rh(ctilde).values)
    record = (dec.C, dec.l0, _loop_flux(mesh, v, [F]))
    return vhat, phi, ctilde, record


def decompose_edge(v: EdgeField, E, face: Optional[CoarseFace] = None) -> HelmholtzSplit:
    """Decomposition with zero data on a coarse edge (or connected edge
    union): loop subtraction on a containing face, then the loop split."""
    mesh = v.mesh
    E = _edge_list(E)
    for e in E:
        _check_zero_moments(v, _mask_from_ids(mesh.ne, e.fine_edges), e.name)
    F = face if face is not None else _find_face_for_edge(mesh, E)
    vhat, phi, ctilde, record = _edge_subtraction(v, E, F)
    claims = {"rhs1": "curl_semi", "rhs2": "curl", "log": True}
    inner = decompose_loop(vhat, F, claims=claims)
    p = phi + inner.p.values
    w = ctilde.values + inner.w.values
    enodes = np.unique(np.concatenate([e.fine_nodes for e in E]))
    p[enodes] = 0.0
    w[enodes] = 0.0
    meta = {"loops": [record]}
    return _finish(mesh, v, p, w, "edge-cut", claims, meta)


def decompose_isolated_vertex_union(v: EdgeField, trace: TraceSet) -> HelmholtzSplit:
    """Trace = two faces meeting at a single vertex: route the edge pair
    through the shared neighbour face, then split against the face-union
    traces so p, w vanish on the whole union."""
    mesh = v.mesh
    surf = surface(mesh)
    comp = next(c for c in trace.components if not c["lipschitz"])
    f1, f2 = comp["faces"][:2]
    _check_zero_moments(v, trace.edge_mask, "the trace")
    shared = np.intersect1d(f1.fine_nodes, f2.fine_nodes)
    if len(shared) != 1:
        raise PreconditionError("faces do not meet at a single vertex")
    apex = int(shared[0])

    def edge_between(fa, fb):
        for e in surf.edges:
            if apex in e.fine_nodes and np.all(np.isin(e.fine_edges, fa.fine_edges)) \
                    and np.all(np.isin(e.fine_edges, fb.fine_edges)):
                return e
        return None

    W = None
    E1 = E2 = None
    for cand in surf.faces:
        if cand.id in (f1.id, f2.id):
            continue
        e1 = edge_between(f1, cand)
        e2 = edge_between(f2, cand)
        if e1 is not None and e2 is not None:
            W, E1, E2 = cand, e1, e2
            break
    if W is None:
        raise PreconditionError("no auxiliary face adjoins both trace faces at the vertex")

    vhat, phi, ctilde, record = _edge_subtraction(v, [E1, E2], W)

    # curl-harmonic split against W: one kernel on (boundary \ W) + dW, one
    # on trace + W
    wn, we = _face_masks(mesh, [W])
    cn, ce = _complement_masks(mesh, [W])
    bdata = np.zeros(mesh.ne)
    bmask = mesh.boundary_edge_mask() & ~we
    bdata[bmask] = vhat.values[bmask]
    part_c = ops.curl_harmonic_extend(mesh, bdata)
    part_w = EdgeField(mesh, vhat.values - part_c.values)
    pa, wa = _kernel_fields(mesh, part_c.values, wn)
    pb, wb = _kernel_fields(mesh, part_w.values, cn | trace.node_mask)
    p = phi + pa + pb
    w = ctilde.values + wa + wb
    p[trace.node_mask] = 0.0
    w[trace.node_mask] = 0.0
    claims = {"rhs1": "curl_semi", "rhs2": "curl", "log": True}
    return _finish(mesh, v, p, w, "corner-pair-faces", claims, {"loops": [record]})


def decompose_face_plus_edge(v: EdgeField, trace: TraceSet, E) -> HelmholtzSplit:
    """Zero data on a face union plus one coarse edge that either touches
    the union at an endpoint or stays clear of it (possibly demanding the
    recorded extension complex)."""
    mesh = v.mesh
    E = _edge_list(E)
    surf = surface(mesh)
    _check_zero_moments(v, trace.edge_mask, "the trace")
    for e in E:
        _check_zero_moments(v, _mask_from_ids(mesh.ne, e.fine_edges), e.name)
    enodes = np.unique(np.concatenate([e.fine_nodes for e in E]))
    touching = trace.node_mask[enodes].any()

    if touching:
        # endpoint case: extend the edge by a trace edge through the contact
        contact = enodes[trace.node_mask[enodes]]
        if len(contact) != 1:
            raise PreconditionError("edge meets the face trace in more than a point")
        eprime = None
        for ce in surf.edges:
            if int(contact[0]) in ce.fine_nodes and trace.edge_mask[ce.fine_edges].all():
                eprime = ce
                break
        if eprime is None:
            raise PreconditionError("no trace edge through the contact vertex")
        union = E + [eprime]
        F = _find_face_for_edge(mesh, union)
        vhat, phi, ctilde, record = _edge_subtraction(v, union, F)
        claims = {"rhs1": "curl_semi", "rhs2": "curl", "log": True}
        split = decompose_loop(vhat, F, extra=trace, claims=claims)
        p = phi + split.p.values
        w = ctilde.values + split.w.values
        zero = trace.node_mask.copy()
        zero[enodes] = True
        p[zero] = 0.0
        w[zero] = 0.0
        return _finish(mesh, v, p, w, "faces-plus-edge/endpoint", claims,
                       {"loops": [record]})

    # disjoint case (i): a containing face avoiding the trace
    try:
        F = _find_face_for_edge(mesh, E, forbidden_nodes=trace.node_mask)
    except PreconditionError:
        F = None
    if F is not None:
        vhat, phi, ctilde, record = _edge_subtraction(v, E, F)
        claims = {"rhs1": "curl", "rhs2": "curl", "log": True}
        split = decompose_loop(vhat, F, extra=trace, claims=claims)
        p = phi + split.p.values
        w = ctilde.values + split.w.values
        zero = trace.node_mask.copy()
        zero[enodes] = True
        p[zero] = 0.0
        w[zero] = 0.0
        return _finish(mesh, v, p, w, "faces-plus-edge/clear-face", claims,
                       {"loops": [record]})

    # disjoint case (ii): run the edge machinery on the recorded extension
    info = geometry_info(mesh)
    if not info.extension_id:
        raise PreconditionError(
            f"trace/edge combination on {mesh.name} needs an extension complex "
            "that is not in the catalog"
        )
    B = _extended_mesh(mesh, info.extension_id)
    gmap = _embed_edges(mesh, B)
    vB = EdgeField(B, np.zeros(B.ne))
    vB.values[gmap] = v.values
    surfB = surface(B)
    EB = [surfB.edge_by_name(e.name) for e in E]
    splitB = decompose_edge(vB, EB if len(EB) > 1 else EB[0])
    nmap = _embed_nodes(mesh, B)
    pG = splitB.p.values[nmap]
    wG = splitB.w.values[nmap]
    # subtract boundary extensions so p, w vanish on the trace as well
    bn = mesh.boundary_node_mask()
    data = np.zeros(mesh.nv)
    data[trace.node_mask] = pG[trace.node_mask]
    p = pG - ops.harmonic_extend(mesh, data).values
    w = wG.copy()
    for c in range(3):
        dc = np.zeros(mesh.nv)
        dc[trace.node_mask] = wG[trace.node_mask, c]
        w[:, c] -= ops.harmonic_extend(mesh, dc).values
    w = ops.scott_zhang(NodalVectorField(mesh, w), mesh, trace).values
    zero = trace.node_mask.copy()
    zero[enodes] = True
    p[zero] = 0.0
    w[zero] = 0.0
    claims = {"rhs1": "curl", "rhs2": "curl", "log": True}
    return _finish(mesh, v, p, w, "faces-plus-edge/extension", claims,
                   {"loops": splitB.meta.get("loops", [])})


def _extended_mesh(mesh: TetMesh, ext_id: str) -> TetMesh:
    key = ("extension", ext_id)
    B = mesh._cache.get(key)
    if B is None:
        B = build_complex(ext_id, mesh.h)
        mesh._cache[key] = B
    return B


def _embed_nodes(mesh: TetMesh, B: TetMesh) -> np.ndarray:
    key = ("embed_nodes", B.name)
    m = mesh._cache.get(key)
    if m is None:
        idx = B.node_index()
        m = np.array([idx[tuple(p)] for p in mesh.verts_int], dtype=np.int64)
        mesh._cache[key] = m
    return m


def _embed_edges(mesh: TetMesh, B: TetMesh) -> np.ndarray:
    key = ("embed_edges", B.name)
    m = mesh._cache.get(key)
    if m is None:
        nmap = _embed_nodes(mesh, B)
        pairs = np.sort(nmap[mesh.edges], axis=1)
        m = B.edge_ids(pairs[:, 0].astype(np.int64) * B.nv + pairs[:, 1])
        mesh._cache[key] = m
    return m


# --------------------------------------------------------------------------
# disjoint edges
# --------------------------------------------------------------------------

def decompose_disjoint_edges(v: EdgeField, edges: Sequence[CoarseEdge],
                             trace: Optional[TraceSet] = None) -> HelmholtzSplit:
    """Zero data on pairwise disjoint coarse edges.  Simple case: per-edge
    loop subtractions on non-interfering faces plus one curl-harmonic
    split.  Hard case (every containing face meets another edge): the
    recorded element-aligned subdomain split with cut-off localization."""
    mesh = v.mesh
    edges = _edge_list(edges)
    for e in edges:
        _check_zero_moments(v, _mask_from_ids(mesh.ne, e.fine_edges), e.name)
    for i in range(len(edges)):
        for j in range(i + 1, len(edges)):
            if np.intersect1d(edges[i].fine_nodes, edges[j].fine_nodes).size:
                raise PreconditionError(
                    f"edges {edges[i].name} and {edges[j].name} are not disjoint"
                )
    if len(edges) == 1:
        return decompose_edge(v, edges[0])

    forbidden = {}
    for e in edges:
        m = np.zeros(mesh.nv, dtype=bool)
        for o in edges:
            if o.id != e.id:
                m[o.fine_nodes] = True
        if trace is not None:
            m |= trace.node_mask
        forbidden[e.id] = m

    picks = []
    ok = True
    used_nodes = np.zeros(mesh.nv, dtype=bool)
    for e in edges:
        try:
            F = _find_face_for_edge(mesh, [e], forbidden_nodes=forbidden[e.id] | used_nodes)
        except PreconditionError:
            ok = False
            break
        picks.append(F)
        used_nodes[F.fine_nodes] = True
    if ok:
        p = np.zeros(mesh.nv)
        w = np.zeros((mesh.nv, 3))
        vhat = v
        records = []
        for e, F in zip(edges, picks):
            vhat, phi, ctilde, rec = _edge_subtraction(vhat, [e], F)
            p += phi
            w += ctilde.values
            records.append(rec)
        fn, fe = _face_masks(mesh, picks)
        cn, ce = _complement_masks(mesh, picks)
        xn = trace.node_mask if trace is not None else np.zeros(mesh.nv, dtype=bool)
        bdata = np.zeros(mesh.ne)
        bmask = mesh.boundary_edge_mask() & ~fe
        bdata[bmask] = vhat.values[bmask]
        part_c = ops.curl_harmonic_extend(mesh, bdata)
        part_f = EdgeField(mesh, vhat.values - part_c.values)
        pa, wa = _kernel_fields(mesh, part_c.values, fn | xn)
        pb, wb = _kernel_fields(mesh, part_f.values, cn | xn)
        p += pa + pb
        w += wa + wb
        zero = xn.copy()
        for e in edges:
            zero[e.fine_nodes] = True
        p[zero] = 0.0
        w[zero] = 0.0
        claims = {"rhs1": "curl", "rhs2": "curl", "log": True}
        return _finish(mesh, v, p, w, "disjoint-edges/simple", claims,
                       {"loops": records})

    if trace is not None and not trace.empty:
        raise PreconditionError("interfering disjoint edges with a face trace "
                                "are outside the catalog")
    return _disjoint_edges_hard(v, edges)


def _disjoint_edges_hard(v: EdgeField, edges: Sequence[CoarseEdge]) -> HelmholtzSplit:
    mesh = v.mesh
    info = geometry_info(mesh)
    if info.split_width is None:
        raise PreconditionError(f"no subdomain split recorded for {mesh.name}")
    wdt = info.split_width
    if mesh.denom * wdt.numerator % wdt.denominator or mesh.denom * wdt < 1:
        raise PreconditionError(
            f"no element-aligned subdomain split at h=1/{mesh.denom} "
            f"(needs h <= {wdt / 2})"
        )
    wlat = int(mesh.denom * wdt)
    vol, _ = fem.tet_geometry(mesh)
    cent = mesh.verts[mesh.tets].mean(axis=1)

    col_masks = []
    for e in edges:
        lo = mesh.verts[e.fine_nodes[0]]
        hi = mesh.verts[e.fine_nodes[-1]]
        d = np.argmax(np.abs(hi - lo))
        m = np.ones(mesh.nt, dtype=bool)
        for a in range(3):
            if a == d:
                continue
            m &= np.abs(cent[:, a] - lo[a]) <= wdt
        col_masks.append(m)
    g0 = ~np.logical_or.reduce(col_masks)
    if not g0.any():
        raise PreconditionError("subdomain split leaves no interior subdomain")

    p = np.zeros(mesh.nv)
    w = np.zeros((mesh.nv, 3))
    R = np.zeros(mesh.ne)
    records = []
    col_nodes = []
    for e, m in zip(edges, col_masks):
        sub = extract_tets(mesh, m, "col")
        col_nodes.append(sub.node_mask())

    ptr, eids = mesh.vertex_edges()
    for e, m, cn in zip(edges, col_masks, col_nodes):
        split = decompose_edge(v, e)
        records.extend(split.meta.get("loops", []))
        # cut-off: 1 on the column, 2-layer decay beyond (graph distance)
        dist = np.full(mesh.nv, -1, dtype=np.int64)
        dist[cn] = 0
        frontier = np.nonzero(cn)[0]
        for dd in (1, 2):
            nxt = []
            for n in frontier:
                for eid in eids[ptr[n]:ptr[n + 1]]:
                    for mm in mesh.edges[eid]:
                        if dist[mm] < 0:
                            dist[mm] = dd
                            nxt.append(mm)
            frontier = np.array(nxt, dtype=np.int64)
        theta = np.zeros(mesh.nv)
        sel = dist >= 0
        theta[sel] = np.maximum(0.0, 1.0 - dist[sel] / 2.0)
        theta[cn] = 1.0
        p += theta * split.p.values
        w += theta[:, None] * split.w.values
        sub = extract_tets(mesh, m, "col")
        R[sub.edge_map] += split.R.values[sub.edge_map]

    sub0 = extract_tets(mesh, g0, "core")
    v0 = sub0.restrict_edge(
        v.values - fem.gradient_map(mesh).mat @ p
        - ops.edge_interpolate_rh(NodalVectorField(mesh, w)).values - R
    )
    iface_nodes = np.zeros(mesh.nv, dtype=bool)
    for cn in col_nodes:
        iface_nodes |= cn & sub0.node_mask()
    g0mask = iface_nodes[sub0.vert_map]
    p0, w0 = _kernel_fields(sub0.mesh, v0, g0mask)
    p0[g0mask] = 0.0
    w0[g0mask] = 0.0
    R0 = v0 - fem.gradient_map(sub0.mesh).mat @ p0 - ops.edge_interpolate_rh(
        NodalVectorField(sub0.mesh, w0)).values
    p[sub0.vert_map] += p0
    w[sub0.vert_map] += w0
    R[sub0.edge_map] += R0
    for e in edges:
        p[e.fine_nodes] = 0.0
        w[e.fine_nodes] = 0.0
    claims = {"rhs1": "curl", "rhs2": "curl", "log": True}
    split = _finish(mesh, v, p, w, "disjoint-edges/subdomains", claims,
                    {"loops": records})
    return split


# --------------------------------------------------------------------------
# the dispatcher
# --------------------------------------------------------------------------

def _group_edges(edges: Sequence[CoarseEdge]) -> list[list[CoarseEdge]]:
    """Connected unions of coarse edges (shared endpoints)."""
    groups = []
    pool = list(edges)
    while pool:
        cur = [pool.pop(0)]
        nodes = set(cur[0].fine_nodes.tolist())
        changed = True
        while changed:
            changed = False
            for e in list(pool):
                if nodes & set(e.fine_nodes.tolist()):
                    cur.append(e)
                    nodes |= set(e.fine_nodes.tolist())
                    pool.remove(e)
                    changed = True
        groups.append(cur)
    return groups


def decompose(v: EdgeField, trace: TraceSet) -> Union[HelmholtzSplit, CompatibilityViolation]:
    """Route a decomposition by the trace metadata: face traces through the
    kernel or the chained block construction, edge traces through the loop
    machinery, mixed traces through the face-plus-edge composition, and
    junction complexes through their dedicated pipelines.  Claims (which
    right-hand side, log factor present or droppable) are recorded on the
    result."""
    mesh = v.mesh
    info = geometry_info(mesh)
    _check_zero_moments(v, trace.edge_mask, "the trace")

    if info.junction_edge is not None:
        return decompose_edge_junction(v, trace)
    if info.junction_vertex is not None:
        return decompose_vertex_junction(v, trace)
    if trace.vertex_nodes:
        raise PreconditionError("standalone vertex traces are not a catalog route")

    if trace.empty:
        return kernel_convex(v, trace)

    if trace.has_faces() and not trace.has_edges():
        if trace.J == 1:
            comp = trace.components[0]
            if not comp["lipschitz"]:
                return decompose_isolated_vertex_union(v, trace)
            rep = check_assumption31(mesh, trace)
            if rep.extended_domain_convex:
                return kernel_convex(v, trace)
            if info.sigma2:
                return decompose_face_trace(v, trace)
            claims = {"rhs1": "curl_semi", "rhs2": "curl", "log": True}
            return _kernel_split(mesh, v, trace.node_mask, trace.edge_mask,
                                 "kernel-fallback", claims, trace)
        # J >= 2 faces only: multi-component kernel; the curl-semi-norm bound
        # is known to fail here, so the claim references the full norm
        log = not trace.lipschitz
        claims = {"rhs1": "curl", "rhs2": "l2", "log": log}
        return _kernel_split(mesh, v, trace.node_mask, trace.edge_mask,
                             "kernel-multi", claims, trace)

    if trace.has_edges() and not trace.has_faces():
        groups = _group_edges(trace.coarse_edges)
        if len(groups) == 1:
            g = groups[0]
            return decompose_edge(v, g if len(g) > 1 else g[0])
        if all(len(g) == 1 for g in groups):
            return decompose_disjoint_edges(v, [g[0] for g in groups])
        raise PreconditionError("disjoint unions of edge chains are outside the catalog")

    # mixed faces + edges
    face_trace = _faces_only_trace(trace)
    groups = _group_edges(trace.coarse_edges)
    if len(groups) == 1:
        g = groups[0]
        return decompose_face_plus_edge(v, face_trace, g if len(g) > 1 else g[0])
    singles = [g[0] for g in groups if len(g) == 1]
    if len(singles) == len(groups):
        return decompose_disjoint_edges(v, singles, trace=face_trace)
    raise PreconditionError("mixed trace outside the catalog routes")


def trace_nodes_touch(trace: TraceSet, group) -> bool:
    for e in group:
        if trace.node_mask[e.fine_nodes].any():
            return True
    return False


def _faces_only_trace(trace: TraceSet) -> TraceSet:
    from .trace import _assemble_trace

    return _assemble_trace(trace.mesh, trace.coarse_faces, [], [],
                           tuple(f.name for f in trace.coarse_faces))


# --------------------------------------------------------------------------
# edge junction (two blocks sharing one coarse edge)
# --------------------------------------------------------------------------

def _sub_trace(sub: Submesh, node_mask: np.ndarray, edge_mask: np.ndarray) -> TraceSet:
    return trace_from_fine(sub.mesh, node_mask[sub.vert_map], edge_mask[sub.edge_map])


def _block_split(sub: Submesh, v: EdgeField, node_mask, edge_mask):
    vs = EdgeField(sub.mesh, sub.restrict_edge(v.values))
    tr = _sub_trace(sub, node_mask, edge_mask)
    res = decompose(vs, tr)
    if isinstance(res, CompatibilityViolation):
        raise PreconditionError(res.message)
    return res


def decompose_edge_junction(v: EdgeField, trace: TraceSet) -> HelmholtzSplit:
    """Two blocks meeting along one coarse edge: independent block splits
    when the junction edge carries trace data on both sides, otherwise the
    chained residual pipeline through the second block."""
    mesh = v.mesh
    info = geometry_info(mesh)
    surf = surface(mesh)
    E = surf.edge_by_name(info.junction_edge)
    _check_zero_moments(v, trace.edge_mask, "the trace")
    e_in_trace = trace.edge_mask[E.fine_edges].all()
    partial = trace.node_mask[E.fine_nodes].any() and not e_in_trace

    sub0 = extract_block(mesh, 0)
    sub1 = extract_block(mesh, 1)
    p = np.zeros(mesh.nv)
    w = np.zeros((mesh.nv, 3))
    records = []

    if e_in_trace:
        r0 = _block_split(sub0, v, trace.node_mask, trace.edge_mask)
        r1 = _block_split(sub1, v, trace.node_mask, trace.edge_mask)
        for sub, r in ((sub0, r0), (sub1, r1)):
            p[sub.vert_map] = r.p.values
            w[sub.vert_map] = r.w.values
            records.extend(r.meta.get("loops", []))
        log = trace.has_edges() or not all(c["lipschitz"] for c in trace.components)
        claims = {"rhs1": "curl_semi" if trace.J == 1 else "curl",
                  "rhs2": "curl", "log": bool(log)}
        split = _finish(mesh, v, p, w, "edge-junction/shared", claims,
                        {"loops": records})
        return split
    if partial:
        raise PreconditionError(
            "the junction edge meets the trace in a proper subset; "
            "not a catalog case"
        )

    # junction edge clear of the trace: decompose block 0, extend with zero
    # data off the junction edge, decompose the residual on block 1 with the
    # edge added to its trace
    r0 = _block_split(sub0, v, trace.node_mask, trace.edge_mask)
    records.extend(r0.meta.get("loops", []))
    p[sub0.vert_map] = r0.p.values
    w[sub0.vert_map] = r0.w.values
    R0 = np.zeros(mesh.ne)
    R0[sub0.edge_map] = r0.R.values
    v_res = EdgeField(mesh, v.values - fem.gradient_map(mesh).mat @ p
                      - ops.edge_interpolate_rh(NodalVectorField(mesh, w)).values - R0)
    em1 = trace.edge_mask.copy()
    em1[E.fine_edges] = True
    nm1 = trace.node_mask.copy()
    nm1[E.fine_nodes] = True
    r1 = _block_split(sub1, v_res, nm1, em1)
    records.extend(r1.meta.get("loops", []))
    p[sub1.vert_map] += r1.p.values
    w[sub1.vert_map] += r1.w.values
    p[trace.node_mask] = 0.0
    w[trace.node_mask] = 0.0
    claims = {"rhs1": "curl_semi" if trace.J <= 1 else "curl", "rhs2": "curl",
              "log": True}
    return _finish(mesh, v, p, w, "edge-junction/chained", claims,
                   {"loops": records})


# --------------------------------------------------------------------------
# vertex junction (blocks sharing one vertex)
# --------------------------------------------------------------------------

def _block_kind(trace: TraceSet, sub: Submesh, v0: int) -> str:
    """pinned: the block's trace part contains the vertex; free: the block
    carries no trace entity (its potential constant is a gauge); anchored:
    trace present but clear of the vertex (gate participant)."""
    if v0 in trace.vertex_nodes:
        return "pinned"
    nm = sub.node_mask()
    has_any = False
    for f in trace.coarse_faces:
        if nm[f.fine_nodes].all():
            has_any = True
            if v0 in f.fine_nodes:
                return "pinned"
    for e in trace.coarse_edges:
        if nm[e.fine_nodes].all():
            has_any = True
            if v0 in e.fine_nodes:
                return "pinned"
    return "anchored" if has_any else "free"


def _anchored_setup(mesh, surf, block_faces, v0, trace: TraceSet):
    """Loop face + normalization edge for a trace-anchored block: a face
    through the vertex whose contact with the trace is exactly one whole
    coarse boundary edge (the anchor E)."""
    for f in block_faces:
        if v0 not in f.fine_nodes:
            continue
        contact = np.nonzero(trace.edge_mask[f.fine_edges])[0]
        if len(contact) == 0:
            continue
        bnodes = np.unique(mesh.edges[f.boundary_edges].ravel())
        inner_nodes = np.setdiff1d(f.fine_nodes, bnodes)
        if trace.node_mask[inner_nodes].any():
            continue
        for e in surf.edges:
            if v0 in e.fine_nodes:
                continue
            if not np.all(np.isin(e.fine_edges, f.boundary_edges)):
                continue
            if not trace.edge_mask[e.fine_edges].all():
                continue
            onface = f.fine_edges[trace.edge_mask[f.fine_edges]]
            if np.array_equal(np.sort(onface), np.sort(e.fine_edges)):
                return f, ops.build_loop(mesh, [f]), e
    raise PreconditionError(
        "no loop face at the junction vertex meets the block trace in a "
        "single whole edge"
    )


def _free_setup(mesh, block_faces, v0):
    for f in block_faces:
        if v0 in f.fine_nodes:
            return f, ops.build_loop(mesh, [f])
    raise PreconditionError("no block face through the junction vertex")


def _adjacent_coarse_edges(surf, loop, E):
    """Coarse edges of the loop immediately before and after E."""
    pos = ops._edge_arc_positions(loop, E)
    before, after = ops._cyclic_arc_bounds(loop.n, pos)
    e1 = e2 = None
    for ce in surf.edges:
        if loop.edges[before] in ce.fine_edges:
            e1 = ce
        if loop.edges[after] in ce.fine_edges:
            e2 = ce
    return e1, e2


def _vertex_gate(v: EdgeField, trace: TraceSet):
    """Per-block loop data and the compatibility functionals: pinned blocks
    contribute 0, anchored blocks their normalized loop potential at the
    vertex, free blocks adapt (no contribution)."""
    mesh = v.mesh
    info = geometry_info(mesh)
    surf = surface(mesh)
    v0 = mesh.node_index()[tuple(x * mesh.denom for x in info.junction_vertex)]
    nblocks = len(info.complex.blocks)
    kinds, setups, values = [], [], []
    records = []
    block_faces = {b: [f for f in surf.faces
                       if np.isin(f.fine_nodes, extract_block(mesh, b).vert_map).all()]
                   for b in range(nblocks)}
    for b in range(nblocks):
        kind = _block_kind(trace, extract_block(mesh, b), v0)
        kinds.append(kind)
        if kind == "pinned":
            setups.append(None)
            values.append(0.0)
        elif kind == "anchored":
            F, loop, E = _anchored_setup(mesh, surf, block_faces[b], v0, trace)
            dec = ops.loop_decompose(v, loop, zero_mean_edge=E)
            setups.append((F, loop, E, dec))
            values.append(dec.phi_at(v0))
            records.append((dec.C, dec.l0, _loop_flux(mesh, v, [F])))
        else:
            F, loop = _free_setup(mesh, block_faces[b], v0)
            dec = ops.loop_decompose(v, loop)
            setups.append((F, loop, None, dec))
            values.append(None)
            records.append((dec.C, loop.total_length, _loop_flux(mesh, v, [F])))
    gated = [x for x in values if x is not None]
    ref = gated[0] if gated else 0.0
    vals = np.array([ref if x is None else x for x in values])
    return v0, kinds, setups, vals, ref, records


def decompose_vertex_junction(
    v: EdgeField, trace: TraceSet, tol_factor: float = 1e-10
) -> Union[HelmholtzSplit, CompatibilityViolation]:
    """Blocks meeting at a single vertex.  Blocks whose trace pins the
    vertex decompose independently, blocks with no trace ride along with a
    free potential constant, and trace-anchored blocks go through the
    normalized loop subtraction.  The decomposition is refused (typed
    outcome) unless all gated loop potentials agree at the vertex."""
    mesh = v.mesh
    surf = surface(mesh)
    _check_zero_moments(v, trace.edge_mask, "the trace")
    vcurl = fem.norm(v, "curl")
    v0, kinds, setups, vals, ref, records = _vertex_gate(v, trace)
    functionals = vals[1:] - vals[:-1]
    tol = tol_factor * max(vcurl, 1e-30)
    if np.abs(functionals).max(initial=0.0) > tol:
        return CompatibilityViolation(mesh.name, functionals, tol)

    p = np.zeros(mesh.nv)
    w = np.zeros((mesh.nv, 3))
    any_log = False
    for b, kind in enumerate(kinds):
        sub = extract_block(mesh, b)
        if kind == "pinned":
            r = _block_split(sub, v, trace.node_mask, trace.edge_mask)
            records.extend(r.meta.get("loops", []))
            pb = r.p.values
            wb = r.w.values
            any_log = any_log or r.claims.get("log", False)
        else:
            F, loop, E, dec = setups[b]
            if kind == "anchored":
                phi_vals = dec.phi.copy()
                posE = ops._edge_arc_positions(loop, E)
                if abs(dec.C) > 0:
                    # correct the potential so it vanishes on the trace
                    # edge, keeping its value at the vertex
                    e1, e2 = _adjacent_coarse_edges(surf, loop, E)
                    eps = ops.epsilon_correction(loop, E, e1, e2, dec.C)
                    start = loop.node_pos(v0)
                    acc = 0.0
                    J = np.zeros(loop.n)
                    for j in range(loop.n):
                        k = (start + j) % loop.n
                        acc += eps[k] * loop.lengths[k]
                        J[(k + 1) % loop.n] = acc
                    phi_vals = phi_vals - J
                    per_edge = dec.C + eps
                else:
                    per_edge = np.full(loop.n, dec.C)
                ez = np.unique(np.concatenate([posE, (posE + 1) % loop.n]))
                scale = max(1.0, np.abs(phi_vals).max())
                if np.abs(phi_vals[ez]).max() > 1e-9 * scale:
                    raise PreconditionError("loop correction failed to zero the trace edge")
                phi_vals[ez] = 0.0
                per_edge = per_edge.copy()
                per_edge[posE] = 0.0
                pin_nodes = np.concatenate([[v0], E.fine_nodes])
            else:  # free block: pin the potential at the vertex to ref
                phi_vals = dec.phi - dec.phi_at(v0) + ref
                per_edge = np.full(loop.n, dec.C)
                pin_nodes = np.array([v0])
            phi_g = np.zeros(mesh.nv)
            phi_g[loop.nodes] = phi_vals
            ct = ops.loop_constant_extension(dec.C, loop, pin_nodes, per_edge)
            vhat = EdgeField(mesh, v.values - fem.gradient_map(mesh).mat @ phi_g
                             - ops.edge_interpolate_rh(ct).values)
            vb = EdgeField(sub.mesh, sub.restrict_edge(vhat.values))
            fsub = [f for f in surface(sub.mesh).faces
                    if np.isin(sub.vert_map[f.fine_nodes], F.fine_nodes).all()
                    and len(f.fine_nodes) == len(F.fine_nodes)]
            xr = _sub_trace(sub, trace.node_mask, trace.edge_mask)
            inner = decompose_loop(vb, fsub[0], extra=xr if not xr.empty else None)
            pb = phi_g[sub.vert_map] + inner.p.values
            wb = ct.values[sub.vert_map] + inner.w.values
            any_log = True
        keep = np.ones(len(sub.vert_map), dtype=bool)
        if b > 0:
            keep = sub.vert_map != v0
        p[sub.vert_map[keep]] = pb[keep]
        w[sub.vert_map[keep]] = wb[keep]
    p[trace.node_mask] = 0.0
    w[trace.node_mask] = 0.0
    all_connected = all(c["lipschitz"] for c in trace.components)
    claims = {"rhs1": "curl_semi" if all_connected else "curl", "rhs2": "curl",
              "log": bool(any_log)}
    meta = {"loops": records, "functionals": functionals.tolist(), "tol": tol,
            "block_kinds": kinds}
    return _finish(mesh, v, p, w, "vertex-junction", claims, meta)


# --------------------------------------------------------------------------
# seeded admissible fields
# --------------------------------------------------------------------------

def random_admissible_field(mesh: TetMesh, trace: Optional[TraceSet], seed) -> EdgeField:
    """Uniform edge moments in [-1, 1], projected onto the route's
    preconditions by zeroing the trace moments.  On vertex junctions the
    loop potentials are additionally matched at the vertex by a rank-one
    correction per compatibility functional."""
    rng = np.random.default_rng(seed)
    vals = rng.uniform(-1.0, 1.0, mesh.ne)
    if trace is not None:
        vals[trace.edge_mask] = 0.0
    v = EdgeField(mesh, vals)
    try:
        info = geometry_info(mesh)
    except GeometryError:
        info = None
    if info is not None and info.junction_vertex is not None and trace is not None:
        v = _compatibilize(v, trace)
    return v


def gradient_field(mesh: TetMesh, trace: Optional[TraceSet], seed) -> tuple[EdgeField, NodalField]:
    """v = grad q for a random nodal q vanishing on the trace."""
    rng = np.random.default_rng(seed)
    q = rng.uniform(-1.0, 1.0, mesh.nv)
    if trace is not None:
        q[trace.node_mask] = 0.0
    qf = NodalField(mesh, q)
    return EdgeField(mesh, fem.gradient_map(mesh).mat @ q), qf


def _compatibilize(v: EdgeField, trace: TraceSet) -> EdgeField:
    """Zero the vertex-junction compatibility functionals by shifting one
    unconstrained loop moment per gated block (trace moments stay zero)."""
    mesh = v.mesh
    out = v.copy()
    v0, kinds, setups, vals, ref, _ = _vertex_gate(out, trace)
    anchored = [b for b, k in enumerate(kinds) if k == "anchored"]
    if not anchored:
        return out
    target = 0.0 if "pinned" in kinds else vals[anchored[0]]
    for b in anchored:
        if vals[b] == target:
            continue
        F, loop, E, dec = setups[b]
        out = _bump_loop_potential(out, trace, loop, E, v0, target - vals[b])
    return out


def _bump_loop_potential(v: EdgeField, trace: TraceSet, loop, E, v0, delta) -> EdgeField:
    """Add a single-edge circulation on the loop shifting the normalized
    potential at the vertex by `delta` (linearity probe)."""
    base = ops.loop_decompose(v, loop, zero_mean_edge=E).phi_at(v0)
    efine = set(int(x) for x in E.fine_edges) if E is not None else set()
    free = [k for k in range(loop.n)
            if not trace.edge_mask[loop.edges[k]] and int(loop.edges[k]) not in efine]
    out = v.copy()
    for k in free:
        probe = v.copy()
        probe.values[loop.edges[k]] += 1.0
        d1 = ops.loop_decompose(probe, loop, zero_mean_edge=E).phi_at(v0) - base
        if abs(d1) > 1e-12:
            out.values[loop.edges[k]] += delta / d1
            return out
    raise RuntimeError("no loop moment moves the vertex potential")


def incompatible_field(mesh: TetMesh, trace: TraceSet, seed, magnitude=1.0) -> EdgeField:
    """A compatibilized random field perturbed by a circulation on one gated
    block loop so the first compatibility functional is order `magnitude`."""
    v = random_admissible_field(mesh, trace, seed)
    v0, kinds, setups, vals, ref, _ = _vertex_gate(v, trace)
    anchored = [b for b, k in enumerate(kinds) if k == "anchored"]
    gated = anchored if "pinned" in kinds else anchored[1:]
    if not gated:
        raise PreconditionError(
            "trace leaves no gated block: the vertex-junction decomposition "
            "always succeeds for this configuration"
        )
    b = gated[-1]
    F, loop, E, dec = setups[b]
    return _bump_loop_potential(v, trace, loop, E, v0, magnitude)
