"""Model curl-curl solver with per-block jump coefficients and the
auxiliary-space preconditioner built from the decomposition transfers.

The bilinear form is (alpha curl u, curl v) + (beta u, v) with essential
tangential data on the trace.  The preconditioner combines a point Jacobi
smoother with exact solves of the two Galerkin auxiliary problems: the
scalar nodal space carried over by the gradient map and the vector nodal
space carried over by the edge-moment interpolation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import fem, operators as ops
from .mesh import TetMesh
from .trace import TraceSet

__all__ = ["ModelProblem", "CurlSystem", "assemble_problem", "HXPreconditioner",
           "pcg_solve", "PCGResult"]


@dataclass
class ModelProblem:
    mesh: TetMesh
    alpha: np.ndarray      # per-block coefficient
    beta: np.ndarray
    trace: Optional[TraceSet]
    rhs: fem.EdgeField

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float)
        self.beta = np.asarray(self.beta, dtype=float)
        if np.any(self.alpha <= 0) or np.any(self.beta <= 0):
            raise ValueError("coefficients must be positive on every block")


@dataclass
class CurlSystem:
    """SPD system on the free edge DOFs."""

    problem: ModelProblem
    A: sp.csr_matrix
    free_edges: np.ndarray
    free_nodes: np.ndarray
    b: np.ndarray

    @property
    def n(self) -> int:
        return len(self.free_edges)


def assemble_problem(problem: ModelProblem) -> CurlSystem:
    mesh = problem.mesh
    aw = problem.alpha[mesh.block_of_tet]
    bw = problem.beta[mesh.block_of_tet]
    K = fem.assemble(mesh, "V", "stiffness", tet_weight=aw).mat
    M = fem.assemble(mesh, "V", "mass", tet_weight=bw).mat
    A = (K + M).tocsr()
    if problem.trace is not None:
        free_e = np.nonzero(~problem.trace.edge_mask)[0]
        free_n = np.nonzero(~problem.trace.node_mask)[0]
    else:
        free_e = np.arange(mesh.ne)
        free_n = np.arange(mesh.nv)
    Aff = A[free_e][:, free_e].tocsr()
    b = problem.rhs.values[free_e].copy()
    return CurlSystem(problem, Aff, free_e, free_n, b)


@dataclass
class HXPreconditioner:
    """Additive three-term auxiliary-space correction:
    Jacobi smoother + gradient-space solve + vector-nodal-space solve,
    both auxiliary operators assembled as Galerkin products with A."""

    system: CurlSystem
    _diag: np.ndarray = field(init=False)
    _G: sp.csr_matrix = field(init=False)
    _P: sp.csr_matrix = field(init=False)
    _grad_solver: object = field(init=False)
    _nodal_solver: object = field(init=False)

    def __post_init__(self):
        sys = self.system
        mesh = sys.problem.mesh
        self._diag = sys.A.diagonal()
        if np.any(self._diag <= 0):
            raise ValueError("system diagonal is not positive")
        G = fem.gradient_map(mesh).mat
        self._G = G[sys.free_edges][:, sys.free_nodes].tocsr()
        P = ops.rh_matrix(mesh)
        cols = np.concatenate([3 * sys.free_nodes + c for c in range(3)])
        cols.sort()
        self._P = P[sys.free_edges][:, cols].tocsr()
        Ag = (self._G.T @ sys.A @ self._G).tocsc()
        An = (self._P.T @ sys.A @ self._P).tocsc()
        self._grad_solver = spla.splu(Ag)
        self._nodal_solver = spla.splu(An)

    def apply(self, r: np.ndarray) -> np.ndarray:
        out = r / self._diag
        out = out + self._G @ self._grad_solver.solve(self._G.T @ r)
        out = out + self._P @ self._nodal_solver.solve(self._P.T @ r)
        return out

    __call__ = apply


@dataclass
class PCGResult:
    x: np.ndarray
    iterations: int
    converged: bool
    residuals: list  # preconditioned residual norms, relative to the first

    @property
    def final_residual(self) -> float:
        return self.residuals[-1] if self.residuals else 0.0


def pcg_solve(system: CurlSystem, preconditioner=None, tol: float = 1e-8,
              maxit: int = 2000, x0: Optional[np.ndarray] = None,
              callback=None) -> PCGResult:
    """Preconditioned conjugate gradients on the free-DOF system; stops at
    a relative preconditioned residual below tol.  Reaching maxit is a
    typed outcome (converged=False), not an exception."""
    A = system.A
    b = system.b
    apply_m = preconditioner if preconditioner is not None else (lambda r: r)
    x = np.zeros_like(b) if x0 is None else x0.copy()
    r = b - A @ x
    z = apply_m(r)
    rz = float(r @ z)
    base = np.sqrt(abs(rz)) if rz != 0 else 0.0
    history = [1.0 if base > 0 else 0.0]
    if base == 0.0:
        return PCGResult(x, 0, True, history)
    d = z.copy()
    it = 0
    while it < maxit:
        Ad = A @ d
        alpha = rz / float(d @ Ad)
        x += alpha * d
        r -= alpha * Ad
        z = apply_m(r)
        rz_new = float(r @ z)
        it += 1
        rel = float(np.sqrt(abs(rz_new)) / base)
        history.append(rel)
        if callback is not None:
            callback(x.copy())
        if rel <= tol:
            return PCGResult(x, it, True, history)
        d = z + (rz_new / rz) * d
        rz = rz_new
    return PCGResult(x, it, False, history)
