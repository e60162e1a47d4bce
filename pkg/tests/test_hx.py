import numpy as np
import pytest
import scipy.sparse as sp

from helmdec import fem, hx
from helmdec.mesh import build_complex
from helmdec.trace import tag_trace


def make_system(mesh, alpha, beta, seed=0, spec=("boundary",)):
    t = tag_trace(mesh, list(spec))
    rng = np.random.default_rng(seed)
    rhs = fem.EdgeField(mesh, rng.uniform(-1, 1, mesh.ne))
    rhs.values[t.edge_mask] = 0.0
    prob = hx.ModelProblem(mesh, np.asarray(alpha, float), np.asarray(beta, float), t, rhs)
    return hx.assemble_problem(prob)


def test_assembly_spd_probe(cube4, rng):
    sysm = make_system(cube4, [1.0], [1.0])
    x = rng.standard_normal(sysm.n)
    y = rng.standard_normal(sysm.n)
    assert float(x @ (sysm.A @ x)) > 0
    assert float(x @ (sysm.A @ y)) == pytest.approx(float(y @ (sysm.A @ x)), rel=1e-12)


def test_jump_scales_block_entries_linearly(lshape4):
    t = tag_trace(lshape4, ["boundary"])
    base = hx.assemble_problem(hx.ModelProblem(
        lshape4, np.array([1.0, 1.0, 1.0]), np.array([1.0, 1.0, 1.0]), t,
        fem.EdgeField(lshape4, np.zeros(lshape4.ne))))
    big = hx.assemble_problem(hx.ModelProblem(
        lshape4, np.array([1e6, 1.0, 1.0]), np.array([1.0, 1.0, 1.0]), t,
        fem.EdgeField(lshape4, np.zeros(lshape4.ne))))
    K1 = fem.assemble(lshape4, "V", "stiffness",
                      tet_weight=(lshape4.block_of_tet == 0).astype(float)).mat
    free = base.free_edges
    diff = (big.A - base.A) - (1e6 - 1.0) * K1[free][:, free]
    assert abs(diff).max() < 1e-6  # relative to 1e6-scaled entries


def test_nonpositive_coefficient_rejected(cube4):
    with pytest.raises(ValueError):
        hx.ModelProblem(cube4, np.array([0.0]), np.array([1.0]), None,
                        fem.EdgeField(cube4, np.zeros(cube4.ne)))


def test_hx_apply_probes(cube4, rng):
    sysm = make_system(cube4, [1.0], [1.0])
    pre = hx.HXPreconditioner(sysm)
    assert np.abs(pre(np.zeros(sysm.n))).max() == 0.0
    r1 = rng.standard_normal(sysm.n)
    r2 = rng.standard_normal(sysm.n)
    s12 = float(pre(r1) @ r2)
    s21 = float(r1 @ pre(r2))
    assert abs(s12 - s21) <= 1e-10 * max(abs(s12), 1.0)
    assert float(pre(r1) @ r1) > 0
    lin = pre(2.5 * r1 - 0.7 * r2) - (2.5 * pre(r1) - 0.7 * pre(r2))
    assert np.abs(lin).max() <= 1e-12 * max(1.0, np.abs(pre(r1)).max())


def test_pcg_identity_system(cube2):
    n = 50
    rng = np.random.default_rng(1)
    rhs = rng.standard_normal(n)

    class Stub:
        A = sp.eye(n, format="csr")
        b = rhs

    res = hx.pcg_solve(Stub, None, tol=1e-12)
    assert res.iterations == 1
    assert np.allclose(res.x, rhs)


def test_pcg_energy_error_monotone(cube4):
    sysm = make_system(cube4, [1.0], [1.0], seed=2)
    import scipy.sparse.linalg as spla

    xstar = spla.spsolve(sysm.A.tocsc(), sysm.b)
    pre = hx.HXPreconditioner(sysm)
    errs = []

    def cb(xk):
        e = xk - xstar
        errs.append(float(e @ (sysm.A @ e)))

    hx.pcg_solve(sysm, pre, tol=1e-10, callback=cb)
    diffs = np.diff(errs)
    assert np.all(diffs <= 1e-12 * max(errs))


def test_preconditioned_beats_plain(cube4):
    sysm = make_system(cube4, [1.0], [1.0], seed=3)
    pre = hx.HXPreconditioner(sysm)
    it_pre = hx.pcg_solve(sysm, pre, tol=1e-8).iterations
    it_plain = hx.pcg_solve(sysm, None, tol=1e-8, maxit=20000).iterations
    assert it_pre < it_plain


def test_maxit_is_typed_outcome(cube4):
    sysm = make_system(cube4, [1.0], [1.0], seed=4)
    res = hx.pcg_solve(sysm, None, tol=1e-14, maxit=2)
    assert not res.converged
    assert res.iterations == 2


def test_jump_sweep_converges(lshape4):
    for a in (1.0, 1e2, 1e4, 1e6):
        sysm = make_system(lshape4, [a, 1.0, 1.0], [1.0, 1.0, 1.0], seed=5)
        pre = hx.HXPreconditioner(sysm)
        res = hx.pcg_solve(sysm, pre, tol=1e-8)
        assert res.converged, a


def test_gradient_rhs_solve_residual(cube4):
    import scipy.sparse.linalg as spla

    t = tag_trace(cube4, ["boundary"])
    rng = np.random.default_rng(8)
    q = rng.uniform(-1, 1, cube4.nv)
    q[t.node_mask] = 0.0
    rhs = fem.EdgeField(cube4, fem.gradient_map(cube4).mat @ q)
    prob = hx.ModelProblem(cube4, np.array([1e6]), np.array([1.0]), t, rhs)
    sysm = hx.assemble_problem(prob)
    pre = hx.HXPreconditioner(sysm)
    res = hx.pcg_solve(sysm, pre, tol=1e-10)
    assert res.converged and res.final_residual <= 1e-10
    xd = spla.spsolve(sysm.A.tocsc(), sysm.b)
    assert np.abs(res.x - xd).max() <= 1e-6 * max(np.abs(xd).max(), 1e-300)
    # gradient forcing with alpha >> beta: the solution is curl-free
    full = np.zeros(cube4.ne)
    full[sysm.free_edges] = res.x
    assert fem.norm(fem.EdgeField(cube4, full), "curl_semi") <= 1e-5
