import math

import numpy as np
import pytest
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from nlsgraph import eigensolver
from nlsgraph import graph as gc
from nlsgraph import operators as ops
from nlsgraph import shooting as sh
from nlsgraph import stationary as st
from nlsgraph.errors import FactorizationSingular

SQRT2 = math.sqrt(2.0)
H = 0.05


def _state(n, k, alphas, a, p=1.0, h=H):
    g = gc.validate_graph(n, k, alphas, p)
    return st.shifted_state(g, a, grid=gc.EdgeGrid.for_states(p, a, spacing=h))


@pytest.fixture(scope="module")
def ops31():
    s = _state(3, 1, (1 / SQRT2, 1, 1), 0.7)
    return ops.assemble(s.graph, s, "Lplus"), ops.assemble(s.graph, s, "Lminus")


def _laplacian(n, shift=0.0):
    main = np.full(n, 2.0 + shift)
    return sp.diags([main, -np.ones(n - 1), -np.ones(n - 1)], [0, 1, -1], format="csr")


def test_lanczos_against_dense():
    rng = np.random.default_rng(1)
    n = 300
    a = _laplacian(n) + sp.diags(rng.uniform(-1, 1, n))
    vals, vecs = eigensolver.lowest_eigenpairs(a, 8, tol=1e-10)
    ref = np.linalg.eigvalsh(a.toarray())[:8]
    np.testing.assert_allclose(vals, ref, atol=1e-10)
    np.testing.assert_allclose(vecs.T @ vecs, np.eye(8), atol=1e-12)


def test_lanczos_resolves_degenerate_pairs():
    block = _laplacian(150) + sp.diags(np.linspace(-1, 0, 150))
    a = sp.block_diag([block, block], format="csr")
    vals, _ = eigensolver.lowest_eigenpairs(a, 6, block_size=2, tol=1e-10)
    ref = np.linalg.eigvalsh(block.toarray())[:3]
    np.testing.assert_allclose(vals, np.repeat(ref, 2), atol=1e-10)


def test_factorization_singular():
    a = sp.diags([0.0, 1.0, 2.0, 3.0], format="csr")
    with pytest.raises(FactorizationSingular):
        eigensolver.lowest_eigenpairs(a, 1, sigma=0.0)


def test_krylov_basis_orthonormal_and_contains_start():
    a = _laplacian(200)
    start = np.random.default_rng(0).standard_normal((200, 2))
    q = eigensolver.krylov_basis(a, 40, sigma=-0.5, start=start, block_size=2)
    assert q.shape[1] >= 40
    np.testing.assert_allclose(q.T @ q, np.eye(q.shape[1]), atol=1e-12)
    resid = start - q @ (q.T @ start)
    assert np.linalg.norm(resid) < 1e-10 * np.linalg.norm(start)


def test_operator_exactly_symmetric(ops31):
    for op in ops31:
        diff = op.matrix - op.matrix.T
        assert diff.count_nonzero() == 0


def test_free_operator_spectrum_above_one():
    g = gc.validate_graph(4, 2, (1, 1, 1, 1), 1)
    grid = gc.EdgeGrid.with_spacing(10.0, H)
    mat, _ = ops.assemble_matrix(g, grid, np.ones((4, grid.n_points)))
    lam = np.linalg.eigvalsh(mat.toarray())
    assert lam.min() > 1.0


def test_lowest_eigenpairs_against_eigsh(ops31):
    lp, _ = ops31
    pairs = ops.lowest_eigenpairs(lp, 5, tol=1e-10)
    ours = np.array([lam for lam, _ in pairs])
    ref = eigsh(lp.matrix.tocsc(), k=5, sigma=-5.0, which="LM", return_eigenvectors=False)
    np.testing.assert_allclose(ours, np.sort(ref), atol=1e-9)


def test_kernel_of_lminus(ops31):
    _, lm = ops31
    u = lm.from_field(lm.state.field)
    r = np.linalg.norm(lm.apply(u)) / np.linalg.norm(u)
    assert r < lm.tol_zero


def test_field_coordinates_roundtrip(ops31):
    lp, _ = ops31
    u = lp.from_field(lp.state.field)
    back = lp.to_field(u)
    np.testing.assert_allclose(back.values[:, :-1], lp.state.field.values[:, :-1], atol=1e-14)
    assert np.all(back.values[:, -1] == 0)  # Dirichlet end


def test_permutation_invariance():
    s = _state(4, 2, (1, 2, 1, 2), 0.5)
    gp = s.graph.permuted([1, 0, 3, 2])
    sp_ = st.shifted_state(gp, 0.5, grid=s.grid)
    a = [lam for lam, _ in ops.lowest_eigenpairs(ops.assemble(s.graph, s, "Lplus"), 6)]
    b = [lam for lam, _ in ops.lowest_eigenpairs(ops.assemble(gp, sp_, "Lplus"), 6)]
    np.testing.assert_allclose(a, b, atol=1e-10)


@pytest.mark.parametrize("a", [-0.7, 0.0, 0.7])
def test_discrete_morse_matches_prediction(a):
    s = _state(3, 1, (1 / SQRT2, 1, 1), a)
    op = ops.assemble(s.graph, s, "Lplus")
    assert ops.morse_index(op) == sh.predicted_counts(s.graph, a)


def test_coo_export(tmp_path, ops31):
    lp, _ = ops31
    lp.to_coo_text(tmp_path / "m.txt")
    rows = np.loadtxt(tmp_path / "m.txt")
    back = sp.coo_matrix((rows[:, 2], (rows[:, 0].astype(int), rows[:, 1].astype(int))),
                         shape=lp.matrix.shape)
    assert (back - lp.matrix).count_nonzero() == 0


@pytest.mark.parametrize("a, n_real", [(-0.7, 0), (0.7, 1)])
def test_stability_counts(a, n_real):
    s = _state(3, 1, (1 / SQRT2, 1, 1), a)
    rep = ops.stability_spectrum(ops.assemble(s.graph, s, "Lplus"),
                                 ops.assemble(s.graph, s, "Lminus"))
    assert rep.n_real_positive == n_real
    assert rep.quartet_error < ops.QUARTET_TOL


def test_translation_mode_residual_second_order():
    res = []
    for h in (0.04, 0.02):
        s = _state(3, 1, (1 / SQRT2, 1, 1), 0.7, h=h)
        lp = ops.assemble(s.graph, s, "Lplus")
        x = s.grid.x
        # d/da of the family: edge j moves by -sign_j a
        t = (-s.pattern.signs[:, None] * s.graph.vertex_weights[:, None]
             * st.soliton_derivative(1.0, x[None, :] + s.edge_shifts[:, None]))
        u = lp.from_field(gc.GraphField(s.graph, s.grid, t))
        res.append(np.linalg.norm(lp.apply(u)) / np.linalg.norm(u))
    assert math.log2(res[0] / res[1]) > 1.8


def test_discrete_eigenvalue_converges_to_shooting():
    g = gc.validate_graph(3, 1, (1 / SQRT2, 1, 1), 1)
    ref = sh.find_point_spectrum(g, 0.7).eigenvalues[:2]
    errs = []
    for h in (0.04, 0.02, 0.01):
        s = _state(3, 1, (1 / SQRT2, 1, 1), 0.7, h=h)
        lam = [v for v, _ in ops.lowest_eigenpairs(ops.assemble(g, s, "Lplus"), 2)]
        errs.append(np.abs(np.array(lam) - ref))
    errs = np.array(errs)
    orders = np.log2(errs[:-1] / errs[1:])
    assert np.all((orders > 1.8) & (orders < 2.2)), orders
