import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import dense_pinv, random_eulerian, random_regular
from walksolver.errors import ChainBudgetError, NotEulerianError, ValidationError
from walksolver.graph_core import (
    from_adjacency,
    from_edge_list,
    laplacian,
    random_walk_laplacian,
    transition_matrix,
)
from walksolver.lifts import recursive_cycle_matrix
from walksolver.solver import (
    LaplacianSolver,
    build_F,
    build_chain,
    build_lu,
    choose_k,
    entrywise_factor,
    project_down,
    reduce_to_canonical,
    richardson,
    solve_laplacian,
    solve_pinv,
)
from walksolver.spectral import PSDMatrix, expansion_lambda, symmetrization


def _regular_W(seed, n=5, d=4):
    G = random_regular(np.random.default_rng(seed), n, d)
    return G, transition_matrix(G)


# ---------------------------------------------------------------- chain


def test_choose_k_rules():
    G, W = _regular_W(0)
    k = choose_k(W)
    lam = expansion_lambda(np.linalg.matrix_power(W, 2**k))
    assert k * lam / (1 - lam) <= 0.125
    if k > 1:
        lam_prev = expansion_lambda(np.linalg.matrix_power(W, 2 ** (k - 1)))
        assert (k - 1) * lam_prev / (1 - lam_prev) > 0.125
    kb = choose_k(W, rule="bound", degree=4)
    assert kb >= k and 2**kb > 2 * 16 * 25 * np.log(8)
    with pytest.raises(ValidationError):
        choose_k(W, rule="bound")
    with pytest.raises(ValidationError):
        choose_k(W, rule="guess")


def test_chain_exact_squares():
    _, W = _regular_W(1)
    ch = build_chain(W, 3)
    assert [lv.method for lv in ch.levels] == ["exact_square", "exact_square", "complete"]
    assert np.allclose(ch.matrices[2], np.linalg.matrix_power(W, 4))
    assert np.allclose(ch.matrices[3], 0.2)
    assert ch.epsilons[:2] == [0, 0]


def test_chain_derandomized_levels():
    G, W = _regular_W(2, n=6, d=16)
    ch = build_chain(W, 3, mu=0.5, graph=G)
    assert ch.levels[0].method == "derandomized"
    assert ch.levels[0].expander_lambda <= 0.5
    assert ch.levels[0].epsilon <= 2 * ch.levels[0].expander_lambda + 1e-8


def test_chain_budget_error():
    _, W = _regular_W(3)
    with pytest.raises(ChainBudgetError, match="budget"):
        build_chain(W, 1, budget=0.01)


def test_chain_validation():
    with pytest.raises(ValidationError):
        build_chain(np.array([[0.5, 0.2], [0.5, 0.8]]), 2)
    _, W = _regular_W(4)
    with pytest.raises(ValidationError):
        build_chain(W, 0)
    with pytest.raises(ValidationError):
        build_chain(W, 2, final="other")


# ---------------------------------------------------------------- LU


def test_exact_chain_factors_lifted_laplacian():
    _, W = _regular_W(5, n=4, d=3)
    lu = build_lu(build_chain(W, 3, final="exact", budget=None))
    L = np.eye(32) - np.kron(recursive_cycle_matrix(8), W)
    assert np.allclose(lu.dense_lifted_laplacian(), L)
    assert np.allclose(lu.dense_Lk(), L, atol=1e-12)
    for i in range(4):
        assert np.allclose(lu.dense_L_level(i), L, atol=1e-12)


def test_factor_inverses():
    _, W = _regular_W(6, n=3, d=3)
    lu = build_lu(build_chain(W, 2))
    I = np.eye(lu.size)
    for j in (1, 2):
        assert np.allclose(lu.X_matrix(j) @ lu.X_matrix(j, inverse=True), I)
        assert np.allclose(lu.Y_matrix(j) @ lu.Y_matrix(j, inverse=True), I)


def test_pinv_matches_dense():
    _, W = _regular_W(7, n=4, d=4)
    lu = build_lu(build_chain(W, 2))
    Lk = lu.dense_Lk()
    P = lu.dense_pinv()
    assert np.allclose(Lk @ P @ Lk, Lk, atol=1e-10)
    assert np.allclose(Lk.sum(axis=0), 0, atol=1e-12)
    assert np.allclose(Lk.sum(axis=1), 0, atol=1e-12)
    assert np.allclose(P, dense_pinv(Lk), atol=1e-9)


def test_vector_and_matrix_application_agree():
    _, W = _regular_W(8, n=4, d=4)
    lu = build_lu(build_chain(W, 2))
    B = np.random.default_rng(0).standard_normal((lu.size, 3))
    cols = np.stack([lu.apply_pinv(B[:, c]) for c in range(3)], axis=1)
    assert np.allclose(lu.apply_pinv(B), cols, atol=1e-14)


# ---------------------------------------------------------------- F and Richardson


def test_F_items_on_accepted_chain():
    _, W = _regular_W(9, n=4, d=4)
    ch = build_chain(W, 3)
    F = build_F(ch)
    assert F.item1(0) <= 1e-10  # L^(0) is L itself
    for i in range(1, ch.k + 1):
        assert F.item1(i) <= 2 * i * ch.max_epsilon + 1e-9
    assert F.item2() >= 1 / (40 * ch.k**2) - 1e-9
    lo, hi = F.sandwich()
    assert 0 < lo <= hi


def test_F_size_guard():
    _, W = _regular_W(10, n=5, d=4)
    with pytest.raises(ValidationError):
        build_F(build_chain(W, 10, budget=None))


def test_richardson_geometric():
    _, W = _regular_W(11, n=4, d=4)
    lu = build_lu(build_chain(W, 2))
    F = build_F(lu)
    res = richardson(lu.dense_pinv(), lu.dense_lifted_laplacian(), F, 1e-6)
    assert res.alpha < 1
    for t, h in enumerate(res.history):
        assert h <= res.alpha ** (t + 1) * (1 + 1e-9) + 1e-12
    assert res.residual_fnorm <= 1e-6 or res.m == 0


def test_project_down():
    n, ell = 3, 4
    M = np.arange(144.0).reshape(12, 12)
    E = np.kron(np.ones((ell, 1)), np.eye(n))
    assert np.allclose(project_down(M, ell, n), E.T @ M @ E / ell)
    assert np.allclose(project_down(lambda X: M @ X, ell, n), project_down(M, ell, n))


# ---------------------------------------------------------------- reduction and solve


def test_recover_maps_regularized_pinv():
    G = random_eulerian(np.random.default_rng(12), 6)
    comp = reduce_to_canonical(G)[0]
    Lreg = np.eye(comp.n) - transition_matrix(comp.regular)
    got = comp.recover(np.linalg.pinv(Lreg))
    assert np.allclose(got, np.linalg.pinv(random_walk_laplacian(G)), atol=1e-10)


def test_reduction_errors():
    with pytest.raises(NotEulerianError):
        reduce_to_canonical(from_edge_list(2, [(0, 1)]))
    isolated = from_edge_list(3, [(0, 1), (1, 0)])
    with pytest.raises(ValidationError):
        reduce_to_canonical(isolated)


def test_entrywise_factor():
    _, W = _regular_W(13)
    c = entrywise_factor(np.eye(5) - W)
    s = np.linalg.svd(np.eye(5) - W, compute_uv=False)
    assert c["sigma_min"] == pytest.approx(s[-2])
    assert c["factor"] >= 1


@settings(max_examples=10, deadline=None)
@given(st.integers(2, 10), st.integers(0, 2**32 - 1))
def test_solve_pinv_matches_oracle(n, seed):
    G = random_eulerian(np.random.default_rng(seed), n)
    rep = solve_pinv(G, 1e-8)
    ref = dense_pinv(random_walk_laplacian(G))
    assert np.abs(rep.pinv_estimate - ref).max() <= 1e-8
    assert rep.entrywise_bound <= 1e-8


def test_solve_with_derandomized_chain():
    G = random_regular(np.random.default_rng(14), 8, 16)
    # the certificate does not need the chain budget; only alpha < 1 matters
    rep = solve_pinv(G, 1e-9, mu=0.5, k=3, budget=None, diagnostics=True)
    ref = dense_pinv(random_walk_laplacian(G))
    assert np.abs(rep.pinv_estimate - ref).max() <= 1e-9
    info = rep.components[0]
    assert info["methods"][:2] == ["derandomized", "derandomized"]
    assert info["lifted"]["lifted_alpha"] < 1


def test_solve_components_and_loops():
    A = np.zeros((5, 5), dtype=int)
    A[1, 0] = A[0, 1] = 2
    A[3, 2] = A[4, 3] = A[2, 4] = 1
    A[2, 2] = 1
    A[0, 0] = 0
    G = from_adjacency(A)
    rep = solve_pinv(G, 1e-8)
    ref = np.zeros((5, 5))
    for block in ([0, 1], [2, 3, 4]):
        idx = np.ix_(block, block)
        ref[idx] = np.linalg.pinv(random_walk_laplacian(G)[idx])
    assert np.abs(rep.pinv_estimate - ref).max() <= 1e-8
    assert len(rep.components) == 2

    lone = from_edge_list(3, [(0, 0, 2), (1, 2), (2, 1)])
    rep = solve_pinv(lone, 1e-8)
    assert np.all(rep.pinv_estimate[0] == 0)


def test_solve_eps_validation():
    G = random_eulerian(np.random.default_rng(15), 4)
    for eps in (0.0, -1.0, float("nan"), 1e-13):
        with pytest.raises(ValidationError):
            solve_pinv(G, eps)


def test_solve_budget_failure():
    G = random_eulerian(np.random.default_rng(16), 5)
    with pytest.raises(ChainBudgetError):
        solve_pinv(G, 1e-8, k=1, budget=1e-6)


def test_report_dict():
    G = random_eulerian(np.random.default_rng(17), 4)
    doc = solve_pinv(G, 1e-8).to_dict()
    assert {"richardson_iters", "residual_fnorm", "entrywise_bound", "chain_epsilons", "eps", "pinv_estimate"} <= set(doc)
    assert "pinv_estimate" not in solve_pinv(G, 1e-8).to_dict(include_matrix=False)


def test_laplacian_solver():
    rng = np.random.default_rng(18)
    G = random_eulerian(rng, 7)
    L = laplacian(G).astype(float)
    solver = LaplacianSolver(G)
    for _ in range(3):
        b = rng.standard_normal(7)
        b -= b.mean()
        res = solver.solve(b, 1e-10)
        x = dense_pinv(L) @ b
        assert np.linalg.norm(res.x - x) <= max(res.error_bound, 1e-10) * (1 + 1e-6)
        assert res.error_bound <= 1e-10
    one = solve_laplacian(G, b, 1e-8)
    assert np.linalg.norm(one.x - dense_pinv(L) @ b) <= 1e-8
    with pytest.raises(ValidationError):
        solver.solve(np.ones(7), 1e-8)
    with pytest.raises(ValidationError):
        solver.solve(np.zeros(3), 1e-8)
    with pytest.raises(ValidationError):
        LaplacianSolver(from_edge_list(4, [(0, 1), (1, 0), (2, 3), (3, 2)]))


def test_symmetrized_laplacian_is_psd():
    G = random_eulerian(np.random.default_rng(19), 8)
    PSDMatrix(symmetrization(random_walk_laplacian(G) @ np.diag(G.out_degree)))
