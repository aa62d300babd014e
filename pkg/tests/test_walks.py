import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import absorbing_escape, dense_power, random_eulerian, random_substochastic
from walksolver.errors import ConvergenceError, NotEulerianError, ValidationError
from walksolver.graph_core import directed_cycle, from_edge_list, reverse, transition_matrix
from walksolver.solver import LaplacianSolver
from walksolver.walks import (
    EscapeQuery,
    WalkQuery,
    escape_probabilities,
    escape_probability,
    kstep_distribution,
    kstep_probability,
    layered_graph,
    monte_carlo_power,
    monte_carlo_samples,
    perturbed_exact_powers,
    substochastic_power,
    thread_count,
)

# ---------------------------------------------------------------- escape


@settings(max_examples=10, deadline=None)
@given(st.integers(3, 10), st.integers(0, 2**32 - 1))
def test_escape_matches_absorbing_chain(n, seed):
    rng = np.random.default_rng(seed)
    G = random_eulerian(rng, n)
    u, v = rng.choice(n, 2, replace=False)
    res = escape_probabilities(G, int(u), int(v), 1e-9)
    ref = absorbing_escape(transition_matrix(G), u, v)
    assert np.abs(res.probabilities - ref).max() <= 1e-9
    assert res.error_bound <= 1e-9
    assert res.probabilities[u] == 1.0 and res.probabilities[v] == 0.0


def test_escape_on_cycle():
    # on a directed cycle from w the walk meets whichever of u, v comes first
    G = directed_cycle(6)
    assert escape_probability(G, EscapeQuery(1, 3, 5)) == pytest.approx(1.0, abs=1e-8)
    assert escape_probability(G, (4, 3, 5)) == pytest.approx(0.0, abs=1e-8)
    assert escape_probability(G, (3, 3, 5)) == 1.0
    assert escape_probability(G, (5, 3, 5)) == 0.0


def test_escape_validation():
    G = directed_cycle(4)
    with pytest.raises(ValidationError):
        escape_probabilities(G, 1, 1)
    with pytest.raises(ValidationError):
        escape_probabilities(G, 0, 9)
    with pytest.raises(ValidationError):
        escape_probabilities(G, 0, 1, eps=0)
    with pytest.raises(ValidationError):
        escape_probability(G, (0, 2, 2))


def test_reused_solver():
    G = random_eulerian(np.random.default_rng(1), 7)
    S = LaplacianSolver(reverse(G))
    W = transition_matrix(G)
    for u, v in [(0, 1), (2, 5), (6, 3)]:
        res = escape_probabilities(G, u, v, 1e-8, solver=S)
        assert np.abs(res.probabilities - absorbing_escape(W, u, v)).max() <= 1e-8


# ---------------------------------------------------------------- layered walks



def test_layered_graph_shape():
    G = directed_cycle(3)
    Lg = layered_graph([G, G])
    assert Lg.n == 3 * 3 + 1
    assert Lg.out_degree[-1] == 3
    for v in range(6, 9):
        assert Lg.edges()[[e[0] for e in Lg.edges()].index(v)][1] == 9


def test_layered_validation():
    G = directed_cycle(3)
    with pytest.raises(ValidationError):
        layered_graph([])
    with pytest.raises(ValidationError):
        layered_graph([G, directed_cycle(4)])
    with pytest.raises(NotEulerianError):
        layered_graph([from_edge_list(3, [(0, 1), (1, 2), (2, 0), (0, 2)])])
    doubled = from_edge_list(3, [(0, 1, 2), (1, 2, 2), (2, 0, 2)])
    with pytest.raises(ValidationError, match="degrees"):
        layered_graph([G, doubled])


def test_kstep_single_entry():
    rng = np.random.default_rng(2)
    G = random_eulerian(rng, 5)
    P = dense_power(transition_matrix(G), 6)
    for s, t in [(0, 0), (1, 3), (4, 2)]:
        res = kstep_probability(G, WalkQuery(s, t, 6, 1e-7))
        assert abs(res.value - P[t, s]) <= 1e-7
        assert res.method == "layered-escape"
    zero = kstep_probability(G, WalkQuery(2, 2, 0, 1e-6))
    assert zero.value == 1.0 and zero.method == "exact"


def test_kstep_product_order():
    # W_1 W_2 applied to e_s: G_2 is walked first
    rng = np.random.default_rng(3)
    G1 = random_eulerian(rng, 4, extra=0)
    G2 = reverse(G1)
    M = transition_matrix(G1) @ transition_matrix(G2)
    vals, bounds = kstep_distribution([G1, G2], 0, 1e-8)
    assert np.abs(vals - M[:, 0]).max() <= 1e-8
    assert np.all(bounds <= 1e-8)


def test_kstep_validation():
    G = directed_cycle(3)
    with pytest.raises(ValidationError):
        kstep_probability([G, G], WalkQuery(0, 0, 3, 1e-6))
    with pytest.raises(ValidationError):
        kstep_probability(G, WalkQuery(0, 5, 2, 1e-6))
    with pytest.raises(ValidationError):
        kstep_probability(G, WalkQuery(0, 0, 2, 1.5))
    with pytest.raises(ValidationError):
        kstep_distribution(G, 0)


# ---------------------------------------------------------------- powering


def test_monte_carlo_sample_count():
    assert monte_carlo_samples(4, 0.1, 0.01) == int(np.ceil(np.log(2 * 16 / 0.01) / 0.02))


def test_monte_carlo_is_deterministic(monkeypatch):
    W = random_substochastic(np.random.default_rng(4), 4)
    a = monte_carlo_power(W, 5, 0.05, seed=7)
    b = monte_carlo_power(W, 5, 0.05, seed=7)
    assert np.array_equal(a.matrix, b.matrix)
    monkeypatch.setenv("WALKSOLVER_THREADS", "3")
    assert thread_count() == 3
    c = monte_carlo_power(W, 5, 0.05, seed=7)
    assert np.array_equal(a.matrix, c.matrix)
    assert np.abs(a.matrix - dense_power(W, 5)).max() <= 0.05
    monkeypatch.setenv("WALKSOLVER_THREADS", "many")
    with pytest.raises(ValidationError):
        thread_count()


def test_perturbed_powers_quality():
    W = random_substochastic(np.random.default_rng(5), 5)
    q = 0.01
    for i, Wi in enumerate(perturbed_exact_powers(W, 4, q), start=1):
        D = dense_power(W, i) - Wi
        assert np.all(D >= 0) and D.sum(axis=0).max() < q


@settings(max_examples=10, deadline=None)
@given(st.integers(1, 6), st.integers(1, 24), st.integers(0, 2**32 - 1))
def test_substochastic_power_matches_dense(n, k, seed):
    W = random_substochastic(np.random.default_rng(seed), n)
    res = substochastic_power(W, k, 1e-12)
    assert np.abs(res.matrix - dense_power(W, k)).max() <= 1e-12
    assert res.error_bound <= 1e-12
    assert res.alpha < 1


def test_substochastic_with_monte_carlo_base():
    W = random_substochastic(np.random.default_rng(6), 3)
    res = substochastic_power(W, 3, 1e-10, "monte-carlo", quality=0.3, seed=1)
    assert np.abs(res.matrix - dense_power(W, 3)).max() <= 1e-10
    assert res.samples > 0


def test_substochastic_validation():
    with pytest.raises(ValidationError):
        substochastic_power(np.array([[0.8, 0.5], [0.3, 0.5]]), 2, 1e-6)
    W = np.full((2, 2), 0.5)
    with pytest.raises(ValidationError):
        substochastic_power(W, 2, 1e-14)
    with pytest.raises(ValidationError):
        substochastic_power(W, 2, 1e-6, "oracle")
    with pytest.raises(ConvergenceError):
        substochastic_power(W, 2, 1e-6, quality=4.0)
    assert np.array_equal(substochastic_power(W, 0, 1e-6).matrix, np.eye(2))
