"""Random-walk probabilities.

Escape probabilities come from one Laplacian solve on the reversed graph:
if ``(D - A^T) x = e_u - e_v`` then ``p_w(u, v) = (x_w - x_v) / (x_u - x_v)``.
(In the column convention used here the stationary-weighted potential
solves the transposed system.)  Products of walk matrices reduce to an
escape probability on a layered graph.  Powers of substochastic matrices
use a path lift, a coarse base approximation and Richardson iteration in
the induced 1-norm, where ``||P_k (x) W||_1 <= 1`` for substochastic ``W``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, NotEulerianError, ValidationError
from .graph_core import LabeledDigraph, from_edge_list, is_eulerian, reverse
from .lifts import path_matrix
from .solver import MIN_EPS, LaplacianSolver

__all__ = [
    "EscapeQuery",
    "WalkQuery",
    "EscapeResult",
    "escape_probability",
    "escape_probabilities",
    "layered_graph",
    "kstep_probability",
    "WalkResult",
    "kstep_distribution",
    "PowerResult",
    "substochastic_power",
    "perturbed_exact_powers",
    "monte_carlo_power",
    "monte_carlo_samples",
    "thread_count",
]


@dataclass(frozen=True)
class EscapeQuery:
    w: int
    u: int
    v: int


@dataclass(frozen=True)
class WalkQuery:
    s: int
    t: int
    k: int
    eps: float


@dataclass(frozen=True)
class EscapeResult:
    probabilities: np.ndarray
    error_bound: float
    iterations: int
    k: int


def _check_vertex(G, x, name):
    if not 0 <= x < G.n:
        raise ValidationError(f"{name}={x} out of range for n={G.n}")


def escape_probabilities(
    G: LabeledDigraph, u: int, v: int, eps: float = 1e-8, *, solver: LaplacianSolver | None = None, **solve_kw
) -> EscapeResult:
    """All ``p_w(u, v)`` with a certified additive bound ``<= eps``.

    The Laplacian tolerance is chosen after a first coarse solve has measured
    the potential drop ``x_u - x_v``; a factor 10 of slack is kept.  Pass a
    ``solver`` prepared on ``reverse(G)`` to reuse it across queries.
    """
    _check_vertex(G, u, "u")
    _check_vertex(G, v, "v")
    if u == v:
        raise ValidationError("u and v must differ")
    if not eps > 0:
        raise ValidationError("eps must be positive")
    b = np.zeros(G.n)
    b[u], b[v] = 1.0, -1.0
    if solver is None:
        solver = LaplacianSolver(reverse(G), **solve_kw)
    first = solver.solve(b, 1e-3 / G.n)
    drop = abs(first.x[u] - first.x[v]) - math.sqrt(2) * first.error_bound
    if drop <= 0:
        raise ConvergenceError("could not resolve the potential drop between u and v")
    tol = max(eps * drop / (2 * math.sqrt(2) * 10), MIN_EPS * drop)
    sol = first if first.error_bound <= tol else solver.solve(b, tol)
    x = sol.x
    den = x[u] - x[v]
    p = (x - x[v]) / den
    p[u], p[v] = 1.0, 0.0
    bound = 2 * math.sqrt(2) * sol.error_bound / abs(den)
    return EscapeResult(p, bound, sol.iterations, sol.k)


def escape_probability(G: LabeledDigraph, q, eps: float = 1e-8, **solve_kw) -> float:
    """``p_w(u, v)``: probability a walk from ``w`` reaches ``u`` before ``v``."""
    if not isinstance(q, EscapeQuery):
        q = EscapeQuery(*q)
    _check_vertex(G, q.w, "w")
    if q.u == q.v:
        raise ValidationError("u and v must differ")
    if q.w == q.u:
        return 1.0
    if q.w == q.v:
        return 0.0
    return float(escape_probabilities(G, q.u, q.v, eps, **solve_kw).probabilities[q.w])


def layered_graph(chain) -> LabeledDigraph:
    """Eulerian layered graph for ``W_1 W_2 ... W_k``.

    Vertex ``(layer, v)`` (layers ``1..k+1``) has index ``(layer-1) n + v``
    and the sink is last.  Layer ``i`` connects to ``i+1`` with the edges
    of ``G_{k-i+1}``; layer ``k+1`` sends ``deg(v)`` edges to the sink and the
    sink sends ``deg(v)`` edges back to layer 1.
    """
    chain = list(chain)
    if not chain:
        raise ValidationError("chain must be non-empty")
    n = chain[0].n
    deg = chain[0].out_degree
    for i, G in enumerate(chain, start=1):
        if G.n != n:
            raise ValidationError(f"chain member {i} has {G.n} vertices, expected {n}")
        if not is_eulerian(G):
            raise NotEulerianError(f"chain member {i} is not Eulerian")
        if not np.array_equal(G.out_degree, deg):
            raise ValidationError(f"chain member {i} has different vertex degrees")
    if np.any(deg == 0):
        raise ValidationError("every vertex needs positive degree")
    k = len(chain)
    sink = (k + 1) * n
    edges = []
    for layer in range(1, k + 1):
        G = chain[k - layer]
        base_t, base_h = (layer - 1) * n, layer * n
        edges += [(base_t + t, base_h + h, m) for t, h, m in G.edges()]
    edges += [(k * n + v, sink, int(deg[v])) for v in range(n)]
    edges += [(sink, v, int(deg[v])) for v in range(n)]
    return from_edge_list(sink + 1, edges)


@dataclass(frozen=True)
class WalkResult:
    value: float
    error_bound: float
    iterations: int
    method: str


def kstep_probability(chain, q: WalkQuery, **solve_kw) -> WalkResult:
    """``(W_1 ... W_k)[t, s]``: a walk from ``s`` that takes ``G_k`` first ends at ``t``.

    A single graph is repeated ``q.k`` times.
    """
    if not 0 < q.eps < 1:
        raise ValidationError("eps must lie in (0, 1)")
    if q.k < 0:
        raise ValidationError("k must be non-negative")
    if isinstance(chain, LabeledDigraph):
        n = chain.n
        chain = [chain] * q.k
    else:
        chain = list(chain)
        if q.k != len(chain):
            raise ValidationError(f"query length {q.k} does not match chain length {len(chain)}")
        if not chain:
            raise ValidationError("an empty chain needs a graph to fix the vertex count")
        n = chain[0].n
    for x, name in ((q.s, "s"), (q.t, "t")):
        if not 0 <= x < n:
            raise ValidationError(f"{name}={x} out of range for n={n}")
    if q.k == 0:
        return WalkResult(float(q.s == q.t), 0.0, 0, "exact")
    Lg = layered_graph(chain)
    k = q.k
    start, target, sink = q.s, k * n + q.t, (k + 1) * n
    res = escape_probabilities(Lg, target, sink, q.eps, **solve_kw)
    return WalkResult(float(res.probabilities[start]), res.error_bound, res.iterations, "layered-escape")


def kstep_distribution(chain, s: int, eps: float = 1e-6, k: int | None = None, **solve_kw) -> tuple[np.ndarray, np.ndarray]:
    """``(W_1 ... W_k)[:, s]`` and per-entry bounds, sharing one solver."""
    if isinstance(chain, LabeledDigraph):
        if k is None:
            raise ValidationError("k is required with a single graph")
        chain = [chain] * k
    chain = list(chain)
    if not chain:
        raise ValidationError("chain must be non-empty")
    n, k = chain[0].n, len(chain)
    if not 0 <= s < n:
        raise ValidationError(f"s={s} out of range for n={n}")
    if not 0 < eps < 1:
        raise ValidationError("eps must lie in (0, 1)")
    Lg = layered_graph(chain)
    solver = LaplacianSolver(reverse(Lg), **solve_kw)
    vals, bounds = np.zeros(n), np.zeros(n)
    sink = (k + 1) * n
    for t in range(n):
        res = escape_probabilities(Lg, k * n + t, sink, eps, solver=solver)
        vals[t], bounds[t] = res.probabilities[s], res.error_bound
    return vals, bounds


# ---------------------------------------------------------------- powering


def _check_substochastic(W):
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValidationError("W must be square")
    if np.any(W < 0) or W.sum(axis=0).max() > 1 + 1e-12:
        raise ValidationError("W must be non-negative with column sums at most 1")
    return W


def thread_count() -> int:
    raw = os.environ.get("WALKSOLVER_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValidationError(f"WALKSOLVER_THREADS={raw!r} is not an integer") from None


def monte_carlo_samples(n: int, eps: float, delta: float) -> int:
    """Walks per start vertex so all ``n^2`` entries are within ``eps`` w.p. ``1 - delta``."""
    return math.ceil(math.log(2 * n * n / delta) / (2 * eps * eps))


def _walk_counts(W, k, start, samples, rng):
    """Positions of ``samples`` walks from ``start`` after each step ``0..k``.

    Returns an array ``(k+1, n)`` of visit fractions; dead walks are dropped.
    """
    n = W.shape[0]
    cum = np.cumsum(W, axis=0)  # column j: cumulative distribution out of j
    pos = np.full(samples, start, dtype=np.int64)
    out = np.zeros((k + 1, n))
    out[0, start] = 1.0
    for step in range(1, k + 1):
        alive = pos >= 0
        if not alive.any():
            break
        p = pos[alive]
        u = rng.random(p.size)
        nxt = (u[:, None] >= cum[:, p].T).sum(axis=1)
        nxt[nxt >= n] = -1
        pos[alive] = nxt
        live = pos[pos >= 0]
        out[step] = np.bincount(live, minlength=n) / samples
    return out


def _simulate(W, k, samples, seed):
    n = W.shape[0]
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]
    job = lambda v: _walk_counts(W, k, v, samples, streams[v])
    threads = thread_count()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            cols = list(pool.map(job, range(n)))
    else:
        cols = [job(v) for v in range(n)]
    return np.stack(cols, axis=2)  # (k+1, n rows, n start columns)


@dataclass(frozen=True)
class PowerResult:
    matrix: np.ndarray
    iterations: int
    alpha: float
    error_bound: float
    method: str
    samples: int | None = None
    history: tuple = ()


def monte_carlo_power(W, k: int, eps: float, delta: float = 0.01, seed: int = 0) -> PowerResult:
    """Estimate ``W^k`` by simulating walks; deterministic given ``seed``.

    Sample count per start vertex is ``ceil(ln(2 n^2 / delta) / (2 eps^2))``.
    """
    W = _check_substochastic(W)
    n = W.shape[0]
    if k < 0:
        raise ValidationError("k must be non-negative")
    if not (0 < eps < 1 and 0 < delta < 1):
        raise ValidationError("eps and delta must lie in (0, 1)")
    if k == 0:
        return PowerResult(np.eye(n), 0, 0.0, 0.0, "exact", 0)
    samples = monte_carlo_samples(n, eps, delta)
    est = _simulate(W, k, samples, seed)[k]
    return PowerResult(est, 0, math.nan, eps, "monte-carlo", samples)


def perturbed_exact_powers(W, k: int, quality: float) -> list:
    """``W^1..W^k`` with entries floored to multiples of ``quality / n``.

    Every column then loses less than ``quality`` in 1-norm.
    """
    W = _check_substochastic(W)
    n = W.shape[0]
    h = quality / n
    out, P = [], np.eye(n)
    for _ in range(k):
        P = P @ W
        out.append(np.floor(P / h) * h)
    return out


def _norm1(M) -> float:
    return float(np.abs(M).sum(axis=0).max())


def substochastic_power(
    W,
    k: int,
    eps: float,
    base_oracle: str = "perturbed_exact",
    *,
    N: int | None = None,
    quality: float | None = None,
    seed: int = 0,
    delta: float = 0.01,
) -> PowerResult:
    """Entrywise ``eps``-accurate ``W^k`` by boosting a coarse path-lift inverse.

    With ``M = P (x) W`` on ``k+1`` layers, ``(I - M)^{-1}`` has ``W^k`` in its
    lower-left block.  The base oracle supplies ``W_i ~ W^i`` and
    ``N0 = I + sum_i P^i (x) W_i``; Richardson iteration runs until
    ``alpha^{m+1} C <= eps`` where ``alpha = ||I - N0 (I - M)||_1`` and
    ``C >= ||(I - M)^{-1}||_1``, or earlier once the measured residual
    ``||I - P_m (I - M)||_1`` times ``C`` is below ``eps``.  Default base
    quality is ``1/(2 k N)`` with ``N = max(n, 2)``; that only guarantees
    ``alpha <= 1/N``, and ``1/(2 k^2 N)`` is needed for ``alpha <= 1/(k N)``.
    """
    W = _check_substochastic(W)
    n = W.shape[0]
    if k < 0:
        raise ValidationError("k must be non-negative")
    if not eps > 0:
        raise ValidationError("eps must be positive")
    if eps < MIN_EPS:
        raise ValidationError(f"eps={eps:g} is below the double-precision floor {MIN_EPS:g}")
    if k == 0:
        return PowerResult(np.eye(n), 0, 0.0, 0.0, base_oracle)
    N = max(n, 2) if N is None else int(N)
    q = 1.0 / (2 * k * N) if quality is None else float(quality)
    samples = None
    if base_oracle in ("perturbed_exact", "perturbed-exact"):
        base = perturbed_exact_powers(W, k, q)
    elif base_oracle in ("monte_carlo", "monte-carlo"):
        samples = monte_carlo_samples(n, q / n, delta / k)
        sims = _simulate(W, k, samples, seed)
        base = [sims[i] for i in range(1, k + 1)]
    else:
        raise ValidationError(f"unknown base oracle {base_oracle!r}")

    layers = k + 1
    P = path_matrix(layers)
    A = np.eye(layers * n) - np.kron(P, W)
    N0 = np.eye(layers * n)
    Pi = np.eye(layers)
    for Wi in base:
        Pi = Pi @ P
        N0 += np.kron(Pi, Wi)
    I = np.eye(layers * n)
    E = I - N0 @ A
    alpha = _norm1(E)
    if alpha >= 1:
        raise ConvergenceError(f"base oracle too coarse: ||I - N(I - M)||_1 = {alpha:.4g} >= 1")
    C0 = float(min(k + 1, _norm1(N0) / (1 - alpha)))
    if alpha == 0 or alpha * C0 <= eps:
        m_cap = 0
    else:
        m_cap = max(0, math.ceil(math.log(eps / C0) / math.log(alpha)) - 1)
    # stop on the measured residual; the a priori count is only a cap
    Pm, r, bound = N0.copy(), alpha, alpha * C0
    hist, m = [alpha], 0
    while bound > eps and m < m_cap:
        Pm = E @ Pm + N0
        m += 1
        r = _norm1(I - Pm @ A)
        hist.append(r)
        C = C0 if r >= 1 else min(C0, _norm1(Pm) / (1 - r))
        bound = min(alpha ** (m + 1) * C0, r * C)
    if bound > eps:
        raise ConvergenceError(f"residual stalled at {bound:.3g} > eps={eps:g} (round-off floor)")
    block = Pm[k * n:(k + 1) * n, 0:n]
    return PowerResult(block.copy(), m, alpha, bound, base_oracle.replace("-", "_"), samples, tuple(hist))
