"""Cycle-lifted LU preconditioning and certified pseudoinverses.

Pipeline for an Eulerian graph ``G``:

1. split into strongly connected components and pad each with self-loops
   to a power-of-two degree ``d`` (this leaves ``D - A`` unchanged);
2. build a chain ``W_0, ..., W_k`` with ``W_{i+1}`` approximating
   ``W_i^2`` and ``W_k = J``; levels are derandomized squares when a
   suitable expander exists, exact squares otherwise;
3. factor ``L^(k)``, an approximation of ``I - C_{2^k} (x) W_0``, and use
   its pseudoinverse as a preconditioner for Richardson iteration on the
   lifted system, acting only on the ``n`` columns needed for projecting
   back to the base graph;
4. certify every iterate in the base space: with ``F = U_{L_W}`` the
   entrywise error of ``B_W`` is at most
   ``delta * sqrt(lambda_max(A^{+T} F A^+) * lambda_max(F^+))`` where
   ``delta = ||I - B_W L_W||_F``; the first factor is bounded by
   ``lambda_max(F) / sigma_min(L_W)^2``.

Lifted vectors are arrays of shape ``(2**k, n, r)``; nothing of size
``(2**k n)^2`` is formed unless a dense method is called.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .derand import DEFAULT_EDGE_CAP, build_expander, derandomized_square
from .errors import (
    BoundError,
    ChainBudgetError,
    ConvergenceError,
    ExpanderError,
    NotEulerianError,
    ValidationError,
)
from .graph_core import (
    LabeledDigraph,
    default_degree,
    induced_subgraph,
    is_eulerian,
    regularize,
    strongly_connected_components,
    transition_matrix,
)
from .lifts import recursive_cycle_matrix, recursive_cycle_perm
from .spectral import (
    PSD_RTOL,
    PSDMatrix,
    expansion_lambda,
    roots_of_unity,
    symmetrization,
    unit_circle_approx_epsilon,
)

__all__ = [
    "ChainLevel",
    "Chain",
    "choose_k",
    "build_chain",
    "LUFactorization",
    "build_lu",
    "apply_factored_pinv",
    "FNormMatrix",
    "build_F",
    "RichardsonResult",
    "richardson",
    "project_down",
    "Component",
    "reduce_to_canonical",
    "entrywise_factor",
    "SolveReport",
    "solve_pinv",
    "solve_laplacian",
    "LaplacianSolver",
    "LaplacianSolve",
    "MIN_EPS",
    "K_CAP",
]

MIN_EPS = 1e-12
K_CAP = 14
DENSE_LIFT_MAX = 4096


# ---------------------------------------------------------------- chain


@dataclass(frozen=True)
class ChainLevel:
    index: int
    method: str
    epsilon: float
    lam: float
    degree: int | None = None
    expander_lambda: float | None = None


@dataclass(eq=False)
class Chain:
    """Transition matrices ``W_0..W_k`` plus per-level records for ``1..k``."""

    matrices: list
    levels: list
    budget: float | None = None

    @property
    def k(self) -> int:
        return len(self.matrices) - 1

    @property
    def n(self) -> int:
        return self.matrices[0].shape[0]

    @property
    def epsilons(self) -> list[float]:
        return [lv.epsilon for lv in self.levels]

    @property
    def max_epsilon(self) -> float:
        return max(self.epsilons, default=0.0)

    @property
    def total_epsilon(self) -> float:
        """``k`` times the worst level: the chain-wide approximation budget used."""
        return self.k * self.max_epsilon


def _doubly_stochastic(W, what="W0"):
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValidationError(f"{what} must be square")
    if (
        np.any(W < -1e-15)
        or np.abs(W.sum(axis=0) - 1).max() > 1e-10
        or np.abs(W.sum(axis=1) - 1).max() > 1e-10
    ):
        raise ValidationError(f"{what} must be doubly stochastic (a regular transition matrix)")
    return W


def choose_k(W0, rule: str = "measured", target: float = 0.125, k_cap: int = K_CAP, degree=None) -> int:
    """Number of squaring levels.

    ``rule='measured'``: smallest ``k >= 1`` with
    ``k * lam / (1 - lam) <= target`` where ``lam = lambda(W0^(2^k))``.
    ``rule='bound'``: smallest ``k`` with ``2^k > 2 d^2 n^2 ln(1/target)``.
    Both are capped at ``k_cap``.
    """
    W0 = _doubly_stochastic(W0)
    n = W0.shape[0]
    if rule == "bound":
        if degree is None:
            raise ValidationError("rule='bound' needs the graph degree")
        need = 2 * degree**2 * n**2 * math.log(1 / target)
        return min(k_cap, max(1, math.ceil(math.log2(need + 1))))
    if rule != "measured":
        raise ValidationError(f"unknown k rule {rule!r}")
    P = W0.copy()
    for k in range(1, k_cap + 1):
        P = P @ P
        lam = expansion_lambda(P)
        if lam < 1 and k * lam / (1 - lam) <= target:
            return k
    return k_cap


def _extra_roots(order: int, grid: int):
    return () if grid % order == 0 else tuple(roots_of_unity(order))


def build_chain(
    W0,
    k: int,
    mu: float | None = None,
    *,
    graph: LabeledDigraph | None = None,
    grid: int = 64,
    budget: float | None = 0.5,
    final: str = "J",
    edge_cap: int = DEFAULT_EDGE_CAP,
    max_degree: int = 64,
) -> Chain:
    """Chain ``W_0..W_k`` with ``W_k = J`` (or ``W_{k-1}^2`` when ``final='exact'``).

    Level ``i < k`` is a derandomized square of the labeled ``graph`` when
    ``mu`` is given, an expander with ``lambda <= mu`` exists on the current
    degree, and the squared graph fits under ``edge_cap`` edges; otherwise it
    is the exact square.  Each derandomized (and the final) level records
    its measured unit-circle epsilon against ``W_{i-1}^2`` on the
    ``grid``-point circle plus the roots of unity of order ``2^{k-i}``.
    Raises :class:`ChainBudgetError` if ``k * max eps >= budget``.
    """
    W0 = _doubly_stochastic(W0)
    n = W0.shape[0]
    if k < 1:
        raise ValidationError("k must be at least 1")
    if final not in ("J", "exact"):
        raise ValidationError("final must be 'J' or 'exact'")
    if graph is not None:
        if graph.n != n or graph.d is None or not np.allclose(transition_matrix(graph), W0):
            raise ValidationError("graph does not match W0")
    G = graph if mu is not None else None
    mats = [W0]
    levels = []
    J = np.full((n, n), 1.0 / n)
    for i in range(1, k + 1):
        prev = mats[-1]
        sq = prev @ prev
        order = 2 ** (k - i)
        if i == k:
            if final == "exact":
                mats.append(sq)
                levels.append(ChainLevel(i, "exact_square", 0.0, expansion_lambda(sq)))
            else:
                rep = unit_circle_approx_epsilon(J, sq, grid, _extra_roots(order, grid))
                mats.append(J)
                levels.append(ChainLevel(i, "complete", rep.epsilon, 0.0))
            break
        H = None
        if G is not None:
            try:
                H = build_expander(G.d, mu, max_degree=max_degree)
            except ExpanderError:
                H = None
        if H is not None and not H.is_complete and n * G.d * H.c <= edge_cap:
            G = derandomized_square(G, H)
            Wi = transition_matrix(G)
            rep = unit_circle_approx_epsilon(Wi, sq, grid, _extra_roots(order, grid))
            mats.append(Wi)
            levels.append(ChainLevel(i, "derandomized", rep.epsilon, expansion_lambda(Wi), G.d, H.lam))
        else:
            if G is not None and H is not None and n * G.d * H.c <= edge_cap:
                G = derandomized_square(G, H)  # complete expander: exact square, keep labels
            else:
                G = None
            mats.append(sq)
            levels.append(ChainLevel(i, "exact_square", 0.0, expansion_lambda(sq), None if G is None else G.d))
    chain = Chain(mats, levels, budget)
    if budget is not None and chain.total_epsilon >= budget:
        per = ", ".join(f"{lv.index}:{lv.method}:{lv.epsilon:.4g}" for lv in levels)
        raise ChainBudgetError(
            f"chain budget exceeded: k * max eps = {chain.total_epsilon:.4g} >= {budget} (levels {per})"
        )
    return chain


# ---------------------------------------------------------------- LU factors


def _is_J(W) -> bool:
    n = W.shape[0]
    return bool(np.abs(W - 1.0 / n).max() <= 1e-15)


class LUFactorization:
    """Factored ``L^(k) = X_1..X_k diag(I, I - W_k) Y_k..Y_1`` and its pseudoinverse.

    Level ``j`` splits the layers into ``[done | F_j | C_j]`` with
    ``done = 2^k - 2^{k-j+1}`` layers and ``|F_j| = |C_j| = 2^{k-j}``.
    ``X_j`` carries ``-I (x) W_{j-1}`` at block ``(C_j, F_j)`` and ``Y_j``
    carries ``-C_{2^{k-j}} (x) W_{j-1}`` at block ``(F_j, C_j)``; their
    inverses carry the same blocks with a plus sign.
    """

    def __init__(self, matrices):
        self.W = [np.asarray(M, dtype=float) for M in matrices]
        self.k = len(self.W) - 1
        if self.k < 1:
            raise ValidationError("need at least W_0 and W_1")
        self.n = self.W[0].shape[0]
        self.layers = 2**self.k
        self.size = self.layers * self.n
        self._perms = {2 ** (self.k - j): recursive_cycle_perm(2 ** (self.k - j)) for j in range(self.k + 1)}
        Wk = self.W[-1]
        self.middle_is_J = _is_J(Wk)
        if self.middle_is_J:
            self.middle_pinv = None
        else:
            self.middle_pinv = _dense_pinv(np.eye(self.n) - Wk)

    # -- block helpers on (layers, n, r) arrays
    def _shape(self, b):
        b = np.asarray(b, dtype=float)
        vec = b.ndim == 1
        X = b.reshape(self.layers, self.n, -1).copy()
        return X, vec, b.shape

    def _blocks(self, j):
        m = 2 ** (self.k - j)
        off = self.layers - 2 * m
        return slice(off, off + m), slice(off + m, off + 2 * m), m

    @staticmethod
    def _layer_apply(W, X):
        return np.matmul(W, X)

    def _cycle_apply(self, m, W, X):
        return np.matmul(W, X)[self._perms[m]]

    def _x(self, j, X, sign):
        F, C, _ = self._blocks(j)
        X[C] += sign * self._layer_apply(self.W[j - 1], X[F])

    def _y(self, j, X, sign):
        F, C, m = self._blocks(j)
        X[F] += sign * self._cycle_apply(m, self.W[j - 1], X[C])

    def _middle(self, X, pinv):
        last = X[-1]
        if self.middle_is_J:
            X[-1] = last - last.mean(axis=0, keepdims=True)
        elif pinv:
            X[-1] = self.middle_pinv @ last
        else:
            X[-1] = last - self.W[-1] @ last

    @staticmethod
    def _project(X):
        return X - X.mean(axis=(0, 1), keepdims=True)

    # -- public operators
    def apply_pinv(self, b):
        """``L^(k)+ b`` via ``P Y_1^-1..Y_k^-1 M^+ X_k^-1..X_1^-1 P``."""
        X, vec, shape = self._shape(b)
        X = self._project(X)
        for j in range(1, self.k + 1):
            self._x(j, X, +1.0)
        self._middle(X, pinv=True)
        for j in range(self.k, 0, -1):
            self._y(j, X, +1.0)
        return self._project(X).reshape(shape)

    def apply_factored(self, b):
        """``L^(k) b`` from the factors."""
        X, vec, shape = self._shape(b)
        for j in range(1, self.k + 1):
            self._y(j, X, -1.0)
        self._middle(X, pinv=False)
        for j in range(self.k, 0, -1):
            self._x(j, X, -1.0)
        return X.reshape(shape)

    def apply_lifted_laplacian(self, b):
        """``L = I - C_{2^k} (x) W_0`` (the exact lifted Laplacian)."""
        X, vec, shape = self._shape(b)
        return (X - self._cycle_apply(self.layers, self.W[0], X)).reshape(shape)

    # -- dense views (tests and diagnostics)
    def _dense_op(self, fn):
        return fn(np.eye(self.size))

    def X_matrix(self, j, inverse=False):
        def fn(E):
            X = E.reshape(self.layers, self.n, -1).copy()
            self._x(j, X, +1.0 if inverse else -1.0)
            return X.reshape(self.size, -1)
        return self._dense_op(fn)

    def Y_matrix(self, j, inverse=False):
        def fn(E):
            X = E.reshape(self.layers, self.n, -1).copy()
            self._y(j, X, +1.0 if inverse else -1.0)
            return X.reshape(self.size, -1)
        return self._dense_op(fn)

    def middle_matrix(self, pinv=False):
        M = np.eye(self.size)
        tail = slice(self.size - self.n, self.size)
        if pinv:
            M[tail, tail] = (np.eye(self.n) - 1.0 / self.n) if self.middle_is_J else self.middle_pinv
        else:
            M[tail, tail] = np.eye(self.n) - self.W[-1]
        return M

    def dense_Lk(self):
        return self.apply_factored(np.eye(self.size))

    def dense_pinv(self):
        return self.apply_pinv(np.eye(self.size))

    def dense_lifted_laplacian(self):
        return np.eye(self.size) - np.kron(recursive_cycle_matrix(self.layers), self.W[0])

    def dense_L_level(self, i):
        """``L^(i) = X_1..X_i diag(I, I - C_{2^{k-i}} (x) W_i) Y_i..Y_1``, ``0 <= i <= k``."""
        N = self.size
        m = 2 ** (self.k - i)
        mid = np.eye(N)
        tail = slice(N - m * self.n, N)
        mid[tail, tail] = np.eye(m * self.n) - np.kron(recursive_cycle_matrix(m), self.W[i])
        left = np.eye(N)
        right = np.eye(N)
        for j in range(1, i + 1):
            left = left @ self.X_matrix(j)
            right = self.Y_matrix(j) @ right
        return left @ mid @ right


def _dense_pinv(M):
    """Dense pseudoinverse with the shared relative rank tolerance."""
    n = M.shape[0]
    return np.linalg.pinv(M, rcond=PSD_RTOL * n * np.finfo(float).eps)


def build_lu(chain) -> LUFactorization:
    mats = chain.matrices if isinstance(chain, Chain) else chain
    return LUFactorization(mats)


def apply_factored_pinv(lu: LUFactorization, b):
    return lu.apply_pinv(b)


# ---------------------------------------------------------------- F matrix


class FNormMatrix:
    """``F = (2/k) sum_{i=0}^k U_{S^(i)}`` on the lifted space (dense)."""

    def __init__(self, lu: LUFactorization):
        self.lu = lu
        k, n, N = lu.k, lu.n, lu.size
        self.summands = []
        for i in range(k + 1):
            m = 2 ** (k - i)
            S = np.zeros((N, N))
            tail = slice(N - m * n, N)
            S[tail, tail] = np.eye(m * n) - np.kron(recursive_cycle_matrix(m), lu.W[i])
            self.summands.append(symmetrization(S))
        self.F = PSDMatrix((2.0 / k) * sum(self.summands))
        self._half = self.F.sqrt()
        self._pinv_half = self.F.pinv_sqrt()

    @property
    def matrix(self):
        return self.F.matrix

    def norm(self, M) -> float:
        """``||F^{1/2} M F^{+/2}||``."""
        return float(np.linalg.norm(self._half @ M @ self._pinv_half, 2))

    def item1(self, i: int) -> float:
        """``||F^{+/2} (L - L^(i)) F^{+/2}||``."""
        D = self.lu.dense_lifted_laplacian() - self.lu.dense_L_level(i)
        return float(np.linalg.norm(self._pinv_half @ D @ self._pinv_half, 2))

    def item2(self) -> float:
        """Smallest eigenvalue of ``F^{+/2} L^(k)T F^+ L^(k) F^{+/2}`` on the range of ``F``."""
        Lk = self.lu.dense_Lk()
        G = self._pinv_half @ Lk.T @ self.F.pinv() @ Lk @ self._pinv_half
        V = self.F.eigenvectors[:, self.F.positive]
        return float(np.linalg.eigvalsh(symmetrization(V.T @ G @ V))[0])

    def sandwich(self) -> tuple[float, float]:
        """Extreme generalized eigenvalues of ``F`` against ``U_L`` on the range of ``U_L``."""
        U = PSDMatrix(symmetrization(self.lu.dense_lifted_laplacian()))
        Ph = U.pinv_sqrt()
        V = U.eigenvectors[:, U.positive]
        ev = np.linalg.eigvalsh(symmetrization(V.T @ Ph @ self.F.matrix @ Ph @ V))
        return float(ev[0]), float(ev[-1])


def build_F(chain_or_lu) -> FNormMatrix:
    lu = chain_or_lu if isinstance(chain_or_lu, LUFactorization) else build_lu(chain_or_lu)
    if lu.size > DENSE_LIFT_MAX:
        raise ValidationError(f"lifted dimension {lu.size} too large for a dense F (max {DENSE_LIFT_MAX})")
    return FNormMatrix(lu)


# ---------------------------------------------------------------- Richardson


@dataclass(frozen=True)
class RichardsonResult:
    operator: np.ndarray
    m: int
    alpha: float
    residual_fnorm: float
    history: tuple


def _fnorm_factory(F):
    P = F.F if isinstance(F, FNormMatrix) else (F if isinstance(F, PSDMatrix) else PSDMatrix(F))
    half, pinv_half = P.sqrt(), P.pinv_sqrt()
    return lambda M: float(np.linalg.norm(half @ M @ pinv_half, 2))


def richardson(B, A, F, target_delta: float, max_m: int | None = None) -> RichardsonResult:
    """``P_m = sum_{i<=m} (I - B A)^i B`` with ``m = ceil(log target / log alpha) - 1``.

    ``alpha = ||I - B A||_F``.  Iterates ``P_t = (I - B A) P_{t-1} + B``;
    ``history[t]`` is the measured ``||I - P_t A||_F``.
    """
    B = np.asarray(B)
    A = np.asarray(A)
    fnorm = _fnorm_factory(F)
    I = np.eye(A.shape[0])
    E = I - B @ A
    alpha = fnorm(E)
    if alpha >= 1:
        raise ConvergenceError(f"Richardson needs alpha < 1, measured {alpha:.6g}")
    if not 0 < target_delta < 1:
        raise ValidationError("target_delta must lie in (0, 1)")
    if alpha <= target_delta:
        m = 0
    else:
        m = max(0, math.ceil(math.log(target_delta) / math.log(alpha)) - 1)
    if max_m is not None:
        m = min(m, max_m)
    P = B.copy()
    hist = [fnorm(I - P @ A)]
    for _ in range(m):
        P = E @ P + B
        hist.append(fnorm(I - P @ A))
    return RichardsonResult(P, m, alpha, hist[-1], tuple(hist))


def project_down(B_C, ell: int, n: int) -> np.ndarray:
    """``(1/ell) (1_ell (x) I_n)^T B_C (1_ell (x) I_n)`` for a dense or callable ``B_C``."""
    E = np.kron(np.ones((ell, 1)), np.eye(n))
    if callable(B_C):
        Y = B_C(E)
    else:
        Y = np.asarray(B_C) @ E
    return E.T @ Y / ell


# ---------------------------------------------------------------- reduction


@dataclass(eq=False)
class Component:
    """One strongly connected component and its regularized form."""

    vertices: list
    graph: LabeledDigraph
    regular: LabeledDigraph | None
    d: int
    degrees: np.ndarray

    @property
    def n(self) -> int:
        return len(self.vertices)

    def recover(self, B_reg):
        """Map an estimate of ``((D - A) / d)^+`` to ``((D - A) D^{-1})^+``."""
        n = self.n
        s = self.degrees.astype(float)
        P = np.eye(n) - np.outer(s, s) / (s @ s)
        Q = np.eye(n) - 1.0 / n
        return P @ (s[:, None] * (np.asarray(B_reg) / self.d)) @ Q

    def recovery_scale(self) -> float:
        """Spectral-norm factor ``max degree / d`` introduced by :meth:`recover`."""
        return float(self.degrees.max()) / self.d


def reduce_to_canonical(G: LabeledDigraph, d_target: int | None = None) -> list[Component]:
    """Split ``G`` into strongly connected components and regularize each."""
    if not is_eulerian(G):
        bad = int(np.flatnonzero(G.out_degree != G.in_degree)[0])
        raise NotEulerianError(f"graph is not Eulerian at vertex {bad}")
    out = []
    for verts in strongly_connected_components(G):
        sub = induced_subgraph(G, verts)
        deg = sub.out_degree
        if np.any(deg == 0):
            raise ValidationError(f"vertex {verts[0]} has no edges; the walk is undefined there")
        if len(verts) == 1:
            out.append(Component(verts, sub, None, int(deg[0]), deg))
            continue
        d = d_target if d_target is not None else default_degree(sub)
        out.append(Component(verts, sub, regularize(sub, d), d, deg))
    return out


# ---------------------------------------------------------------- certified solve


def entrywise_factor(L) -> dict:
    """Measured constants turning ``||I - B L||_{U_L}`` into an entrywise bound.

    ``lam_AFA`` bounds ``lambda_max(L^{+T} U_L L^+)`` by
    ``lambda_max(U_L) / sigma_min(L)^2``; ``lam_Fpinv`` is
    ``lambda_max(U_L^+)``.
    """
    n = L.shape[0]
    U = PSDMatrix(symmetrization(L))
    s = np.linalg.svd(L, compute_uv=False)
    pos = s[s > PSD_RTOL * n * np.finfo(float).eps * s[0]]
    sigma_min = float(pos[-1])
    lam_AFA = U.lambda_max / sigma_min**2
    lam_Fpinv = 1.0 / U.lambda_min_positive
    return {
        "U": U,
        "sigma_min": sigma_min,
        "lam_AFA": lam_AFA,
        "lam_Fpinv": lam_Fpinv,
        "factor": math.sqrt(lam_AFA * lam_Fpinv),
    }


def _base_delta(U: PSDMatrix, B, L) -> float:
    n = L.shape[0]
    return float(np.linalg.norm(U.sqrt() @ (np.eye(n) - B @ L) @ U.pinv_sqrt(), 2))


@dataclass
class SolveReport:
    pinv_estimate: np.ndarray
    richardson_iters: int
    residual_fnorm: float
    entrywise_bound: float
    chain_epsilons: list
    eps: float
    components: list = field(default_factory=list)

    def to_dict(self, include_matrix: bool = True) -> dict:
        out = {
            "richardson_iters": int(self.richardson_iters),
            "residual_fnorm": float(self.residual_fnorm),
            "entrywise_bound": float(self.entrywise_bound),
            "chain_epsilons": [[float(e) for e in c] for c in self.chain_epsilons],
            "eps": float(self.eps),
            "components": self.components,
        }
        if include_matrix:
            out["pinv_estimate"] = self.pinv_estimate.tolist()
        return out


def _check_eps(eps):
    if not (eps > 0) or not math.isfinite(eps):
        raise ValidationError("eps must be a positive finite number")
    if eps < MIN_EPS:
        raise ValidationError(f"eps={eps:g} is below the double-precision floor {MIN_EPS:g}")


def _component_chain(comp, k, mu, grid, budget, k_rule, k_cap):
    W0 = transition_matrix(comp.regular)
    if k == "auto" or k is None:
        kk = choose_k(W0, rule=k_rule, k_cap=k_cap, degree=comp.d)
    else:
        kk = int(k)
        if not 1 <= kk <= k_cap:
            raise ValidationError(f"k must lie in [1, {k_cap}]")
    return W0, build_chain(W0, kk, mu, graph=comp.regular, grid=grid, budget=budget)


def _lifted_richardson(lu, rhs_base, check, max_iter):
    """Run lifted Richardson on ``1 (x) rhs_base`` until ``check(x_base)`` passes.

    ``check`` returns ``(done, residual)``.  Returns ``(x_base, iters, history)``.
    """
    ell = lu.layers
    R = np.broadcast_to(rhs_base, (ell,) + rhs_base.shape).copy()
    X = lu.apply_pinv(R)
    history = []
    best = math.inf
    stall = 0
    for t in range(max_iter + 1):
        xb = X.sum(axis=0) / ell
        done, res = check(xb)
        history.append(res)
        if done:
            return xb, t, history
        if res < best * 0.999:
            best, stall = res, 0
        else:
            stall += 1
            if stall >= 3:
                break
        if t < max_iter:
            X = X + lu.apply_pinv(R - lu.apply_lifted_laplacian(X))
    raise BoundError(
        f"certificate stalled at residual {history[-1]:.3e} after {len(history) - 1} iterations"
    )


def _lifted_diagnostics(lu, chain):
    if lu.size > DENSE_LIFT_MAX:
        return None
    F = build_F(lu)
    E = np.eye(lu.size) - lu.dense_pinv() @ lu.dense_lifted_laplacian()
    return {
        "lifted_alpha": F.norm(E),
        "item1": [F.item1(i) for i in range(lu.k + 1)],
        "item2": F.item2(),
        "item2_bound": 1.0 / (40 * lu.k**2),
        "chain_total_epsilon": chain.total_epsilon,
    }


def solve_pinv(
    G: LabeledDigraph,
    eps: float = 1e-8,
    *,
    k="auto",
    mu: float | None = None,
    grid: int = 64,
    budget: float | None = 0.5,
    k_rule: str = "measured",
    k_cap: int = K_CAP,
    max_iter: int = 200,
    diagnostics: bool = False,
) -> SolveReport:
    """Entrywise ``eps``-accurate ``(I - W)^+`` for an Eulerian graph.

    Raises :class:`ChainBudgetError`, :class:`ConvergenceError` or
    :class:`BoundError` when the respective stage cannot be certified.
    """
    _check_eps(eps)
    comps = reduce_to_canonical(G)
    n = G.n
    out = np.zeros((n, n))
    iters, worst_delta, worst_bound = 0, 0.0, 0.0
    chain_eps, info = [], []
    for comp in comps:
        idx = np.asarray(comp.vertices)
        if comp.regular is None:
            # a lone vertex with self-loops: I - W = 0
            info.append({"vertices": comp.vertices, "k": 0, "iterations": 0})
            chain_eps.append([])
            continue
        W0, chain = _component_chain(comp, k, mu, grid, budget, k_rule, k_cap)
        lu = build_lu(chain)
        L = np.eye(comp.n) - W0
        const = entrywise_factor(L)
        scale = comp.recovery_scale() * const["factor"]
        target = eps / scale

        def check(B, U=const["U"], L=L, target=target):
            delta = _base_delta(U, B, L)
            return delta <= target, delta

        B, t, hist = _lifted_richardson(lu, np.eye(comp.n), check, max_iter)
        B = B - B.mean(axis=0, keepdims=True)
        B = B - B.mean(axis=1, keepdims=True)
        delta = hist[-1]
        bound = delta * scale
        out[np.ix_(idx, idx)] = comp.recover(B)
        iters = max(iters, t)
        worst_delta = max(worst_delta, delta)
        worst_bound = max(worst_bound, bound)
        chain_eps.append(chain.epsilons)
        rec = {
            "vertices": comp.vertices,
            "d": comp.d,
            "k": chain.k,
            "methods": [lv.method for lv in chain.levels],
            "iterations": t,
            "delta_history": hist,
            "sigma_min": const["sigma_min"],
            "entry_factor": scale,
        }
        if diagnostics:
            rec["lifted"] = _lifted_diagnostics(lu, chain)
        info.append(rec)
    return SolveReport(out, iters, worst_delta, worst_bound, chain_eps, eps, info)


@dataclass
class LaplacianSolve:
    x: np.ndarray
    error_bound: float
    iterations: int
    k: int


class LaplacianSolver:
    """Prepared solver for ``(D - A) x = b`` on a connected Eulerian graph.

    The chain and its factorization are built once; :meth:`solve` then costs
    a few lifted applications per right-hand side.
    """

    def __init__(
        self,
        G: LabeledDigraph,
        *,
        k="auto",
        mu: float | None = None,
        grid: int = 64,
        budget: float | None = 0.5,
        k_rule: str = "measured",
        k_cap: int = K_CAP,
        max_iter: int = 400,
    ):
        comps = reduce_to_canonical(G)
        if len(comps) != 1:
            raise ValidationError("graph is not strongly connected")
        self.n = G.n
        self.max_iter = max_iter
        self.comp = comp = comps[0]
        self.lu = self.chain = None
        if comp.regular is None:
            return
        W0, self.chain = _component_chain(comp, k, mu, grid, budget, k_rule, k_cap)
        self.lu = build_lu(self.chain)
        self.L = np.eye(comp.n) - W0
        s = np.linalg.svd(self.L, compute_uv=False)
        self.sigma_min = float(s[s > PSD_RTOL * comp.n * np.finfo(float).eps * s[0]][-1])

    @property
    def k(self) -> int:
        return 0 if self.chain is None else self.chain.k

    def solve(self, b, tol: float) -> LaplacianSolve:
        """``x`` with ``||x - (D - A)^+ b||_2 <= tol``; ``b`` must sum to zero.

        The returned ``error_bound`` is ``||b/d - L x|| / sigma_min(L)`` with
        ``L = (D - A)/d``.
        """
        b = np.asarray(b, dtype=float)
        if b.shape != (self.n,):
            raise ValidationError("right-hand side has the wrong length")
        if abs(b.sum()) > 1e-12 * max(1.0, np.abs(b).sum()):
            raise ValidationError("right-hand side must be orthogonal to the all-ones vector")
        if self.lu is None:
            return LaplacianSolve(np.zeros(self.n), 0.0, 0, 0)
        L, sigma_min = self.L, self.sigma_min
        # solve L y = b / d, so y solves (D - A) y = b
        rhs = ((b - b.mean()) / self.comp.d)[:, None]

        def check(y):
            y = y - y.mean()
            bound = np.linalg.norm(rhs - L @ y) / sigma_min
            return bound <= tol, bound

        y, t, hist = _lifted_richardson(self.lu, rhs, check, self.max_iter)
        y = y[:, 0] - y[:, 0].mean()
        return LaplacianSolve(y, hist[-1], t, self.k)


def solve_laplacian(G: LabeledDigraph, b, tol: float, **kw) -> LaplacianSolve:
    """One-shot :meth:`LaplacianSolver.solve`."""
    return LaplacianSolver(G, **kw).solve(b, tol)
