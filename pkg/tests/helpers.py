"""Random instance generators and brute-force reference computations.

The reference routines deliberately avoid the package's own numerics:
pseudoinverses come from SVD, epsilons from generalized Hermitian
eigenproblems, powers from repeated multiplication.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from walksolver.graph_core import from_adjacency, from_edge_list


# ---------------------------------------------------------------- generators


def random_eulerian(rng, n, max_deg=8, max_mult=4, extra=None):
    """Strongly connected Eulerian multigraph: a Hamiltonian cycle plus random cycles."""
    A = np.zeros((n, n), dtype=np.int64)
    perm = rng.permutation(n)
    for i in range(n):
        A[perm[(i + 1) % n], perm[i]] += 1
    tries = 3 * n if extra is None else extra
    for _ in range(tries):
        length = int(rng.integers(1, n + 1))
        cyc = rng.choice(n, length, replace=False)
        B = A.copy()
        for i in range(length):
            B[cyc[(i + 1) % length], cyc[i]] += 1
        if B.sum(axis=0).max() <= max_deg and B.max() <= max_mult:
            A = B
    return from_adjacency(A)


def random_regular(rng, n, d, loops=True):
    """``d``-regular strongly connected digraph as a union of ``d`` permutations.

    One permutation is a Hamiltonian cycle; with ``loops`` another is the
    identity so the walk is aperiodic.
    """
    perm = rng.permutation(n)
    perms = [np.roll(perm, -1)[np.argsort(perm)]]
    if loops and d > 1:
        perms.append(np.arange(n))
    while len(perms) < d:
        perms.append(rng.permutation(n))
    edges = [(v, int(p[v])) for p in perms for v in range(n)]
    return from_edge_list(n, edges)


def random_doubly_stochastic(rng, n, terms=4, lazy=0.3):
    """Convex combination of permutations with a lazy identity part."""
    W = lazy * np.eye(n)
    wts = rng.dirichlet(np.ones(terms)) * (1 - lazy)
    for w in wts:
        W += w * np.eye(n)[:, rng.permutation(n)]
    # one cyclic shift keeps it irreducible
    return 0.9 * W + 0.1 * np.roll(np.eye(n), 1, axis=0)


def random_substochastic(rng, n, low=0.6):
    W = rng.random((n, n)) * (rng.random((n, n)) < 0.7)
    W += 1e-3
    return W / W.sum(axis=0) * rng.uniform(low, 1.0, n)


def scaled_pair(W, W2, measure, target):
    """``W~ = (1 - t) W + t W2`` with ``measure(W~, W) == target`` (linear in ``t``)."""
    base = measure(W2, W)
    t = target / base
    return (1 - t) * W + t * W2, t


# ---------------------------------------------------------------- oracles


def dense_pinv(M):
    return np.linalg.pinv(M, rcond=1e-13)


def dense_power(W, k):
    out = np.eye(W.shape[0])
    for _ in range(k):
        out = out @ W
    return out


def absorbing_escape(W, u, v):
    """``P[hit u before v]`` from every vertex, by deleting ``u, v`` and solving."""
    n = W.shape[0]
    T = [i for i in range(n) if i not in (u, v)]
    P = W.T  # row-stochastic
    Q = P[np.ix_(T, T)]
    h = np.linalg.solve(np.eye(len(T)) - Q, P[T, u])
    out = np.zeros(n)
    out[T] = h
    out[u] = 1.0
    return out


def _range_basis(U, rtol=1e-10):
    # inputs are built from O(1) walk matrices, so the cutoff has an absolute floor
    u, s, _ = np.linalg.svd(U)
    keep = s > rtol * max(s[0], 1.0)
    return u[:, keep], u[:, ~keep]


def mixed_epsilon(M, D, N):
    """``sup |x* D y| / sqrt(x* M x  y* N y)`` by a generalized eigenproblem.

    Returns ``inf`` when the kernels of ``M`` / ``N`` are not annihilated.
    """
    Vm, Km = _range_basis(M)
    Vn, Kn = _range_basis(N)
    scale = np.abs(D).max()
    if scale <= 1e-13:
        return 0.0
    if Km.size and np.abs(D.conj().T @ Km).max() > 1e-9 * scale:
        return np.inf
    if Kn.size and np.abs(D @ Kn).max() > 1e-9 * scale:
        return np.inf
    Mr = Vm.conj().T @ M @ Vm
    Nr = Vn.conj().T @ N @ Vn
    Dr = Vm.conj().T @ D @ Vn
    # sup over y of |x* D y|^2 / (y* N y) = x* D N^-1 D* x
    G = Dr @ np.linalg.solve(Nr, Dr.conj().T)
    G = (G + G.conj().T) / 2
    Mr = (Mr + Mr.conj().T) / 2
    top = sla.eigh(G, Mr, eigvals_only=True)[-1]
    return float(np.sqrt(max(top, 0.0)))


def sym(A):
    return (A + A.conj().T) / 2


def directed_eps_oracle(Wt, W, z=1.0):
    n = W.shape[0]
    U = sym(np.eye(n) - z * W)
    return mixed_epsilon(U, z * (Wt - W), U)


def unit_circle_oracle(Wt, W, zs):
    return max(directed_eps_oracle(Wt, W, z) for z in zs)


def min_eps_oracle(Wt, W):
    n = W.shape[0]
    M = sym(np.eye(n) - W)
    N = sym(np.eye(n) - Wt)
    D = Wt - W
    return max(mixed_epsilon(M, D, N), mixed_epsilon(N, D, M))


def circulant_eigs(first_col):
    return np.fft.fft(first_col)


def circulant_directed_eps(ct, c, z=1.0):
    """Directed epsilon of two circulants from their Fourier eigenvalues."""
    lt, l = circulant_eigs(ct), circulant_eigs(c)
    num = np.abs(z * (lt - l))
    den = 1 - np.real(z * l)
    out = 0.0
    for a, b in zip(num, den):
        if b <= 1e-12:
            if a > 1e-12:
                return np.inf
            continue
        out = max(out, a / b)
    return out


def lambda_oracle(W):
    n = W.shape[0]
    return float(np.linalg.svd(W - np.full((n, n), 1.0 / n), compute_uv=False)[0])


def schur_oracle(M, C):
    C = sorted(C)
    F = [i for i in range(M.shape[0]) if i not in C]
    Minv_FF = np.linalg.inv(M[np.ix_(F, F)])
    return M[np.ix_(C, C)] - M[np.ix_(C, F)] @ Minv_FF @ M[np.ix_(F, C)]


def cycle4():
    C = np.zeros((4, 4))
    for a in range(4):
        C[(a + 1) % 4, a] = 1
    return C
