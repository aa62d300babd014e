"""Cycle and path lifts, Schur complements and shortcutting.

Lifted vectors are stored layer-major: index ``a * n + v`` is vertex ``v``
in layer ``a``.  ``cycle_matrix(k)`` moves layer ``a`` to ``a + 1``;
``recursive_cycle_matrix(2**t)`` is the same cycle relabeled so that the
second half of the layers is the set kept by one Schur-complement step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .spectral import (
    directed_approx_epsilon,
    min_approx_epsilon,
    roots_of_unity,
    _directed_value,
)

__all__ = [
    "kron",
    "cycle_matrix",
    "recursive_cycle_matrix",
    "recursive_cycle_perm",
    "path_matrix",
    "LiftedMatrix",
    "schur_complement",
    "shortcut_power",
    "schur_bound",
    "SchurCheck",
    "schur_approx_check",
    "CycleLiftCheck",
    "cycle_lift_approx_check",
    "path_lift_inverse",
]


def kron(A, B) -> np.ndarray:
    return np.kron(A, B)


def cycle_matrix(k: int) -> np.ndarray:
    """Permutation matrix of the directed ``k``-cycle, ``e_a -> e_{a+1}``."""
    C = np.zeros((k, k))
    C[(np.arange(k) + 1) % k, np.arange(k)] = 1.0
    return C


def recursive_cycle_perm(size: int) -> np.ndarray:
    """``perm`` with ``(C x)[a] = x[perm[a]]`` for the recursive cycle.

    ``C_1 = [1]`` and ``C_{2m} = [[0, C_m], [I_m, 0]]``.
    """
    if size < 1 or size & (size - 1):
        raise ValidationError(f"recursive cycle size must be a power of two, got {size}")
    perm = np.zeros(1, dtype=np.int64)
    m = 1
    while m < size:
        # top half reads the bottom half through C_m; bottom half copies the top
        perm = np.concatenate([m + perm, np.arange(m)])
        m *= 2
    return perm


def recursive_cycle_matrix(size: int) -> np.ndarray:
    perm = recursive_cycle_perm(size)
    C = np.zeros((size, size))
    C[np.arange(size), perm] = 1.0
    return C


def path_matrix(k: int) -> np.ndarray:
    """``k x k`` directed path, ones just below the diagonal (nilpotent)."""
    return np.eye(k, k, -1)


@dataclass(frozen=True)
class LiftedMatrix:
    """``C_k (x) W`` (kind ``cycle``) or ``P_k (x) W`` (kind ``path``)."""

    base: np.ndarray
    length: int
    kind: str = "cycle"

    def __post_init__(self):
        if self.kind not in ("cycle", "path"):
            raise ValidationError(f"unknown lift kind {self.kind!r}")

    @property
    def layer_matrix(self) -> np.ndarray:
        return cycle_matrix(self.length) if self.kind == "cycle" else path_matrix(self.length)

    def dense(self) -> np.ndarray:
        return np.kron(self.layer_matrix, self.base)

    def matvec(self, x) -> np.ndarray:
        n = self.base.shape[0]
        X = np.asarray(x).reshape(self.length, n, -1)
        Y = np.einsum("ij,ajr->air", self.base, X)
        out = np.zeros_like(Y)
        out[1:] = Y[:-1]
        if self.kind == "cycle":
            out[0] = Y[-1]
        return out.reshape(np.shape(x))


def schur_complement(M, C_set, return_cond: bool = False):
    """``M_CC - M_CF M_FF^{-1} M_FC`` where ``F`` is the complement of ``C``.

    With ``return_cond`` also returns the 2-norm condition number of ``M_FF``.
    """
    M = np.asarray(M)
    n = M.shape[0]
    C = np.asarray(sorted(set(int(c) for c in C_set)), dtype=np.int64)
    if C.size and (C.min() < 0 or C.max() >= n):
        raise ValidationError("C_set index out of range")
    F = np.setdiff1d(np.arange(n), C)
    if F.size == 0:
        S, cond = M[np.ix_(C, C)].copy(), 1.0
    else:
        MFF = M[np.ix_(F, F)]
        cond = float(np.linalg.cond(MFF))
        if not np.isfinite(cond) or cond > 1e14:
            raise ValidationError(f"M_FF is singular (condition number {cond:.3e})")
        S = M[np.ix_(C, C)] - M[np.ix_(C, F)] @ np.linalg.solve(MFF, M[np.ix_(F, C)])
    return (S, cond) if return_cond else S


def shortcut_power(W, k: int) -> np.ndarray:
    """``I - Sc(I - C_k (x) W, first layer)``, checked against ``W^k``."""
    W = np.asarray(W)
    n = W.shape[0]
    if k < 1:
        raise ValidationError("k must be at least 1")
    L = np.eye(k * n) - np.kron(cycle_matrix(k), W)
    out = np.eye(n) - schur_complement(L, range(n))
    ref = np.linalg.matrix_power(W, k)
    if np.abs(out - ref).max() > 1e-10 * max(1.0, np.abs(ref).max()):
        raise ValidationError("shortcut identity failed; interior block is ill-conditioned")
    return out


def schur_bound(eps: float) -> float:
    """Loss factor of a directed approximation under Schur complements."""
    if not 0 <= eps < 2 / 3:
        return float("inf")
    return eps / (1 - 1.5 * eps)


@dataclass(frozen=True)
class SchurCheck:
    holds: bool
    measured: float
    bound: float
    input_epsilon: float
    cond: float
    notion: str


def schur_approx_check(W_tilde, W, C_set, eps: float | None = None, notion: str = "directed") -> SchurCheck:
    """Compare shortcut matrices ``I - Sc(I - ., C)`` of an approximating pair.

    ``notion='directed'`` checks ``measured <= eps / (1 - 3 eps / 2) + 1e-9``;
    ``notion='min'`` checks the lossless ``measured <= eps + 1e-9``.  When
    ``eps`` is omitted the measured epsilon of the input pair is used.
    """
    Wt, W = np.asarray(W_tilde), np.asarray(W)
    n = W.shape[0]
    measure = {"directed": directed_approx_epsilon, "min": min_approx_epsilon}.get(notion)
    if measure is None:
        raise ValidationError(f"unknown notion {notion!r}")
    if eps is None:
        eps = measure(Wt, W).epsilon
    I = np.eye(n)
    St, c1 = schur_complement(I - Wt, C_set, return_cond=True)
    S, c2 = schur_complement(I - W, C_set, return_cond=True)
    k = S.shape[0]
    measured = measure(np.eye(k) - St, np.eye(k) - S).epsilon
    bound = schur_bound(eps) if notion == "directed" else eps
    return SchurCheck(bool(measured <= bound + 1e-9), measured, bound, eps, max(c1, c2), notion)


@dataclass(frozen=True)
class CycleLiftCheck:
    lift_epsilon: float
    root_epsilons: tuple
    max_root_epsilon: float
    agree: bool


def cycle_lift_approx_check(W_tilde, W, k: int) -> CycleLiftCheck:
    """Directed epsilon of ``C_k`` lifts against per-root epsilons."""
    Wt, W = np.asarray(W_tilde), np.asarray(W)
    C = cycle_matrix(k)
    lift = directed_approx_epsilon(np.kron(C, Wt), np.kron(C, W)).epsilon
    roots = tuple(_directed_value(Wt, W, z) for z in roots_of_unity(k))
    top = max(roots)
    if np.isinf(lift) or np.isinf(top):
        agree = bool(np.isinf(lift) and np.isinf(top))
    else:
        agree = bool(abs(lift - top) <= 1e-9)
    return CycleLiftCheck(lift, roots, top, agree)


def path_lift_inverse(W, k: int) -> np.ndarray:
    """``(I - P_k (x) W)^{-1}``, whose block ``(l, j)`` is ``W^{l-j}`` for ``l >= j``."""
    W = np.asarray(W)
    n = W.shape[0]
    if k < 1:
        raise ValidationError("k must be at least 1")
    out = np.zeros((k * n, k * n), dtype=np.result_type(W, float))
    P = np.eye(n)
    for step in range(k):
        for j in range(k - step):
            l = j + step
            out[l * n:(l + 1) * n, j * n:(j + 1) * n] = P
        P = P @ W
    return out
