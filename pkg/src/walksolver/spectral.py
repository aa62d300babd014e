"""Approximation notions between walk matrices and the expansion lambda(G).

Every notion reduces to a norm of the form ``||M^{+/2} (W~ - W) N^{+/2}||``
together with kernel containments; ``epsilon = inf`` (and
``kernel_ok = False``) whenever a containment fails.  The unit-circle
supremum is only evaluated on a finite set of ``z`` values, so the reported
value is a lower bound on the true supremum.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import InadmissibleError, ValidationError

__all__ = [
    "symmetrization",
    "PSDMatrix",
    "pinv_sqrt",
    "ApproxReport",
    "directed_approx_epsilon",
    "unit_circle_approx_epsilon",
    "min_approx_epsilon",
    "roots_of_unity",
    "expansion_lambda",
    "power_iteration_lambda",
    "unit_eigenspace_check",
    "KERNEL_RTOL",
    "PSD_RTOL",
]

KERNEL_RTOL = 1e-10
PSD_RTOL = 100.0
_ADMISSIBLE_SLACK = 1e-12


def symmetrization(A) -> np.ndarray:
    """``U_A = (A + A^*) / 2``."""
    A = np.asarray(A)
    return (A + A.conj().T) / 2


class PSDMatrix:
    """Hermitian PSD matrix with a cached eigendecomposition.

    Eigenvalues at or below ``tau = tol * lambda_max`` (default
    ``tol = 100 * n * machine_eps``) are treated as zero.  The factor 100
    absorbs the backward error of the eigensolver, which already puts an
    exact zero eigenvalue of a 2 x 2 Laplacian above ``n * machine_eps``.
    When ``scale`` is given the cutoff is ``tol * max(lambda_max, scale)``,
    so a matrix that is zero up to rounding of its inputs (``scale`` is the
    magnitude of those inputs) has an empty range.  An eigenvalue below
    ``-1000 * tau`` means the input is not PSD.
    """

    def __init__(self, U, tol: float | None = None, scale: float = 0.0):
        U = np.asarray(U)
        if U.ndim != 2 or U.shape[0] != U.shape[1]:
            raise ValidationError("PSD matrix must be square")
        U = symmetrization(U)
        self.n = U.shape[0]
        self.matrix = U
        w, V = np.linalg.eigh(U)
        top = float(np.abs(w).max()) if self.n else 0.0
        rel = PSD_RTOL * self.n * np.finfo(float).eps if tol is None else tol
        self.tau = rel * max(top, scale)
        if self.n and w[0] < -1000 * max(self.tau, np.finfo(float).tiny):
            raise InadmissibleError(f"matrix is not PSD: eigenvalue {w[0]:.3e}")
        self.eigenvalues = np.where(w > self.tau, w, 0.0)
        self.eigenvectors = V

    @property
    def positive(self) -> np.ndarray:
        return self.eigenvalues > 0

    @property
    def kernel(self) -> np.ndarray:
        return self.eigenvectors[:, ~self.positive]

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1]) if self.n else 0.0

    @property
    def lambda_min_positive(self) -> float:
        pos = self.eigenvalues[self.positive]
        return float(pos[0]) if pos.size else 0.0

    def _apply(self, f) -> np.ndarray:
        V = self.eigenvectors[:, self.positive]
        return (V * f(self.eigenvalues[self.positive])) @ V.conj().T

    def sqrt(self) -> np.ndarray:
        return self._apply(np.sqrt)

    def pinv_sqrt(self) -> np.ndarray:
        return self._apply(lambda w: 1.0 / np.sqrt(w))

    def pinv(self) -> np.ndarray:
        return self._apply(lambda w: 1.0 / w)

    def projection(self) -> np.ndarray:
        return self._apply(np.ones_like)


def pinv_sqrt(U, tol: float | None = None) -> np.ndarray:
    """Pseudoinverse of the square root of a PSD matrix."""
    return PSDMatrix(U, tol).pinv_sqrt()


@dataclass(frozen=True)
class ApproxReport:
    notion: str
    epsilon: float
    z_witness: complex
    kernel_ok: bool
    grid_size: int

    def to_dict(self) -> dict:
        eps = self.epsilon if math.isfinite(self.epsilon) else None
        return {
            "notion": self.notion,
            "epsilon": eps,
            "z_re": float(self.z_witness.real),
            "z_im": float(self.z_witness.imag),
            "kernel_ok": bool(self.kernel_ok),
            "grid_size": int(self.grid_size),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _square_pair(Wt, W):
    Wt = np.asarray(Wt)
    W = np.asarray(W)
    if W.ndim != 2 or W.shape[0] != W.shape[1] or Wt.shape != W.shape:
        raise ValidationError(f"need two square matrices of equal size, got {Wt.shape} and {W.shape}")
    return Wt, W


def _kernel_ok(K, D, floor: float = 0.0) -> bool:
    """``D K = 0`` up to ``KERNEL_RTOL * ||D||``; a ``D`` below ``floor`` counts as zero."""
    if K.shape[1] == 0:
        return True
    scale = np.linalg.norm(D, 2)
    if scale <= floor:
        return True
    return bool(np.linalg.norm(D @ K, 2) <= KERNEL_RTOL * scale)


def _mixed_norm(Pm: PSDMatrix, D, Pn: PSDMatrix, floor: float = 0.0) -> float:
    """``||M^{+/2} D N^{+/2}||`` or ``inf`` when the kernels do not nest.

    Needs ``ker M subset ker D^*`` and ``ker N subset ker D``.
    """
    if not (_kernel_ok(Pm.kernel, D.conj().T, floor) and _kernel_ok(Pn.kernel, D, floor)):
        return math.inf
    return float(np.linalg.norm(Pm.pinv_sqrt() @ D @ Pn.pinv_sqrt(), 2))


def _input_scale(*Ms) -> float:
    """Magnitude of ``I - W`` style inputs, for absolute rounding floors."""
    return 1.0 + max(float(np.abs(M).sum(axis=0).max()) if M.size else 0.0 for M in Ms)


def _floor(n, scale) -> float:
    return PSD_RTOL * max(n, 1) * np.finfo(float).eps * scale


def _directed_value(Wt, W, z=1.0) -> float:
    n = W.shape[0]
    scale = _input_scale(Wt, W)
    P = PSDMatrix(np.eye(n) - z * W, scale=scale)
    return _mixed_norm(P, z * (Wt - W), P, _floor(n, scale))


def directed_approx_epsilon(W_tilde, W) -> ApproxReport:
    """Smallest ``eps`` with ``W_tilde`` a directed ``eps``-approximation of ``W``."""
    Wt, W = _square_pair(W_tilde, W)
    eps = _directed_value(Wt, W)
    return ApproxReport("directed", eps, complex(1.0), math.isfinite(eps), 1)


def roots_of_unity(k: int) -> np.ndarray:
    return np.exp(2j * np.pi * np.arange(k) / k)


def _check_admissible(W, name):
    a1 = np.abs(W).sum(axis=0).max()
    ainf = np.abs(W).sum(axis=1).max()
    if a1 > 1 + _ADMISSIBLE_SLACK or ainf > 1 + _ADMISSIBLE_SLACK:
        raise InadmissibleError(
            f"{name} needs ||.||_1 <= 1 and ||.||_inf <= 1 (got {a1:.6g}, {ainf:.6g})"
        )


def unit_circle_approx_epsilon(
    W_tilde, W, grid_size: int = 64, extra_z=(), refine: bool = False
) -> ApproxReport:
    """Maximum of the directed epsilon of ``(z W~, z W)`` over sampled ``z``.

    The samples are the ``grid_size``-th roots of unity followed by
    ``extra_z``.  With ``refine=True`` a bounded scalar search between the
    neighbours of the best grid angle may raise the value further.  The
    witness is the first ``z`` (in that order) attaining the maximum.
    """
    Wt, W = _square_pair(W_tilde, W)
    _check_admissible(W, "W")
    _check_admissible(Wt, "W_tilde")
    if grid_size < 1:
        raise ValidationError("grid_size must be positive")
    zs = list(roots_of_unity(grid_size))
    for z in extra_z:
        z = complex(z)
        if abs(abs(z) - 1) > 1e-12:
            raise ValidationError(f"extra z {z} is not on the unit circle")
        zs.append(z)

    best, witness = -1.0, complex(1.0)
    for z in zs:
        val = _directed_value(Wt, W, z)
        if not math.isfinite(val):
            return ApproxReport("unit_circle", math.inf, complex(z), False, grid_size)
        if val > best:
            best, witness = val, complex(z)

    if refine and grid_size > 1:
        theta0 = float(np.angle(witness))
        h = 2 * np.pi / grid_size
        res = minimize_scalar(
            lambda t: -_directed_value(Wt, W, np.exp(1j * t)),
            bounds=(theta0 - h, theta0 + h),
            method="bounded",
            options={"xatol": 1e-12},
        )
        if math.isfinite(res.fun) and -res.fun > best:
            best, witness = float(-res.fun), complex(np.exp(1j * res.x))
    return ApproxReport("unit_circle", best, witness, True, grid_size)


def min_approx_epsilon(W_tilde, W) -> ApproxReport:
    """Smallest ``eps`` for the min-approximation (both quadratic forms).

    Exactly ``max(||M^{+/2} D N^{+/2}||, ||N^{+/2} D M^{+/2}||)`` with
    ``M = U_{I-W}``, ``N = U_{I-W~}``, ``D = W~ - W``.
    """
    Wt, W = _square_pair(W_tilde, W)
    n = W.shape[0]
    scale = _input_scale(Wt, W)
    Pm = PSDMatrix(np.eye(n) - W, scale=scale)
    Pn = PSDMatrix(np.eye(n) - Wt, scale=scale)
    D = Wt - W
    fl = _floor(n, scale)
    eps = max(_mixed_norm(Pm, D, Pn, fl), _mixed_norm(Pn, D, Pm, fl))
    return ApproxReport("min", eps, complex(1.0), math.isfinite(eps), 1)


def _regular_check(W):
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValidationError("transition matrix must be square")
    if np.abs(W.sum(axis=0) - 1).max() > 1e-10 or np.abs(W.sum(axis=1) - 1).max() > 1e-10:
        raise ValidationError("lambda(G) needs a doubly stochastic (regular) transition matrix")
    return W


def expansion_lambda(W) -> float:
    """``max_{v perp 1} ||W v|| / ||v||`` for a regular transition matrix."""
    W = _regular_check(W)
    n = W.shape[0]
    Pi = np.eye(n) - np.full((n, n), 1.0 / n)
    return float(min(1.0, np.linalg.norm(W @ Pi, 2)))


def power_iteration_lambda(
    W, tol: float = 1e-13, max_iter: int = 200000, seed: int = 0
) -> tuple[float, int]:
    """Power iteration on ``M = (W P)^T (W P)`` with ``P`` projecting out ``1``.

    Returns ``(lambda, iterations)``.  Stops when the eigen-residual
    ``||M x - r x||`` of the Rayleigh quotient ``r`` drops below ``tol``.
    """
    W = _regular_check(W)
    n = W.shape[0]
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    x -= x.mean()
    nx = np.linalg.norm(x)
    if n < 2 or nx == 0:
        return 0.0, 0
    x /= nx
    ray = 0.0
    for it in range(1, max_iter + 1):
        y = W @ x
        y -= y.mean()
        ray = float(y @ y)
        Mx = W.T @ y
        Mx -= Mx.mean()
        if np.linalg.norm(Mx - ray * x) <= tol:
            break
        nx = np.linalg.norm(Mx)
        if nx == 0:
            return 0.0, it
        x = Mx / nx
    return math.sqrt(max(ray, 0.0)), it


def _eigenspace(M, lam, tol=1e-8) -> np.ndarray:
    n = M.shape[0]
    _, s, Vh = np.linalg.svd(M - lam * np.eye(n))
    return Vh[s <= tol * max(1.0, s[0] if s.size else 1.0)].conj().T


def unit_eigenspace_check(W_tilde, W, lambda_val) -> bool:
    """True iff the ``lambda_val``-eigenspace of ``W`` lies in that of ``W_tilde``.

    Containment is measured by the largest principal angle (sine) between
    the two subspaces, tolerance ``1e-8``.
    """
    Wt, W = _square_pair(W_tilde, W)
    lam = complex(lambda_val)
    if abs(abs(lam) - 1) > 1e-12:
        raise ValidationError("lambda_val must have unit modulus")
    V = _eigenspace(W.astype(complex), lam)
    if V.shape[1] == 0:
        return True
    Vt = _eigenspace(Wt.astype(complex), lam)
    if Vt.shape[1] == 0:
        return False
    resid = V - Vt @ (Vt.conj().T @ V)
    return bool(np.linalg.norm(resid, 2) <= 1e-8)
