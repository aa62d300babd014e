"""Expanders and the derandomized square.

Expanders are undirected circulant graphs on ``N`` vertices.  Offsets come
in pairs ``(s, -s)`` and the label of ``+s`` is paired with the label of
``-s``, which gives an involutive rotation map.  Candidates are generated
deterministically (a 64-bit LCG seeded by ``(N, c, attempt)``); the degree
doubles whenever no candidate of the current degree meets ``mu``.  The
complete graph with loops (``c = N``, ``lambda = 0``) closes the search
when ``N`` is within the degree cap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ExpanderError, ValidationError
from .graph_core import LabeledDigraph, from_edge_list, from_rotation, transition_matrix
from .spectral import expansion_lambda

__all__ = [
    "Expander",
    "circulant_expander",
    "complete_expander",
    "circulant_lambda",
    "build_expander",
    "derandomized_square",
    "bip_graph",
    "bip_transition",
    "square_decomposition",
    "DerandPowerSequence",
    "iterated_derand_power",
    "DEFAULT_EDGE_CAP",
]

DEFAULT_EDGE_CAP = 10**7
DENSE_VERIFY_MAX = 2048
_LCG_A = 6364136223846793005
_LCG_C = 1442695040888963407
_ATTEMPTS = 8


@dataclass(frozen=True, eq=False)
class Expander:
    """A verified undirected ``c``-regular graph with ``lambda(H) <= mu``."""

    graph: LabeledDigraph
    mu: float
    lam: float
    c: int
    offsets: tuple
    method: str

    @property
    def num_vertices(self) -> int:
        return self.graph.n

    @property
    def is_complete(self) -> bool:
        return self.c == self.graph.n and sorted(self.offsets) == list(range(self.graph.n))


def _circulant(N: int, offsets, partner) -> LabeledDigraph:
    offsets = np.asarray(offsets, dtype=np.int64) % N
    partner = np.asarray(partner, dtype=np.int64)
    v = np.arange(N)[:, None]
    rv = (v + offsets[None, :]) % N
    rl = np.broadcast_to(partner[None, :], rv.shape)
    return from_rotation(rv, rl)


def circulant_expander(N: int, half_offsets) -> LabeledDigraph:
    """Circulant on offsets ``[h1, -h1, h2, -h2, ...]`` with paired labels."""
    offsets, partner = [], []
    for t, h in enumerate(half_offsets):
        offsets += [h % N, (-h) % N]
        partner += [2 * t + 1, 2 * t]
    return _circulant(N, offsets, partner)


def complete_expander(N: int) -> LabeledDigraph:
    """Complete graph with loops: label ``i`` is offset ``i``, paired with ``-i``."""
    offs = np.arange(N)
    return _circulant(N, offs, (-offs) % N)


def circulant_lambda(N: int, offsets) -> float:
    """Exact lambda of a symmetric circulant from its DFT eigenvalues."""
    ind = np.bincount(np.asarray(offsets, dtype=np.int64) % N, minlength=N).astype(float)
    ev = np.fft.fft(ind) / len(offsets)
    return float(np.abs(ev[1:]).max()) if N > 1 else 0.0


def _candidate_offsets(N: int, c: int, attempt: int) -> list[int]:
    x = (N * 1000003 + c * 8191 + attempt * 131071 + 12345) % (1 << 64)
    half = []
    for _ in range(c // 2):
        x = (x * _LCG_A + _LCG_C) % (1 << 64)
        half.append(int((x >> 33) % N))
    return half


def _verify(H: LabeledDigraph, offsets) -> tuple[float, str]:
    if H.n <= DENSE_VERIFY_MAX:
        return expansion_lambda(transition_matrix(H)), "dense"
    return circulant_lambda(H.n, offsets), "fourier"


def build_expander(num_vertices: int, mu: float, max_degree: int = 64) -> Expander:
    """Smallest-degree verified circulant with ``lambda(H) <= mu``.

    Degrees tried are ``2, 4, 8, ...`` below ``num_vertices`` and at most
    ``max_degree``; the complete graph with loops is the last candidate when
    ``num_vertices <= max_degree``.  Raises :class:`ExpanderError` with the
    best lambda seen when nothing qualifies.
    """
    N = int(num_vertices)
    if N < 2:
        raise ValidationError("expander needs at least 2 vertices")
    if not 0 < mu < 1:
        raise ValidationError("mu must lie in (0, 1)")
    best = (np.inf, None)
    c = 2
    while c < N and c <= max_degree:
        for attempt in range(_ATTEMPTS):
            half = _candidate_offsets(N, c, attempt)
            full = [s for h in half for s in (h % N, (-h) % N)]
            if circulant_lambda(N, full) > mu:
                best = min(best, (circulant_lambda(N, full), c), key=lambda t: t[0])
                continue
            H = circulant_expander(N, half)
            lam, how = _verify(H, full)
            if lam <= mu:
                return Expander(H, float(mu), lam, c, tuple(full), how)
        c *= 2
    if N <= max_degree:
        H = complete_expander(N)
        lam, how = _verify(H, list(range(N)))
        return Expander(H, float(mu), lam, N, tuple(range(N)), how)
    raise ExpanderError(
        f"no expander on {N} vertices with lambda <= {mu} and degree <= {max_degree}"
        f" (best lambda {best[0]:.4g} at degree {best[1]})"
    )


def derandomized_square(G: LabeledDigraph, H) -> LabeledDigraph:
    """``G (s) H``: ``c d``-regular, label ``(i0, j0)`` encoded as ``i0 * c + j0``.

    ``(v1, i1) = Rot_G(v0, i0)``, ``(i2, j1) = Rot_H(i1, j0)``,
    ``(v2, i3) = Rot_G(v1, i2)``; the result is ``(v2, (i3, j1))``.
    """
    Hg = H.graph if isinstance(H, Expander) else H
    d = G.d
    if d is None:
        raise ValidationError("derandomized square needs a regular graph")
    if Hg.n != d:
        raise ValidationError(f"expander has {Hg.n} vertices but G has degree {d}")
    c = Hg.d
    if c is None:
        raise ValidationError("expander must be regular")
    gv, gl = G.rotation_table()
    hv, hl = Hg.rotation_table()
    v1 = gv[:, :, None]                      # (n, d, 1)
    i1 = gl[:, :, None]
    i2 = hv[i1, np.arange(c)[None, None, :]]  # (n, d, c)
    j1 = hl[i1, np.arange(c)[None, None, :]]
    v2 = gv[np.broadcast_to(v1, i2.shape), i2]
    i3 = gl[np.broadcast_to(v1, i2.shape), i2]
    n = G.n
    return from_rotation(v2.reshape(n, d * c), (i3 * c + j1).reshape(n, d * c))


def bip_graph(H) -> LabeledDigraph:
    """Bipartite digraph on ``2d`` vertices: left ``j`` to right ``k`` per edge of ``H``."""
    Hg = H.graph if isinstance(H, Expander) else H
    d = Hg.n
    edges = [(u, d + v, m) for u, v, m in Hg.edges()]
    return from_edge_list(2 * d, edges)


def bip_transition(H) -> np.ndarray:
    """``[[0, 0], [B, 0]]`` with ``B`` the transition matrix of ``H``."""
    return transition_matrix(bip_graph(H), allow_sinks=True)


def square_decomposition(G: LabeledDigraph, H) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-vertex incidence blocks of the derandomized square.

    Returns ``(P, Q, B)`` with ``P[v, j, w] = 1`` when the ``j``-th edge
    entering ``v`` comes from ``w``, ``Q[v, j, w] = 1`` when the ``j``-th edge
    leaving ``v`` goes to ``w``, and ``B`` the transition matrix of ``H``, so
    that the square's transition matrix is ``(1/d) sum_v Q[v]^T B P[v]``.
    """
    Hg = H.graph if isinstance(H, Expander) else H
    d = G.d
    if d is None or Hg.n != d:
        raise ValidationError("need a d-regular G and an expander on d vertices")
    n = G.n
    gv, gl = G.rotation_table()
    P = np.zeros((n, d, n))
    Q = np.zeros((n, d, n))
    tails = np.repeat(np.arange(n), d)
    P[gv.ravel(), gl.ravel(), tails] = 1.0
    Q[tails, np.tile(np.arange(d), n), gv.ravel()] = 1.0
    return P, Q, transition_matrix(Hg)


@dataclass(eq=False)
class DerandPowerSequence:
    """Iterated derandomized squares ``G_i = G_{i-1} (s) H_i``.

    ``graphs[i]`` is ``G_i`` when it was materialized (``graphs[0] = G_0``)
    and ``None`` past the edge cap; :meth:`rotation` evaluates any level by
    recursion on ``G_0`` and the expanders.
    """

    base: LabeledDigraph
    expanders: list
    graphs: list
    degrees: list
    _memo: dict = field(default_factory=dict, repr=False)

    @property
    def k(self) -> int:
        return len(self.expanders)

    def rotation(self, level: int, v: int, label: int) -> tuple[int, int]:
        if not 0 <= level <= self.k:
            raise ValidationError(f"level {level} out of range")
        if not 0 <= label < self.degrees[level]:
            raise ValidationError(f"label {label} out of range at level {level}")
        if level == 0:
            return int(self.base.rot_vertex[self.base.out_ptr[v] + label]), int(
                self.base.rot_label[self.base.out_ptr[v] + label]
            )
        Hg = self.expanders[level - 1].graph
        c = Hg.d
        i0, j0 = divmod(label, c)
        v1, i1 = self.rotation(level - 1, v, i0)
        pos = Hg.out_ptr[i1] + j0
        i2, j1 = int(Hg.rot_vertex[pos]), int(Hg.rot_label[pos])
        v2, i3 = self.rotation(level - 1, v1, i2)
        return v2, i3 * c + j1

    def transition_matrix(self, level: int) -> np.ndarray:
        G = self.graphs[level]
        if G is not None:
            return transition_matrix(G)
        n, deg = self.base.n, self.degrees[level]
        W = np.zeros((n, n))
        for v in range(n):
            for lab in range(deg):
                W[self.rotation(level, v, lab)[0], v] += 1.0
        return W / deg

    def lambdas(self) -> list[float]:
        return [expansion_lambda(self.transition_matrix(i)) for i in range(self.k + 1)]


def iterated_derand_power(
    G0: LabeledDigraph, k: int, mu: float, edge_cap: int = DEFAULT_EDGE_CAP, max_degree: int = 64
) -> DerandPowerSequence:
    """Build ``k`` levels of derandomized squaring with expanders of quality ``mu``."""
    d = G0.d
    if d is None:
        raise ValidationError("G0 must be regular")
    graphs, expanders, degrees = [G0], [], [d]
    G = G0
    for _ in range(k):
        H = build_expander(degrees[-1], mu, max_degree=max_degree)
        expanders.append(H)
        degrees.append(degrees[-1] * H.c)
        if G is not None and G0.n * degrees[-1] <= edge_cap:
            G = derandomized_square(G, H)
        else:
            G = None
        graphs.append(G)
    return DerandPowerSequence(G0, expanders, graphs, degrees)
