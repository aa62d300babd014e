"""Directed multigraphs with two-way edge labelings.

A :class:`LabeledDigraph` stores its rotation map in CSR form: the
outgoing slots of vertex ``v`` occupy positions ``out_ptr[v]:out_ptr[v+1]``
of ``rot_vertex`` / ``rot_label``.  Slot ``i`` of ``v`` leads to
``rot_vertex[out_ptr[v] + i]`` and arrives there as incoming slot
``rot_label[out_ptr[v] + i]``.

Matrices follow the column convention: ``A[i, j]`` counts edges ``j -> i``
and the transition matrix is ``W = A D^{-1}``, so column ``j`` holds the
one-step distribution out of ``j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import NotEulerianError, ValidationError

__all__ = [
    "LabeledDigraph",
    "from_edge_list",
    "from_rotation",
    "from_adjacency",
    "rotation_map",
    "transition_matrix",
    "laplacian",
    "random_walk_laplacian",
    "is_eulerian",
    "default_degree",
    "regularize",
    "strongly_connected_components",
    "stationary_distribution",
    "reverse",
    "induced_subgraph",
    "directed_cycle",
    "complete_graph",
]


@dataclass(frozen=True, eq=False)
class LabeledDigraph:
    """Immutable directed multigraph with a two-way labeling."""

    n: int
    out_ptr: np.ndarray
    rot_vertex: np.ndarray
    rot_label: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for arr in (self.out_ptr, self.rot_vertex, self.rot_label):
            arr.setflags(write=False)

    @property
    def out_degree(self) -> np.ndarray:
        return np.diff(self.out_ptr)

    @property
    def in_degree(self) -> np.ndarray:
        if "in_degree" not in self._cache:
            self._cache["in_degree"] = np.bincount(self.rot_vertex, minlength=self.n)
        return self._cache["in_degree"]

    @property
    def num_edges(self) -> int:
        """Total number of edges counted with multiplicity."""
        return int(self.rot_vertex.size)

    @property
    def d(self) -> int | None:
        """Common out-degree, or ``None`` when the graph is not regular."""
        deg = self.out_degree
        if self.n and np.all(deg == deg[0]) and np.all(self.in_degree == deg[0]):
            return int(deg[0])
        return None

    @property
    def is_regular(self) -> bool:
        return self.d is not None

    def tails(self) -> np.ndarray:
        return np.repeat(np.arange(self.n), self.out_degree)

    def rotation_table(self) -> tuple[np.ndarray, np.ndarray]:
        """``(heads, in_labels)`` as ``n x d`` arrays; regular graphs only."""
        d = self.d
        if d is None:
            raise ValidationError("rotation table requires a regular graph")
        return self.rot_vertex.reshape(self.n, d), self.rot_label.reshape(self.n, d)

    def edges(self) -> list[tuple[int, int, int]]:
        """Aggregated ``(tail, head, multiplicity)`` triples, sorted."""
        if "edges" not in self._cache:
            if self.num_edges == 0:
                self._cache["edges"] = []
            else:
                key = self.tails() * self.n + self.rot_vertex
                uniq, counts = np.unique(key, return_counts=True)
                self._cache["edges"] = [
                    (int(k // self.n), int(k % self.n), int(c)) for k, c in zip(uniq, counts)
                ]
        return list(self._cache["edges"])

    def adjacency(self) -> np.ndarray:
        """Dense integer adjacency, ``A[i, j]`` = number of edges ``j -> i``."""
        if "adjacency" not in self._cache:
            A = np.zeros((self.n, self.n), dtype=np.int64)
            np.add.at(A, (self.rot_vertex, self.tails()), 1)
            A.setflags(write=False)
            self._cache["adjacency"] = A
        return self._cache["adjacency"]

    def __repr__(self):
        return f"LabeledDigraph(n={self.n}, edges={self.num_edges}, d={self.d})"


def _check_index(v, n, what):
    if not (0 <= v < n):
        raise ValidationError(f"{what} {v} out of range for n={n}")


def from_edge_list(n: int, edges) -> LabeledDigraph:
    """Build a graph from ``(tail, head)`` or ``(tail, head, mult)`` items.

    Repeated pairs accumulate.  Slots are labeled by sorting outgoing
    copies by ``(head, copy)`` and incoming copies by ``(tail, copy)``.
    """
    n = int(n)
    if n < 0:
        raise ValidationError("vertex count must be non-negative")
    mult: dict[tuple[int, int], int] = {}
    for item in edges:
        if len(item) == 2:
            u, v, m = item[0], item[1], 1
        elif len(item) == 3:
            u, v, m = item
        else:
            raise ValidationError(f"edge {item!r} must be (tail, head[, mult])")
        u, v, m = int(u), int(v), int(m)
        _check_index(u, n, "tail")
        _check_index(v, n, "head")
        if m < 1:
            raise ValidationError(f"edge ({u},{v}) has multiplicity {m} < 1")
        mult[(u, v)] = mult.get((u, v), 0) + m

    pairs = sorted(mult)
    counts = np.array([mult[p] for p in pairs], dtype=np.int64)
    tails = np.repeat(np.array([p[0] for p in pairs], dtype=np.int64), counts)
    heads = np.repeat(np.array([p[1] for p in pairs], dtype=np.int64), counts)
    total = tails.size
    # copy index of each expanded edge within its (tail, head) group
    starts = np.repeat(np.cumsum(counts) - counts, counts)
    copy = np.arange(total) - starts

    # pairs are sorted by (tail, head), so expanded order is the out-slot order
    out_deg = np.bincount(tails, minlength=n)
    out_ptr = np.concatenate([[0], np.cumsum(out_deg)]).astype(np.int64)

    in_order = np.lexsort((copy, tails, heads))
    in_deg = np.bincount(heads, minlength=n)
    in_ptr = np.concatenate([[0], np.cumsum(in_deg)])
    in_label = np.empty(total, dtype=np.int64)
    in_label[in_order] = np.arange(total) - in_ptr[heads[in_order]]

    return LabeledDigraph(n, out_ptr, heads, in_label)


def from_rotation(rot_vertex, rot_label) -> LabeledDigraph:
    """Build a regular graph from ``n x d`` rotation arrays.

    Raises if the arrays do not describe a bijection of ``[n] x [d]``.
    """
    rv = np.asarray(rot_vertex, dtype=np.int64)
    rl = np.asarray(rot_label, dtype=np.int64)
    if rv.ndim != 2 or rv.shape != rl.shape:
        raise ValidationError("rotation arrays must be matching n x d arrays")
    n, d = rv.shape
    if rv.size and (rv.min() < 0 or rv.max() >= n or rl.min() < 0 or rl.max() >= d):
        raise ValidationError("rotation entry out of range")
    code = np.sort((rv * d + rl).ravel())
    if not np.array_equal(code, np.arange(n * d)):
        raise ValidationError("rotation arrays are not a bijection")
    out_ptr = np.arange(0, n * d + 1, d, dtype=np.int64) if d else np.zeros(n + 1, np.int64)
    return LabeledDigraph(n, out_ptr, rv.ravel().copy(), rl.ravel().copy())


def from_adjacency(A) -> LabeledDigraph:
    """Build a graph from an integer adjacency (``A[i, j]`` edges ``j -> i``)."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError("adjacency must be square")
    if np.any(A < 0) or np.any(A != np.round(A)):
        raise ValidationError("adjacency entries must be non-negative integers")
    heads, tails = np.nonzero(A)
    return from_edge_list(A.shape[0], [(int(t), int(h), int(A[h, t])) for h, t in zip(heads, tails)])


def rotation_map(G: LabeledDigraph, v: int, i: int) -> tuple[int, int]:
    """Return ``(w, j)``: out-slot ``i`` of ``v`` is in-slot ``j`` of ``w``."""
    _check_index(v, G.n, "vertex")
    deg = int(G.out_ptr[v + 1] - G.out_ptr[v])
    if not (0 <= i < deg):
        raise ValidationError(f"label {i} out of range for vertex {v} of degree {deg}")
    pos = G.out_ptr[v] + i
    return int(G.rot_vertex[pos]), int(G.rot_label[pos])


def transition_matrix(G: LabeledDigraph, allow_sinks: bool = False) -> np.ndarray:
    """``W = A D^{-1}``.  Sinks give zero columns only if ``allow_sinks``."""
    A = G.adjacency().astype(float)
    deg = G.out_degree.astype(float)
    if np.any(deg == 0):
        if not allow_sinks:
            bad = int(np.flatnonzero(deg == 0)[0])
            raise ValidationError(f"vertex {bad} has out-degree zero")
        deg = np.where(deg == 0, 1.0, deg)
    return A / deg[None, :]


def laplacian(G: LabeledDigraph) -> np.ndarray:
    """Integer directed Laplacian ``D - A`` (out-degree diagonal)."""
    return np.diag(G.out_degree) - G.adjacency()


def random_walk_laplacian(G: LabeledDigraph) -> np.ndarray:
    return np.eye(G.n) - transition_matrix(G)


def is_eulerian(G: LabeledDigraph) -> bool:
    return bool(np.array_equal(G.out_degree, G.in_degree))


def _require_eulerian(G):
    if not is_eulerian(G):
        bad = int(np.flatnonzero(G.out_degree != G.in_degree)[0])
        raise NotEulerianError(
            f"vertex {bad} has out-degree {G.out_degree[bad]} but in-degree {G.in_degree[bad]}"
        )


def default_degree(G: LabeledDigraph) -> int:
    """Smallest power of two strictly greater than the maximum degree."""
    top = int(G.out_degree.max()) if G.n else 0
    return 1 << top.bit_length()


def regularize(G: LabeledDigraph, d_target: int | None = None) -> LabeledDigraph:
    """Pad every vertex with self-loops up to degree ``d_target``.

    ``d_target`` must exceed the maximum degree so that every vertex gets
    at least one loop.  A graph that is already ``d_target``-regular with a
    loop at every vertex is returned unchanged.
    """
    _require_eulerian(G)
    if d_target is None:
        d_target = default_degree(G)
    d_target = int(d_target)
    deg = G.out_degree
    top = int(deg.max()) if G.n else 0
    if d_target <= top:
        A = G.adjacency()
        if d_target == top and G.d == d_target and np.all(np.diag(A) > 0):
            return G
        raise ValidationError(f"d_target={d_target} must exceed the maximum degree {top}")
    edges = G.edges()
    edges += [(v, v, int(d_target - deg[v])) for v in range(G.n)]
    return from_edge_list(G.n, edges)


def strongly_connected_components(G: LabeledDigraph) -> list[list[int]]:
    """Strongly connected components, each sorted, ordered by smallest vertex."""
    if G.n == 0:
        return []
    M = coo_matrix(
        (np.ones(G.num_edges), (G.tails(), G.rot_vertex)), shape=(G.n, G.n)
    ).tocsr()
    _, labels = connected_components(M, directed=True, connection="strong")
    groups: dict[int, list[int]] = {}
    for v, c in enumerate(labels):
        groups.setdefault(int(c), []).append(v)
    return sorted(groups.values(), key=lambda g: g[0])


def stationary_distribution(G: LabeledDigraph) -> np.ndarray:
    """Degree-proportional stationary vector of a connected Eulerian graph."""
    _require_eulerian(G)
    if len(strongly_connected_components(G)) != 1:
        raise ValidationError("graph is not strongly connected")
    deg = G.out_degree.astype(float)
    s = deg / deg.sum()
    W = transition_matrix(G)
    if np.abs(W @ s - s).max() > 1e-12:
        raise ValidationError("degree vector is not stationary")
    return s


def reverse(G: LabeledDigraph) -> LabeledDigraph:
    return from_edge_list(G.n, [(h, t, m) for t, h, m in G.edges()])


def induced_subgraph(G: LabeledDigraph, vertices) -> LabeledDigraph:
    """Subgraph on ``vertices`` (relabeled ``0..len-1`` in the given order)."""
    index = {int(v): k for k, v in enumerate(vertices)}
    edges = [(index[t], index[h], m) for t, h, m in G.edges() if t in index and h in index]
    return from_edge_list(len(index), edges)


def directed_cycle(n: int) -> LabeledDigraph:
    return from_edge_list(n, [(v, (v + 1) % n, 1) for v in range(n)])


def complete_graph(n: int) -> LabeledDigraph:
    """Complete digraph with one self-loop per vertex; ``W = J``."""
    return from_edge_list(n, [(u, v, 1) for u in range(n) for v in range(n)])
