"""Graph and matrix file formats.

Graph text format: first line ``n m``, then ``m`` lines ``tail head mult``
(0-indexed).  Blank lines and ``#`` comments are ignored.  JSON format:
``{"n": int, "edges": [[tail, head, mult], ...]}``.  A ``(tail, head)``
pair may appear only once; use the multiplicity column instead.

Matrices are written as row-major CSV with 17 significant digits, or as
JSON nested lists.
"""

from __future__ import annotations

import io
import json
import os

import numpy as np

from .errors import GraphFormatError, ValidationError
from .graph_core import LabeledDigraph, from_edge_list

__all__ = [
    "parse_graph_text",
    "parse_graph_json",
    "load_graph",
    "dump_graph_text",
    "read_matrix",
    "write_matrix_csv",
    "matrix_to_csv",
]


def _int(token, line, source, what):
    try:
        return int(token)
    except ValueError:
        raise GraphFormatError(f"{what} {token!r} is not an integer", line, source) from None


def _check_edge(u, v, m, n, line, source, seen):
    if not (0 <= u < n):
        raise GraphFormatError(f"tail {u} out of range [0, {n})", line, source)
    if not (0 <= v < n):
        raise GraphFormatError(f"head {v} out of range [0, {n})", line, source)
    if m < 1:
        raise GraphFormatError(f"multiplicity {m} must be at least 1", line, source)
    if (u, v) in seen:
        raise GraphFormatError(
            f"duplicate edge ({u},{v}); first given at {seen[(u, v)]}", line, source
        )
    seen[(u, v)] = line


def parse_graph_text(text: str, source: str | None = None) -> LabeledDigraph:
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if body:
            rows.append((lineno, body.split()))
    if not rows:
        raise GraphFormatError("empty graph file", None, source)
    lineno, head = rows[0]
    if len(head) != 2:
        raise GraphFormatError("header must be 'n m'", lineno, source)
    n = _int(head[0], lineno, source, "vertex count")
    m = _int(head[1], lineno, source, "edge count")
    if n < 1 or m < 0:
        raise GraphFormatError("header needs n >= 1 and m >= 0", lineno, source)
    if len(rows) - 1 != m:
        raise GraphFormatError(f"header announces {m} edges, found {len(rows) - 1}", lineno, source)
    seen: dict = {}
    edges = []
    for lineno, tok in rows[1:]:
        if len(tok) != 3:
            raise GraphFormatError("edge line must be 'tail head multiplicity'", lineno, source)
        u, v, mult = (_int(t, lineno, source, w) for t, w in zip(tok, ("tail", "head", "multiplicity")))
        _check_edge(u, v, mult, n, lineno, source, seen)
        edges.append((u, v, mult))
    return from_edge_list(n, edges)


def parse_graph_json(text: str, source: str | None = None) -> LabeledDigraph:
    """Parse the JSON form; error locations are reported as edge indices."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"invalid JSON: {exc.msg}", exc.lineno, source) from None
    if not isinstance(obj, dict) or "n" not in obj or "edges" not in obj:
        raise GraphFormatError("JSON graph needs keys 'n' and 'edges'", None, source)
    n = obj["n"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise GraphFormatError("'n' must be a positive integer", None, source)
    seen: dict = {}
    edges = []
    for idx, e in enumerate(obj["edges"]):
        where = f"edge[{idx}]"
        if not isinstance(e, list) or len(e) != 3 or not all(
            isinstance(x, int) and not isinstance(x, bool) for x in e
        ):
            raise GraphFormatError("edge must be [tail, head, mult] integers", where, source)
        _check_edge(e[0], e[1], e[2], n, where, source, seen)
        edges.append(tuple(e))
    return from_edge_list(n, edges)


def load_graph(path) -> LabeledDigraph:
    """Load a graph file; ``.json`` files (or text starting with ``{``) use JSON."""
    path = os.fspath(path)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise GraphFormatError(f"cannot read graph file: {exc.strerror}", None, path) from None
    if path.endswith(".json") or text.lstrip().startswith("{"):
        return parse_graph_json(text, source=path)
    return parse_graph_text(text, source=path)


def dump_graph_text(G: LabeledDigraph) -> str:
    edges = G.edges()
    lines = [f"{G.n} {len(edges)}"] + [f"{u} {v} {m}" for u, v, m in edges]
    return "\n".join(lines) + "\n"


def matrix_to_csv(M) -> str:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    buf = io.StringIO()
    for row in M:
        buf.write(",".join(format(float(x), ".17g") for x in row))
        buf.write("\n")
    return buf.getvalue()


def write_matrix_csv(path, M) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(matrix_to_csv(M))


def read_matrix(path) -> np.ndarray:
    """Read a square real matrix from CSV or JSON (nested lists)."""
    path = os.fspath(path)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ValidationError(f"{path}: cannot read matrix file: {exc.strerror}") from None
    if path.endswith(".json") or text.lstrip().startswith("["):
        try:
            M = np.array(json.loads(text), dtype=float)
        except (json.JSONDecodeError, ValueError) as exc:
            raise ValidationError(f"{path}: malformed matrix JSON ({exc})") from None
    else:
        rows = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            if not raw.strip():
                continue
            try:
                rows.append([float(x) for x in raw.split(",")])
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: non-numeric matrix entry") from None
        if not rows or len({len(r) for r in rows}) != 1:
            raise ValidationError(f"{path}: matrix rows must be non-empty and equal length")
        M = np.array(rows)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValidationError(f"{path}: matrix must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValidationError(f"{path}: matrix has non-finite entries")
    return M
