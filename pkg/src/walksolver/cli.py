"""Command-line interface.

Every subcommand builds a JSON document that echoes the resolved
configuration; ``--format text`` renders the same document line by line.
Exit status is 0 on success, 2 for invalid input and 3 when a numeric
certificate cannot be established.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .derand import iterated_derand_power
from .errors import CertificationError, ValidationError
from .formats import load_graph, matrix_to_csv, read_matrix
from .graph_core import random_walk_laplacian, transition_matrix
from .spectral import directed_approx_epsilon, min_approx_epsilon, unit_circle_approx_epsilon
from .solver import solve_pinv
from .walks import EscapeQuery, WalkQuery, escape_probabilities, kstep_probability, substochastic_power

EXIT_OK, EXIT_INVALID, EXIT_CERT = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _k_arg(text):
    if text == "auto":
        return "auto"
    try:
        k = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or 'auto', got {text!r}") from None
    if k < 1:
        raise argparse.ArgumentTypeError("k must be at least 1")
    return k


def _u64(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, Path):
        return str(x)
    return x


def _dumps(doc) -> str:
    return json.dumps(_jsonable(doc), sort_keys=True, indent=2) + "\n"


def _text(doc, prefix="") -> list[str]:
    lines = []
    for key in sorted(doc):
        val = doc[key]
        name = f"{prefix}{key}"
        if isinstance(val, dict):
            lines += _text(val, name + ".")
        else:
            lines.append(f"{name}: {json.dumps(val, sort_keys=True)}")
    return lines


def _write_matrix(path, M):
    path = Path(path)
    if path.suffix.lower() == ".json":
        path.write_text(json.dumps(_jsonable(np.asarray(M)), sort_keys=True) + "\n")
    else:
        path.write_text(matrix_to_csv(M))


def _config(args) -> dict:
    skip = {"func", "format", "json_out"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


# ---------------------------------------------------------------- commands


def cmd_solve(args) -> dict:
    G = load_graph(args.graph)
    mu = args.mu
    rep = solve_pinv(G, args.eps, k=args.k, mu=mu, grid=args.grid)
    doc = rep.to_dict(include_matrix=args.matrix_out is None)
    doc["method"] = "solver:lu-richardson" if mu is None else "solver:lu-richardson-derand"
    if args.oracle:
        ref = np.linalg.pinv(random_walk_laplacian(G))
        doc["oracle_max_error"] = float(np.abs(rep.pinv_estimate - ref).max())
        doc["oracle_method"] = "oracle:dense-svd-pinv"
    if args.matrix_out is not None:
        _write_matrix(args.matrix_out, rep.pinv_estimate)
    return doc


def _power_input(args):
    if (args.matrix is None) == (args.graph is None):
        raise ValidationError("give exactly one of --matrix and --graph")
    if args.matrix is not None:
        return read_matrix(args.matrix)
    return transition_matrix(load_graph(args.graph))


def cmd_power(args) -> dict:
    W = _power_input(args)
    res = substochastic_power(
        W, args.k, args.eps, args.base_oracle.replace("-", "_"),
        quality=args.quality, seed=args.seed, delta=args.delta,
    )
    doc = {
        "eps": args.eps,
        "iters": res.iterations,
        "alpha": res.alpha,
        "error_bound": res.error_bound,
        "method": f"path-lift-richardson:{args.base_oracle}",
        "residual_history": list(res.history),
    }
    if res.samples is not None:
        doc["samples"] = res.samples
    if args.matrix_out is not None:
        _write_matrix(args.matrix_out, res.matrix)
    else:
        doc["value"] = res.matrix
    return doc


def cmd_walkprob(args) -> dict:
    chain = [load_graph(p) for p in args.chain]
    k = args.k if args.k is not None else len(chain)
    if len(chain) == 1:
        chain = chain * k
    elif k != len(chain):
        raise ValidationError(f"--k {k} does not match the {len(chain)} chain files")
    res = kstep_probability(chain, WalkQuery(args.s, args.t, k, args.eps))
    return {
        "value": res.value,
        "eps": args.eps,
        "error_bound": res.error_bound,
        "iters": res.iterations,
        "method": f"solver:{res.method}",
    }


def cmd_escape(args) -> dict:
    G = load_graph(args.graph)
    q = EscapeQuery(args.w, args.u, args.v)
    if q.u == q.v:
        raise ValidationError("u and v must differ")
    if q.w in (q.u, q.v):
        value, bound, iters, method = float(q.w == q.u), 0.0, 0, "exact"
    else:
        res = escape_probabilities(G, q.u, q.v, args.eps)
        value, bound, iters, method = float(res.probabilities[q.w]), res.error_bound, res.iterations, "solver:laplacian"
    return {"value": value, "eps": args.eps, "error_bound": bound, "iters": iters, "method": method}


def cmd_approx_check(args) -> dict:
    Wt, W = read_matrix(args.a), read_matrix(args.b)
    if args.notion == "directed":
        rep = directed_approx_epsilon(Wt, W)
    elif args.notion == "min":
        rep = min_approx_epsilon(Wt, W)
    else:
        rep = unit_circle_approx_epsilon(Wt, W, grid_size=args.grid, refine=args.refine)
    doc = rep.to_dict()
    doc["method"] = "oracle:dense-eigendecomposition"
    return doc


def cmd_derand_audit(args) -> dict:
    G = load_graph(args.graph)
    seq = iterated_derand_power(G, args.levels, args.mu, max_degree=args.max_degree)
    lams = seq.lambdas()
    levels = []
    for i in range(seq.k + 1):
        rec = {"index": i, "degree": seq.degrees[i], "lambda": lams[i], "materialized": seq.graphs[i] is not None}
        if i > 0:
            H = seq.expanders[i - 1]
            rec["expander"] = {"c": H.c, "lambda": H.lam, "mu": H.mu, "offsets": list(H.offsets), "verified_by": H.method}
        levels.append(rec)
    doc = {"levels": levels, "method": "derand:verified-circulant"}
    if args.dump_level is not None:
        lvl = args.dump_level
        if not 0 <= lvl <= seq.k:
            raise ValidationError(f"--dump-level must lie in 0..{seq.k}")
        deg = seq.degrees[lvl]
        table = [[list(seq.rotation(lvl, v, i)) for i in range(deg)] for v in range(G.n)]
        doc["rotation"] = {"level": lvl, "table": table}
    return doc


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="walksolver", description="Eulerian Laplacian pseudoinverses and random-walk probabilities.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--format", choices=("json", "text"), default="json")
        sp.add_argument("--json-out", type=Path, help="also write the JSON document here")

    s = sub.add_parser("solve", help="entrywise-accurate (I - W)^+ of an Eulerian graph")
    s.add_argument("--graph", type=Path, required=True)
    s.add_argument("--eps", type=float, default=1e-8)
    s.add_argument("--k", type=_k_arg, default="auto")
    s.add_argument("--mu", type=float, default=None, help="expander quality; exact squaring when omitted")
    s.add_argument("--grid", type=int, default=64)
    s.add_argument("--oracle", action="store_true", help="compare against a dense pseudoinverse")
    s.add_argument("--matrix-out", type=Path, help="write the matrix here (.csv or .json)")
    common(s)
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("power", help="entrywise-accurate W^k of a substochastic matrix")
    s.add_argument("--matrix", type=Path)
    s.add_argument("--graph", type=Path)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--eps", type=float, default=1e-12)
    s.add_argument("--base-oracle", choices=("perturbed-exact", "monte-carlo"), default="perturbed-exact")
    s.add_argument("--quality", type=float, default=None)
    s.add_argument("--delta", type=float, default=0.01)
    s.add_argument("--seed", type=_u64, default=0)
    s.add_argument("--matrix-out", type=Path)
    common(s)
    s.set_defaults(func=cmd_power)

    s = sub.add_parser("walkprob", help="(W_1 ... W_k)[t, s] for a chain of Eulerian graphs")
    s.add_argument("--chain", type=Path, nargs="+", required=True)
    s.add_argument("--k", type=int, default=None)
    s.add_argument("--s", type=int, required=True)
    s.add_argument("--t", type=int, required=True)
    s.add_argument("--eps", type=float, default=1e-6)
    common(s)
    s.set_defaults(func=cmd_walkprob)

    s = sub.add_parser("escape", help="probability that a walk from w hits u before v")
    s.add_argument("--graph", type=Path, required=True)
    s.add_argument("--w", type=int, required=True)
    s.add_argument("--u", type=int, required=True)
    s.add_argument("--v", type=int, required=True)
    s.add_argument("--eps", type=float, default=1e-8)
    common(s)
    s.set_defaults(func=cmd_escape)

    s = sub.add_parser("approx-check", help="measure how well matrix A approximates matrix B")
    s.add_argument("--a", type=Path, required=True)
    s.add_argument("--b", type=Path, required=True)
    s.add_argument("--notion", choices=("directed", "unit-circle", "min"), default="unit-circle")
    s.add_argument("--grid", type=int, default=64)
    s.add_argument("--refine", action="store_true")
    common(s)
    s.set_defaults(func=cmd_approx_check)

    s = sub.add_parser("derand-audit", help="iterated derandomized squares with expander certificates")
    s.add_argument("--graph", type=Path, required=True)
    s.add_argument("--levels", type=int, default=2)
    s.add_argument("--mu", type=float, default=0.25)
    s.add_argument("--max-degree", type=int, default=64)
    s.add_argument("--dump-level", type=int, default=None, help="include the rotation table of this level")
    common(s)
    s.set_defaults(func=cmd_derand_audit)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        doc = args.func(args)
    except ValidationError as exc:
        print(f"walksolver: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"walksolver: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except CertificationError as exc:
        print(f"walksolver: certification failed: {exc}", file=sys.stderr)
        return EXIT_CERT
    doc["config"] = _config(args)
    doc = _jsonable(doc)
    payload = _dumps(doc)
    if args.json_out is not None:
        Path(args.json_out).write_text(payload)
    if args.format == "text":
        sys.stdout.write("\n".join(_text(doc)) + "\n")
    else:
        sys.stdout.write(payload)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
