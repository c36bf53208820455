"""Command-line front end.

Subcommands: ``embed``, ``filter``, ``learn``, ``bench``, ``demo-lattice`` and
``check-gso``. Exit status is 0 on success, 1 for usage errors, 2 for data
errors and 3 for numerical failures; the message goes to standard error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__, errors
from .diffusion_map import (
    bgh_bandwidth,
    decompose,
    embedding,
    embedding_csv_text,
    gaussian_affinity,
    markov_matrix,
    median_bandwidth,
    pairwise_sq_distances,
    write_embedding_csv,
)
from .experiments import (
    ExperimentConfig,
    coerce_value,
    emit_table,
    lattice_demo,
    load_config,
    read_signals_csv,
    run_grid,
    write_frames_csv,
    write_metadata,
)
from .graph_core import build_graph, pairwise_distances, radius_graph, read_coords_csv
from .graph_learning import MV, TV, LearnOptions, filter_signals, learn_pipeline
from .gso_filters import GSO_ALIASES, IDENTITY_MINUS_POWER, TRUNCATED, FilterSpec, build_gso, check_gso_properties

# version of the file formats and exit-code contract
INTERFACE_VERSION = "1"

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------- input helpers


def read_matrix_csv(path):
    """Numeric table with a header row; a leading ``id``/``node`` column is kept as labels."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"input file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise errors.ParseError("empty file", path, 1)
    header = [h.strip().lower() for h in rows[0]]
    has_ids = header[0] in ("id", "node")
    ids, data = [], []
    for lineno, rec in enumerate(rows[1:], start=2):
        if len(rec) != len(header):
            raise errors.ParseError(f"expected {len(header)} fields, got {len(rec)}", path, lineno)
        vals = rec[1:] if has_ids else rec
        try:
            data.append([float(v) for v in vals])
        except ValueError:
            raise errors.ParseError(f"non-numeric value in {rec}", path, lineno) from None
        ids.append(rec[0].strip() if has_ids else str(lineno - 2))
    return ids, np.array(data, dtype=float).reshape(len(data), -1)


def read_edge_list(path, n: int | None = None):
    """``i,j,weight`` edge list to a symmetric weight matrix."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"graph file not found: {path}")
    edges = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip().lower() for h in next(reader, [])]
        if header != ["i", "j", "weight"]:
            raise errors.ParseError(f"expected header i,j,weight, got {header}", path, 1)
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            try:
                edges.append((int(rec[0]), int(rec[1]), float(rec[2])))
            except (ValueError, IndexError):
                raise errors.ParseError(f"bad edge record {rec}", path, lineno) from None
    if not edges:
        raise errors.ParseError("no edges", path, 2)
    size = max(max(i, j) for i, j, _ in edges) + 1
    n = size if n is None else n
    if n < size:
        raise errors.DataError(f"edge index {size - 1} out of range for n={n}")
    w = np.zeros((n, n))
    for i, j, v in edges:
        w[i, j] = w[j, i] = v
    return build_graph(w)


def _graph_from_args(args):
    if getattr(args, "graph", None):
        return read_edge_list(args.graph)
    if getattr(args, "coords", None):
        _, coords, metric = read_coords_csv(args.coords)
        radius = args.radius
        if radius is None:
            if metric != "greatcircle":
                raise UsageError("--radius is required for x,y coordinates")
            radius = 50.0
        dist = pairwise_distances(coords, metric)
        sigma = 0.5 * float(np.median(dist[np.triu_indices(len(coords), 1)]))
        if not sigma > 0:
            raise errors.DegenerateData("all coordinates coincide")
        return radius_graph(coords, radius, metric, sigma)
    raise UsageError("give --graph or --coords")


def parse_filter(text: str, tau: float | None = None, sign: int = 1) -> FilterSpec | None:
    """``identity``, ``shift``, ``tikhonov[:tau]``, ``heat[:t]``, ``poly:h0,h1,..`` or ``ideal:cutoff``.

    ``shift`` returns None, meaning one application of the operator itself.
    """
    name, _, arg = text.partition(":")
    name = name.strip().lower()
    if name == "identity":
        return FilterSpec.identity()
    if name == "shift":
        return None
    if name == "tikhonov":
        value = tau if tau is not None else float(arg or 0.5)
        return FilterSpec.tikhonov(value, sign)
    if name == "heat":
        return FilterSpec("heat", t=tau if tau is not None else float(arg or 1.0))
    if name in ("poly", "polynomial"):
        return FilterSpec("polynomial", coeffs=tuple(float(c) for c in arg.split(",") if c.strip()))
    if name == "ideal":
        return FilterSpec("ideal", cutoff=float(arg or 0.0))
    raise UsageError(f"unknown filter {text!r}")


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    return p.open("w", newline="", encoding="utf-8")


# ---------------------------------------------------------------- subcommands


def cmd_embed(args):
    ids, x = read_matrix_csv(args.input)
    d2 = pairwise_sq_distances(x)
    if args.sigma is not None:
        sigma = args.sigma
    elif args.sigma_bgh:
        est = bgh_bandwidth(d2)
        if est.at_boundary:
            logging.getLogger(__name__).warning("BGH scan peaked at the boundary (eps=%g)", est.epsilon)
        # exp(-d/(4 eps)) = exp(-d/(2 sigma^2))
        sigma = float(np.sqrt(2.0 * est.epsilon))
    else:
        sigma = median_bandwidth(x)
    dec = decompose(markov_matrix(gaussian_affinity(d2, sigma)))
    emb = embedding(dec, args.t, args.l)
    if args.output in (None, "-"):
        sys.stdout.write(embedding_csv_text(emb, sigma, ids))
    else:
        Path(args.output).parent.mkdir(parents=True, exist_ok=True)
        write_embedding_csv(args.output, emb, sigma, ids)
    return EXIT_OK


def _read_signals(path):
    """Signals CSV with a ``timestamp`` column, or a plain numeric table."""
    with Path(path).open(encoding="utf-8") as fh:
        first = fh.readline().strip().lower()
    if first.startswith("timestamp"):
        stamps, names, values = read_signals_csv(path)
        return stamps, names, values
    ids, values = read_matrix_csv(path)
    return ids, [f"node_{k}" for k in range(values.shape[1])], values


def _learn_kwargs(args):
    kind = GSO_ALIASES[args.gso]
    if kind == "diffusion_map":
        return {"t": args.t, "l": args.l, "mode": args.mode}
    return {"power": int(args.t)}


def cmd_filter(args):
    g = _graph_from_args(args)
    stamps, names, x = _read_signals(args.signals)
    if np.any(~np.isfinite(x)):
        raise errors.DataError("signals contain missing values")
    if x.shape[1] != g.n:
        raise errors.DataError(f"signals have {x.shape[1]} columns, graph has {g.n} nodes")
    f = parse_filter(args.filter, args.tau, args.sign)
    if f is None:
        S = build_gso(g, args.gso, **({"t": args.t, "l": args.l, "mode": args.mode}
                                      if GSO_ALIASES[args.gso] == "diffusion_map" else {}))
        y = x @ S.matrix.T
    else:
        kw = _learn_kwargs(args)
        y = filter_signals(x, g, args.gso, f, **kw)
    out = _open_out(args.output)
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["timestamp"] + list(names))
        for stamp, row in zip(stamps, y):
            writer.writerow([stamp] + [repr(float(v)) for v in row])
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_learn(args):
    g = _graph_from_args(args)
    _, _, x = _read_signals(args.signals)
    if args.difference:
        x = np.diff(x, axis=0)
    if np.any(~np.isfinite(x)):
        raise errors.DataError("signals contain missing values")
    f = parse_filter(args.filter, args.tau, args.sign)
    if f is None:
        raise UsageError("learn needs a spectral filter, not 'shift'")
    opts = LearnOptions(max_iters=args.max_iters, tol=args.tol)
    res = learn_pipeline(x, g, args.gso, f, args.method, opts, alpha=args.alpha, **_learn_kwargs(args))
    meta = {"gso": args.gso, "filter": args.filter, "tau": args.tau, "t": args.t, "seed": args.seed,
            "library_version": __version__}
    if args.output in (None, "-"):
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(["i", "j", "weight"])
        for i, j, v in res.edges(args.threshold):
            writer.writerow([i, j, repr(float(v))])
    else:
        Path(args.output).parent.mkdir(parents=True, exist_ok=True)
        res.write(args.output, args.threshold, meta)
    if not res.converged:
        print(f"warning: stopped after {res.iterations} iterations without reaching tol", file=sys.stderr)
    return EXIT_OK


def cmd_bench(args):
    overrides = {}
    for f in fields(ExperimentConfig):
        v = getattr(args, "cfg_" + f.name, None)
        if v is not None:
            overrides[f.name] = v
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    if args.config:
        cfg = load_config(args.config, **overrides)
    else:
        cfg = ExperimentConfig(**{k: coerce_value(k, v) for k, v in overrides.items()})
    table = run_grid(cfg, jobs=cfg.jobs if args.jobs is None else args.jobs)
    out = Path(cfg.output_dir)
    emit_table(table, out / "table.csv", "csv")
    emit_table(table, out / "table_ree.md", "markdown", "ree")
    emit_table(table, out / "table_nrmse.md", "markdown", "nrmse")
    write_metadata(table, out / "table.meta.json")
    print(str(out / "table.csv"))
    return EXIT_OK


def cmd_demo_lattice(args):
    f = parse_filter(args.filter, args.tau, args.sign)
    frames = lattice_demo(args.side, f, args.t_max, args.gso)
    if args.output in (None, "-"):
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(["frame", "row", "col", "value"])
        for k, fr in enumerate(frames):
            for i, v in enumerate(fr):
                writer.writerow([k, i // args.side, i % args.side, repr(float(v))])
    else:
        Path(args.output).parent.mkdir(parents=True, exist_ok=True)
        write_frames_csv(frames, args.side, args.output)
    return EXIT_OK


def cmd_check_gso(args):
    g = _graph_from_args(args)
    kw = {"t": args.t, "l": args.l, "mode": args.mode} if GSO_ALIASES[args.gso] == "diffusion_map" else {}
    S = build_gso(g, args.gso, **kw)
    rep = check_gso_properties(S, tol=args.tol, n_probes=args.probes, seed=args.seed or 0)
    out = _open_out(args.output)
    try:
        out.write(rep.csv_text())
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _add_graph_args(p):
    p.add_argument("--graph", help="edge list CSV with header i,j,weight")
    p.add_argument("--coords", help="coordinate CSV (id,lat,lon or id,x,y)")
    p.add_argument("--radius", type=float, help="radius-graph threshold (km for lat/lon; default 50)")


def _add_gso_args(p, default="DM"):
    p.add_argument("--gso", choices=sorted(GSO_ALIASES), default=default)
    p.add_argument("--t", type=float, default=1, help="diffusion time (DM) or filter power (others)")
    p.add_argument("--l", type=int, default=None, help="DM truncation level (default n-1)")
    p.add_argument("--mode", choices=[TRUNCATED, IDENTITY_MINUS_POWER], default=TRUNCATED)


def _add_filter_args(p, default):
    p.add_argument("--filter", default=default, help="identity | shift | tikhonov[:tau] | heat[:t] | poly:h0,h1,.. | ideal:c")
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--sign", type=int, choices=[1, -1], default=1, help="Tikhonov sign: 1/(1 + sign*tau*lam)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dmgso", description="Diffusion-map graph shift operators and graph learning.")
    parser.add_argument("--version", action="version",
                        version=f"dmgso {__version__} (interface {INTERFACE_VERSION})")
    parser.add_argument("--seed", type=int, default=None, help="random seed")
    parser.add_argument("--jobs", type=int, default=None, help="parallel workers for bench (default: all cores)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("embed", help="point cloud CSV to diffusion coordinates")
    p.add_argument("--input", required=True)
    p.add_argument("--output", default="-")
    bw = p.add_mutually_exclusive_group()
    bw.add_argument("--sigma", type=float)
    bw.add_argument("--sigma-median", action="store_true")
    bw.add_argument("--sigma-bgh", action="store_true")
    p.add_argument("--t", type=float, default=1)
    p.add_argument("--l", type=int, default=None)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("filter", help="filter signals in a shift operator's Fourier basis")
    p.add_argument("--signals", required=True)
    p.add_argument("--output", default="-")
    _add_graph_args(p)
    _add_gso_args(p)
    _add_filter_args(p, "tikhonov")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("learn", help="learn a graph from signals")
    p.add_argument("--signals", required=True)
    p.add_argument("--output", default="-")
    p.add_argument("--method", choices=[MV, TV], default=MV)
    p.add_argument("--alpha", type=float, default=0.0, help="sparsity weight for TV")
    p.add_argument("--max-iters", type=int, default=LearnOptions.max_iters)
    p.add_argument("--tol", type=float, default=LearnOptions.tol)
    p.add_argument("--threshold", type=float, default=0.0, help="drop edges at or below this weight")
    p.add_argument("--difference", action="store_true", help="use first differences of the series")
    _add_graph_args(p)
    _add_gso_args(p)
    _add_filter_args(p, "tikhonov")
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("bench", help="run an experiment grid; every config key is also a flag")
    p.add_argument("--config", help="flat key = value config file")
    for f in fields(ExperimentConfig):
        p.add_argument("--" + f.name.replace("_", "-"), dest="cfg_" + f.name, default=None, metavar="VALUE")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("demo-lattice", help="spread a delta on a 2-D lattice")
    p.add_argument("--side", type=int, default=11)
    p.add_argument("--t-max", type=int, default=10)
    p.add_argument("--gso", choices=sorted(GSO_ALIASES), default="P")
    p.add_argument("--output", default="-")
    _add_filter_args(p, "shift")
    p.set_defaults(func=cmd_demo_lattice)

    p = sub.add_parser("check-gso", help="property report for a shift operator")
    _add_graph_args(p)
    _add_gso_args(p, default="P")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--probes", type=int, default=1000)
    p.add_argument("--output", default="-")
    p.set_defaults(func=cmd_check_gso)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"dmgso: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except errors.BadParams as exc:
        print(f"dmgso: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (errors.DataError, FileNotFoundError, OSError) as exc:
        print(f"dmgso: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (errors.NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"dmgso: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
