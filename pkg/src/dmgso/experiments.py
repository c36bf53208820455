"""Benchmark harness: synthetic and sensor-network graph-learning grids.

Each grid cell (shift operator, tau, t) filters the signals in the chosen
operator's Fourier basis, learns a graph from the filtered covariance and
scores it against the ground truth with REE and NRMSE. Cells are
independent, so the grid can run in parallel without changing the output.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, errors
from .graph_core import Graph, grid_graph, pairwise_distances, radius_graph, random_sensor_graph, read_coords_csv
from .graph_learning import MV, LearnOptions, learn_pipeline
from .gso_filters import GSO_ALIASES, MARKOV, TRUNCATED, FilterSpec, apply_filter, build_gso, polynomial_apply
from .metrics import MetricOptions, graph_ree, weight_nrmse

log = logging.getLogger(__name__)

TABLE_HEADER = ["dataset", "gso", "tau", "t", "ree", "nrmse", "iters", "converged"]
GSO_ORDER = ("A", "L", "P", "DM")

# Tikhonov sign used when tikhonov_sign = "auto": the low-pass 1/(1 + tau lam)
# for every operator; "-" selects 1/(1 - tau lam), which on Markov spectra has
# its pole at lam_0 = 1 when tau = 1
DEFAULT_TIKHONOV_SIGN = {"A": 1, "L": 1, "P": 1, "DM": 1}


# ---------------------------------------------------------------- datasets


def gen_synthetic(n: int, seed: int, m_signals: int, noise: float = 0.05, a_range=(1.0, 3.0)):
    """Random sensor graph plus ``m_signals`` smooth sinusoids over node positions.

    Signal ``k`` at node ``v`` is ``sin(a_k <c_v, theta_k> + b_k) + eps`` with
    ``a_k`` uniform in ``a_range``, ``theta_k`` a random unit direction,
    ``b_k`` a random phase and ``eps ~ N(0, noise^2)``.

    Returns
    -------
    graph : Graph
    signals : (m_signals, n) ndarray
    """
    if n < 4:
        raise errors.TooSmall("synthetic benchmark needs n >= 4")
    if m_signals < 2:
        raise errors.TooFewObservations("need at least 2 signals")
    g = random_sensor_graph(n, seed)
    rng = np.random.default_rng([seed, 7919])
    a = rng.uniform(a_range[0], a_range[1], size=m_signals)
    angle = rng.uniform(0.0, 2 * np.pi, size=m_signals)
    theta = np.stack([np.cos(angle), np.sin(angle)], axis=1)
    b = rng.uniform(0.0, 2 * np.pi, size=m_signals)
    eps = rng.standard_normal((m_signals, n))
    proj = theta @ g.coords.T
    signals = np.sin(a[:, None] * proj + b[:, None]) + noise * eps
    return g, signals


def read_signals_csv(path):
    """Read ``timestamp,station_1,...``; empty fields are missing values (NaN)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"signals file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise errors.ParseError("empty file", path, 1) from None
        if len(header) < 2 or header[0].lower() != "timestamp":
            raise errors.ParseError("header must start with 'timestamp'", path, 1)
        stations = header[1:]
        stamps, rows = [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise errors.ParseError(f"expected {len(header)} fields, got {len(rec)}", path, lineno)
            try:
                datetime.fromisoformat(rec[0].strip())
            except ValueError:
                raise errors.ParseError(f"bad ISO-8601 timestamp {rec[0]!r}", path, lineno) from None
            vals = []
            for field_ in rec[1:]:
                field_ = field_.strip()
                if field_ == "":
                    vals.append(np.nan)
                    continue
                try:
                    vals.append(float(field_))
                except ValueError:
                    raise errors.ParseError(f"non-numeric value {field_!r}", path, lineno) from None
            stamps.append(rec[0].strip())
            rows.append(vals)
    return stamps, stations, np.array(rows, dtype=float).reshape(-1, len(stations))


@dataclass
class SensorDataset:
    graph: Graph
    signals: np.ndarray
    stations: list
    dropped: list
    sigma: float
    metric: str


def load_sensor_dataset(coords_path, signals_path, radius_km: float = 50.0) -> SensorDataset:
    """Ground-truth radius graph and temperature-change signals.

    Stations with any missing hour are dropped (listed in ``dropped``). The
    signals are first differences of each hourly series: rows are hours,
    columns stations in coordinate-file order.
    """
    ids, coords, metric = read_coords_csv(coords_path)
    _, stations, values = read_signals_csv(signals_path)
    index = {sid: k for k, sid in enumerate(ids)}
    missing = [s for s in stations if s not in index]
    if missing:
        raise errors.StationMismatch(f"signal columns without coordinates: {missing}")
    col = {s: k for k, s in enumerate(stations)}
    keep, dropped = [], []
    for sid in ids:
        if sid not in col:
            dropped.append(sid)
            continue
        series = values[:, col[sid]]
        if np.any(~np.isfinite(series)):
            dropped.append(sid)
            continue
        keep.append(sid)
    if dropped:
        log.warning("dropping stations without complete series: %s", ", ".join(dropped))
    if len(keep) < 2:
        raise errors.TooSmall("fewer than 2 usable stations")
    if values.shape[0] < 3:
        raise errors.TooFewObservations("need at least 3 hourly samples")
    kc = np.array([coords[index[s]] for s in keep])
    series = np.column_stack([values[:, col[s]] for s in keep])
    signals = np.diff(series, axis=0)
    dist = pairwise_distances(kc, metric)
    sigma = 0.5 * float(np.median(dist[np.triu_indices(len(keep), 1)]))
    if not sigma > 0:
        raise errors.DegenerateData("all stations coincide")
    g = radius_graph(kc, radius_km, metric, sigma)
    return SensorDataset(graph=g, signals=signals, stations=keep, dropped=dropped, sigma=sigma, metric=metric)


# ---------------------------------------------------------------- configuration


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str = "synthetic"
    n: int = 30
    seed: int = 0
    m_signals: int = 200
    noise: float = 0.05
    coords_path: str = ""
    signals_path: str = ""
    radius_km: float = 50.0
    gso_list: tuple = GSO_ORDER
    tau_grid: tuple = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
    t_grid: tuple = (1,)
    filter: str = "tikhonov"
    tikhonov_sign: str = "auto"
    method: str = MV
    dm_truncation: int = 0
    dm_mode: str = TRUNCATED
    max_iters: int = 2000
    tol: float = 1e-8
    step: float = 1e-2
    projection_iters: int = 50
    alpha: float = 0.0
    output_dir: str = "results"
    jobs: int = 1

    def __post_init__(self):
        if not self.gso_list or not self.tau_grid or not self.t_grid:
            raise errors.BadParams("grids must be non-empty")
        for g in self.gso_list:
            if g not in GSO_ALIASES:
                raise errors.BadParams(f"unknown GSO {g!r}; choose from {list(GSO_ALIASES)}")
        if any(not 0.0 <= tau <= 1.0 for tau in self.tau_grid):
            raise errors.BadParams("tau values must lie in [0, 1]")
        if any(t < 0 or int(t) != t for t in self.t_grid):
            raise errors.BadParams("t values must be nonnegative integers")
        if self.dataset not in ("synthetic", "sensor_csv"):
            raise errors.BadParams(f"unknown dataset {self.dataset!r}")
        if self.dataset == "sensor_csv" and not (self.coords_path and self.signals_path):
            raise errors.BadParams("sensor_csv dataset needs coords_path and signals_path")
        if self.filter not in ("tikhonov", "heat"):
            raise errors.BadParams(f"unsupported benchmark filter {self.filter!r}")
        if self.tikhonov_sign not in ("auto", "+", "-"):
            raise errors.BadParams("tikhonov_sign must be auto, + or -")

    def options(self) -> LearnOptions:
        return LearnOptions(self.max_iters, self.tol, self.step, self.projection_iters)

    def canonical(self) -> dict:
        d = asdict(self)
        d.pop("jobs")
        d.pop("output_dir")
        d["gso_list"] = list(self.gso_list)
        d["tau_grid"] = list(self.tau_grid)
        d["t_grid"] = list(self.t_grid)
        return d

    def digest(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def with_overrides(self, **kw):
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


_TUPLE_FIELDS = {"gso_list": str, "tau_grid": float, "t_grid": int}


def coerce_value(name, raw):
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    if name not in types:
        raise errors.BadParams(f"unknown config key {name!r}")
    if name in _TUPLE_FIELDS:
        if isinstance(raw, (list, tuple)):
            items = raw
        else:
            items = [s for s in str(raw).replace(";", ",").split(",") if s.strip()]
        conv = _TUPLE_FIELDS[name]
        return tuple(conv(float(s)) if conv is int else conv(str(s).strip()) if conv is str else conv(s) for s in items)
    default = getattr(ExperimentConfig, name)
    if isinstance(default, bool):
        return str(raw).lower() in ("1", "true", "yes")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return str(raw).strip()


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise errors.ParseError(f"expected key = value, got {line!r}", source, lineno)
        key, val = (s.strip() for s in line.split("=", 1))
        try:
            values[key] = coerce_value(key, val)
        except (ValueError, errors.BadParams) as exc:
            raise errors.ParseError(str(exc), source, lineno) from None
    return values


def load_config(path, **overrides) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    values = parse_config_text(path.read_text(encoding="utf-8"), str(path))
    for k, v in overrides.items():
        if v is not None:
            values[k] = coerce_value(k, v)
    return ExperimentConfig(**values)


# ---------------------------------------------------------------- grid


@dataclass(frozen=True)
class ResultRow:
    dataset: str
    gso: str
    tau: float
    t: int
    ree: float
    nrmse: float
    iters: int
    converged: bool

    @property
    def key(self):
        return (GSO_ORDER.index(self.gso) if self.gso in GSO_ORDER else 99, self.gso, self.tau, self.t)


@dataclass
class ResultTable:
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.rows)

    def cell(self, gso, tau, t=1) -> ResultRow:
        for r in self.rows:
            if r.gso == gso and r.tau == tau and r.t == t:
                return r
        raise KeyError((gso, tau, t))


def _cell_filter(cfg: ExperimentConfig, gso: str, tau: float) -> FilterSpec:
    if cfg.filter == "heat":
        return FilterSpec("heat", t=tau)
    if cfg.tikhonov_sign == "auto":
        sign = DEFAULT_TIKHONOV_SIGN[gso]
    else:
        sign = 1 if cfg.tikhonov_sign == "+" else -1
    return FilterSpec.tikhonov(tau, sign)


def _load_dataset(cfg: ExperimentConfig):
    if cfg.dataset == "synthetic":
        g, x = gen_synthetic(cfg.n, cfg.seed, cfg.m_signals, cfg.noise)
        return "synthetic", g, x
    ds = load_sensor_dataset(cfg.coords_path, cfg.signals_path, cfg.radius_km)
    return "sensor_csv", ds.graph, ds.signals


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "" if not math.isfinite(v) else repr(v)
    return str(v)


def run_cell(cfg: ExperimentConfig, graph: Graph, signals, dataset: str, gso: str, tau: float, t: int) -> ResultRow:
    """One grid cell; numerical failures become a NaN row with ``converged=False``."""
    l = cfg.dm_truncation if cfg.dm_truncation > 0 else None
    try:
        f = _cell_filter(cfg, gso, tau)
        if GSO_ALIASES[gso] == "diffusion_map":
            res = learn_pipeline(signals, graph, gso, f, cfg.method, cfg.options(), t=t, l=l, mode=cfg.dm_mode,
                                 alpha=cfg.alpha)
        else:
            res = learn_pipeline(signals, graph, gso, f, cfg.method, cfg.options(), power=int(t), alpha=cfg.alpha)
        r = graph_ree(graph.weights, res.w_est, MetricOptions())
        e = weight_nrmse(graph.weights, res.w_est)
        return ResultRow(dataset, gso, float(tau), int(t), r.value, e, res.iterations, bool(res.converged))
    except (errors.DMGSOError, np.linalg.LinAlgError, FloatingPointError) as exc:
        log.warning("cell %s tau=%s t=%s failed: %s", gso, tau, t, exc)
        return ResultRow(dataset, gso, float(tau), int(t), float("nan"), float("nan"), 0, False)


def _run_cell_job(args):
    cfg, graph_w, coords, signals, dataset, gso, tau, t = args
    g = Graph(graph_w, coords)
    return run_cell(cfg, g, signals, dataset, gso, tau, t)


def run_grid(cfg: ExperimentConfig, jobs: int | None = None) -> ResultTable:
    """Evaluate every (gso, tau, t) cell; output order is fixed regardless of ``jobs``."""
    dataset, g, x = _load_dataset(cfg)
    cells = [(gso, float(tau), int(t)) for gso in cfg.gso_list for tau in cfg.tau_grid for t in cfg.t_grid]
    if len(set(cells)) != len(cells):
        raise errors.BadParams("grid contains duplicate cells")
    jobs = cfg.jobs if jobs is None else jobs
    if jobs is None or jobs <= 0:
        jobs = os.cpu_count() or 1
    if jobs == 1:
        rows = [run_cell(cfg, g, x, dataset, *c) for c in cells]
    else:
        args = [(cfg, np.array(g.weights), None if g.coords is None else np.array(g.coords), x, dataset, *c)
                for c in cells]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_cell_job, args))
    rows.sort(key=lambda r: r.key)
    meta = {
        "config": cfg.canonical(),
        "config_sha256": cfg.digest(),
        "seed": cfg.seed,
        "library_version": __version__,
        "numpy_version": np.__version__,
        "signal_model": (
            "sin(a_k <c_v, theta_k> + b_k) + N(0, noise^2), a_k ~ U[1, 3]"
            if dataset == "synthetic"
            else "first differences of hourly series"
        ),
        "n_nodes": g.n,
        "n_signals": int(x.shape[0]),
    }
    return ResultTable(rows, meta)


# ---------------------------------------------------------------- output


def table_csv(table: ResultTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TABLE_HEADER)
    for r in table.rows:
        writer.writerow([_fmt(getattr(r, h if h != "iters" else "iters")) for h in TABLE_HEADER])
    return buf.getvalue()


def table_markdown(table: ResultTable, value: str = "ree", t: int | None = None) -> str:
    """Pivot to one row per tau (or per t) and one column per GSO.

    When both tau and t vary and ``t`` is not given, one block per t is
    emitted, each under a ``t = k`` line.
    """
    ts = sorted({r.t for r in table.rows})
    taus = sorted({r.tau for r in table.rows})
    if t is None and len(ts) > 1 and len(taus) > 1:
        return "\n".join(f"t = {k}\n\n" + table_markdown(table, value, k) for k in ts)
    gsos = [g for g in GSO_ORDER if any(r.gso == g for r in table.rows)]
    gsos += sorted({r.gso for r in table.rows} - set(gsos))
    ts = sorted({r.t for r in table.rows})
    taus = sorted({r.tau for r in table.rows})
    by_t = len(taus) == 1 and len(ts) > 1
    keys = ts if by_t else taus
    label = "t" if by_t else "tau"
    lines = [f"| {label} | " + " | ".join(gsos) + " |", "|---" * (len(gsos) + 1) + "|"]
    t_sel = t if t is not None else ts[0]
    for k in keys:
        cells = []
        for gso in gsos:
            try:
                row = table.cell(gso, taus[0], k) if by_t else table.cell(gso, k, t_sel)
                v = getattr(row, value)
                cells.append("NaN" if not math.isfinite(v) else f"{v:.4f}")
            except KeyError:
                cells.append("")
        lines.append(f"| {k:g} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def emit_table(table: ResultTable, path, fmt: str = "csv", value: str = "ree") -> Path:
    """Write the table as CSV or a markdown pivot; bytes depend only on the rows."""
    if not table.rows:
        raise errors.DataError("refusing to write an empty table")
    path = Path(path)
    text = table_csv(table) if fmt == "csv" else table_markdown(table, value)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def write_metadata(table: ResultTable, path) -> Path:
    """Sidecar JSON with the run configuration, versions and a timestamp."""
    meta = dict(table.metadata)
    meta["written_at"] = datetime.now(timezone.utc).isoformat()
    meta["python"] = platform.python_version()
    path = Path(path)
    path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_table_csv(path) -> ResultTable:
    rows = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != TABLE_HEADER:
            raise errors.ParseError(f"unexpected header {reader.fieldnames}", path, 1)
        for rec in reader:
            rows.append(
                ResultRow(
                    dataset=rec["dataset"],
                    gso=rec["gso"],
                    tau=float(rec["tau"]),
                    t=int(rec["t"]),
                    ree=float(rec["ree"]) if rec["ree"] else float("nan"),
                    nrmse=float(rec["nrmse"]) if rec["nrmse"] else float("nan"),
                    iters=int(rec["iters"]),
                    converged=rec["converged"] == "true",
                )
            )
    return ResultTable(rows)


# ---------------------------------------------------------------- lattice demo


def lattice_demo(side: int = 11, f: FilterSpec | None = None, t_max: int = 10, gso: str = MARKOV) -> list:
    """Spread a centre delta over an equally weighted 2-D lattice.

    With ``f=None`` each frame is one application of the shift itself; the
    Markov shift moves mass along the walk (``P^T x``), so every frame sums to
    one. With a filter, frame ``t`` is ``H(S)^t delta``.

    Returns a list of ``t_max + 1`` signals, frame 0 being the delta.
    """
    if side < 3:
        raise errors.BadParams("lattice side must be >= 3")
    if t_max < 0:
        raise errors.BadParams("t_max must be nonnegative")
    g = grid_graph(side)
    centre = (side // 2) * side + side // 2
    x = np.zeros(g.n)
    x[centre] = 1.0
    frames = [x.copy()]
    if f is None:
        S = build_gso(g, gso)
        step = S.matrix.T if S.kind == MARKOV else S.matrix
        for _ in range(t_max):
            x = step @ x
            frames.append(x.copy())
        return frames
    S = build_gso(g, gso)
    for _ in range(t_max):
        # polynomials go through mat-vecs so entries outside the support stay exactly zero
        x = polynomial_apply(S, f.coeffs, x) if f.family == "polynomial" else apply_filter(S, f, x)
        frames.append(x.copy())
    return frames


def write_frames_csv(frames, side: int, path) -> Path:
    """Long-format CSV ``frame,row,col,value``."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["frame", "row", "col", "value"])
        for k, fr in enumerate(frames):
            for i, v in enumerate(fr):
                writer.writerow([k, i // side, i % side, repr(float(v))])
    return path


def chebyshev_support_radius(frame, side: int, tol: float = 1e-12) -> int:
    """Largest Chebyshev distance from the centre among entries above ``tol`` times the peak."""
    c = side // 2
    a = np.abs(np.asarray(frame))
    idx = np.flatnonzero(a > tol * max(1.0, float(a.max(initial=0.0))))
    if idx.size == 0:
        return -1
    return int(np.max(np.maximum(np.abs(idx // side - c), np.abs(idx % side - c))))


__all__ = [
    "ExperimentConfig",
    "ResultRow",
    "ResultTable",
    "SensorDataset",
    "emit_table",
    "gen_synthetic",
    "lattice_demo",
    "load_config",
    "load_sensor_dataset",
    "run_grid",
    "table_csv",
    "table_markdown",
    "write_metadata",
]
