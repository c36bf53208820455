"""Weighted undirected graphs, Laplacians and point-cloud graph construction."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import cdist

from . import errors

EARTH_RADIUS_KM = 6371.0

COMBINATORIAL = "combinatorial"
SYM_NORMALIZED = "sym_normalized"
LAPLACIAN_KINDS = (COMBINATORIAL, SYM_NORMALIZED)


def _frozen(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Graph:
    """Simple undirected graph with nonnegative edge weights and no self-loops.

    Use :func:`build_graph` to construct one; the arrays are read-only.
    """

    weights: np.ndarray
    coords: np.ndarray | None = None
    degrees: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "weights", _frozen(self.weights))
        if self.coords is not None:
            object.__setattr__(self, "coords", _frozen(self.coords))
        object.__setattr__(self, "degrees", _frozen(self.weights.sum(axis=1)))

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def n_edges(self) -> int:
        return int(np.count_nonzero(np.triu(self.weights, 1)))

    def is_connected(self) -> bool:
        n_comp, _ = connected_components(self.weights > 0, directed=False)
        return n_comp == 1

    def require_connected(self):
        if not self.is_connected():
            raise errors.NotConnected("graph is not connected")


def build_graph(weights, coords=None) -> Graph:
    """Validate a weight matrix and wrap it as a :class:`Graph`.

    Raises
    ------
    TooSmall, NotSymmetric, NegativeWeight, SelfLoop
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise errors.DataError(f"weight matrix must be square, got shape {w.shape}")
    n = w.shape[0]
    if n < 2:
        raise errors.TooSmall("a graph needs at least 2 nodes")
    if not np.all(np.isfinite(w)):
        raise errors.DataError("weight matrix contains non-finite entries")
    if np.any(w != w.T):
        raise errors.NotSymmetric("weight matrix is not symmetric")
    if np.any(w < 0):
        raise errors.NegativeWeight("weight matrix has negative entries")
    if np.any(np.diag(w) != 0):
        raise errors.SelfLoop("weight matrix has nonzero diagonal")
    if coords is not None:
        coords = np.asarray(coords, dtype=float)
        if coords.ndim == 1:
            coords = coords[:, None]
        if coords.shape[0] != n:
            raise errors.DataError(f"{coords.shape[0]} coordinate rows for {n} nodes")
    return Graph(w, coords)


def laplacian(g: Graph, kind: str = COMBINATORIAL) -> np.ndarray:
    """Combinatorial ``D - W`` or symmetric normalized ``D^-1/2 (D - W) D^-1/2``."""
    w = g.weights
    d = g.degrees
    lap = np.diag(d) - w
    if kind == COMBINATORIAL:
        return lap
    if kind == SYM_NORMALIZED:
        if np.any(d <= 0):
            raise errors.IsolatedNode("normalized Laplacian undefined for isolated nodes")
        s = 1.0 / np.sqrt(d)
        out = s[:, None] * lap * s[None, :]
        return 0.5 * (out + out.T)
    raise errors.BadParams(f"unknown Laplacian kind {kind!r}")


def haversine_km(latlon_a, latlon_b) -> np.ndarray:
    """Great-circle distances (km) between two sets of (lat, lon) points in degrees."""
    a = np.radians(np.atleast_2d(latlon_a))
    b = np.radians(np.atleast_2d(latlon_b))
    dlat = b[None, :, 0] - a[:, None, 0]
    dlon = b[None, :, 1] - a[:, None, 1]
    h = np.sin(dlat / 2) ** 2 + np.cos(a[:, None, 0]) * np.cos(b[None, :, 0]) * np.sin(dlon / 2) ** 2
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def pairwise_distances(coords, metric: str = "euclidean") -> np.ndarray:
    x = np.asarray(coords, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if metric == "euclidean":
        return cdist(x, x)
    if metric == "greatcircle":
        if x.shape[1] != 2:
            raise errors.BadCoordinates("great-circle metric needs (lat, lon) columns")
        if np.any(np.abs(x[:, 0]) > 90) or np.any(np.abs(x[:, 1]) > 180):
            raise errors.BadCoordinates("latitude must be in [-90, 90] and longitude in [-180, 180]")
        dist = haversine_km(x, x)
        np.fill_diagonal(dist, 0.0)
        return 0.5 * (dist + dist.T)
    raise errors.BadParams(f"unknown metric {metric!r}")


def radius_graph(coords, radius: float, metric: str = "euclidean", sigma: float = 1.0) -> Graph:
    """Connect every pair within ``radius``; weight edges by ``exp(-dist^2 / (2 sigma^2))``."""
    if not radius > 0:
        raise errors.BadParams("radius must be positive")
    if not sigma > 0:
        raise errors.BadParams("sigma must be positive")
    dist = pairwise_distances(coords, metric)
    w = np.where(dist <= radius, np.exp(-(dist**2) / (2 * sigma**2)), 0.0)
    np.fill_diagonal(w, 0.0)
    return build_graph(w, coords)


def _knn_wiring(dist: np.ndarray, avg_degree: float) -> np.ndarray:
    # smallest k whose symmetrized k-NN graph reaches the target mean degree
    n = dist.shape[0]
    order = np.argsort(dist + np.diag(np.full(n, np.inf)), axis=1, kind="stable")
    adj = np.zeros((n, n), dtype=bool)
    rows = np.arange(n)
    for k in range(n - 1):
        adj[rows, order[:, k]] = True
        adj |= adj.T
        if adj.sum() / n >= avg_degree:
            break
    return adj


def random_sensor_graph(n: int, seed: int, avg_degree: float = 6) -> Graph:
    """Random geometric sensor graph in the unit square.

    Nodes are uniform in ``[0, 1]^2``; each node is wired to its nearest
    neighbours until the mean degree reaches ``avg_degree``. Edge weights are
    a Gaussian kernel of the distance with a median-heuristic bandwidth.
    Disconnected draws are regenerated from a derived seed up to 10 times.
    """
    from .diffusion_map import median_bandwidth

    if n < 2:
        raise errors.TooSmall("a graph needs at least 2 nodes")
    if avg_degree < 1:
        raise errors.BadParams("avg_degree must be >= 1")
    for attempt in range(11):
        rng = np.random.default_rng([seed, attempt])
        coords = rng.uniform(0.0, 1.0, size=(n, 2))
        dist = cdist(coords, coords)
        adj = _knn_wiring(dist, avg_degree)
        sigma = median_bandwidth(coords)
        w = np.where(adj, np.exp(-(dist**2) / (2 * sigma**2)), 0.0)
        np.fill_diagonal(w, 0.0)
        g = build_graph(w, coords)
        if g.is_connected():
            return g
    raise errors.Disconnected(f"no connected sensor graph for seed {seed} after 10 regenerations")


def grid_graph(side: int) -> Graph:
    """Equally weighted 4-neighbour 2-D lattice, nodes in row-major order."""
    n = side * side
    w = np.zeros((n, n))
    for r in range(side):
        for c in range(side):
            i = r * side + c
            if c + 1 < side:
                w[i, i + 1] = w[i + 1, i] = 1.0
            if r + 1 < side:
                w[i, i + side] = w[i + side, i] = 1.0
    coords = np.array([(r, c) for r in range(side) for c in range(side)], dtype=float)
    return build_graph(w, coords)


def read_coords_csv(path):
    """Read a node coordinate table.

    The header must be ``id,lat,lon`` (degrees) or ``id,x,y``.

    Returns
    -------
    ids : list of str
    coords : (n, 2) ndarray
    metric : {"greatcircle", "euclidean"}
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"coordinate file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip().lower() for h in next(reader)]
        except StopIteration:
            raise errors.ParseError("empty file", path, 1) from None
        if header == ["id", "lat", "lon"]:
            metric = "greatcircle"
        elif header == ["id", "x", "y"]:
            metric = "euclidean"
        else:
            raise errors.ParseError(f"unexpected header {header}", path, 1)
        ids, rows = [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not f.strip() for f in rec):
                continue
            if len(rec) != 3:
                raise errors.ParseError(f"expected 3 fields, got {len(rec)}", path, lineno)
            try:
                rows.append((float(rec[1]), float(rec[2])))
            except ValueError:
                raise errors.ParseError(f"non-numeric coordinate in {rec}", path, lineno) from None
            ids.append(rec[0].strip())
    if len(set(ids)) != len(ids):
        raise errors.ParseError("duplicate node ids", path)
    return ids, np.array(rows, dtype=float).reshape(-1, 2), metric
