"""Diffusion map construction.

Kernel affinities and bandwidth selection, the random-walk (Markov)
normalization, its eigendecomposition through the symmetric conjugate
``D^1/2 P D^-1/2``, the diffusion-map embedding and diffusion distances.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg
from scipy.spatial.distance import pdist, squareform
from scipy.special import logsumexp

from . import errors


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Row-stochastic ``P = D^-1 W`` together with the weights that built it."""

    p: np.ndarray
    degrees: np.ndarray
    weights: np.ndarray

    @property
    def n(self) -> int:
        return self.p.shape[0]


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Eigenpairs of a Markov matrix.

    ``eigenvalues`` are sorted by magnitude, descending (``eigenvalues[0] == 1``).
    Column ``k`` of ``right_vectors`` is the right eigenvector psi_k, column ``k``
    of ``left_vectors`` the matching left eigenvector phi_k, normalized so that
    ``left_vectors.T @ right_vectors == I``.
    """

    eigenvalues: np.ndarray
    right_vectors: np.ndarray
    left_vectors: np.ndarray
    degrees: np.ndarray
    source: str = "markov"

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]

    def sym_vectors(self) -> np.ndarray:
        """Orthonormal eigenvectors of the symmetric conjugate."""
        return np.sqrt(self.degrees)[:, None] * self.right_vectors


@dataclass(frozen=True, eq=False)
class DiffusionMapEmbedding:
    coords: np.ndarray
    t: float
    l: int
    eigenvalues: np.ndarray
    non_integer_power_of_negative: bool = False

    @property
    def n(self) -> int:
        return self.coords.shape[0]


@dataclass(frozen=True)
class BandwidthEstimate:
    epsilon: float
    intrinsic_dim: int
    max_slope: float
    at_boundary: bool


def pairwise_sq_distances(X) -> np.ndarray:
    """Squared Euclidean distances between the rows of ``X``."""
    x = np.asarray(X, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 2:
        raise errors.TooSmall("need at least 2 points")
    return squareform(pdist(x, "sqeuclidean"))


def gaussian_affinity(D, sigma: float) -> np.ndarray:
    """``exp(-D / (2 sigma^2))`` off the diagonal; the diagonal is zero."""
    if not (np.isfinite(sigma) and sigma > 0):
        raise errors.BadParams("sigma must be positive and finite")
    w = np.exp(-np.asarray(D, dtype=float) / (2.0 * sigma**2))
    np.fill_diagonal(w, 0.0)
    return 0.5 * (w + w.T)


def median_bandwidth(X, scale: float = 0.5) -> float:
    """Median-heuristic bandwidth: ``scale`` times the median pairwise distance."""
    x = np.asarray(X, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 2:
        raise errors.TooSmall("need at least 2 points")
    dist = pdist(x)
    if not np.any(dist > 0):
        raise errors.DegenerateData("all points coincide")
    return float(scale * np.median(dist))


def bgh_log_sum(D, epsilons) -> np.ndarray:
    """``log T(eps)`` with ``T(eps) = sum_ij exp(-D_ij / (4 eps))``, max-shifted."""
    d = np.asarray(D, dtype=float).ravel()
    return np.array([logsumexp(-d / (4.0 * eps)) for eps in np.asarray(epsilons, dtype=float)])


def bgh_bandwidth(D, epsilons=None) -> BandwidthEstimate:
    """Berry-Giannakis-Harlim kernel bandwidth scan.

    Scans ``eps`` over ``2^-40 .. 2^40`` and picks the value where the slope of
    ``log T`` against ``log eps`` is largest. Twice that slope estimates the
    intrinsic dimension. If the maximum sits on the edge of the scan the
    boundary value is returned with ``at_boundary=True``.
    """
    d = np.asarray(D, dtype=float)
    if d.shape[0] < 2:
        raise errors.TooSmall("need at least 2 points")
    if epsilons is None:
        epsilons = 2.0 ** np.arange(-40, 41)
    eps = np.sort(np.asarray(epsilons, dtype=float))
    log_t = bgh_log_sum(d, eps)
    log_eps = np.log(eps)
    slope = np.diff(log_t) / np.diff(log_eps)
    k = int(np.argmax(slope))
    return BandwidthEstimate(
        epsilon=float(eps[k]),
        intrinsic_dim=int(np.round(2 * slope[k])),
        max_slope=float(slope[k]),
        at_boundary=k == 0 or k == slope.size - 1,
    )


def markov_matrix(W) -> TransitionMatrix:
    """Random-walk normalization ``P = D^-1 W``."""
    w = np.asarray(W, dtype=float)
    d = w.sum(axis=1)
    if np.any(d <= 0):
        raise errors.IsolatedNode("random-walk normalization needs positive degrees")
    return TransitionMatrix(p=w / d[:, None], degrees=d, weights=w)


def _as_transition(P) -> TransitionMatrix:
    if isinstance(P, TransitionMatrix):
        return P
    # a Graph or raw weight matrix
    return markov_matrix(getattr(P, "weights", P))


def decompose(P) -> SpectralDecomposition:
    """Eigendecompose ``P`` through its symmetric conjugate.

    ``P_sym = D^1/2 P D^-1/2 = D^-1/2 W D^-1/2`` is diagonalized with a
    symmetric solver; right eigenvectors are ``D^-1/2 v`` and left
    eigenvectors ``D^1/2 v``. Each eigenvector is signed so that its
    largest-magnitude entry is positive.
    """
    tm = _as_transition(P)
    w, d = tm.weights, tm.degrees
    s = 1.0 / np.sqrt(d)
    p_sym = s[:, None] * w * s[None, :]
    p_sym = 0.5 * (p_sym + p_sym.T)
    try:
        lam, v = scipy.linalg.eigh(p_sym)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise errors.NumericalError(f"symmetric eigensolver failed: {exc}") from exc
    lam = np.clip(lam, -1.0, 1.0)
    order = np.lexsort((-lam, -np.abs(lam)))
    lam, v = lam[order], v[:, order]
    psi = s[:, None] * v
    pivot = np.argmax(np.abs(psi), axis=0)
    signs = np.sign(psi[pivot, np.arange(psi.shape[1])])
    signs[signs == 0] = 1.0
    v = v * signs
    psi = psi * signs
    phi = np.sqrt(d)[:, None] * v
    return SpectralDecomposition(eigenvalues=lam, right_vectors=psi, left_vectors=phi, degrees=d)


def eigen_power(lam, t: float):
    """``lam ** t`` elementwise; returns ``(values, used_non_integer_power_of_negative)``."""
    lam = np.asarray(lam, dtype=float)
    if float(t).is_integer():
        return lam ** int(t), False
    flagged = bool(np.any(lam < 0))
    return np.sign(lam) * np.abs(lam) ** t, flagged


def embedding(dec: SpectralDecomposition, t: float = 1, l: int | None = None) -> DiffusionMapEmbedding:
    """Diffusion coordinates ``lam_j^t psi_j`` for ``j = 1..l``.

    The trivial constant component ``j = 0`` is skipped.
    """
    n = dec.n
    if l is None:
        l = n - 1
    if not 1 <= l <= n - 1:
        raise errors.BadTruncation(f"truncation l must be in [1, {n - 1}], got {l}")
    if t < 0:
        raise errors.BadParams("diffusion time must be nonnegative")
    lam = dec.eigenvalues[1 : l + 1]
    scale, flagged = eigen_power(lam, t)
    coords = dec.right_vectors[:, 1 : l + 1] * scale[None, :]
    return DiffusionMapEmbedding(coords=coords, t=t, l=l, eigenvalues=lam, non_integer_power_of_negative=flagged)


def diffusion_distance(emb: DiffusionMapEmbedding, i: int, j: int) -> float:
    """Euclidean distance between nodes ``i`` and ``j`` in diffusion coordinates."""
    return float(np.linalg.norm(emb.coords[i] - emb.coords[j]))


def stationary_distribution(dec: SpectralDecomposition, gap_tol: float = 1e-10) -> np.ndarray:
    """Left eigenvector at eigenvalue 1, normalized to sum to one.

    Raises ``NotErgodic`` when the second eigenvalue has magnitude 1
    (disconnected or bipartite graphs).
    """
    if dec.n > 1 and abs(dec.eigenvalues[1]) >= 1.0 - gap_tol:
        raise errors.NotErgodic("random walk is not ergodic (|lambda_1| == 1)")
    phi0 = dec.left_vectors[:, 0]
    return phi0 / phi0.sum()


def diffusion_map(X, sigma: float | None = None, t: float = 1, l: int | None = None):
    """Point cloud to embedding in one call; returns ``(embedding, decomposition, sigma)``."""
    if sigma is None:
        sigma = median_bandwidth(X)
    w = gaussian_affinity(pairwise_sq_distances(X), sigma)
    dec = decompose(markov_matrix(w))
    return embedding(dec, t, l), dec, sigma


def embedding_csv_text(emb: DiffusionMapEmbedding, sigma: float | None = None, node_ids=None) -> str:
    """``node,coord_1..coord_l`` rows after a ``#`` comment recording t, l and sigma."""
    ids = node_ids if node_ids is not None else [str(i) for i in range(emb.n)]
    buf = io.StringIO()
    buf.write(f"# t={emb.t!r} l={emb.l} sigma={sigma!r}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["node"] + [f"coord_{j}" for j in range(1, emb.l + 1)])
    for node, row in zip(ids, emb.coords):
        writer.writerow([node] + [repr(float(v)) for v in row])
    return buf.getvalue()


def write_embedding_csv(path, emb: DiffusionMapEmbedding, sigma: float | None = None, node_ids=None):
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(embedding_csv_text(emb, sigma, node_ids))
    return path
