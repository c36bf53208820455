"""Graph comparison metrics: NRMSE on weights and relative eigenvalue error."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import errors

SIGNED = "signed"
ABSOLUTE = "absolute"


@dataclass(frozen=True)
class MetricOptions:
    k: int | None = None
    eig_floor: float = 1e-9
    ree_mode: str = SIGNED


@dataclass(frozen=True)
class REEResult:
    value: float
    skipped: int
    k: int

    def __float__(self):
        return self.value


def nrmse(y, y_hat) -> float:
    """Root-mean-square error divided by the range of the reference ``y``."""
    y = np.asarray(y, dtype=float).ravel()
    y_hat = np.asarray(y_hat, dtype=float).ravel()
    if y.shape != y_hat.shape:
        raise errors.DataError("reference and estimate differ in length")
    rng = y.max() - y.min()
    if not rng > 0:
        raise errors.ZeroRange("reference values have zero range")
    return float(np.sqrt(np.mean((y - y_hat) ** 2)) / rng)


def upper_triangle(W) -> np.ndarray:
    w = np.asarray(W, dtype=float)
    return w[np.triu_indices(w.shape[0], 1)]


def weight_nrmse(w_true, w_est) -> float:
    """NRMSE between the strict upper triangles of two weight matrices."""
    return nrmse(upper_triangle(w_true), upper_triangle(w_est))


def adjacency_spectrum(W) -> np.ndarray:
    """Eigenvalues of a symmetric matrix sorted by magnitude, descending."""
    w = np.asarray(W, dtype=float)
    lam = np.linalg.eigvalsh(0.5 * (w + w.T))
    return lam[np.lexsort((-lam, -np.abs(lam)))]


def ree_detail(lambda_true, lambda_est, opts: MetricOptions | None = None) -> REEResult:
    """Relative eigenvalue error with the count of excluded terms.

    ``(1/k) sum_{i=2..k} (est_i - true_i) / true_i`` over magnitude-sorted
    spectra; the largest pair is left out and the prefactor stays ``1/k``.
    Terms whose reference eigenvalue is below ``eig_floor`` in magnitude are
    dropped and counted.
    """
    opts = opts or MetricOptions()
    lt = np.asarray(lambda_true, dtype=float)
    le = np.asarray(lambda_est, dtype=float)
    k = opts.k if opts.k is not None else min(lt.size, le.size)
    if k < 2 or lt.size < k or le.size < k:
        raise errors.BadParams(f"need 2 <= k <= spectrum length, got k={k}")
    a, b = lt[1:k], le[1:k]
    keep = np.abs(a) >= opts.eig_floor
    if not np.any(keep):
        raise errors.AllSkipped("every reference eigenvalue is below the floor")
    terms = (b[keep] - a[keep]) / a[keep]
    if opts.ree_mode == ABSOLUTE:
        terms = np.abs(terms)
    elif opts.ree_mode != SIGNED:
        raise errors.BadParams(f"unknown REE mode {opts.ree_mode!r}")
    return REEResult(value=float(np.sum(terms) / k), skipped=int(np.count_nonzero(~keep)), k=k)


def ree(lambda_true, lambda_est, opts: MetricOptions | None = None) -> float:
    return ree_detail(lambda_true, lambda_est, opts).value


def graph_ree(w_true, w_est, opts: MetricOptions | None = None) -> REEResult:
    """REE between the adjacency spectra of two weight matrices."""
    return ree_detail(adjacency_spectrum(w_true), adjacency_spectrum(w_est), opts)
