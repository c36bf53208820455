"""Smoothness functionals: total variation and Markov variation."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import errors
from .diffusion_map import SpectralDecomposition, TransitionMatrix, markov_matrix

log = logging.getLogger(__name__)


@dataclass
class VariationReport:
    tv: float
    mv_l1: float
    mv_l2: float
    gap: float
    bound: float | None = None
    smoothness_c: float | None = None
    fiedler: float | None = None
    residual_norm: float | None = None

    @property
    def holds(self) -> bool | None:
        if self.bound is None:
            return None
        return self.gap <= self.bound * (1 + 1e-12) + 1e-12


def total_variation(L, x) -> float:
    """Laplacian quadratic form ``x^T L x``."""
    x = np.asarray(x, dtype=float)
    return float(x @ np.asarray(L, dtype=float) @ x)


def edge_sum_variation(W, x) -> float:
    """``1/2 sum_ij w_ij (x_i - x_j)^2``; equals ``x^T L x`` for ``L = D - W``."""
    w = np.asarray(W, dtype=float)
    x = np.asarray(x, dtype=float)
    diff = x[:, None] - x[None, :]
    return float(0.5 * np.sum(w * diff * diff))


def _p(P):
    if isinstance(P, TransitionMatrix):
        return P.p
    return np.asarray(P, dtype=float)


def markov_variation(P, x, norm: str = "l1") -> float:
    """``||x - P x||`` in the l1 or l2 norm.

    The residual is formed as ``sum_m P_im (x_i - x_m)``, equal to ``x - P x``
    for row-stochastic ``P`` and exactly zero on constant signals.
    """
    x = np.asarray(x, dtype=float)
    r = np.sum(_p(P) * (x[:, None] - x[None, :]), axis=1)
    if norm == "l1":
        return float(np.sum(np.abs(r)))
    if norm == "l2":
        return float(np.linalg.norm(r))
    raise errors.BadParams(f"unknown norm {norm!r}")


def markov_variation_expanded(W, x) -> float:
    """l1 Markov variation written out node by node:
    ``sum_i (1/d_i) |sum_m W_im (x_i - x_m)|``.
    """
    w = np.asarray(W, dtype=float)
    x = np.asarray(x, dtype=float)
    d = w.sum(axis=1)
    total = 0.0
    for i in range(x.size):
        total += abs(np.sum(w[i] * (x[i] - x))) / d[i]
    return float(total)


def smoothness_test(P, x, threshold: float) -> bool:
    """True when the l1 Markov variation is below ``threshold``.

    No formula for the threshold is prescribed; callers choose it.
    """
    if not threshold > 0:
        raise errors.BadParams("smoothness threshold must be positive")
    return markov_variation(P, x, "l1") < threshold


def smoothness_constant(L, x) -> float:
    """Bound on the graph second difference of ``x``: ``max_i |(L x)_i|``."""
    return float(np.max(np.abs(np.asarray(L, dtype=float) @ np.asarray(x, dtype=float))))


def leading_projection(dec: SpectralDecomposition, x) -> np.ndarray:
    """Orthogonal projection of ``x`` onto the span of psi_1."""
    psi1 = dec.right_vectors[:, 1]
    x = np.asarray(x, dtype=float)
    return (psi1 @ x) / (psi1 @ psi1) * psi1


def tv_mv_gap_diagnostic(dec: SpectralDecomposition, L, P, x, C: float | None = None) -> VariationReport:
    """Compare ``|TV(x) - MV(x)|`` with ``sqrt(C) sqrt(lambda_2) ||x - proj(x)||``.

    ``lambda_2`` is the second smallest Laplacian eigenvalue and ``proj`` the
    projection onto the leading nontrivial diffusion coordinate. A violated
    inequality is logged, never raised.
    """
    L = np.asarray(L, dtype=float)
    lam_l = np.linalg.eigvalsh(0.5 * (L + L.T))
    if lam_l[1] <= 1e-10 * max(1.0, lam_l[-1]):
        raise errors.NotConnected("gap diagnostic needs a connected graph")
    x = np.asarray(x, dtype=float)
    tv = total_variation(L, x)
    mv1 = markov_variation(P, x, "l1")
    mv2 = markov_variation(P, x, "l2")
    if C is None:
        C = smoothness_constant(L, x)
    fiedler = float(lam_l[1])
    resid = float(np.linalg.norm(x - leading_projection(dec, x)))
    bound = float(np.sqrt(C) * np.sqrt(fiedler) * resid)
    rep = VariationReport(
        tv=tv, mv_l1=mv1, mv_l2=mv2, gap=abs(tv - mv1), bound=bound, smoothness_c=C, fiedler=fiedler, residual_norm=resid
    )
    if not rep.holds:
        log.info("TV/MV gap %.6g exceeds bound %.6g", rep.gap, bound)
    return rep


def variation_report(W, x) -> VariationReport:
    """TV and both MV norms for a signal on the graph with weights ``W``."""
    w = np.asarray(W, dtype=float)
    lap = np.diag(w.sum(axis=1)) - w
    tm = markov_matrix(w)
    tv = total_variation(lap, x)
    mv1 = markov_variation(tm, x, "l1")
    return VariationReport(tv=tv, mv_l1=mv1, mv_l2=markov_variation(tm, x, "l2"), gap=abs(tv - mv1))
