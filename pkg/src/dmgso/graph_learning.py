"""Graph structure estimation from (optionally prefiltered) signal covariances.

Two estimators are provided:

* :func:`min_markov_var` -- minimizes ``||S - D(W)^+ W S W^T||_F^2`` over
  nonnegative doubly stochastic ``W`` by projected gradient descent.
* :func:`min_total_var` -- a total-variation / log-determinant baseline over
  combinatorial Laplacians.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import errors
from .graph_core import Graph
from .gso_filters import DIFFUSION_MAP, GSO_ALIASES, TRUNCATED, FilterSpec, apply_filter, build_gso, filter_response

log = logging.getLogger(__name__)

MV = "MV"
TV = "TV"

_MIN_STEP = 1e-20
_ESCAPE = 1e-3


@dataclass(frozen=True, eq=False)
class SampleCovariance:
    sigma: np.ndarray
    m: int

    @property
    def n(self) -> int:
        return self.sigma.shape[0]


@dataclass(frozen=True)
class LearnOptions:
    max_iters: int = 2000
    tol: float = 1e-8
    step: float = 1e-2
    projection_iters: int = 50

    def __post_init__(self):
        if self.max_iters < 0 or not (self.tol > 0 and self.step > 0) or self.projection_iters < 1:
            raise errors.BadParams("learn options must be positive")


@dataclass(eq=False)
class LearnResult:
    w_est: np.ndarray
    objective_trace: list
    iterations: int
    converged: bool
    constraint_violation: float
    method: str = MV
    w_raw: np.ndarray | None = None
    raw_violation: float = 0.0
    final_objective: float = float("nan")
    meta: dict = field(default_factory=dict)

    def edges(self, threshold: float = 0.0):
        """Upper-triangle ``(i, j, weight)`` triples with weight above ``threshold``."""
        n = self.w_est.shape[0]
        iu, ju = np.triu_indices(n, 1)
        vals = self.w_est[iu, ju]
        keep = vals > threshold
        return list(zip(iu[keep].tolist(), ju[keep].tolist(), vals[keep].tolist()))

    def write(self, path, threshold: float = 0.0, metadata: dict | None = None):
        """Write an ``i,j,weight`` edge list plus a ``.json`` sidecar with run metadata."""
        path = Path(path)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["i", "j", "weight"])
            for i, j, wv in self.edges(threshold):
                writer.writerow([i, j, repr(float(wv))])
        meta = {
            "method": self.method,
            "n": int(self.w_est.shape[0]),
            "iterations": self.iterations,
            "converged": self.converged,
            "constraint_violation": self.constraint_violation,
            "final_objective": self.final_objective,
            "objective_trace": [float(v) for v in self.objective_trace],
        }
        meta.update(self.meta)
        if metadata:
            meta.update(metadata)
        path.with_suffix(path.suffix + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------- covariance


def sample_covariance(X) -> SampleCovariance:
    """Unbiased covariance of ``X`` (rows are observations, columns nodes)."""
    x = np.asarray(X, dtype=float)
    if x.ndim != 2:
        raise errors.DataError("signal matrix must be 2-D (observations x nodes)")
    m = x.shape[0]
    if m < 2:
        raise errors.TooFewObservations("need at least 2 observations")
    xc = x - x.mean(axis=0)
    sigma = xc.T @ xc / (m - 1)
    return SampleCovariance(0.5 * (sigma + sigma.T), m)


def _as_cov(S) -> SampleCovariance:
    if isinstance(S, SampleCovariance):
        return S
    s = np.asarray(S, dtype=float)
    return SampleCovariance(s, 0)


def _check_psd(sigma):
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise errors.DataError("covariance must be square")
    if sigma.shape[0] < 2:
        raise errors.TooSmall("need at least 2 nodes")
    if not np.allclose(sigma, sigma.T, atol=1e-12 * max(1.0, np.abs(sigma).max())):
        raise errors.NotPSD("covariance is not symmetric")
    lam = np.linalg.eigvalsh(0.5 * (sigma + sigma.T))
    if lam[0] < -1e-10 * max(1.0, abs(lam[-1])):
        raise errors.NotPSD(f"covariance has negative eigenvalue {lam[0]:.3g}")


def prefilter_covariance(S, f: FilterSpec) -> SampleCovariance:
    """Shape the covariance's own spectrum by ``h``: ``Q Lambda h(Lambda) Q^T``.

    ``h`` acts as a gain on each eigencomponent, so ``h == 1`` returns
    ``sigma`` unchanged and Tikhonov maps ``lam`` to ``lam / (1 + tau lam)``.
    """
    cov = _as_cov(S)
    lam, q = np.linalg.eigh(cov.sigma)
    h = f.response(lam)
    if not np.all(np.isfinite(h)):
        raise errors.FilterPole("filter response is not finite on the covariance spectrum")
    out = (q * (lam * h)) @ q.T
    return SampleCovariance(0.5 * (out + out.T), cov.m)


# ---------------------------------------------------------------- Markov variation


def _inv_row_sums(w):
    s = w.sum(axis=1)
    r = np.zeros_like(s)
    nz = s != 0
    r[nz] = 1.0 / s[nz]
    return r


def markov_objective(W, sigma) -> float:
    """``||sigma - D(W)^+ W sigma W^T||_F^2`` with ``D(W)^+`` the pseudo-inverse of the row-sum diagonal."""
    w = np.asarray(W, dtype=float)
    r = _inv_row_sums(w)
    resid = sigma - r[:, None] * (w @ sigma @ w.T)
    return float(np.sum(resid * resid))


def markov_gradient(W, sigma) -> np.ndarray:
    """Analytic gradient of :func:`markov_objective` with respect to ``W``."""
    w = np.asarray(W, dtype=float)
    r = _inv_row_sums(w)
    ws = w @ sigma
    b = ws @ w.T
    resid = sigma - r[:, None] * b
    rr = r[:, None] * resid
    g = rr @ ws + (resid.T * r[None, :]) @ ws
    c = np.sum(resid * b, axis=1)
    # d r_i / d s_i = -r_i^2, zero where the row sum vanishes
    g -= (r * r * c)[:, None]
    return -2.0 * g


def _affine_project(y):
    # Euclidean projection onto {X : X 1 = 1, 1^T X = 1^T}
    n = y.shape[0]
    a = y.sum(axis=1) - 1.0
    b = y.sum(axis=0) - 1.0
    s = a.sum()
    return y - a[:, None] / n - b[None, :] / n + s / (n * n)


def _stochastic_residual(x):
    return max(np.max(np.abs(x.sum(axis=1) - 1.0)), np.max(np.abs(x.sum(axis=0) - 1.0)))


def _simplex_thresholds(Z):
    # per row: tau with sum_j max(Z_ij - tau, 0) = 1
    n = Z.shape[1]
    u = -np.sort(-Z, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    k = np.arange(1, n + 1)
    active = u - css / k > 0
    rho = n - 1 - np.argmax(active[:, ::-1], axis=1)
    return css[np.arange(Z.shape[0]), rho] / (rho + 1)


def _dual_value(y, a, b):
    x = np.maximum(y - a[:, None] - b[None, :], 0.0)
    return 0.5 * float(np.sum(x * x)) + float(a.sum() + b.sum()), x


def project_doubly_stochastic(Y, sweeps: int = 50, tol: float = 1e-10, polish_iters: int = 200, col_shift=None,
                              return_shift: bool = False):
    """Euclidean projection onto nonnegative doubly stochastic matrices.

    The projection is ``max(Y - a 1^T - 1 b^T, 0)`` for dual multipliers
    ``a``, ``b``. A few block coordinate ascent sweeps (each an exact
    row-wise simplex threshold) warm up the multipliers, then semismooth
    Newton steps on the dual drive the row/column-sum residual below ``tol``;
    the Newton system carries a shift proportional to the residual and a
    coordinate sweep replaces any step whose line search fails.
    ``col_shift`` warm-starts ``b``. Sinkhorn row/column scaling is a last
    resort if ``sweeps`` Newton steps are not enough.
    """
    y = np.asarray(Y, dtype=float)
    n = y.shape[0]
    b = np.zeros(y.shape[1]) if col_shift is None else np.array(col_shift, dtype=float)
    for _ in range(3):
        a = _simplex_thresholds(y - b[None, :])
        b = _simplex_thresholds((y - a[:, None]).T)
    f, x = _dual_value(y, a, b)
    hess = np.empty((2 * n, 2 * n))
    diag = np.arange(2 * n)
    done = False
    for _ in range(sweeps):
        grad = np.concatenate([1.0 - x.sum(axis=1), 1.0 - x.sum(axis=0)])
        if float(np.max(np.abs(grad))) <= tol:
            done = True
            break
        m = (x > 0).astype(float)
        hess[:n, n:] = m
        hess[n:, :n] = m.T
        hess[:n, :n] = 0.0
        hess[n:, n:] = 0.0
        hess[diag, diag] = np.concatenate([m.sum(axis=1), m.sum(axis=0)])
        # the shift keeps the system solvable when the support graph splits
        mu = min(1.0, float(np.linalg.norm(grad)))
        hess[diag, diag] += mu
        try:
            d = -np.linalg.solve(hess, grad)
            ok = bool(np.all(np.isfinite(d)))
        except np.linalg.LinAlgError:
            ok = False
        if ok:
            slope = float(grad @ d)
            # slack for rounding in f once the decrease is below its resolution
            slack = 8 * np.finfo(float).eps * max(abs(f), 1.0)
            t = 1.0
            for _ in range(30):
                a_t, b_t = a + t * d[:n], b + t * d[n:]
                f_t, x_t = _dual_value(y, a_t, b_t)
                if f_t <= f + 1e-4 * t * slope + slack:
                    break
                t *= 0.5
            else:
                ok = False
        if not ok:
            # an exact coordinate sweep always decreases the dual
            a_t = _simplex_thresholds(y - b[None, :])
            b_t = _simplex_thresholds((y - a_t[:, None]).T)
            f_t, x_t = _dual_value(y, a_t, b_t)
        a, b, f, x = a_t, b_t, f_t, x_t
    if not done:
        for _ in range(polish_iters):
            rs = x.sum(axis=1)
            if np.any(rs <= 0):
                break
            x = x / rs[:, None]
            x = x / x.sum(axis=0)[None, :]
            if _stochastic_residual(x) <= tol:
                break
    return (x, b) if return_shift else x


class _WarmProjector:
    """Doubly stochastic projection that reuses the previous column multipliers."""

    def __init__(self, sweeps):
        self.sweeps = sweeps
        self.shift = None

    def __call__(self, y):
        x, self.shift = project_doubly_stochastic(y, self.sweeps, col_shift=self.shift, return_shift=True)
        return x


def _violation(w):
    return float(max(_stochastic_residual(w), max(0.0, -float(w.min()))))


def _descend(objective, gradient, project, x0, opts: LearnOptions):
    """Monotone projected gradient descent with Barzilai-Borwein trial steps.

    The first trial step is ``opts.step``; later ones use the BB step
    ``<s, s> / <s, y>`` from the last accepted move. A trial that does not
    lower the objective is halved. Stops once an accepted step lowers the
    objective by at most ``opts.tol``. Returns ``(x, trace, iterations, converged)``.
    """
    x = x0
    fx = objective(x)
    trace = [fx]
    step = opts.step
    it = 0
    converged = False
    g = gradient(x) if opts.max_iters > 0 else None
    while it < opts.max_iters:
        accepted = False
        while step >= _MIN_STEP:
            cand = project(x - step * g)
            fc = objective(cand)
            if np.isfinite(fc) and fc < fx:
                accepted = True
                break
            step *= 0.5
        it += 1
        if not accepted:
            log.debug("step underflow after %d iterations", it)
            break
        change = fx - fc
        g_new = gradient(cand)
        s_vec = cand - x
        y_vec = g_new - g
        x, fx, g = cand, fc, g_new
        trace.append(fx)
        if change <= opts.tol:
            converged = True
            break
        sy = float(np.sum(s_vec * y_vec))
        ss = float(np.sum(s_vec * s_vec))
        step = min(max(ss / sy, 1e-12), 1e12) if sy > 0 else min(2.0 * step, 1e12)
    return x, trace, it, converged


def min_markov_var(S, opts: LearnOptions | None = None) -> LearnResult:
    """Learn a doubly stochastic weight matrix by Markov-variation minimization.

    Starts from ``0.5 * ones(n)`` mapped onto the feasible set and runs
    projected gradient descent. When ``sigma`` has constant row sums that
    start is a stationary point; it is then moved a distance ``1e-3`` along
    the segment towards the identity so the descent can leave it. The returned ``w_est`` is the symmetrized
    iterate ``0.5 (W + W^T)``; the raw iterate is kept in ``w_raw``.
    """
    opts = opts or LearnOptions()
    sigma = _as_cov(S).sigma
    _check_psd(sigma)
    n = sigma.shape[0]

    project = _WarmProjector(opts.projection_iters)
    w0 = project(0.5 * np.ones((n, n)))
    if opts.max_iters > 0:
        g = markov_gradient(w0, sigma)
        # gradient component tangent to the affine hull of the feasible set
        g_tan = g - g.mean(axis=0)[None, :] - g.mean(axis=1)[:, None] + g.mean()
        if np.linalg.norm(g_tan) <= 1e-10 * max(1.0, float(np.linalg.norm(sigma))):
            log.debug("uniform start is stationary; nudging towards the identity")
            w0 = (1.0 - _ESCAPE) * w0 + _ESCAPE * np.eye(n)
    w, trace, iters, converged = _descend(
        lambda v: markov_objective(v, sigma), lambda v: markov_gradient(v, sigma), project, w0, opts
    )
    w_sym = 0.5 * (w + w.T)
    return LearnResult(
        w_est=w_sym,
        objective_trace=trace,
        iterations=iters,
        converged=converged,
        constraint_violation=_violation(w_sym),
        method=MV,
        w_raw=w,
        raw_violation=_violation(w),
        final_objective=markov_objective(w_sym, sigma),
    )


# ---------------------------------------------------------------- total variation baseline


def laplacian_from_edges(w_vec, n) -> np.ndarray:
    iu, ju = np.triu_indices(n, 1)
    lap = np.zeros((n, n))
    lap[iu, ju] = -w_vec
    lap += lap.T
    np.fill_diagonal(lap, -lap.sum(axis=1))
    return lap


def total_var_objective(w_vec, sigma, alpha) -> float:
    """``tr(S L) - log det(L + J) + alpha ||offdiag(L)||_1`` for ``L = L(w)``, ``J = 11^T / n``."""
    n = sigma.shape[0]
    if np.any(w_vec < 0):
        return np.inf
    lap = laplacian_from_edges(w_vec, n)
    sign, logdet = np.linalg.slogdet(lap + np.full((n, n), 1.0 / n))
    if sign <= 0:
        return np.inf
    return float(np.sum(sigma * lap) - logdet + 2.0 * alpha * np.sum(w_vec))


def total_var_gradient(w_vec, sigma, alpha) -> np.ndarray:
    n = sigma.shape[0]
    iu, ju = np.triu_indices(n, 1)
    k = np.linalg.inv(laplacian_from_edges(w_vec, n) + np.full((n, n), 1.0 / n))
    ds = np.diag(sigma)
    dk = np.diag(k)
    return (ds[iu] + ds[ju] - 2 * sigma[iu, ju]) - (dk[iu] + dk[ju] - 2 * k[iu, ju]) + 2.0 * alpha


def min_total_var(S, alpha: float = 0.0, opts: LearnOptions | None = None) -> LearnResult:
    """Total-variation baseline over combinatorial Laplacians.

    Minimizes ``tr(S L) - log det(L + J) + alpha ||offdiag(L)||_1`` over edge
    weights ``w >= 0`` by projected gradient, starting from the complete
    graph with unit weights.
    """
    opts = opts or LearnOptions()
    if alpha < 0:
        raise errors.BadParams("alpha must be nonnegative")
    sigma = _as_cov(S).sigma
    _check_psd(sigma)
    n = sigma.shape[0]
    w0 = np.ones(n * (n - 1) // 2)
    w_vec, trace, iters, converged = _descend(
        lambda v: total_var_objective(v, sigma, alpha),
        lambda v: total_var_gradient(v, sigma, alpha),
        lambda v: np.maximum(v, 0.0),
        w0,
        opts,
    )
    lap = laplacian_from_edges(w_vec, n)
    w = -lap
    np.fill_diagonal(w, 0.0)
    violation = float(max(np.max(np.abs(lap.sum(axis=1))), max(0.0, -float(w_vec.min()))))
    return LearnResult(
        w_est=w,
        objective_trace=trace,
        iterations=iters,
        converged=converged,
        constraint_violation=violation,
        method=TV,
        w_raw=w.copy(),
        raw_violation=violation,
        final_objective=trace[-1],
        meta={"alpha": alpha},
    )


# ---------------------------------------------------------------- pipeline


def filter_signals(X, g_hint: Graph, gso_kind: str, f: FilterSpec, t: float = 1, l: int | None = None,
                   mode: str = TRUNCATED, power: int = 1) -> np.ndarray:
    """Filter each row of ``X`` in the Fourier basis of the chosen shift operator.

    For the diffusion-map operator ``t`` is the diffusion time; for the other
    operators the filter response is raised to ``power``. A response that is
    identically one returns ``X`` untouched.
    """
    x = np.asarray(X, dtype=float)
    kind = GSO_ALIASES.get(gso_kind, gso_kind)
    if kind == DIFFUSION_MAP:
        S = build_gso(g_hint, kind, t=t, l=l, mode=mode)
    else:
        S = build_gso(g_hint, kind)
    if np.all(filter_response(S, f, power) == 1.0):
        return x
    return apply_filter(S, f, x.T, power).T


def learn_pipeline(X, g_hint: Graph, gso_kind: str = "DM", f: FilterSpec | None = None, method: str = MV,
                   opts: LearnOptions | None = None, t: float = 1, l: int | None = None, mode: str = TRUNCATED,
                   power: int = 1, alpha: float = 0.0) -> LearnResult:
    """GFT, filter, inverse GFT, sample covariance, then the chosen estimator."""
    x = np.asarray(X, dtype=float)
    if x.ndim != 2 or x.shape[1] != g_hint.n:
        raise errors.DataError(f"signals must be (m, {g_hint.n}), got {x.shape}")
    g_hint.require_connected()
    f = f or FilterSpec.identity()
    xf = filter_signals(x, g_hint, gso_kind, f, t=t, l=l, mode=mode, power=power)
    cov = sample_covariance(xf)
    if method == MV:
        return min_markov_var(cov, opts)
    if method == TV:
        return min_total_var(cov, alpha, opts)
    raise errors.BadParams(f"unknown learning method {method!r}")
