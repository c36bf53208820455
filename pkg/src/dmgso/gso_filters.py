"""Graph shift operators, graph Fourier transforms and spectral filters.

Four operator kinds are supported: the weighted adjacency ``W``, the
combinatorial Laplacian ``D - W``, the Markov matrix ``P = D^-1 W`` and the
diffusion-map operator built from the spectrum of ``P``. Every operator
carries a Fourier basis that diagonalizes it, so filtering is done in the
spectral domain.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from . import errors
from .diffusion_map import decompose, eigen_power, markov_matrix
from .graph_core import COMBINATORIAL, Graph, laplacian

ADJACENCY = "adjacency"
LAPLACIAN = "laplacian"
MARKOV = "markov"
DIFFUSION_MAP = "diffusion_map"
GSO_KINDS = (ADJACENCY, LAPLACIAN, MARKOV, DIFFUSION_MAP)

TRUNCATED = "truncated"
IDENTITY_MINUS_POWER = "identity_minus_power"
DM_MODES = (TRUNCATED, IDENTITY_MINUS_POWER)

# short names used in configs and result tables
GSO_ALIASES = {"A": ADJACENCY, "L": LAPLACIAN, "P": MARKOV, "DM": DIFFUSION_MAP}

POLE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class FourierBasis:
    """Eigenbasis of a shift operator.

    ``vectors`` holds eigenvectors as columns, ``inverse`` its inverse (the
    transpose when the basis is orthonormal). ``weights`` is the diagonal of
    the inner product in which the basis is orthonormal: all ones for
    symmetric operators, the node degrees for Markov-derived ones.
    """

    vectors: np.ndarray
    inverse: np.ndarray
    eigenvalues: np.ndarray
    weights: np.ndarray | None = None

    @property
    def orthonormal(self) -> bool:
        return self.weights is None

    def energy(self, x) -> np.ndarray:
        """Signal energy in the inner product the basis is orthonormal for."""
        x = np.asarray(x, dtype=float)
        if self.weights is None:
            return np.sum(x * x, axis=0)
        w = self.weights if x.ndim == 1 else self.weights[:, None]
        return np.sum(w * x * x, axis=0)


@dataclass(frozen=True, eq=False)
class ShiftOperator:
    kind: str
    matrix: np.ndarray
    basis: FourierBasis
    rho_bound: float
    params: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, x):
        return self.matrix @ x


@dataclass(frozen=True)
class FilterSpec:
    """Spectral response ``h(lambda)``.

    family
        ``"tikhonov"``: ``1 / (1 + sign * tau * lambda)`` with ``sign`` +1
        (low-pass on nonnegative spectra) or -1.
        ``"heat"``: ``exp(-t * lambda)``.
        ``"polynomial"``: ``sum_k coeffs[k] * lambda**k``.
        ``"ideal"``: 1 where ``lambda <= cutoff``, else 0.
    """

    family: str
    tau: float = 0.0
    t: float = 0.0
    coeffs: tuple = (1.0,)
    cutoff: float = 0.0
    sign: int = 1

    def __post_init__(self):
        if self.family == "tikhonov":
            if not 0.0 <= self.tau <= 1.0:
                raise errors.BadParams(f"Tikhonov tau must lie in [0, 1], got {self.tau}")
            if self.sign not in (1, -1):
                raise errors.BadParams("Tikhonov sign must be +1 or -1")
        elif self.family == "heat":
            if self.t < 0:
                raise errors.BadParams("heat time must be nonnegative")
        elif self.family == "polynomial":
            c = np.asarray(self.coeffs, dtype=float)
            if c.size == 0 or not np.all(np.isfinite(c)):
                raise errors.BadParams("polynomial coefficients must be finite and non-empty")
            object.__setattr__(self, "coeffs", tuple(float(v) for v in c))
        elif self.family != "ideal":
            raise errors.BadParams(f"unknown filter family {self.family!r}")

    @classmethod
    def identity(cls):
        return cls("polynomial", coeffs=(1.0,))

    @classmethod
    def tikhonov(cls, tau, sign=1):
        return cls("tikhonov", tau=tau, sign=sign)

    def response(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        if self.family == "tikhonov":
            denom = 1.0 + self.sign * self.tau * lam
            if np.any(np.abs(denom) <= POLE_TOL):
                raise errors.FilterPole(f"Tikhonov filter (tau={self.tau}) has a pole on the spectrum")
            return 1.0 / denom
        if self.family == "heat":
            return np.exp(-self.t * lam)
        if self.family == "polynomial":
            out = np.zeros_like(lam)
            for c in reversed(self.coeffs):
                out = out * lam + c
            return out
        return (lam <= self.cutoff).astype(float)


def _symmetric_basis(m, ascending):
    lam, u = scipy.linalg.eigh(0.5 * (m + m.T))
    if not ascending:
        lam, u = lam[::-1], u[:, ::-1]
    return FourierBasis(vectors=u, inverse=u.T.copy(), eigenvalues=lam)


def build_gso(g: Graph, kind: str, t: float = 1, l: int | None = None, mode: str = TRUNCATED) -> ShiftOperator:
    """Build a shift operator of the given kind for graph ``g``.

    ``t``, ``l`` and ``mode`` only apply to ``"diffusion_map"``. The truncated
    mode is the rank-``l`` operator ``sum_{j=1..l} lam_j^t psi_j phi_j^T``;
    ``"identity_minus_power"`` is ``I - P^t``.
    """
    kind = GSO_ALIASES.get(kind, kind)
    if kind == ADJACENCY:
        basis = _symmetric_basis(g.weights, ascending=False)
        return ShiftOperator(kind, np.array(g.weights), basis, float(np.max(np.abs(basis.eigenvalues))))
    if kind == LAPLACIAN:
        m = laplacian(g, COMBINATORIAL)
        basis = _symmetric_basis(m, ascending=True)
        # Gershgorin bound
        return ShiftOperator(kind, m, basis, float(2.0 * g.degrees.max()))
    if kind not in (MARKOV, DIFFUSION_MAP):
        raise errors.BadParams(f"unknown shift operator kind {kind!r}")

    tm = markov_matrix(g.weights)
    dec = decompose(tm)
    psi, phi, lam = dec.right_vectors, dec.left_vectors, dec.eigenvalues
    # ||D^-1/2 A D^1/2||_2 <= sqrt(dmax / dmin) ||A||_2 for the symmetric conjugate A
    cond = float(np.sqrt(tm.degrees.max() / tm.degrees.min()))
    if kind == MARKOV:
        basis = FourierBasis(vectors=psi, inverse=phi.T.copy(), eigenvalues=lam, weights=tm.degrees)
        return ShiftOperator(kind, tm.p, basis, cond)

    n = g.n
    if l is None:
        l = n - 1
    if not 1 <= l <= n - 1:
        raise errors.BadTruncation(f"truncation l must be in [1, {n - 1}], got {l}")
    if t < 0:
        raise errors.BadParams("diffusion time must be nonnegative")
    if mode not in DM_MODES:
        raise errors.BadParams(f"unknown diffusion-map mode {mode!r}")
    lam_t, flagged = eigen_power(lam, t)
    params = {"t": t, "l": l, "mode": mode, "non_integer_power_of_negative": flagged}
    if mode == TRUNCATED:
        mu = np.zeros(n)
        mu[1 : l + 1] = lam_t[1 : l + 1]
        m = (psi[:, 1 : l + 1] * mu[1 : l + 1]) @ phi[:, 1 : l + 1].T
        rho = cond * float(np.max(np.abs(mu)))
    else:
        mu = 1.0 - lam_t
        if float(t).is_integer():
            m = np.eye(n) - np.linalg.matrix_power(tm.p, int(t))
        else:
            m = np.eye(n) - (psi * lam_t) @ phi.T
        rho = 1.0 + cond
    basis = FourierBasis(vectors=psi, inverse=phi.T.copy(), eigenvalues=mu, weights=tm.degrees)
    return ShiftOperator(kind, m, basis, rho, params)


def gft(basis: FourierBasis, x) -> np.ndarray:
    """Graph Fourier transform ``inverse @ x`` (columns of ``x`` are signals)."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != basis.vectors.shape[0]:
        raise errors.DataError(f"signal length {x.shape[0]} does not match {basis.vectors.shape[0]} nodes")
    return basis.inverse @ x


def igft(basis: FourierBasis, x_hat) -> np.ndarray:
    """Inverse graph Fourier transform ``vectors @ x_hat``."""
    x_hat = np.asarray(x_hat, dtype=float)
    if x_hat.shape[0] != basis.vectors.shape[1]:
        raise errors.DataError("spectrum length does not match basis size")
    return basis.vectors @ x_hat


def filter_response(S: ShiftOperator, f: FilterSpec, power: int = 1) -> np.ndarray:
    h = f.response(S.basis.eigenvalues)
    if not np.all(np.isfinite(h)):
        raise errors.FilterPole("filter response is not finite on the spectrum")
    return h**power


def apply_filter(S: ShiftOperator, f: FilterSpec, x, power: int = 1) -> np.ndarray:
    """``y = V h(Lambda)^power V^-1 x``; ``x`` may hold one signal per column."""
    h = filter_response(S, f, power)
    x_hat = gft(S.basis, x)
    if x_hat.ndim == 2:
        return igft(S.basis, h[:, None] * x_hat)
    return igft(S.basis, h * x_hat)


def polynomial_apply(S: ShiftOperator, coeffs, x) -> np.ndarray:
    """``sum_k coeffs[k] S^k x`` by repeated matrix-vector products."""
    m = S.matrix if isinstance(S, ShiftOperator) else np.asarray(S, dtype=float)
    c = np.asarray(coeffs, dtype=float)
    x = np.asarray(x, dtype=float)
    out = c[0] * x
    v = x
    for ck in c[1:]:
        v = m @ v
        out = out + ck * v
    return out


def spectral_convolve(basis: FourierBasis, f, g) -> np.ndarray:
    """Vertex-domain convolution: inverse transform of the product of spectra."""
    return igft(basis, gft(basis, f) * gft(basis, g))


@dataclass
class PropertyReport:
    linearity_residual: float
    convolutive_residual: float
    spectral_norm: float
    rho_bound: float
    energy_ratio_min: float
    energy_ratio_max: float
    energy_ratio_mean: float
    euclidean_ratio_max: float
    tol: float
    linearity_tol: float = 1e-12
    convolutive_tol: float = 1e-8

    @property
    def linear(self) -> bool:
        return self.linearity_residual <= self.linearity_tol

    @property
    def convolutive(self) -> bool:
        return self.convolutive_residual <= self.convolutive_tol

    @property
    def norm_bounded(self) -> bool:
        return self.spectral_norm <= self.rho_bound + self.tol

    @property
    def non_expansive(self) -> bool:
        return self.energy_ratio_max <= 1.0 + self.tol

    def rows(self):
        return [
            ("linearity", self.linearity_residual, self.linear),
            ("convolutive", self.convolutive_residual, self.convolutive),
            ("norm_bound", self.spectral_norm - self.rho_bound, self.norm_bounded),
            ("non_expansive", self.energy_ratio_max - 1.0, self.non_expansive),
        ]

    def csv_text(self) -> str:
        """CSV ``property,residual,pass``.

        Norm rows report the excess over their bound, so negative means slack.
        """
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["property", "residual", "pass"])
        for name, res, ok in self.rows():
            writer.writerow([name, repr(float(res)), str(bool(ok)).lower()])
        return buf.getvalue()

    def to_csv(self, path):
        path = Path(path)
        path.write_text(self.csv_text(), encoding="utf-8")
        return path


def check_gso_properties(S: ShiftOperator, tol: float = 1e-8, n_probes: int = 1000, seed: int = 0) -> PropertyReport:
    """Probe the shift-operator properties of ``S`` numerically.

    Energy ratios ``||S x|| / ||x||`` are measured in the inner product in which
    the operator's Fourier basis is orthonormal (for Markov-derived operators,
    the degree-weighted one); the plain Euclidean maximum is reported too.
    """
    rng = np.random.default_rng(seed)
    m = S.matrix
    n = S.n
    xs = rng.standard_normal((n, n_probes))
    ys = rng.standard_normal((n, n_probes))
    alphas = rng.standard_normal(n_probes)
    xs /= np.linalg.norm(xs, axis=0)
    ys /= np.linalg.norm(ys, axis=0)
    lin = m @ (alphas * xs + ys) - alphas * (m @ xs) - m @ ys
    lin_res = float(np.max(np.linalg.norm(lin, axis=0)))

    conj = S.basis.inverse @ m @ S.basis.vectors
    off = conj - np.diag(np.diag(conj))
    conv_res = float(np.max(np.abs(off)))

    sx = m @ xs
    ratio = np.sqrt(S.basis.energy(sx) / S.basis.energy(xs))
    eu = np.linalg.norm(sx, axis=0)
    return PropertyReport(
        linearity_residual=lin_res,
        convolutive_residual=conv_res,
        spectral_norm=float(np.linalg.norm(m, 2)),
        rho_bound=float(S.rho_bound),
        energy_ratio_min=float(ratio.min()),
        energy_ratio_max=float(ratio.max()),
        energy_ratio_mean=float(ratio.mean()),
        euclidean_ratio_max=float(eu.max()),
        tol=tol,
    )
