"""Star-graph multimodal matching component analysis.

Modality 0 is the central modality; modalities ``1..m`` are each tied to it
by a weighted matching term. Training learns one affine map
``g_i(x) = A_i x + b_i`` per modality into a common ``k``-dimensional domain
such that the mapped training data of modality ``i`` has covariance equal to
the best rank-``r_i`` approximation of its prescribed covariance, where
``r_i = min(rank(C_i C_i^T), rank(S_i))``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import procrustes
from .linalg import (
    DEFAULT_REL_TOL,
    DimensionError,
    ThinSvd,
    _normalize_signs,
    as_matrix,
    canonicalize_clusters,
)
from .stats import CenteredStats, center_scale

__all__ = [
    "DegenerateDataError",
    "PrescribedCovariance",
    "SgmConfig",
    "LinearMap",
    "SgmModel",
    "TrainingDetails",
    "r_min",
    "build_lr",
    "assemble_map",
    "train",
    "trace_ratio",
    "apply",
    "matching_objective",
    "trace_form_objective",
]

SYMMETRY_TOL = 1e-10
PSD_TOL = 1e-10


class DegenerateDataError(ValueError):
    """Raised when a modality's centered data has rank zero."""


@dataclass(frozen=True)
class PrescribedCovariance:
    """A ``k x k`` symmetric PSD target covariance and its eigenfactorization.

    ``eig.sigma`` holds the nonzero eigenvalues in non-increasing order and
    ``sigma_c`` their square roots.
    """

    matrix: np.ndarray
    eig: ThinSvd
    sigma_c: np.ndarray

    @classmethod
    def from_matrix(cls, M, rel_tol=DEFAULT_REL_TOL):
        M = as_matrix(M, "covariance")
        k = M.shape[0]
        if M.shape != (k, k):
            raise DimensionError(f"covariance must be square, got {M.shape}")
        scale = np.linalg.norm(M)
        asym = np.linalg.norm(M - M.T)
        if asym > SYMMETRY_TOL * max(scale, 1.0):
            raise ValueError(f"covariance is not symmetric (asymmetry {asym:.3g})")
        vals, vecs = np.linalg.eigh((M + M.T) / 2)
        vals, vecs = vals[::-1], vecs[:, ::-1]
        top = max(vals[0], 0.0)
        if vals[-1] < -PSD_TOL * max(top, 1.0):
            raise ValueError(f"covariance is not positive semi-definite (eigenvalue {vals[-1]:.3g})")
        cutoff = rel_tol * top * k
        r = int(np.count_nonzero(vals > cutoff)) if top > 0 else 0
        u, _ = canonicalize_clusters(vecs[:, :r], vals[:r], vecs[:, :r], cutoff)
        u, _ = _normalize_signs(u, u)
        u = np.ascontiguousarray(u)
        lam = vals[:r].copy()
        return cls(M, ThinSvd(u, lam, u), np.sqrt(lam))

    @classmethod
    def from_factor(cls, C, rel_tol=DEFAULT_REL_TOL):
        C = as_matrix(C, "covariance factor")
        return cls.from_matrix(C @ C.T, rel_tol)

    @classmethod
    def identity(cls, k):
        return cls.from_matrix(np.eye(k))

    @property
    def k(self) -> int:
        return self.matrix.shape[0]

    @property
    def rank(self) -> int:
        return self.eig.rank

    def best_approx(self, r):
        """Best rank-``r`` approximation of the covariance."""
        u = self.eig.u[:, :r]
        return (u * self.eig.sigma[:r]) @ u.T

    def best_approx_trace(self, r):
        return float(self.eig.sigma[:r].sum())


@dataclass(frozen=True)
class SgmConfig:
    k: int
    weights: tuple
    rel_tol: float = DEFAULT_REL_TOL
    max_outer_iters: int = 100

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k}")
        w = procrustes.check_weights(self.weights)
        object.__setattr__(self, "weights", tuple(float(x) for x in w))
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be >= 1")

    @property
    def m(self) -> int:
        return len(self.weights)


@dataclass(frozen=True)
class LinearMap:
    """Affine map ``x -> a @ x + b`` into the common domain."""

    a: np.ndarray
    b: np.ndarray

    @property
    def dim_in(self) -> int:
        return self.a.shape[1]

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[0] != self.dim_in:
            raise DimensionError(f"expected input of dimension {self.dim_in}, got {x.shape[0]}")
        if x.ndim == 1:
            return self.a @ x + self.b
        return self.a @ x + self.b[:, None]


@dataclass(frozen=True)
class TrainingDetails:
    """Intermediate quantities of :func:`train`, kept for diagnostics."""

    stats: list
    covariances: list
    instance: procrustes.ProcrustesInstance
    initial: procrustes.FeasibleTuple
    refined: procrustes.RefineResult


@dataclass(frozen=True)
class SgmModel:
    """A trained set of ``m + 1`` affine maps (index 0 is the central modality)."""

    maps: list
    r_min: list
    trace_ratio: float
    refine_iters: int
    config: SgmConfig
    means: list
    refine_flips: int = 0
    details: TrainingDetails | None = field(default=None, compare=False, repr=False)

    @property
    def m(self) -> int:
        return len(self.maps) - 1

    @property
    def k(self) -> int:
        return self.config.k

    @property
    def dims(self) -> list:
        return [g.dim_in for g in self.maps]


def r_min(cov_rank, s_rank):
    """Achievable rank of the realized common-domain covariance."""
    if cov_rank < 0 or s_rank < 0:
        raise ValueError("ranks must be non-negative")
    return min(cov_rank, s_rank)


def _as_cov(c, rel_tol=DEFAULT_REL_TOL):
    return c if isinstance(c, PrescribedCovariance) else PrescribedCovariance.from_matrix(c, rel_tol)


def _as_stats(s, rel_tol=DEFAULT_REL_TOL):
    return s if isinstance(s, CenteredStats) else center_scale(s, rel_tol)


def build_lr(c0, ci, s0, si):
    """Coupling matrices ``L_i`` and ``R_i`` between modality 0 and modality ``i``.

    ``L_i = dg(Sigma_C0) U_C0^T U_Ci dg(Sigma_Ci)`` truncated to the ``r_min``
    values, shape ``r_0 x r_i``; ``R_i = V_S0^T V_Si``, shape
    ``rank(S_0) x rank(S_i)``.
    """
    if c0.k != ci.k:
        raise DimensionError(f"covariances have different sizes {c0.k} and {ci.k}")
    r0 = r_min(c0.rank, s0.rank)
    ri = r_min(ci.rank, si.rank)
    L = (c0.sigma_c[:r0, None] * (c0.eig.u[:, :r0].T @ ci.eig.u[:, :ri])) * ci.sigma_c[None, :ri]
    R = s0.s_svd.v.T @ si.s_svd.v
    return L, R


def assemble_map(ci, si, d, mean):
    """Affine map of one modality from its semi-orthogonal factor ``d``.

    ``A = U_C[:, :r] dg(Sigma_C) d Sigma_S^{-1} U_S^T`` and ``b = -A mean``,
    where ``d`` has shape ``r x rank(S)``.
    """
    if si.rank == 0:
        raise DegenerateDataError("modality data is constant (centered data has rank 0)")
    r = r_min(ci.rank, si.rank)
    d = np.asarray(d, dtype=np.float64)
    if d.shape != (r, si.rank):
        raise DimensionError(f"D has shape {d.shape}, expected {(r, si.rank)}")
    svd = si.s_svd
    A = (ci.eig.u[:, :r] * ci.sigma_c[:r]) @ d @ (svd.u / svd.sigma).T
    mean = np.asarray(mean, dtype=np.float64)
    return LinearMap(A, -(A @ mean))


def trace_ratio(tup, covariances, stats, weights):
    """Achieved fraction of the largest possible matching trace.

    Equals one exactly when every matched training pair is mapped to the
    same point; never exceeds one.
    """
    c0, s0 = covariances[0], stats[0]
    r0 = r_min(c0.rank, s0.rank)
    num = 0.0
    den = 0.0
    for w, q, ci, si in zip(weights, tup.qi, covariances[1:], stats[1:]):
        L, R = build_lr(c0, ci, s0, si)
        num += w * np.trace(q.T @ L.T @ tup.q0 @ R)
        den += w * (c0.best_approx_trace(r0) + ci.best_approx_trace(r_min(ci.rank, si.rank)))
    if den == 0:
        raise ValueError("trace ratio undefined: all prescribed covariances are zero")
    return float(2.0 * num / den)


def train(datasets, covariances=None, config=None):
    """Fit the SGM maps.

    Parameters
    ----------
    datasets : list of array_like, each shape (d_i, n)
        ``m + 1`` matched data matrices, central modality first.
    covariances : list, optional
        ``m + 1`` prescribed covariances, each a :class:`PrescribedCovariance`
        or a ``k x k`` PSD array. Defaults to identities of size ``config.k``.
    config : SgmConfig
        Common dimension, the ``m`` weights and numerical settings.

    Returns
    -------
    SgmModel
    """
    if config is None:
        raise ValueError("config is required")
    m = len(datasets) - 1
    if m < 1:
        raise ValueError("need at least two modalities")
    if config.m != m:
        raise ValueError(f"expected {m} weights for {m + 1} modalities, got {config.m}")
    if covariances is None:
        covariances = [PrescribedCovariance.identity(config.k)] * (m + 1)
    if len(covariances) != m + 1:
        raise ValueError(f"expected {m + 1} covariances, got {len(covariances)}")
    covs = [_as_cov(c, config.rel_tol) for c in covariances]
    for i, c in enumerate(covs):
        if c.k != config.k:
            raise DimensionError(f"covariance {i} is {c.k}x{c.k}, expected k={config.k}")
        if c.rank == 0:
            raise ValueError(f"covariance {i} is zero")

    stats = [center_scale(X, config.rel_tol) for X in datasets]
    counts = {s.s.shape[1] for s in stats}
    if len(counts) != 1:
        raise DimensionError(f"modalities have different sample counts {sorted(counts)}")
    for i, s in enumerate(stats):
        if s.rank == 0:
            raise DegenerateDataError(f"modality {i} is constant (centered data has rank 0)")

    pairs = [build_lr(covs[0], covs[i], stats[0], stats[i]) for i in range(1, m + 1)]
    inst = procrustes.ProcrustesInstance([p[0] for p in pairs], [p[1] for p in pairs], config.weights)
    initial = procrustes.solve_related(inst)
    refined = procrustes.refine(initial, inst, config.max_outer_iters)
    tup = refined.tuple

    ds = [tup.q0] + list(tup.qi)
    maps = [assemble_map(c, s, d, s.mean) for c, s, d in zip(covs, stats, ds)]
    T = trace_ratio(tup, covs, stats, config.weights)
    if T <= 0:
        warnings.warn(f"non-positive trace ratio {T:.6g}", RuntimeWarning, stacklevel=2)
    return SgmModel(
        maps=maps,
        r_min=[r_min(c.rank, s.rank) for c, s in zip(covs, stats)],
        trace_ratio=T,
        refine_iters=refined.iterations,
        config=config,
        means=[s.mean for s in stats],
        refine_flips=refined.flips,
        details=TrainingDetails(stats, covs, inst, initial, refined),
    )


def apply(model, modality, x):
    """Map ``x`` (a vector, or a ``(d, N)`` matrix of columns) from ``modality``."""
    if not 0 <= modality <= model.m:
        raise IndexError(f"modality must be in [0, {model.m}], got {modality}")
    return model.maps[modality](x)


def matching_objective(model, datasets):
    """``(n-1)/n * sum_i w_i ||A_0 S_0 - A_i S_i||_F^2`` on the given data."""
    stats = [_as_stats(X, model.config.rel_tol) for X in datasets]
    n = stats[0].s.shape[1]
    img0 = model.maps[0].a @ stats[0].s
    total = 0.0
    for w, g, s in zip(model.config.weights, model.maps[1:], stats[1:]):
        total += w * np.sum((img0 - g.a @ s.s) ** 2)
    return (n - 1) / n * total


def trace_form_objective(details, weights):
    """The matching objective written through traces of the semi-orthogonal factors."""
    covs, stats, tup = details.covariances, details.stats, details.refined.tuple
    n = stats[0].s.shape[1]
    r0 = r_min(covs[0].rank, stats[0].rank)
    total = 0.0
    for w, q, li, ri, c, s in zip(weights, tup.qi, details.instance.l, details.instance.r, covs[1:], stats[1:]):
        cross = np.trace(q.T @ li.T @ tup.q0 @ ri)
        total += w * (covs[0].best_approx_trace(r0) + c.best_approx_trace(r_min(c.rank, s.rank)) - 2 * cross)
    return (n - 1) / n * total
