"""Dense linear-algebra primitives.

All SVDs returned here are made deterministic: a numerical-rank cutoff
decides which singular values count as nonzero; inside a cluster of
numerically equal singular values the right vectors are rotated to a
canonical basis (so the result depends on the singular subspace, not on
the LAPACK driver); every singular pair is sign-normalized so the
largest-magnitude entry of its left vector is positive; and orthogonal
completions are built with a Householder QR.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DimensionError",
    "ThinSvd",
    "FullSvd",
    "as_matrix",
    "diag_embed",
    "diag_extract",
    "dg",
    "thin_svd",
    "full_svd",
    "orthogonal_completion",
    "canonicalize_clusters",
    "best_rank",
]

DEFAULT_REL_TOL = 1e-12


class DimensionError(ValueError):
    """Raised when array shapes are incompatible with an operation."""


def as_matrix(A, name="matrix"):
    """Return ``A`` as a finite 2-D float64 array, or raise."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got ndim={A.ndim}")
    if A.shape[0] < 1 or A.shape[1] < 1:
        raise DimensionError(f"{name} must have at least one row and column, got {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains NaN or Inf")
    return A


@dataclass(frozen=True)
class ThinSvd:
    """Thin SVD ``Z = u @ diag(sigma) @ v.T`` truncated to numerical rank.

    ``u`` is ``(rows, r)``, ``sigma`` has length ``r`` (positive and
    non-increasing), ``v`` is ``(cols, r)``. ``r`` may be zero.
    """

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    @property
    def rank(self) -> int:
        return int(self.sigma.shape[0])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.u.shape[0], self.v.shape[0])

    def matrix(self) -> np.ndarray:
        return (self.u * self.sigma) @ self.v.T


@dataclass(frozen=True)
class FullSvd:
    """Full SVD with square orthogonal factors.

    ``sigma_bar`` has length ``min(rows, cols)`` and is zero beyond the
    numerical rank. The leading ``rank`` columns of ``u_bar``/``v_bar`` are
    those of the matching :class:`ThinSvd`.
    """

    u_bar: np.ndarray
    sigma_bar: np.ndarray
    v_bar: np.ndarray
    rank: int

    def sigma_matrix(self) -> np.ndarray:
        return diag_embed(self.sigma_bar, self.u_bar.shape[0], self.v_bar.shape[0])

    def matrix(self) -> np.ndarray:
        return self.u_bar @ self.sigma_matrix() @ self.v_bar.T


def diag_embed(v, a, b):
    """Return the ``a x b`` matrix whose first ``len(v)`` diagonal entries are ``v``."""
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    c = v.shape[0]
    if c > min(a, b):
        raise DimensionError(f"cannot embed {c} diagonal entries in a {a}x{b} matrix")
    out = np.zeros((a, b))
    idx = np.arange(c)
    out[idx, idx] = v
    return out


def diag_extract(A, c):
    """Return the first ``c`` diagonal entries of ``A``."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or c < 0 or c > min(A.shape):
        raise DimensionError(f"cannot extract {c} diagonal entries from shape {A.shape}")
    return A.diagonal()[:c].copy()


def dg(A, c):
    """Diagonal ``c x c`` matrix built from the first ``c`` diagonal entries of ``A``."""
    return diag_embed(diag_extract(A, c), c, c)


def canonicalize_clusters(u, s, v, tol):
    """Rotate singular vectors within clusters of equal singular values.

    Values ``s[a] >= s[b]`` with ``s[a] - s[b] <= tol`` (measured from the
    first value of the cluster) form one cluster. Its right vectors are
    replaced by ``V_c Q`` where ``V_c.T = Q R`` is a QR factorization, so the
    new block has upper-trapezoidal transpose; left vectors get the same
    rotation. Returns new arrays.
    """
    u = np.array(u, dtype=np.float64)
    v = np.array(v, dtype=np.float64)
    r = s.shape[0]
    start = 0
    while start < r:
        end = start + 1
        while end < r and s[start] - s[end] <= tol:
            end += 1
        if end - start > 1:
            q, _ = np.linalg.qr(v[:, start:end].T)
            v[:, start:end] = v[:, start:end] @ q
            u[:, start:end] = u[:, start:end] @ q
        start = end
    return u, v


def _normalize_signs(u, v):
    # largest-magnitude entry of each left vector made positive; argmax keeps the first tie
    if u.shape[1] == 0:
        return u, v
    pivots = np.argmax(np.abs(u), axis=0)
    signs = np.where(u[pivots, np.arange(u.shape[1])] < 0, -1.0, 1.0)
    return u * signs, v * signs


def thin_svd(Z, rel_tol=DEFAULT_REL_TOL):
    """Thin SVD of ``Z`` truncated to its numerical rank.

    Singular values ``s_j`` with ``s_j > rel_tol * s_1 * max(rows, cols)``
    are kept. A zero matrix gives rank 0 with empty factors.

    Parameters
    ----------
    Z : array_like, shape (rows, cols)
        Finite real matrix.
    rel_tol : float
        Relative rank cutoff, must be positive.

    Returns
    -------
    ThinSvd
    """
    if not rel_tol > 0:
        raise ValueError(f"rel_tol must be positive, got {rel_tol}")
    Z = as_matrix(Z, "Z")
    u, s, vt = np.linalg.svd(Z, full_matrices=False)
    cutoff = rel_tol * s[0] * max(Z.shape)
    r = int(np.count_nonzero(s > cutoff)) if s[0] > 0 else 0
    u, v = canonicalize_clusters(u[:, :r], s[:r], vt[:r].T, cutoff)
    u, v = _normalize_signs(u, v)
    return ThinSvd(np.ascontiguousarray(u), s[:r].copy(), np.ascontiguousarray(v))


def orthogonal_completion(Q, n=None):
    """Extend the orthonormal columns of ``Q`` to an ``n x n`` orthogonal matrix.

    The leading columns are ``Q`` itself; the rest come from a Householder
    QR of ``[Q | I]``, which is deterministic.
    """
    Q = np.asarray(Q, dtype=np.float64)
    n = Q.shape[0] if n is None else n
    r = Q.shape[1]
    if r == n:
        return Q.copy()
    basis, _ = np.linalg.qr(np.hstack([Q, np.eye(n)]), mode="complete")
    return np.hstack([Q, basis[:, r:]])


def full_svd(Z, rel_tol=DEFAULT_REL_TOL):
    """Full SVD of ``Z`` built by orthogonally completing :func:`thin_svd`."""
    t = thin_svd(Z, rel_tol)
    rows, cols = t.shape
    sigma_bar = np.zeros(min(rows, cols))
    sigma_bar[: t.rank] = t.sigma
    return FullSvd(
        orthogonal_completion(t.u, rows),
        sigma_bar,
        orthogonal_completion(t.v, cols),
        t.rank,
    )


def best_rank(svd, ell):
    """Best Frobenius-norm approximation of rank at most ``ell``.

    Returns the approximating matrix together with its factored form
    (the first ``ell`` singular triplets of ``svd``).
    """
    if not 1 <= ell <= svd.rank:
        raise DimensionError(f"ell must lie in [1, {svd.rank}], got {ell}")
    t = ThinSvd(svd.u[:, :ell].copy(), svd.sigma[:ell].copy(), svd.v[:, :ell].copy())
    return t.matrix(), t
