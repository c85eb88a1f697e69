"""Finite-sample statistics of one modality.

Data matrices are ``(d, n)``: one column per sample, and column ``j`` of
every modality belongs to the same matched data point.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import DEFAULT_REL_TOL, DimensionError, ThinSvd, as_matrix, thin_svd

__all__ = ["CenteredStats", "check_modality", "sample_mean", "center_scale"]


@dataclass(frozen=True)
class CenteredStats:
    """Mean, scaled-centered data matrix ``S`` and its thin SVD.

    ``S @ S.T`` is the unbiased sample covariance; it is never formed on
    the training path.
    """

    mean: np.ndarray
    s: np.ndarray
    s_svd: ThinSvd

    @property
    def rank(self) -> int:
        return self.s_svd.rank

    @property
    def covariance(self) -> np.ndarray:
        return self.s @ self.s.T


def check_modality(X, name="data"):
    """Validate a ``(d, n)`` modality data matrix with ``d >= 2`` and ``n >= 2``."""
    X = as_matrix(X, name)
    d, n = X.shape
    if d < 2:
        raise DimensionError(f"{name}: need dimension >= 2, got {d}")
    if n < 2:
        raise DimensionError(f"{name}: need at least 2 samples, got {n}")
    return X


def sample_mean(X):
    """Mean of the columns of ``X``."""
    X = check_modality(X)
    return X.mean(axis=1)


def center_scale(X, rel_tol=DEFAULT_REL_TOL):
    """Center the columns of ``X`` and scale by ``1/sqrt(n-1)``.

    Parameters
    ----------
    X : array_like, shape (d, n)
        One sample per column.
    rel_tol : float
        Rank cutoff forwarded to :func:`sgmca.linalg.thin_svd`.

    Returns
    -------
    CenteredStats
    """
    X = check_modality(X)
    n = X.shape[1]
    mu = X.mean(axis=1)
    S = (X - mu[:, None]) / np.sqrt(n - 1)
    return CenteredStats(mu, S, thin_svd(S, rel_tol))
