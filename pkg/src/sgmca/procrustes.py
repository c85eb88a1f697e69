"""Weighted trace maximization over tuples of semi-orthogonal matrices.

The problem is to maximize

    sum_i w_i * tr(Q_i.T @ L_i.T @ Q_0 @ R_i)

over ``Q_0`` (``rows_L x rows_R``) and ``Q_i`` (``cols(L_i) x cols(R_i)``),
all with orthonormal rows. :func:`solve_related` gives a closed-form
feasible point; :func:`refine` improves any feasible point by negating rows
of the ``Q_i`` and re-solving for ``Q_0``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import DimensionError, as_matrix, full_svd

__all__ = [
    "FeasibilityError",
    "ProcrustesInstance",
    "FeasibleTuple",
    "RefineResult",
    "check_weights",
    "objective",
    "compute_h",
    "solve_q0",
    "solve_related",
    "refine",
]

WEIGHT_TOL = 1e-12
ORTHO_TOL = 1e-10
FLIP_TOL = 1e-12


class FeasibilityError(ValueError):
    """Raised when a tuple violates the row-orthonormality constraints."""


def check_weights(weights, m=None):
    """Validate non-negative weights summing to one; return them as an array."""
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if m is not None and w.shape[0] != m:
        raise ValueError(f"expected {m} weights, got {w.shape[0]}")
    if w.shape[0] == 0:
        raise ValueError("at least one weight is required")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ValueError("weights must be finite and non-negative")
    if abs(w.sum() - 1.0) > WEIGHT_TOL:
        raise ValueError(f"weights must sum to 1 (got {w.sum():.17g})")
    return w


@dataclass(frozen=True)
class ProcrustesInstance:
    """The data ``(L_i, R_i, w_i)`` of one trace-maximization problem."""

    l: list
    r: list
    weights: np.ndarray

    def __post_init__(self):
        l = [as_matrix(x, f"L[{i}]") for i, x in enumerate(self.l)]
        r = [as_matrix(x, f"R[{i}]") for i, x in enumerate(self.r)]
        if len(l) != len(r):
            raise DimensionError(f"got {len(l)} L matrices but {len(r)} R matrices")
        object.__setattr__(self, "l", l)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "weights", check_weights(self.weights, len(l)))
        if len({x.shape[0] for x in l}) != 1 or len({x.shape[0] for x in r}) != 1:
            raise DimensionError("all L_i must share a row count, and all R_i likewise")
        if self.rows_l > self.rows_r:
            raise DimensionError(f"rows(L)={self.rows_l} exceeds rows(R)={self.rows_r}")
        for i, (li, ri) in enumerate(zip(l, r)):
            if li.shape[1] > ri.shape[1]:
                raise DimensionError(
                    f"cols(L[{i}])={li.shape[1]} exceeds cols(R[{i}])={ri.shape[1]}"
                )

    @property
    def m(self) -> int:
        return len(self.l)

    @property
    def rows_l(self) -> int:
        return self.l[0].shape[0]

    @property
    def rows_r(self) -> int:
        return self.r[0].shape[0]


@dataclass(frozen=True)
class FeasibleTuple:
    """``Q_0`` and the list ``[Q_1, ..., Q_m]``."""

    q0: np.ndarray
    qi: list = field(default_factory=list)

    def check(self, inst, tol=ORTHO_TOL):
        """Raise :class:`FeasibilityError` unless this tuple is feasible for ``inst``."""
        if len(self.qi) != inst.m:
            raise FeasibilityError(f"expected {inst.m} matrices Q_i, got {len(self.qi)}")
        shapes = [(self.q0, (inst.rows_l, inst.rows_r), "Q_0")]
        shapes += [
            (q, (li.shape[1], ri.shape[1]), f"Q_{i + 1}")
            for i, (q, li, ri) in enumerate(zip(self.qi, inst.l, inst.r))
        ]
        for q, shape, name in shapes:
            if q.shape != shape:
                raise FeasibilityError(f"{name} has shape {q.shape}, expected {shape}")
            resid = np.abs(q @ q.T - np.eye(shape[0])).max(initial=0.0)
            if resid > tol:
                raise FeasibilityError(f"{name} rows are not orthonormal (residual {resid:.3g})")
        return self


def objective(tup, inst):
    """``sum_i w_i tr(Q_i.T L_i.T Q_0 R_i)``."""
    if len(tup.qi) != inst.m:
        raise DimensionError(f"expected {inst.m} matrices Q_i, got {len(tup.qi)}")
    total = 0.0
    for w, q, li, ri in zip(inst.weights, tup.qi, inst.l, inst.r):
        total += w * np.trace(q.T @ li.T @ tup.q0 @ ri)
    return float(total)


def compute_h(tup, inst):
    """``H = sum_i w_i R_i Q_i.T L_i.T``, of shape ``rows_R x rows_L``."""
    if len(tup.qi) != inst.m:
        raise DimensionError(f"expected {inst.m} matrices Q_i, got {len(tup.qi)}")
    H = np.zeros((inst.rows_r, inst.rows_l))
    for w, q, li, ri in zip(inst.weights, tup.qi, inst.l, inst.r):
        H += w * (ri @ q.T @ li.T)
    return H


def solve_q0(H, rows_l):
    """Maximizer of ``tr(Q_0 H)`` over ``Q_0`` with ``rows_l`` orthonormal rows."""
    f = full_svd(H)
    return f.v_bar @ f.u_bar[:, :rows_l].T


def solve_related(inst):
    """Closed-form feasible point.

    Each ``Q_i`` is ``V_bar(L_i) @ V_bar(R_i)[:, :cols(L_i)].T``, which maximizes
    the i-th term once the coupling through ``Q_0`` is replaced by the
    identity. ``Q_0`` is then the exact maximizer for those ``Q_i``.

    Parameters
    ----------
    inst : ProcrustesInstance

    Returns
    -------
    FeasibleTuple
    """
    qi = []
    for li, ri in zip(inst.l, inst.r):
        v_l = full_svd(li).v_bar
        v_r = full_svd(ri).v_bar
        qi.append(v_l @ v_r[:, : li.shape[1]].T)
    q0 = solve_q0(compute_h(FeasibleTuple(np.empty((0, 0)), qi), inst), inst.rows_l)
    return FeasibleTuple(q0, qi)


@dataclass(frozen=True)
class RefineResult:
    """Output of :func:`refine`.

    ``objectives[0]`` is the starting objective and ``objectives[t]`` the
    objective after outer pass ``t``.
    """

    tuple: FeasibleTuple
    iterations: int
    flips: int
    objectives: list
    converged: bool


def refine(tup, inst, max_outer_iters=100, flip_tol=FLIP_TOL):
    """Improve a feasible tuple by row sign flips and ``Q_0`` re-solves.

    Each outer pass negates every row ``j`` of ``Q_i`` whose dot product with
    row ``j`` of ``L_i.T Q_0 R_i`` is below ``-flip_tol``. If anything was
    flipped, ``Q_0`` is re-solved from the updated ``H``. Passes repeat until
    one makes no flips or ``max_outer_iters`` passes have run. The objective
    never decreases.

    Returns
    -------
    RefineResult
    """
    if max_outer_iters < 1:
        raise ValueError("max_outer_iters must be >= 1")
    tup.check(inst)
    q0 = tup.q0.copy()
    qi = [q.copy() for q in tup.qi]
    history = [objective(tup, inst)]
    total_flips = 0
    iterations = 0
    count = 1
    while count > 0 and iterations < max_outer_iters:
        iterations += 1
        count = 0
        for i, (li, ri) in enumerate(zip(inst.l, inst.r)):
            # Q_0 is fixed during the pass, so all rows of Q_i can be tested at once
            dots = np.einsum("jk,jk->j", li.T @ q0 @ ri, qi[i])
            neg = dots < -flip_tol
            if neg.any():
                qi[i][neg] *= -1.0
                count += int(neg.sum())
        if count > 0:
            q0 = solve_q0(compute_h(FeasibleTuple(q0, qi), inst), inst.rows_l)
            total_flips += count
        history.append(objective(FeasibleTuple(q0, qi), inst))
    out = FeasibleTuple(q0, qi) if total_flips else tup
    return RefineResult(out, iterations, total_flips, history, count == 0)
