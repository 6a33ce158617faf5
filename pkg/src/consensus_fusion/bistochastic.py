"""KL-optimal stochastic approximations of the membership and co-occurrence matrices.

Square symmetric inputs go through the alternating row-normalisation /
geometric-mean symmetrisation loop.  Rectangular inputs are scaled by
alternating column and row normalisation.  :func:`kl_bistochastic_gram`
runs the square loop on ``M @ M.T`` while only ever touching the ``N x G``
factor, which keeps large co-occurrence matrices out of memory.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import NumericalError, ValidationError

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-6
DEFAULT_MAX_SWEEPS = 1000


class GramKernel:
    """Symmetric nonnegative ``N x N`` matrix stored as ``U @ U.T``.

    Supports the handful of ndarray operations the objective and solver use
    (``@``, ``sum``, ``diagonal``, ``shape``) in ``O(N G)`` memory.
    """

    def __init__(self, factor: np.ndarray):
        factor = np.array(factor, dtype=float)
        if factor.ndim != 2:
            raise ValidationError("Gram factor must be a 2-d array")
        factor.setflags(write=False)
        self.factor = factor

    @property
    def shape(self) -> tuple[int, int]:
        n = self.factor.shape[0]
        return (n, n)

    ndim = 2

    @property
    def T(self) -> "GramKernel":
        return self

    def __matmul__(self, other):
        return self.factor @ (self.factor.T @ other)

    def __rmatmul__(self, other):
        return (other @ self.factor) @ self.factor.T

    def sum(self, axis=None):
        col = self.factor.sum(axis=0)
        if axis is None:
            return float(col @ col)
        if axis in (0, 1, -1, -2):
            return self.factor @ col
        raise ValueError(f"invalid axis {axis}")

    def diagonal(self) -> np.ndarray:
        return np.einsum("ij,ij->i", self.factor, self.factor)

    def toarray(self) -> np.ndarray:
        return self.factor @ self.factor.T

    def __array__(self, dtype=None, copy=None):
        out = self.toarray()
        return out if dtype is None else out.astype(dtype)

    def __repr__(self) -> str:
        return f"GramKernel(shape={self.shape}, rank<={self.factor.shape[1]})"


Kernel = Union[np.ndarray, GramKernel]


@dataclass(frozen=True)
class BistochasticMatrix:
    """Result of a scaling run.

    ``residual`` is the Frobenius distance between the last two iterates.
    ``converged`` is False when ``max_sweeps`` ran out first.
    """

    matrix: Kernel
    residual: float
    sweeps: int
    converged: bool


def _check_nonnegative(a: np.ndarray) -> None:
    if not np.all(np.isfinite(a)):
        raise ValidationError("matrix contains non-finite entries")
    if (a < 0).any():
        i, j = np.argwhere(a < 0)[0]
        raise ValidationError(f"matrix entry ({i}, {j}) is negative")


def _zero_index(sums: np.ndarray) -> Optional[int]:
    zero = np.flatnonzero(sums <= 0)
    return int(zero[0]) if zero.size else None


def kl_bistochastic_square(
    a: np.ndarray, tol: float = DEFAULT_TOL, max_sweeps: int = DEFAULT_MAX_SWEEPS
) -> BistochasticMatrix:
    """Symmetric doubly stochastic approximation of a symmetric matrix.

    Each sweep divides every row by its sum, then replaces ``K_ij`` and
    ``K_ji`` by their geometric mean.  Stops when successive iterates are
    within ``tol`` in Frobenius norm or after ``max_sweeps`` sweeps.
    """
    a = np.array(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {a.shape}")
    _check_nonnegative(a)
    if not np.allclose(a, a.T, rtol=1e-12, atol=1e-12):
        raise ValidationError("matrix is not symmetric")
    if tol <= 0 or max_sweeps < 1:
        raise ValidationError("tol must be positive and max_sweeps >= 1")
    bad = _zero_index(a.sum(axis=1))
    if bad is not None:
        raise NumericalError(f"row {bad} has zero sum")

    current = a
    residual = np.inf
    sweeps = 0
    while residual > tol and sweeps < max_sweeps:
        d = current.sum(axis=1)
        bad = _zero_index(d)
        if bad is not None:
            raise NumericalError(f"row {bad} has zero sum")
        k = current / d[:, None]
        k = np.sqrt(k * k.T)
        residual = float(np.linalg.norm(k - current))
        current = k
        sweeps += 1
    converged = residual <= tol
    if not converged:
        log.warning("square scaling stopped after %d sweeps, residual %.3g", sweeps, residual)
    return BistochasticMatrix(current, residual, sweeps, converged)


def kl_bistochastic_gram(
    factor: np.ndarray, tol: float = DEFAULT_TOL, max_sweeps: int = DEFAULT_MAX_SWEEPS
) -> BistochasticMatrix:
    """Same iteration as :func:`kl_bistochastic_square` applied to ``factor @ factor.T``.

    On a symmetric input the normalise-then-geometric-mean step equals
    ``K <- D^-1/2 K D^-1/2``, so every iterate has the form
    ``diag(s) A diag(s)`` and only the vector ``s`` is tracked.  The
    Frobenius residual is evaluated exactly through ``2G x 2G`` Gram matrices.
    """
    m = np.array(factor, dtype=float)
    if m.ndim != 2:
        raise ValidationError("factor must be a 2-d array")
    _check_nonnegative(m)
    if tol <= 0 or max_sweeps < 1:
        raise ValidationError("tol must be positive and max_sweeps >= 1")

    def row_sums(s: np.ndarray) -> np.ndarray:
        return s * (m @ (m.T @ s))

    s = np.ones(m.shape[0])
    bad = _zero_index(row_sums(s))
    if bad is not None:
        raise NumericalError(f"row {bad} has zero sum")

    residual = np.inf
    sweeps = 0
    while residual > tol and sweeps < max_sweeps:
        d = row_sums(s)
        s_new = s / np.sqrt(d)
        e = s_new - s
        # K_new - K_old = diag(e) A diag(s_new) + diag(s) A diag(e) = X @ Y.T
        x = np.hstack([e[:, None] * m, s[:, None] * m])
        y = np.hstack([s_new[:, None] * m, e[:, None] * m])
        sq = float(np.sum((x.T @ x) * (y.T @ y)))
        residual = float(np.sqrt(max(sq, 0.0)))
        s = s_new
        sweeps += 1
    converged = residual <= tol
    if not converged:
        log.warning("Gram scaling stopped after %d sweeps, residual %.3g", sweeps, residual)
    return BistochasticMatrix(GramKernel(s[:, None] * m), residual, sweeps, converged)


def kl_bistochastic_rectangular(
    a: np.ndarray,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    col_targets: Optional[np.ndarray] = None,
) -> BistochasticMatrix:
    """Scale a nonnegative ``N x G`` matrix to unit row sums.

    Column sums are driven to ``col_targets`` (default ``N/G`` each), which
    must total ``N``.  A sweep rescales columns, then rows, so the returned
    rows always sum to one even when the column targets are unreachable.
    """
    a = np.array(a, dtype=float)
    if a.ndim != 2:
        raise ValidationError("expected a 2-d matrix")
    _check_nonnegative(a)
    if tol <= 0 or max_sweeps < 1:
        raise ValidationError("tol must be positive and max_sweeps >= 1")
    n, g = a.shape
    bad = _zero_index(a.sum(axis=1))
    if bad is not None:
        raise NumericalError(f"row {bad} has zero sum")
    bad = _zero_index(a.sum(axis=0))
    if bad is not None:
        raise NumericalError(f"column {bad} has zero sum")
    if col_targets is None:
        targets = np.full(g, n / g)
    else:
        targets = np.asarray(col_targets, dtype=float).ravel()
        if targets.shape != (g,) or (targets <= 0).any():
            raise ValidationError("col_targets must hold one positive value per column")
        if not np.isclose(targets.sum(), n, rtol=1e-12, atol=1e-12):
            raise ValidationError(f"col_targets sum to {targets.sum()}, expected {n}")

    current = a
    residual = np.inf
    sweeps = 0
    while residual > tol and sweeps < max_sweeps:
        k = current * (targets / current.sum(axis=0))
        k = k / k.sum(axis=1, keepdims=True)
        residual = float(np.linalg.norm(k - current))
        current = k
        sweeps += 1
    converged = residual <= tol
    if not converged:
        # expected when targets are infeasible, e.g. with singleton groups
        log.info(
            "rectangular scaling stopped after %d sweeps, residual %.3g", sweeps, residual
        )
    return BistochasticMatrix(current, residual, sweeps, converged)


def column_normalize(membership: np.ndarray) -> np.ndarray:
    """Divide each column by its sum so every base group carries unit mass."""
    a = np.asarray(membership, dtype=float)
    sums = a.sum(axis=0)
    bad = _zero_index(sums)
    if bad is not None:
        raise NumericalError(f"column {bad} has zero sum")
    return a / sums
