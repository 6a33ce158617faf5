"""The four-term fusion objective and its Laplacian matrix form."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, NamedTuple

import numpy as np

from .bistochastic import GramKernel, Kernel
from .errors import ValidationError

PARAM_SUM_TOL = 1e-9


@dataclass(frozen=True)
class ObjectiveParams:
    """Weights of the group-fit, co-occurrence, consensus and group-vote terms.

    ``alpha`` must be strictly positive and all weights lie in ``[0, 1]``.
    With ``normalization="params"`` the four weights sum to one; with
    ``"multipliers"`` the applied multipliers ``(alpha/2, beta/2, gamma, delta)``
    do.  The minimiser only depends on the ratios, so this is a labelling
    choice for grids and presets.
    """

    alpha: float = 0.25
    beta: float = 0.35
    gamma: float = 0.35
    delta: float = 0.05
    normalization: Literal["params", "multipliers"] = "params"

    def __post_init__(self) -> None:
        a, b, g, d = self.as_tuple()
        if not 0 < a <= 1:
            raise ValidationError(f"alpha must lie in (0, 1], got {a}")
        for name, v in (("beta", b), ("gamma", g), ("delta", d)):
            if not 0 <= v <= 1:
                raise ValidationError(f"{name} must lie in [0, 1], got {v}")
        if self.normalization == "params":
            total, label = a + b + g + d, "alpha + beta + gamma + delta"
        elif self.normalization == "multipliers":
            total, label = a / 2 + b / 2 + g + d, "alpha/2 + beta/2 + gamma + delta"
        else:
            raise ValidationError(f"unknown normalization {self.normalization!r}")
        if abs(total - 1.0) > PARAM_SUM_TOL:
            raise ValidationError(f"{label} must equal 1, got {total:.12g}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (float(self.alpha), float(self.beta), float(self.gamma), float(self.delta))

    def weights(self) -> np.ndarray:
        """Multipliers applied to the four components."""
        a, b, g, d = self.as_tuple()
        return np.array([a / 2, b / 2, g, d])


@dataclass(frozen=True)
class ClassDistributions:
    """Row-stochastic class distributions of objects (``N x l``) and groups (``G x l``)."""

    objects: np.ndarray
    groups: np.ndarray


class Components(NamedTuple):
    group_fit: float
    cooccurrence: float
    consensus: float
    group_vote: float


def _check_dims(f_obj, f_grp, k_mem, k_co, y_obj, y_grp) -> None:
    n, l = f_obj.shape
    g = f_grp.shape[0]
    expect = {
        "group distributions": (f_grp.shape, (g, l)),
        "membership kernel": (tuple(k_mem.shape), (n, g)),
        "co-occurrence kernel": (tuple(k_co.shape), (n, n)),
        "object votes": (y_obj.shape, (n, l)),
        "group votes": (y_grp.shape, (g, l)),
    }
    for name, (got, want) in expect.items():
        if tuple(got) != want:
            raise ValidationError(f"{name} has shape {got}, expected {want}")


def eval_components(
    dist: ClassDistributions,
    k_mem: np.ndarray,
    k_co: Kernel,
    y_obj: np.ndarray,
    y_grp: np.ndarray,
) -> Components:
    """Unweighted values of the four objective terms.

    The weighted double sums are expanded as
    ``sum_ij w_ij |x_i - z_j|^2 = sum_i r_i |x_i|^2 + sum_j c_j |z_j|^2 - 2 sum_ij w_ij x_i.z_j``
    so a low-rank co-occurrence kernel is never densified.
    """
    f_obj = np.asarray(dist.objects, dtype=float)
    f_grp = np.asarray(dist.groups, dtype=float)
    _check_dims(f_obj, f_grp, k_mem, k_co, y_obj, y_grp)
    sq_obj = np.einsum("ij,ij->i", f_obj, f_obj)
    sq_grp = np.einsum("ij,ij->i", f_grp, f_grp)

    cross = np.sum(f_obj * (k_mem @ f_grp))
    j1 = k_mem.sum(axis=1) @ sq_obj + k_mem.sum(axis=0) @ sq_grp - 2.0 * cross

    co_rows = k_co.sum(axis=1)
    co_cols = co_rows if isinstance(k_co, GramKernel) else k_co.sum(axis=0)
    j2 = co_rows @ sq_obj + co_cols @ sq_obj - 2.0 * np.sum(f_obj * (k_co @ f_obj))

    j3 = np.sum((f_obj - y_obj) ** 2)
    j4 = np.sum((f_grp - y_grp) ** 2)
    # exact expansions can dip below zero by rounding only
    return Components(max(float(j1), 0.0), max(float(j2), 0.0), float(j3), float(j4))


def eval_objective(
    dist: ClassDistributions,
    params: ObjectiveParams,
    k_mem: np.ndarray,
    k_co: Kernel,
    y_obj: np.ndarray,
    y_grp: np.ndarray,
) -> float:
    comps = eval_components(dist, k_mem, k_co, y_obj, y_grp)
    return weighted_objective(comps, params)


def weighted_objective(comps: Components, params: ObjectiveParams) -> float:
    if not isinstance(params, ObjectiveParams):
        raise ValidationError("params must be an ObjectiveParams instance")
    return float(params.weights() @ np.asarray(comps))


def laplacian(k_co: Kernel) -> np.ndarray:
    """``I - K`` for a doubly stochastic co-occurrence kernel."""
    k = np.asarray(k_co, dtype=float)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {k.shape}")
    return np.eye(k.shape[0]) - k


def eval_components_matrix(
    dist: ClassDistributions,
    k_mem: np.ndarray,
    k_co: Kernel,
    y_obj: np.ndarray,
    y_grp: np.ndarray,
) -> Components:
    """Trace form of the objective terms, used to cross-check :func:`eval_components`.

    The co-occurrence term is ``2 tr(F' L F)`` with ``L = I - K``, which
    matches the double sum only when ``K`` is exactly doubly stochastic.
    The group-fit term weights by the row and column sums of ``K^m``.
    """
    f_obj = np.asarray(dist.objects, dtype=float)
    f_grp = np.asarray(dist.groups, dtype=float)
    k_mem = np.asarray(k_mem, dtype=float)
    _check_dims(f_obj, f_grp, k_mem, k_co, y_obj, y_grp)
    d_row = np.diag(k_mem.sum(axis=1))
    d_col = np.diag(k_mem.sum(axis=0))
    j1 = (
        np.trace(f_obj.T @ d_row @ f_obj)
        + np.trace(f_grp.T @ d_col @ f_grp)
        - 2.0 * np.trace(f_obj.T @ k_mem @ f_grp)
    )
    j2 = 2.0 * np.trace(f_obj.T @ laplacian(k_co) @ f_obj)
    j3 = np.linalg.norm(f_obj - y_obj) ** 2
    j4 = np.linalg.norm(f_grp - y_grp) ** 2
    return Components(float(j1), float(j2), float(j3), float(j4))
