"""End-to-end fusion: base-method outputs in, per-object class distributions out."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bistochastic import (
    DEFAULT_MAX_SWEEPS,
    DEFAULT_TOL,
    BistochasticMatrix,
    Kernel,
    column_normalize,
    kl_bistochastic_gram,
    kl_bistochastic_rectangular,
    kl_bistochastic_square,
)
from .core import (
    EnsembleInput,
    GroupCatalog,
    build_cooccurrence,
    build_group_catalog,
    build_membership,
    build_votes,
)
from .solver import Mode, SolverConfig, SolverResult, predict_labels, solve


@dataclass(frozen=True)
class ConsensusMatrices:
    catalog: GroupCatalog
    membership: np.ndarray
    k_mem: np.ndarray
    k_co: Kernel
    y_obj: np.ndarray
    y_grp: np.ndarray
    mem_scaling: BistochasticMatrix
    co_scaling: BistochasticMatrix


def scale_membership(
    membership: np.ndarray,
    mode: Mode,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
) -> BistochasticMatrix:
    """Row-stochastic membership kernel for either mode.

    Column targets are proportional to the input's own column mass, scaled
    to total ``N``.  For ``ec3`` that is each group's size over the number of
    methods, which ``A^m`` already satisfies after dividing its rows by the
    method count.  ``iec3`` first gives every group unit mass, so the targets
    become a uniform ``N/G`` and small groups gain weight.
    """
    a = np.asarray(membership, dtype=float)
    if mode == "iec3":
        a = column_normalize(a)
    elif mode != "ec3":
        raise ValueError(f"unknown mode {mode!r}")
    mass = a.sum(axis=0)
    targets = mass * (a.shape[0] / mass.sum())
    return kl_bistochastic_rectangular(a, tol, max_sweeps, col_targets=targets)


def build_consensus_matrices(
    inp: EnsembleInput,
    mode: Mode = "iec3",
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    dense: bool = False,
) -> ConsensusMatrices:
    """Catalog, scaled kernels and vote matrices for one ensemble.

    The co-occurrence kernel is kept in factored form unless ``dense`` is
    set, in which case ``A^m A^m'`` is materialised and scaled directly.
    """
    catalog = build_group_catalog(inp)
    membership = build_membership(inp, catalog)
    votes = build_votes(inp, catalog)
    mem = scale_membership(membership, mode, tol, max_sweeps)
    if dense:
        co = kl_bistochastic_square(build_cooccurrence(membership), tol, max_sweeps)
    else:
        co = kl_bistochastic_gram(membership, tol, max_sweeps)
    return ConsensusMatrices(
        catalog=catalog,
        membership=membership,
        k_mem=mem.matrix,
        k_co=co.matrix,
        y_obj=votes.objects,
        y_grp=votes.groups,
        mem_scaling=mem,
        co_scaling=co,
    )


@dataclass(frozen=True)
class FusionResult:
    matrices: ConsensusMatrices
    solution: SolverResult

    @property
    def probabilities(self) -> np.ndarray:
        return self.solution.objects

    @property
    def labels(self) -> np.ndarray:
        return predict_labels(self.solution.objects)


def fuse(
    inp: EnsembleInput,
    config: Optional[SolverConfig] = None,
    matrices: Optional[ConsensusMatrices] = None,
) -> FusionResult:
    """Fuse an ensemble with the solver configured by ``config``."""
    config = config or SolverConfig()
    if matrices is None:
        matrices = build_consensus_matrices(inp, config.mode)
    sol = solve(matrices.k_mem, matrices.k_co, matrices.y_obj, matrices.y_grp, config)
    return FusionResult(matrices, sol)
