"""Block coordinate descent over group and object class distributions.

Each iteration first sets every group row to its exact minimiser given the
object rows, then sweeps the object rows.  Both updates are closed-form
weighted averages of stochastic rows, so feasibility is preserved without
any projection.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Literal, Optional

import numpy as np

from . import _kernels
from .bistochastic import GramKernel, Kernel
from .errors import NumericalError, ValidationError
from .objective import (
    ClassDistributions,
    Components,
    ObjectiveParams,
    eval_components,
    weighted_objective,
)

log = logging.getLogger(__name__)

Mode = Literal["ec3", "iec3"]
Sweep = Literal["gauss-seidel", "jacobi"]

ROW_SUM_TOL = 1e-9


@dataclass(frozen=True)
class SolverConfig:
    params: ObjectiveParams = field(default_factory=ObjectiveParams)
    epsilon: float = 0.025
    max_iterations: int = 500
    mode: Mode = "iec3"
    seed: int = 0
    sweep: Sweep = "gauss-seidel"
    normalized_epsilon: bool = False
    check_invariants: bool = False
    trace_path: Optional[Path] = None

    def __post_init__(self) -> None:
        if not isinstance(self.params, ObjectiveParams):
            raise ValidationError("params must be an ObjectiveParams instance")
        if not self.epsilon > 0:
            raise ValidationError(f"epsilon must be positive, got {self.epsilon}")
        if int(self.max_iterations) < 1:
            raise ValidationError("max_iterations must be >= 1")
        if self.mode not in ("ec3", "iec3"):
            raise ValidationError(f"mode must be 'ec3' or 'iec3', got {self.mode!r}")
        if self.sweep not in ("gauss-seidel", "jacobi"):
            raise ValidationError(f"unknown sweep {self.sweep!r}")

    def with_(self, **changes) -> "SolverConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class SolverResult:
    """Final distributions plus per-iteration diagnostics.

    ``objective_trace[t]`` is the objective after iteration ``t + 1``;
    ``half_step_trace`` interleaves the values after the group update and
    after the object update, preceded by the value at initialisation.
    """

    distributions: ClassDistributions
    objective_trace: list[float]
    half_step_trace: list[float]
    component_trace: list[Components]
    deltas: list[float]
    iterations_used: int
    converged: bool

    @property
    def objects(self) -> np.ndarray:
        return self.distributions.objects

    @property
    def groups(self) -> np.ndarray:
        return self.distributions.groups

    @property
    def objective(self) -> float:
        return self.objective_trace[-1]


def init_distributions(n: int, g: int, l: int, seed: int) -> ClassDistributions:
    """Random rows drawn uniformly from the probability simplex."""
    if min(n, g, l) < 1:
        raise ValidationError("dimensions must be positive")
    rng = np.random.default_rng(seed)
    f_obj = rng.exponential(size=(n, l))
    f_grp = rng.exponential(size=(g, l))
    f_obj /= f_obj.sum(axis=1, keepdims=True)
    f_grp /= f_grp.sum(axis=1, keepdims=True)
    return ClassDistributions(f_obj, f_grp)


def update_groups(
    f_obj: np.ndarray, k_mem: np.ndarray, y_grp: np.ndarray, params: ObjectiveParams
) -> np.ndarray:
    """Exact minimiser over all group rows with the object rows fixed."""
    a, _, _, d = params.as_tuple()
    denom = a * k_mem.sum(axis=0) + 2.0 * d
    if (denom <= 0).any():
        j = int(np.flatnonzero(denom <= 0)[0])
        raise NumericalError(f"group {j} has zero update denominator")
    return (a * (k_mem.T @ f_obj) + 2.0 * d * y_grp) / denom[:, None]


def _object_terms(f_grp, k_mem, k_co, y_obj, params):
    a, b, g, _ = params.as_tuple()
    off_row = k_co.sum(axis=1) - k_co.diagonal()
    denom = a * k_mem.sum(axis=1) + 2.0 * b * off_row + 2.0 * g
    if (denom <= 0).any():
        i = int(np.flatnonzero(denom <= 0)[0])
        raise NumericalError(f"object {i} has nonpositive update denominator")
    base = a * (k_mem @ f_grp) + 2.0 * g * y_obj
    return base, denom, 2.0 * b


def update_objects(
    f_grp: np.ndarray,
    f_obj: np.ndarray,
    k_mem: np.ndarray,
    k_co: Kernel,
    y_obj: np.ndarray,
    params: ObjectiveParams,
    sweep: Sweep = "gauss-seidel",
) -> np.ndarray:
    """Update every object row given the group rows.

    Row ``i`` solves its stationarity condition with the other object rows
    held at their current values; the ``K_ii`` self-weight cancels from both
    sides, so the row lands on its exact minimiser.  ``gauss-seidel`` visits
    rows in ascending order using already-updated rows; ``jacobi`` uses the
    incoming rows for all of them.
    """
    base, denom, coef = _object_terms(f_grp, k_mem, k_co, y_obj, params)
    out = np.array(f_obj, dtype=float, order="C")
    if sweep == "jacobi":
        off = k_co @ out - k_co.diagonal()[:, None] * out
        return (base + coef * np.maximum(off, 0.0)) / denom[:, None]
    if sweep != "gauss-seidel":
        raise ValidationError(f"unknown sweep {sweep!r}")
    if isinstance(k_co, GramKernel):
        _kernels.gauss_seidel_gram(out, np.ascontiguousarray(k_co.factor), base, denom, coef)
    else:
        _kernels.gauss_seidel_dense(out, np.ascontiguousarray(k_co, dtype=float), base, denom, coef)
    return out


def predict_labels(f_obj: np.ndarray) -> np.ndarray:
    """1-based argmax per row; ties go to the lowest class index."""
    return np.argmax(np.asarray(f_obj), axis=1).astype(np.int64) + 1


def _assert_stochastic(f: np.ndarray, what: str) -> None:
    if (f < 0).any() or np.abs(f.sum(axis=1) - 1.0).max() > ROW_SUM_TOL:
        raise NumericalError(f"{what} rows left the probability simplex")


def solve(
    k_mem: np.ndarray,
    k_co: Kernel,
    y_obj: np.ndarray,
    y_grp: np.ndarray,
    config: SolverConfig = SolverConfig(),
    callback: Optional[Callable[[int, ClassDistributions], None]] = None,
) -> SolverResult:
    """Alternate group and object updates until the object rows settle.

    Stops once the Frobenius change of the object distributions is at most
    ``config.epsilon`` (divided by ``sqrt(N l)`` when ``normalized_epsilon``)
    or after ``max_iterations``.  Returns the lowest-objective iterate.
    ``callback(t, dist)`` is invoked after every completed iteration.
    """
    k_mem = np.asarray(k_mem, dtype=float)
    y_obj = np.asarray(y_obj, dtype=float)
    y_grp = np.asarray(y_grp, dtype=float)
    n, l = y_obj.shape
    g = y_grp.shape[0]
    params = config.params

    init = init_distributions(n, g, l, config.seed)
    f_obj, f_grp = init.objects, init.groups
    comps = eval_components(init, k_mem, k_co, y_obj, y_grp)
    half_steps = [weighted_objective(comps, params)]
    objectives: list[float] = []
    comp_trace: list[Components] = []
    deltas: list[float] = []
    scale = np.sqrt(n * l) if config.normalized_epsilon else 1.0
    best = (np.inf, init)
    converged = False

    t = 0
    for t in range(1, int(config.max_iterations) + 1):
        f_grp = update_groups(f_obj, k_mem, y_grp, params)
        half_steps.append(
            weighted_objective(
                eval_components(ClassDistributions(f_obj, f_grp), k_mem, k_co, y_obj, y_grp),
                params,
            )
        )
        new_obj = update_objects(f_grp, f_obj, k_mem, k_co, y_obj, params, config.sweep)
        dist = ClassDistributions(new_obj, f_grp)
        if config.check_invariants:
            _assert_stochastic(f_grp, "group")
            _assert_stochastic(new_obj, "object")
        comps = eval_components(dist, k_mem, k_co, y_obj, y_grp)
        value = weighted_objective(comps, params)
        half_steps.append(value)
        objectives.append(value)
        comp_trace.append(comps)
        delta = float(np.linalg.norm(new_obj - f_obj)) / scale
        deltas.append(delta)
        f_obj = new_obj
        if value <= best[0]:
            best = (value, dist)
        if callback is not None:
            callback(t, dist)
        if delta <= config.epsilon:
            converged = True
            break

    if not converged:
        log.info("no convergence after %d iterations (last delta %.3g)", t, deltas[-1])
    result = SolverResult(
        distributions=best[1],
        objective_trace=objectives,
        half_step_trace=half_steps,
        component_trace=comp_trace,
        deltas=deltas,
        iterations_used=t,
        converged=converged,
    )
    if config.trace_path is not None:
        write_trace(result, config.trace_path)
    return result


def write_trace(result: SolverResult, path: Path) -> None:
    """Per-iteration CSV: iteration, the four components, objective, delta."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "J1", "J2", "J3", "J4", "objective", "delta"])
        for t, (comps, value, delta) in enumerate(
            zip(result.component_trace, result.objective_trace, result.deltas), start=1
        ):
            w.writerow([t, *(f"{c:.12g}" for c in comps), f"{value:.12g}", f"{delta:.12g}"])
