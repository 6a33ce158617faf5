"""Experiment drivers: parameter grid, epsilon trade-off, ablation, noise,
class imbalance and runtime scaling.

Every driver is a pure function of its arguments and explicit seeds.
Timings are recorded separately from the deterministic rows.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Iterable, Optional, Sequence, TypeVar

import numpy as np

from ..core import EnsembleInput, vote_counts
from ..metrics import auc, f_score
from ..objective import ObjectiveParams
from ..pipeline import build_consensus_matrices, fuse
from ..solver import SolverConfig, solve
from .data import (
    SyntheticSpec,
    generate_synthetic,
    run_base_methods,
    synthetic_ensemble,
)
from .noise import ablate_component, inject_imbalance, inject_random_classifier, inject_random_clusterer
from .report import ExperimentReport, mean_sd

log = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

EPSILON_GRID = (0.030, 0.025, 0.020, 0.015, 0.010, 0.005)
IMBALANCE_GRID = (0, 5, 10, 15, 20, 25, 30)
NOISE_GRID = (0, 5, 10, 15)


def parallel_map(fn: Callable[[T], R], items: Sequence[T], jobs: int = 1) -> list[R]:
    """Order-preserving map, optionally over worker processes."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def config_echo(config: SolverConfig) -> dict:
    return {
        "params": dict(zip(("alpha", "beta", "gamma", "delta"), config.params.as_tuple())),
        "epsilon": config.epsilon,
        "max_iterations": config.max_iterations,
        "mode": config.mode,
        "seed": config.seed,
        "sweep": config.sweep,
        "normalized_epsilon": config.normalized_epsilon,
    }


# ---------------------------------------------------------------- building blocks


def _ensemble_for_seed(args: tuple[SyntheticSpec, int]) -> EnsembleInput:
    spec, seed = args
    s = SyntheticSpec(spec.n, spec.l, spec.feature_dim, spec.separation, seed)
    x, y = generate_synthetic(s)
    return run_base_methods(x, y, num_classes=spec.l, seed=seed).ensemble


def build_ensembles(spec: SyntheticSpec, seeds: Iterable[int], jobs: int = 1) -> list[EnsembleInput]:
    """One dataset and one base-method run per seed."""
    return parallel_map(_ensemble_for_seed, [(spec, int(s)) for s in seeds], jobs)


def fusion_scores(ens: EnsembleInput, config: SolverConfig, matrices=None) -> dict:
    """AUC, F-score and iteration count of one fusion run against the true labels.

    ``matrices`` may be passed to reuse kernels built for the same mode.
    """
    res = fuse(ens, config, matrices)
    truth = ens.true_labels
    rep = f_score(res.labels, truth, ens.num_classes)
    return {
        "auc": auc(res.probabilities, truth),
        "f_score": rep.f_score,
        "per_class_f": list(rep.per_class_f),
        "iterations": res.solution.iterations_used,
        "converged": res.solution.converged,
    }


def base_scores(ens: EnsembleInput) -> dict:
    """AUC of each base classifier's hard labels and of the plain vote fractions."""
    truth = ens.true_labels
    eye = np.eye(ens.num_classes)
    single = [auc(eye[labels - 1], truth) for labels in ens.classifier_outputs]
    votes = vote_counts(ens) / ens.num_classifiers
    return {"classifier_auc": single, "majority_vote_auc": auc(votes, truth)}


# ---------------------------------------------------------------- quality


def _quality_one(args):
    idx, ens, config = args
    row = {"run": idx}
    for mode in ("ec3", "iec3"):
        s = fusion_scores(ens, config.with_(mode=mode))
        row[f"{mode}_auc"] = s["auc"]
        row[f"{mode}_f_score"] = s["f_score"]
    b = base_scores(ens)
    row["best_classifier_auc"] = max(b["classifier_auc"])
    row["majority_vote_auc"] = b["majority_vote_auc"]
    return row


def fusion_quality(
    ensembles: Sequence[EnsembleInput], config: SolverConfig = SolverConfig(), jobs: int = 1
) -> ExperimentReport:
    """Fused AUC in both modes against the best single classifier and majority vote."""
    rows = parallel_map(_quality_one, [(i, e, config) for i, e in enumerate(ensembles)], jobs)
    agg = []
    for key in ("ec3_auc", "iec3_auc", "best_classifier_auc", "majority_vote_auc", "ec3_f_score", "iec3_f_score"):
        m, sd = mean_sd([r[key] for r in rows])
        agg.append({"metric": key, "mean": m, "sd": sd})
    return ExperimentReport("quality", {"solver": config_echo(config), "runs": len(rows)}, rows, agg)


# ---------------------------------------------------------------- parameter sweep


def parameter_grid(step: float = 0.05, normalization: str = "params") -> list[ObjectiveParams]:
    """All weight vectors on the ``step`` lattice that satisfy the additive constraint.

    ``alpha`` is always positive.  ``normalization`` selects which sum equals
    one, as in :class:`ObjectiveParams`.
    """
    units = int(round(1.0 / step))
    if abs(units * step - 1.0) > 1e-9:
        raise ValueError("step must divide 1")
    grid = []
    for a in range(1, units + 1):
        for b in range(0, units + 1):
            if normalization == "params":
                rest = units - a - b
            elif normalization == "multipliers":
                if (a + b) % 2:
                    continue
                rest = units - (a + b) // 2
            else:
                raise ValueError(f"unknown normalization {normalization!r}")
            for g in range(0, min(rest, units) + 1):
                d = rest - g
                if 0 <= d <= units:
                    grid.append(
                        ObjectiveParams(a / units, b / units, g / units, d / units, normalization)
                    )
    return grid


def _sweep_chunk(args):
    grid, ensembles, config = args
    prepared = [(e, build_consensus_matrices(e, config.mode)) for e in ensembles]
    return [
        float(np.mean([fusion_scores(e, config.with_(params=p), m)["auc"] for e, m in prepared]))
        for p in grid
    ]


HIST_BINS = np.linspace(0.0, 1.0, 11)


def parameter_sweep(
    ensembles: Sequence[EnsembleInput],
    step: float = 0.05,
    config: SolverConfig = SolverConfig(),
    top_percentile: float = 90.0,
    normalization: str = "params",
    jobs: int = 1,
) -> ExperimentReport:
    """Mean AUC on every grid point, the top-decile set and per-parameter histograms.

    A grid point is selected when its AUC reaches the ``top_percentile``
    percentile of all grid AUCs.
    """
    grid = parameter_grid(step, normalization)
    chunks = [grid[i::max(jobs, 1)] for i in range(max(jobs, 1))]
    parts = parallel_map(_sweep_chunk, [(c, ensembles, config) for c in chunks], jobs)
    aucs = [0.0] * len(grid)
    for i, part in enumerate(parts):
        aucs[i :: max(jobs, 1)] = part
    cutoff = float(np.percentile(aucs, top_percentile))
    rows = []
    for p, a in zip(grid, aucs):
        al, be, ga, de = p.as_tuple()
        rows.append(
            {"alpha": al, "beta": be, "gamma": ga, "delta": de, "auc": a, "selected": bool(a >= cutoff)}
        )
    selected = [r for r in rows if r["selected"]]
    agg = []
    for name in ("alpha", "beta", "gamma", "delta"):
        vals = np.array([r[name] for r in selected])
        counts, _ = np.histogram(vals, bins=HIST_BINS)
        for lo, hi, c in zip(HIST_BINS[:-1], HIST_BINS[1:], counts):
            agg.append(
                {
                    "parameter": name,
                    "bin_low": lo,
                    "bin_high": hi,
                    "fraction": c / max(len(selected), 1),
                }
            )
    cfg = {
        "solver": config_echo(config),
        "step": step,
        "normalization": normalization,
        "top_percentile": top_percentile,
        "auc_cutoff": cutoff,
        "grid_points": len(grid),
        "selected_points": len(selected),
        "runs": len(ensembles),
    }
    return ExperimentReport("sweep", cfg, rows, agg)


# ---------------------------------------------------------------- epsilon


def epsilon_tradeoff(
    ensembles: Sequence[EnsembleInput],
    eps_values: Sequence[float] = EPSILON_GRID,
    config: SolverConfig = SolverConfig(),
) -> ExperimentReport:
    """AUC and runtime per convergence threshold, relative to the tightest one.

    Runs sequentially so the timings are comparable.
    """
    eps_values = sorted(eps_values, reverse=True)
    reference = min(eps_values)
    rows, timings = [], []
    for eps in eps_values:
        cfg = config.with_(epsilon=eps)
        start = time.perf_counter()
        scores = [fusion_scores(e, cfg) for e in ensembles]
        elapsed = time.perf_counter() - start
        rows.append(
            {
                "epsilon": eps,
                "auc": float(np.mean([s["auc"] for s in scores])),
                "iterations": float(np.mean([s["iterations"] for s in scores])),
            }
        )
        timings.append({"epsilon": eps, "runtime_s": elapsed})
    ref = next(r for r in rows if r["epsilon"] == reference)
    ref_t = next(t for t in timings if t["epsilon"] == reference)
    for r, t in zip(rows, timings):
        r["normalized_auc"] = r["auc"] / ref["auc"]
        r["normalized_iterations"] = r["iterations"] / ref["iterations"]
        t["normalized_runtime"] = t["runtime_s"] / ref_t["runtime_s"]
    cfg = {"solver": config_echo(config), "eps_values": list(eps_values), "runs": len(ensembles)}
    return ExperimentReport("epsilon", cfg, rows, [dict(r) for r in rows], timings)


# ---------------------------------------------------------------- ablation


def _ablation_one(args):
    idx, ens, config = args
    m = build_consensus_matrices(ens, config.mode)
    row = {"run": idx, "auc_full": fusion_scores(ens, config, m)["auc"]}
    for comp in (1, 2, 3, 4):
        params = ablate_component(config.params, comp)
        row[f"auc_drop{comp}"] = fusion_scores(ens, config.with_(params=params), m)["auc"]
    return row


def ablation(
    ensembles: Sequence[EnsembleInput], config: SolverConfig = SolverConfig(), jobs: int = 1
) -> ExperimentReport:
    """AUC with each objective term removed in turn."""
    rows = parallel_map(_ablation_one, [(i, e, config) for i, e in enumerate(ensembles)], jobs)
    full = float(np.mean([r["auc_full"] for r in rows]))
    agg = [{"component": 0, "auc": full, "auc_change": 0.0, "percent_decrease": 0.0}]
    for comp in (1, 2, 3, 4):
        a = float(np.mean([r[f"auc_drop{comp}"] for r in rows]))
        agg.append(
            {
                "component": comp,
                "auc": a,
                "auc_change": a - full,
                "percent_decrease": 100.0 * (full - a) / full,
            }
        )
    cfg = {"solver": config_echo(config), "runs": len(rows)}
    return ExperimentReport("ablation", cfg, rows, agg)


# ---------------------------------------------------------------- robustness


def _robust_one(args):
    idx, ens, config, k_values, seed = args
    rows = []
    for kind_idx, kind in enumerate(("classifier", "clusterer")):
        for k in k_values:
            noise_seed = derive_seed(seed, idx, kind_idx, k)
            if kind == "classifier":
                noisy = inject_random_classifier(ens, k, noise_seed)
            else:
                noisy = inject_random_clusterer(ens, k, noise_seed)
            s = fusion_scores(noisy, config)
            rows.append({"run": idx, "kind": kind, "k": k, "auc": s["auc"], "f_score": s["f_score"]})
    return rows


def robustness(
    ensembles: Sequence[EnsembleInput],
    k_values: Sequence[int] = NOISE_GRID,
    config: SolverConfig = SolverConfig(),
    seed: int = 0,
    jobs: int = 1,
) -> ExperimentReport:
    """AUC after appending ``k`` random classifiers or random clusterers.

    ``normalized_auc`` divides by the noiseless AUC of the same runs.
    """
    k_values = sorted(set(int(k) for k in k_values) | {0})
    per_run = parallel_map(
        _robust_one, [(i, e, config, k_values, seed) for i, e in enumerate(ensembles)], jobs
    )
    rows = [r for chunk in per_run for r in chunk]
    agg = []
    for kind in ("classifier", "clusterer"):
        base = float(np.mean([r["auc"] for r in rows if r["kind"] == kind and r["k"] == 0]))
        for k in k_values:
            m, sd = mean_sd([r["auc"] for r in rows if r["kind"] == kind and r["k"] == k])
            agg.append({"kind": kind, "k": k, "auc": m, "sd": sd, "normalized_auc": m / base})
    cfg = {"solver": config_echo(config), "k_values": k_values, "seed": seed, "runs": len(ensembles)}
    return ExperimentReport("robustness", cfg, rows, agg)


# ---------------------------------------------------------------- imbalance


def _imbalance_one(args):
    spec, x_pct, rep, config = args
    x, y = generate_synthetic(spec)
    removal_seed = derive_seed(spec.seed, rep)
    xr, yr, target = inject_imbalance(x, y, x_pct, removal_seed)
    ens = run_base_methods(xr, yr, num_classes=spec.l, seed=derive_seed(spec.seed, rep, 1)).ensemble
    row = {"x": x_pct, "repeat": rep, "manipulated_class": target, "n_objects": int(yr.size)}
    for mode in ("ec3", "iec3"):
        s = fusion_scores(ens, config.with_(mode=mode))
        row[f"{mode}_auc"] = s["auc"]
        row[f"{mode}_class_f"] = s["per_class_f"][target - 1]
    return row


def imbalance(
    spec: SyntheticSpec,
    x_values: Sequence[float] = IMBALANCE_GRID,
    repeats: int = 10,
    config: SolverConfig = SolverConfig(),
    jobs: int = 1,
) -> ExperimentReport:
    """Remove ``x%`` of one random class, fuse in both modes, report AUC and that class's F.

    Repeat ``r`` uses the same class and base-method split seed at every
    ``x``, so the ``x = 0`` rows are the per-repeat references.
    """
    tasks = [(spec, float(x), r, config) for x in x_values for r in range(repeats)]
    rows = parallel_map(_imbalance_one, tasks, jobs)
    agg = []
    ref = {}
    for x in x_values:
        sel = [r for r in rows if r["x"] == float(x)]
        entry = {"x": float(x)}
        for key in ("ec3_auc", "iec3_auc", "ec3_class_f", "iec3_class_f"):
            m, sd = mean_sd([r[key] for r in sel])
            entry[key] = m
            entry[f"{key}_sd"] = sd
        agg.append(entry)
    ref = agg[0]
    for entry in agg:
        for key in ("ec3_auc", "iec3_auc", "ec3_class_f", "iec3_class_f"):
            entry[f"{key}_retained"] = entry[key] / ref[key] if ref[key] else float("nan")
    cfg = {
        "solver": config_echo(config),
        "dataset": spec.to_dict(),
        "x_values": [float(x) for x in x_values],
        "repeats": repeats,
    }
    return ExperimentReport("imbalance", cfg, rows, agg)


# ---------------------------------------------------------------- scaling


@dataclass(frozen=True)
class ScalingSpec:
    n_max: int = 4000
    n_fractions: tuple[float, ...] = tuple(i / 10 for i in range(1, 11))
    methods: tuple[int, ...] = tuple(range(2, 13))
    classes: tuple[int, ...] = tuple(range(2, 13))
    base_n: int = 2000
    base_methods: int = 6
    base_classes: int = 5
    iterations: int = 20
    rounds: int = 7
    accuracy: float = 0.7
    seed: int = 0


def time_solve(matrices, iterations: int, seed: int) -> float:
    """Seconds for a solve that runs exactly ``iterations`` iterations."""
    config = SolverConfig(epsilon=1e-300, max_iterations=iterations, seed=seed)
    m = matrices
    start = time.perf_counter()
    solve(m.k_mem, m.k_co, m.y_obj, m.y_grp, config)
    return time.perf_counter() - start


def fit_poly(x: Sequence[float], y: Sequence[float], degree: int) -> dict:
    """Least-squares polynomial fit with its coefficient of determination."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    coef = np.polyfit(x, y, degree)
    pred = np.polyval(coef, x)
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return {"coefficients": coef.tolist(), "r2": r2}


def scaling_points(spec: ScalingSpec) -> list[tuple[str, int, EnsembleInput]]:
    half = spec.base_methods // 2
    rest = spec.base_methods - half
    points = []
    for frac in spec.n_fractions:
        n = int(round(frac * spec.n_max))
        points.append(("objects", n, synthetic_ensemble(n, spec.base_classes, half, rest, spec.accuracy, spec.seed)))
    for m in spec.methods:
        c1 = max(1, (m + 1) // 2)
        points.append(
            ("methods", m, synthetic_ensemble(spec.base_n, spec.base_classes, c1, m - c1, spec.accuracy, spec.seed))
        )
    for l in spec.classes:
        points.append(("classes", l, synthetic_ensemble(spec.base_n, l, half, rest, spec.accuracy, spec.seed)))
    return points


def scaling_experiment(spec: ScalingSpec = ScalingSpec()) -> ExperimentReport:
    """Solver runtime against object count, method count and class count.

    Each point runs a fixed number of iterations, so the fits measure the
    per-iteration cost.  Points are timed round-robin over ``rounds`` passes
    and the fastest pass is kept, which spreads slow phases of a shared host
    evenly instead of letting them land on a few points.  Fits are linear,
    linear and quadratic respectively.
    """
    points = scaling_points(spec)
    build = [float("inf")] * len(points)
    matrices = []
    for i, (_, _, ens) in enumerate(points):
        start = time.perf_counter()
        matrices.append(build_consensus_matrices(ens))
        build[i] = time.perf_counter() - start
    # compile and warm the kernels before anything is timed
    time_solve(matrices[0], 2, spec.seed)

    best = [float("inf")] * len(points)
    for r in range(spec.rounds):
        order = range(len(points)) if r % 2 == 0 else reversed(range(len(points)))
        for i in order:
            best[i] = min(best[i], time_solve(matrices[i], spec.iterations, spec.seed))

    rows, timings = [], []
    for (sweep, x, ens), m, b, s in zip(points, matrices, build, best):
        rows.append(
            {
                "sweep": sweep,
                "x": x,
                "n": ens.num_objects,
                "methods": ens.num_methods,
                "classes": ens.num_classes,
                "groups": m.catalog.G,
            }
        )
        timings.append({"sweep": sweep, "x": x, "build_s": b, "solve_s": s})

    fits = []
    for sweep, degree in (("objects", 1), ("methods", 1), ("classes", 2)):
        xs = [t["x"] for t in timings if t["sweep"] == sweep]
        ys = [t["solve_s"] for t in timings if t["sweep"] == sweep]
        fit = fit_poly(xs, ys, degree)
        fits.append({"sweep": sweep, "degree": degree, "r2": fit["r2"], "coefficients": fit["coefficients"]})
    # fits depend on wall-clock values, so they live with the timings
    timings.extend({"fit": f} for f in fits)
    cfg = {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(spec).items()}
    return ExperimentReport("scaling", cfg, rows, [], timings)


def scaling_fits(report: ExperimentReport) -> list[dict]:
    return [t["fit"] for t in report.timings if "fit" in t]
