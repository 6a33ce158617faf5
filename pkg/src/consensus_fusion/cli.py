"""Command-line front end: ``fuse``, ``eval`` and ``experiment``.

Exit codes: 0 success, 2 validation, 3 numerical failure, 4 I/O.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence, TypeVar

from . import __version__
from .bistochastic import kl_bistochastic_gram
from .core import EnsembleInput, build_group_catalog, build_membership, build_votes
from .errors import NumericalError, ValidationError
from .harness import experiments as ex
from .harness.data import PRESETS, SyntheticSpec
from .harness.report import format_table
from .io import (
    METRICS_SCHEMA,
    SUMMARY_SCHEMA,
    align,
    load_profiles,
    read_ensemble,
    read_predictions,
    read_truth,
    write_json,
    write_predictions,
)
from .metrics import evaluate
from .objective import ObjectiveParams
from .pipeline import scale_membership
from .solver import SolverConfig, predict_labels, solve, write_trace

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4
KINDS = ("sweep", "epsilon", "ablation", "robustness", "imbalance", "scaling", "quality")
EXPERIMENT_CONFIG_SCHEMA = "consensus-fusion/experiment-config/1"

log = logging.getLogger("consensus_fusion")
T = TypeVar("T")


class StageError(Exception):
    def __init__(self, stage: str, code: int, message: str):
        super().__init__(message)
        self.stage, self.code = stage, code


def run_stage(stage: str, fn: Callable[[], T]) -> T:
    """Run ``fn`` and translate failures into a :class:`StageError` naming ``stage``."""
    try:
        return fn()
    except StageError:
        raise
    except NumericalError as exc:
        raise StageError(stage, EXIT_NUMERICAL, str(exc)) from exc
    except (ValidationError, ValueError, KeyError, TypeError) as exc:
        raise StageError(stage, EXIT_VALIDATION, str(exc)) from exc
    except FileNotFoundError as exc:
        raise StageError(stage, EXIT_IO, f"file not found: {exc.filename}") from exc
    except OSError as exc:
        raise StageError(stage, EXIT_IO, f"{exc.strerror}: {exc.filename}") from exc


# ---------------------------------------------------------------- shared options


def add_solver_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=("ec3", "iec3"), default="iec3")
    p.add_argument("--profile", help="named parameter preset, e.g. default or iris")
    for name in ("alpha", "beta", "gamma", "delta"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument(
        "--normalization",
        choices=("params", "multipliers"),
        default="params",
        help="which weighted sum of explicit parameters must equal one",
    )
    p.add_argument("--epsilon", type=float, default=0.025)
    p.add_argument("--max-iterations", type=int, default=500)
    p.add_argument("--sweep", choices=("gauss-seidel", "jacobi"), default="gauss-seidel")
    p.add_argument("--seed", type=int, default=0)


def resolve_params(args: argparse.Namespace) -> ObjectiveParams:
    explicit = [getattr(args, n) for n in ("alpha", "beta", "gamma", "delta")]
    if any(v is not None for v in explicit):
        if args.profile:
            raise ValidationError("use either --profile or explicit --alpha/--beta/--gamma/--delta")
        if any(v is None for v in explicit):
            raise ValidationError("explicit parameters need all of --alpha, --beta, --gamma, --delta")
        return ObjectiveParams(*explicit, normalization=args.normalization)
    profiles = load_profiles()
    name = args.profile or "default"
    if name not in profiles:
        raise ValidationError(f"unknown profile {name!r}; available: {', '.join(sorted(profiles))}")
    return profiles[name]


def solver_config(args: argparse.Namespace) -> SolverConfig:
    return SolverConfig(
        params=resolve_params(args),
        epsilon=args.epsilon,
        max_iterations=args.max_iterations,
        mode=args.mode,
        seed=args.seed,
        sweep=args.sweep,
    )


def ensure_out_dir(path: Path) -> Path:
    path = Path(path)
    if path.exists() and not path.is_dir():
        raise NotADirectoryError(20, "not a directory", str(path))
    path.mkdir(parents=True, exist_ok=True)
    return path


# ---------------------------------------------------------------- fuse


def cmd_fuse(args: argparse.Namespace) -> int:
    config = run_stage("parse", lambda: solver_config(args))
    input_path = Path(args.input)
    meta_path = Path(args.meta) if args.meta else None
    ens: EnsembleInput = run_stage("parse", lambda: read_ensemble(input_path, meta_path))

    def matrices():
        catalog = build_group_catalog(ens)
        return catalog, build_membership(ens, catalog), build_votes(ens, catalog)

    catalog, membership, votes = run_stage("matrices", matrices)
    k_mem = run_stage("bistochastic", lambda: scale_membership(membership, config.mode).matrix)
    k_co = run_stage("bistochastic", lambda: kl_bistochastic_gram(membership).matrix)
    result = run_stage("solve", lambda: solve(k_mem, k_co, votes.objects, votes.groups, config))

    def write():
        out = ensure_out_dir(Path(args.out))
        probs = result.objects
        write_predictions(out / "predictions.csv", ens.ids(), probs, predict_labels(probs))
        trace = Path(args.trace) if args.trace else out / "trace.csv"
        write_trace(result, trace)
        summary = {
            "schema": SUMMARY_SCHEMA,
            "input": str(input_path),
            "mode": config.mode,
            "params": dict(zip(("alpha", "beta", "gamma", "delta"), config.params.as_tuple())),
            "epsilon": config.epsilon,
            "seed": config.seed,
            "num_objects": ens.num_objects,
            "num_classes": ens.num_classes,
            "num_groups": catalog.G,
            "iterations": result.iterations_used,
            "converged": result.converged,
            "objective": float(f"{result.objective:.12g}"),
        }
        write_json(out / "summary.json", summary)
        return summary

    summary = run_stage("write", write)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------- eval


def cmd_eval(args: argparse.Namespace) -> int:
    def load():
        ids_p, probs = read_predictions(Path(args.predictions))
        ids_t, labels = read_truth(Path(args.truth))
        order = align(ids_p, ids_t)
        return probs, labels[order]

    probs, truth = run_stage("parse", load)
    report = run_stage("metrics", lambda: evaluate(probs, truth, hard_auc=args.hard_auc))
    out = {"schema": METRICS_SCHEMA, **report.to_dict()}
    out = json.loads(json.dumps(out), parse_float=lambda s: float(f"{float(s):.12g}"))
    text = json.dumps(out, indent=2, sort_keys=True)
    if args.out:
        run_stage("write", lambda: Path(args.out).write_text(text + "\n"))
    print(text)
    return EXIT_OK


# ---------------------------------------------------------------- experiment


@dataclass(frozen=True)
class ExperimentSetup:
    config: dict
    solver: SolverConfig
    dataset: SyntheticSpec
    seeds: tuple[int, ...]
    inputs: tuple[Path, ...]


DEFAULT_RUNS = {"sweep": 5, "epsilon": 10, "ablation": 10, "robustness": 10, "imbalance": 10, "quality": 20}


def dataset_from_config(d: Optional[dict], seed: int) -> SyntheticSpec:
    d = dict(d or {"preset": "blobs3"})
    if "preset" in d:
        name = d.pop("preset")
        if name not in PRESETS:
            raise ValidationError(f"unknown dataset preset {name!r}; available: {', '.join(PRESETS)}")
        base = PRESETS[name]
        d = {**base.to_dict(), **d}
    d.setdefault("seed", seed)
    return SyntheticSpec(**d)


def load_setup(args: argparse.Namespace) -> ExperimentSetup:
    cfg: dict = {}
    if args.config:
        cfg = json.loads(Path(args.config).read_text())
        if not isinstance(cfg, dict):
            raise ValidationError("experiment config must be a JSON object")
        schema = cfg.get("schema", EXPERIMENT_CONFIG_SCHEMA)
        if schema != EXPERIMENT_CONFIG_SCHEMA:
            raise ValidationError(f"unsupported config schema {schema!r}")
    solver = solver_config(args)
    if "mode" in cfg:
        solver = solver.with_(mode=cfg["mode"])
    if "epsilon" in cfg:
        solver = solver.with_(epsilon=float(cfg["epsilon"]))
    if "params" in cfg:
        solver = solver.with_(params=ObjectiveParams(**cfg["params"]))
    dataset = dataset_from_config(cfg.get("dataset"), args.seed)
    if "seeds" in cfg:
        seeds = tuple(int(s) for s in cfg["seeds"])
    else:
        runs = int(cfg.get("runs", DEFAULT_RUNS.get(args.kind, 10)))
        seeds = tuple(args.seed + i for i in range(runs))
    inputs = tuple(Path(p) for p in cfg.get("inputs", []))
    for p in inputs:
        if not p.exists():
            raise FileNotFoundError(2, "No such file", str(p))
    return ExperimentSetup(cfg, solver, dataset, seeds, inputs)


def run_experiment(kind: str, setup: ExperimentSetup, jobs: int):
    cfg, solver = setup.config, setup.solver

    def ensembles():
        if setup.inputs:
            loaded = [read_ensemble(p) for p in setup.inputs]
            if any(e.true_labels is None for e in loaded):
                raise ValidationError("experiment inputs need a truth column")
            return loaded
        return ex.build_ensembles(setup.dataset, setup.seeds, jobs)

    if kind == "sweep":
        return ex.parameter_sweep(
            ensembles(),
            step=float(cfg.get("step", 0.05)),
            config=solver,
            top_percentile=float(cfg.get("top_percentile", 90.0)),
            normalization=cfg.get("normalization", "params"),
            jobs=jobs,
        )
    if kind == "epsilon":
        return ex.epsilon_tradeoff(ensembles(), cfg.get("eps_values", ex.EPSILON_GRID), solver)
    if kind == "ablation":
        return ex.ablation(ensembles(), solver, jobs)
    if kind == "robustness":
        return ex.robustness(ensembles(), cfg.get("k_values", ex.NOISE_GRID), solver, setup.seeds[0], jobs)
    if kind == "quality":
        return ex.fusion_quality(ensembles(), solver, jobs)
    if kind == "imbalance":
        return ex.imbalance(
            setup.dataset,
            cfg.get("x_values", ex.IMBALANCE_GRID),
            int(cfg.get("repeats", 10)),
            solver,
            jobs,
        )
    if kind == "scaling":
        fields = ex.ScalingSpec.__dataclass_fields__
        unknown = set(cfg.get("scaling", {})) - set(fields)
        if unknown:
            raise ValidationError(f"unknown scaling fields {sorted(unknown)}")
        values = {k: tuple(v) if isinstance(v, list) else v for k, v in cfg.get("scaling", {}).items()}
        values.setdefault("seed", setup.seeds[0])
        return ex.scaling_experiment(ex.ScalingSpec(**values))
    raise ValidationError(f"unknown experiment kind {kind!r}; valid kinds: {', '.join(KINDS)}")


def cmd_experiment(args: argparse.Namespace) -> int:
    setup = run_stage("parse", lambda: load_setup(args))
    report = run_stage(args.kind, lambda: run_experiment(args.kind, setup, args.jobs))
    run_stage("write", lambda: report.write(ensure_out_dir(Path(args.out))))
    if report.aggregate:
        print(report.format_table())
    if args.kind == "scaling":
        print(format_table(ex.scaling_fits(report)))
    return EXIT_OK


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="consensus-fusion",
        description="Fuse base classifier and clusterer outputs into per-object class distributions.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fuse", help="fuse one ingestion file")
    p.add_argument("input", help="comma-separated ingestion file")
    p.add_argument("--meta", help="JSON sidecar (default: input with a .json suffix)")
    p.add_argument("--trace", help="solver trace CSV (default: OUT/trace.csv)")
    p.add_argument("--out", required=True, help="output directory")
    add_solver_options(p)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("eval", help="score a predictions file against truth labels")
    p.add_argument("predictions")
    p.add_argument("truth")
    p.add_argument("--hard-auc", action="store_true", help="compute AUC from argmax labels")
    p.add_argument("--out", help="also write the metrics JSON here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("experiment", help="run one experiment protocol")
    p.add_argument("kind", choices=KINDS)
    p.add_argument("--config", help="JSON experiment configuration")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory")
    add_solver_options(p)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error [{exc.stage}]: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
