"""Experiment report container and its JSON / CSV serialisations."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

SCHEMA = "consensus-fusion/experiment-report/1"
TIMINGS_SCHEMA = "consensus-fusion/timings/1"


def _clean(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v) or math.isinf(v):
            return None
        return float(f"{v:.12g}")
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, Path):
        return str(value)
    return value


@dataclass
class ExperimentReport:
    """Deterministic results plus wall-clock timings kept apart.

    ``rows`` are per-run records, ``aggregate`` the summary recomputable
    from them, ``timings`` one dict per timed unit (seconds).
    """

    kind: str
    config: dict
    rows: list[dict] = field(default_factory=list)
    aggregate: list[dict] = field(default_factory=list)
    timings: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return _clean(
            {
                "schema": SCHEMA,
                "kind": self.kind,
                "config": self.config,
                "aggregate": self.aggregate,
                "rows": self.rows,
            }
        )

    def timings_dict(self) -> dict:
        return _clean({"schema": TIMINGS_SCHEMA, "kind": self.kind, "timings": self.timings})

    def write(self, out_dir: Path) -> dict[str, Path]:
        """Write ``report.json``, ``timings.json``, ``rows.csv`` and ``aggregate.csv``."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = {
            "report": out_dir / "report.json",
            "timings": out_dir / "timings.json",
            "rows": out_dir / "rows.csv",
            "aggregate": out_dir / "aggregate.csv",
        }
        paths["report"].write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        paths["timings"].write_text(json.dumps(self.timings_dict(), indent=2, sort_keys=True) + "\n")
        write_csv(paths["rows"], self.rows)
        write_csv(paths["aggregate"], self.aggregate)
        return paths

    def format_table(self) -> str:
        return format_table(self.aggregate)


def _fmt(v: Any) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    if isinstance(v, (list, tuple)):
        return ";".join(_fmt(x) for x in v)
    return "" if v is None else str(v)


def write_csv(path: Path, rows: list[dict]) -> None:
    keys: list[str] = []
    for r in rows:
        keys.extend(k for k in r if k not in keys)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys)
        for r in rows:
            w.writerow([_fmt(r.get(k)) for k in keys])


def format_table(rows: list[dict]) -> str:
    if not rows:
        return "(no rows)"
    keys: list[str] = []
    for r in rows:
        keys.extend(k for k in r if k not in keys)

    def cell(v):
        if isinstance(v, (float, np.floating)):
            return f"{float(v):.4f}"
        return _fmt(v)

    table = [keys] + [[cell(r.get(k)) for k in keys] for r in rows]
    widths = [max(len(row[i]) for row in table) for i in range(len(keys))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in table]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def mean_sd(values) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), sd
