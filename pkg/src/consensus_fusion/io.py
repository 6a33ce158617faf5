"""File formats: ensemble ingestion, predictions, truth labels and parameter profiles.

Ingestion is a comma-separated file with one row per object plus a JSON
sidecar::

    {"schema": "consensus-fusion/ingestion/1", "N": 8, "l": 3, "C1": 2, "C2": 2,
     "columns": ["id", "classifier", "classifier", "clusterer", "clusterer", "truth"],
     "header": true}

``columns`` gives the role of every column in file order; ``truth`` is
optional.  Numbers are written with 12 significant digits.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import EnsembleInput
from .errors import ValidationError
from .objective import ObjectiveParams

INGESTION_SCHEMA = "consensus-fusion/ingestion/1"
SUMMARY_SCHEMA = "consensus-fusion/fuse-summary/1"
METRICS_SCHEMA = "consensus-fusion/metrics/1"
ROLES = ("id", "classifier", "clusterer", "truth")


def fmt(x: float) -> str:
    return f"{float(x):.12g}"


@dataclass(frozen=True)
class IngestionMeta:
    num_objects: int
    num_classes: int
    num_classifiers: int
    num_clusterers: int
    columns: tuple[str, ...]
    header: bool = True

    def __post_init__(self) -> None:
        unknown = sorted(set(self.columns) - set(ROLES))
        if unknown:
            raise ValidationError(f"unknown column roles {unknown}; valid roles are {list(ROLES)}")
        if self.columns.count("id") != 1:
            raise ValidationError("exactly one id column is required")
        if self.columns.count("truth") > 1:
            raise ValidationError("at most one truth column is allowed")
        if self.columns.count("classifier") != self.num_classifiers:
            raise ValidationError(
                f"C1={self.num_classifiers} but {self.columns.count('classifier')} classifier columns"
            )
        if self.columns.count("clusterer") != self.num_clusterers:
            raise ValidationError(
                f"C2={self.num_clusterers} but {self.columns.count('clusterer')} clusterer columns"
            )
        if self.num_objects < 1 or self.num_classes < 2:
            raise ValidationError("need N >= 1 and l >= 2")

    @property
    def has_truth(self) -> bool:
        return "truth" in self.columns

    @classmethod
    def from_dict(cls, d: dict) -> "IngestionMeta":
        schema = d.get("schema", INGESTION_SCHEMA)
        if schema != INGESTION_SCHEMA:
            raise ValidationError(f"unsupported sidecar schema {schema!r}")
        try:
            return cls(
                num_objects=int(d["N"]),
                num_classes=int(d["l"]),
                num_classifiers=int(d["C1"]),
                num_clusterers=int(d["C2"]),
                columns=tuple(d["columns"]),
                header=bool(d.get("header", True)),
            )
        except KeyError as exc:
            raise ValidationError(f"sidecar is missing field {exc.args[0]!r}") from None

    def to_dict(self) -> dict:
        return {
            "schema": INGESTION_SCHEMA,
            "N": self.num_objects,
            "l": self.num_classes,
            "C1": self.num_classifiers,
            "C2": self.num_clusterers,
            "columns": list(self.columns),
            "header": self.header,
        }


def sidecar_path(data_path: Path) -> Path:
    """Default sidecar location: the data file with a ``.json`` suffix."""
    return Path(data_path).with_suffix(".json")


def read_meta(path: Path) -> IngestionMeta:
    path = Path(path)
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return IngestionMeta.from_dict(d)


def _first_duplicate(ids: Sequence[str]) -> Optional[str]:
    seen: set[str] = set()
    for i in ids:
        if i in seen:
            return i
        seen.add(i)
    return None


def _parse_int(text: str, row: int, col: int) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise ValidationError(f"row {row}, column {col + 1}: expected an integer, got {text!r}") from None


def read_ensemble(data_path: Path, meta_path: Optional[Path] = None) -> EnsembleInput:
    """Parse an ingestion file; any malformed row raises with its 1-based row number."""
    data_path = Path(data_path)
    if not data_path.is_file():
        raise FileNotFoundError(2, "No such file", str(data_path))
    meta = read_meta(meta_path or sidecar_path(data_path))
    roles = meta.columns
    ids, clf, clu, truth = [], [], [], []
    with data_path.open(newline="") as fh:
        reader = csv.reader(fh)
        for row_no, row in enumerate(reader, start=1):
            if meta.header and row_no == 1:
                continue
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(roles):
                raise ValidationError(f"row {row_no}: expected {len(roles)} fields, got {len(row)}")
            c_row, k_row = [], []
            for col, (role, cell) in enumerate(zip(roles, row)):
                if role == "id":
                    ids.append(cell.strip())
                elif role == "classifier":
                    v = _parse_int(cell, row_no, col)
                    if not 1 <= v <= meta.num_classes:
                        raise ValidationError(
                            f"row {row_no}, column {col + 1}: class label {v} outside 1..{meta.num_classes}"
                        )
                    c_row.append(v)
                elif role == "clusterer":
                    k_row.append(_parse_int(cell, row_no, col))
                else:
                    v = _parse_int(cell, row_no, col)
                    if not 1 <= v <= meta.num_classes:
                        raise ValidationError(
                            f"row {row_no}, column {col + 1}: true label {v} outside 1..{meta.num_classes}"
                        )
                    truth.append(v)
            clf.append(c_row)
            clu.append(k_row)
    if len(ids) != meta.num_objects:
        raise ValidationError(f"sidecar declares N={meta.num_objects} but the file has {len(ids)} rows")
    dup = _first_duplicate(ids)
    if dup is not None:
        raise ValidationError(f"object id {dup!r} appears more than once")
    n = len(ids)
    return EnsembleInput(
        num_classes=meta.num_classes,
        classifier_outputs=np.array(clf, dtype=np.int64).reshape(n, -1).T,
        clustering_outputs=np.array(clu, dtype=np.int64).reshape(n, -1).T,
        true_labels=np.array(truth, dtype=np.int64) if meta.has_truth else None,
        object_ids=tuple(ids),
    )


def write_ensemble(data_path: Path, ens: EnsembleInput, meta_path: Optional[Path] = None) -> IngestionMeta:
    """Write ``ens`` in the ingestion format, truth included when present."""
    data_path = Path(data_path)
    roles = ["id"] + ["classifier"] * ens.num_classifiers + ["clusterer"] * ens.num_clusterers
    if ens.true_labels is not None:
        roles.append("truth")
    meta = IngestionMeta(
        ens.num_objects, ens.num_classes, ens.num_classifiers, ens.num_clusterers, tuple(roles)
    )
    header = (
        ["id"]
        + [f"classifier_{i + 1}" for i in range(ens.num_classifiers)]
        + [f"clusterer_{i + 1}" for i in range(ens.num_clusterers)]
        + (["truth"] if ens.true_labels is not None else [])
    )
    with data_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i, oid in enumerate(ens.ids()):
            row = [oid, *ens.classifier_outputs[:, i].tolist(), *ens.clustering_outputs[:, i].tolist()]
            if ens.true_labels is not None:
                row.append(int(ens.true_labels[i]))
            w.writerow(row)
    write_json(meta_path or sidecar_path(data_path), meta.to_dict())
    return meta


def write_predictions(path: Path, ids: Sequence[str], probs: np.ndarray, labels: np.ndarray) -> None:
    """CSV with ``id, p_1..p_l, label``."""
    probs = np.asarray(probs)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", *[f"p_{c + 1}" for c in range(probs.shape[1])], "label"])
        for oid, row, lab in zip(ids, probs, labels):
            w.writerow([oid, *[fmt(v) for v in row], int(lab)])


def read_predictions(path: Path) -> tuple[list[str], np.ndarray]:
    """Ids and the ``N x l`` probability block of a predictions file."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValidationError(f"{path}: empty predictions file")
    header = rows[0]
    prob_cols = [i for i, h in enumerate(header) if h.startswith("p_")]
    if not prob_cols or header[0] != "id":
        raise ValidationError(f"{path}: expected header id,p_1..p_l,label")
    ids, probs = [], []
    for row_no, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ValidationError(f"{path}: row {row_no} has {len(row)} fields, expected {len(header)}")
        ids.append(row[0].strip())
        try:
            probs.append([float(row[i]) for i in prob_cols])
        except ValueError:
            raise ValidationError(f"{path}: row {row_no} holds a non-numeric probability") from None
    return ids, np.array(probs, dtype=float)


def write_truth(path: Path, ids: Sequence[str], labels: Sequence[int]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "label"])
        for oid, lab in zip(ids, labels):
            w.writerow([oid, int(lab)])


def read_truth(path: Path) -> tuple[list[str], np.ndarray]:
    """Ids and 1-based labels; a header row ``id,label`` is optional."""
    with Path(path).open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if rows and rows[0][:2] == ["id", "label"]:
        rows = rows[1:]
    ids, labels = [], []
    for row_no, row in enumerate(rows, start=1):
        if len(row) < 2:
            raise ValidationError(f"{path}: row {row_no} needs id and label")
        ids.append(row[0].strip())
        labels.append(_parse_int(row[1], row_no, 1))
    return ids, np.array(labels, dtype=np.int64)


def align(ids_a: Sequence[str], ids_b: Sequence[str]) -> np.ndarray:
    """Index into ``ids_b`` that reorders it to match ``ids_a`` exactly."""
    dup = _first_duplicate(ids_a) or _first_duplicate(ids_b)
    if dup is not None:
        raise ValidationError(f"object id {dup!r} appears more than once")
    if set(ids_a) != set(ids_b):
        missing = sorted(set(ids_a) ^ set(ids_b))[:5]
        raise ValidationError(f"object ids do not match, e.g. {missing}")
    pos = {oid: i for i, oid in enumerate(ids_b)}
    return np.array([pos[oid] for oid in ids_a], dtype=np.int64)


def write_json(path: Path, obj: dict) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def load_profiles() -> dict[str, ObjectiveParams]:
    """Named weight presets shipped with the package."""
    text = resources.files("consensus_fusion").joinpath("data/profiles.json").read_text()
    d = json.loads(text)
    norm = d.get("normalization", "params")
    return {name: ObjectiveParams(*vals, normalization=norm) for name, vals in d["profiles"].items()}
