"""CSV ingestion, min-max normalization and small file helpers."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyInput, MissingLabelColumn, ParseError
from .granulation import LabeledDataset

FIXTURE_DIR = Path(__file__).parent / "data"


@dataclass(frozen=True)
class DatasetSpec:
    path: str
    label_column: str | int | None = None  # None means the last column
    has_header: bool = True
    delimiter: str = ","

    def __post_init__(self):
        if len(self.delimiter) != 1:
            raise ValueError("delimiter must be a single character")


@dataclass(frozen=True)
class LoadedDataset:
    """A dataset plus the original label strings for each dense identifier."""

    data: LabeledDataset
    label_names: tuple
    feature_names: tuple
    name: str = ""


def _resolve_label_column(label_column, header, ncols):
    if label_column is None:
        return ncols - 1
    if isinstance(label_column, int) or (isinstance(label_column, str) and label_column.lstrip("-").isdigit()):
        idx = int(label_column)
        if idx < 0:
            idx += ncols
        if not 0 <= idx < ncols:
            raise MissingLabelColumn(f"label column index {label_column} out of range for {ncols} columns")
        return idx
    if header is None or label_column not in header:
        raise MissingLabelColumn(f"no column named {label_column!r}")
    return header.index(label_column)


def load_csv(spec: DatasetSpec) -> LoadedDataset:
    """Read a delimited file; labels become dense ids in first-appearance order."""
    with open(spec.path, newline="") as fh:
        rows = [r for r in csv.reader(fh, delimiter=spec.delimiter) if any(cell.strip() for cell in r)]
    header = None
    if spec.has_header:
        if not rows:
            raise EmptyInput(f"{spec.path} is empty")
        header = [h.strip() for h in rows[0]]
        rows = rows[1:]
    if not rows:
        raise EmptyInput(f"{spec.path} has no data rows")
    ncols = len(header) if header is not None else len(rows[0])
    label_idx = _resolve_label_column(spec.label_column, header, ncols)

    features = np.empty((len(rows), ncols - 1))
    labels = []
    names: dict = {}
    first_line = 2 if spec.has_header else 1
    for r, row in enumerate(rows):
        line = r + first_line
        if len(row) != ncols:
            raise ParseError(f"expected {ncols} fields, found {len(row)}", row=line)
        f = 0
        for c, cell in enumerate(row):
            if c == label_idx:
                continue
            try:
                value = float(cell)
            except ValueError:
                raise ParseError(f"cannot parse {cell!r} as a number", row=line, column=c + 1) from None
            if not math.isfinite(value):
                raise ParseError(f"non-finite value {cell!r}", row=line, column=c + 1)
            features[r, f] = value
            f += 1
        key = row[label_idx].strip()
        labels.append(names.setdefault(key, len(names)))

    if header is not None:
        feature_names = tuple(h for i, h in enumerate(header) if i != label_idx)
    else:
        feature_names = tuple(f"x{i}" for i in range(ncols - 1))
    return LoadedDataset(
        LabeledDataset(features, np.asarray(labels, dtype=np.int64)),
        tuple(names),
        feature_names,
        Path(spec.path).stem,
    )


def load_fixture(name: str) -> LoadedDataset:
    path = FIXTURE_DIR / f"{name}.csv"
    if not path.exists():
        raise FileNotFoundError(
            f"fixture {name!r} not found at {path}; place a CSV there (label in the last column)"
        )
    return load_csv(DatasetSpec(str(path)))


def available_fixtures() -> list:
    return sorted(p.stem for p in FIXTURE_DIR.glob("*.csv"))


@dataclass(frozen=True)
class Normalization:
    mins: np.ndarray
    maxs: np.ndarray

    def apply(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        span = self.maxs - self.mins
        out = np.zeros_like(X)
        ok = span > 0
        out[:, ok] = (X[:, ok] - self.mins[ok]) / span[ok]
        return out

    def to_dict(self):
        return {"min": self.mins.tolist(), "max": self.maxs.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["min"], dtype=np.float64), np.asarray(d["max"], dtype=np.float64))


def fit_normalization(X) -> Normalization:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] == 0:
        raise EmptyInput("cannot fit normalization on zero rows")
    return Normalization(X.min(axis=0), X.max(axis=0))


def normalize_fit_apply(train, other=None):
    """Min-max scale ``train`` to [0, 1] and ``other`` with the same statistics.

    Returns ``(train_scaled, other_scaled, normalization)``; constant
    training columns map to 0.
    """
    norm = fit_normalization(train)
    other_scaled = None if other is None else norm.apply(other)
    return norm.apply(train), other_scaled, norm


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_json(path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def atomic_write_csv(path, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    atomic_write_text(path, buf.getvalue())
