"""Dataset container, CSV ingestion, standardization, and least-squares init.

CSV schema: header row, label in column 0, features in columns 1..d, comma
delimited, floats written as shortest round-trip decimals.
"""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass, replace

import numpy as np

from .errors import DataError, NumericalError

VARIANCE_FLOOR = 1e-12


@dataclass(frozen=True)
class CsvSchema:
    label_column: int = 0
    header: bool = True
    delimiter: str = ","


@dataclass(frozen=True)
class FeatureDataset:
    """Row-major feature matrix with classification / regression / sign labels."""

    features: np.ndarray
    labels: np.ndarray
    kind: str  # classification | regression | sign
    standardized: bool = False

    def __post_init__(self):
        object.__setattr__(self, "features", np.asarray(self.features, dtype=float))
        if self.kind == "regression":
            object.__setattr__(self, "labels", np.asarray(self.labels, dtype=float))
        else:
            object.__setattr__(self, "labels", np.asarray(self.labels, dtype=int))
        if self.features.ndim != 2 or len(self.labels) != self.features.shape[0]:
            raise DataError("features must be (n_rows, dim) with one label per row")
        if self.kind == "classification" and self.labels.size and self.labels.min() < 0:
            raise DataError("classification labels must be nonnegative integers")
        if self.kind == "sign" and not np.all(np.isin(self.labels, (-1, 1))):
            raise DataError("sign labels must be -1 or +1")

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


def _parse_label(raw: str, kind: str, lineno: int):
    try:
        value = float(raw)
    except ValueError as exc:
        raise DataError(f"line {lineno}: unparsable label {raw!r}") from exc
    if kind == "regression":
        return value
    if not value.is_integer():
        raise DataError(f"line {lineno}: label {raw!r} is not an integer")
    value = int(value)
    if kind == "classification" and value < 0:
        raise DataError(f"line {lineno}: classification label must be nonnegative")
    if kind == "sign" and value not in (-1, 1):
        raise DataError(f"line {lineno}: sign label must be -1 or +1")
    return value


def load_csv(path, kind: str, schema: CsvSchema = CsvSchema()) -> FeatureDataset:
    """Parse a CSV per the schema; raises DataError with the offending line."""
    if kind not in ("classification", "regression", "sign"):
        raise DataError(f"unknown dataset kind {kind!r}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if schema.header:
        lines = lines[1:]
    rows = [(i + 2 if schema.header else i + 1, ln) for i, ln in enumerate(lines) if ln.strip()]
    if not rows:
        raise DataError(f"{path}: no data rows")
    width = None
    labels, feats = [], []
    for lineno, line in rows:
        parts = line.split(schema.delimiter)
        if width is None:
            width = len(parts)
            if width < 2:
                raise DataError(f"line {lineno}: need a label and at least one feature")
        elif len(parts) != width:
            raise DataError(f"line {lineno}: expected {width} fields, got {len(parts)}")
        labels.append(_parse_label(parts[schema.label_column].strip(), kind, lineno))
        try:
            feats.append([float(p) for j, p in enumerate(parts) if j != schema.label_column])
        except ValueError as exc:
            raise DataError(f"line {lineno}: unparsable feature value") from exc
    return FeatureDataset(np.asarray(feats), np.asarray(labels), kind)


def write_csv(data: FeatureDataset, path, schema: CsvSchema = CsvSchema()) -> None:
    """Write a dataset in the load_csv format (atomic; shortest round-trip floats)."""
    header = schema.delimiter.join(["label"] + [f"x{j}" for j in range(data.dim)])
    lines = [header]
    for i in range(data.n_rows):
        label = repr(float(data.labels[i])) if data.kind == "regression" else str(int(data.labels[i]))
        lines.append(schema.delimiter.join([label] + [repr(float(v)) for v in data.features[i]]))
    atomic_write_text(path, "\n".join(lines) + "\n")


def atomic_write_text(path, text: str) -> None:
    """Write-then-rename so concurrent readers never see a partial file."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".csv")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def standardize(data: FeatureDataset, normalize_targets: bool = False) -> FeatureDataset:
    """Per-column zero mean / unit variance features (variance floor 1e-12).

    Constant columns end up identically zero.  With normalize_targets,
    regression targets are divided by their standard deviation.
    """
    if data.n_rows < 2:
        raise DataError("standardization needs at least two rows")
    x = data.features
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std * std < VARIANCE_FLOOR, 1.0, std)
    labels = data.labels
    if normalize_targets:
        if data.kind != "regression":
            raise DataError("target normalization applies to regression data only")
        scale = labels.std()
        if scale * scale >= VARIANCE_FLOOR:
            labels = labels / scale
    return replace(data, features=(x - mean) / std, labels=labels, standardized=True)


def least_squares_init(data: FeatureDataset):
    """(a, b) minimizing sum (a.x + b - y)^2 via ridge-stabilized normal equations."""
    if data.kind != "regression":
        raise DataError("least-squares init needs a regression dataset")
    if data.dim > 1000:
        raise DataError("dense normal equations limited to dim <= 1000")
    design = np.hstack([data.features, np.ones((data.n_rows, 1))])
    gram = design.T @ design
    gram[np.diag_indices_from(gram)] += 1e-10
    try:
        theta = np.linalg.solve(gram, design.T @ data.labels)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"normal equations singular: {exc}") from exc
    if not np.all(np.isfinite(theta)):
        raise NumericalError("least-squares solution is non-finite")
    return theta[:-1], float(theta[-1])
