"""File formats for the command-line tool.

CSV matrices: comma-separated, UTF-8, LF endings, first row holds feature
names, optional leading ``row_id`` column, numbers written with 17
significant digits so 64-bit floats round-trip losslessly.

mask.json: ``{"missing_cols": [...]}`` where entries are column names
(resolved against the header) or integer indices.

Config and mixture-spec files: flat ``key = value`` lines, ``#`` comments;
unknown keys are an error.
"""
from __future__ import annotations

import csv
import dataclasses
import json
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .core import AUTO, CONFIG_FIELDS, CrotConfig, DataMatrix, MaskSpec, ValidationError
from .imputer import ImputationRun
from .synth import MixtureSpec, default_mask_cols


class ParseError(ValueError):
    """A file failed to parse; carries path plus line/column when known."""

    def __init__(self, message: str, path: str | Path, line: int | None = None, col: int | None = None) -> None:
        self.path = str(path)
        self.line = line
        self.col = col
        where = self.path
        if line is not None:
            where += f":{line}"
            if col is not None:
                where += f":{col}"
        super().__init__(f"{where}: {message}")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_matrix_csv(path: str | Path, X: DataMatrix) -> None:
    names = X.col_names or tuple(f"c{j}" for j in range(X.cols))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if X.row_ids is not None:
            writer.writerow(("row_id", *names))
            for rid, row in zip(X.row_ids, X.values):
                writer.writerow((rid, *(_fmt(v) for v in row)))
        else:
            writer.writerow(names)
            for row in X.values:
                writer.writerow(tuple(_fmt(v) for v in row))


def read_matrix_csv(path: str | Path) -> DataMatrix:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", path, 1) from None
        if not header or any(h == "" for h in header):
            raise ParseError("blank field in header row", path, 1)
        has_ids = header[0] == "row_id"
        names = header[1:] if has_ids else header
        if not names:
            raise ParseError("header lists no feature columns", path, 1)
        rows: list[list[float]] = []
        ids: list[str] = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise ParseError(
                    f"expected {len(header)} fields, got {len(rec)}", path, lineno
                )
            if has_ids:
                ids.append(rec[0])
                rec = rec[1:]
            parsed = []
            for col, cell in enumerate(rec, start=(2 if has_ids else 1)):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise ParseError(
                        f"not a number: {cell!r}", path, lineno, col
                    ) from None
            rows.append(parsed)
        if not rows:
            raise ParseError("matrix has no data rows", path, 2)
    try:
        return DataMatrix(
            np.asarray(rows, dtype=np.float64),
            col_names=tuple(names),
            row_ids=tuple(ids) if has_ids else None,
        )
    except ValidationError as exc:
        raise ParseError(str(exc), path) from exc


def write_mask_json(path: str | Path, mask: MaskSpec, col_names: tuple[str, ...] | None) -> None:
    entries: list[Any]
    if col_names is not None:
        entries = [col_names[c] for c in mask.missing_cols]
    else:
        entries = list(mask.missing_cols)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump({"missing_cols": entries}, fh, indent=2)
        fh.write("\n")


def read_mask_json(path: str | Path, col_names: tuple[str, ...] | None) -> MaskSpec:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path, exc.lineno, exc.colno) from exc
    if not isinstance(doc, dict) or "missing_cols" not in doc:
        raise ParseError('expected an object with a "missing_cols" list', path)
    raw = doc["missing_cols"]
    if not isinstance(raw, list):
        raise ParseError('"missing_cols" must be a list', path)
    cols: list[int] = []
    lookup = {name: i for i, name in enumerate(col_names)} if col_names else {}
    for entry in raw:
        if isinstance(entry, bool):
            raise ParseError(f"invalid mask entry: {entry!r}", path)
        if isinstance(entry, int):
            cols.append(entry)
        elif isinstance(entry, str):
            if entry not in lookup:
                raise ValidationError(f"unknown column name in mask: {entry!r}")
            cols.append(lookup[entry])
        else:
            raise ParseError(f"invalid mask entry: {entry!r}", path)
    return MaskSpec(tuple(cols))


def _read_kv(path: str | Path) -> dict[str, tuple[str, int]]:
    pairs: dict[str, tuple[str, int]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError("expected 'key = value'", path, lineno)
            key, value = (part.strip() for part in line.split("=", 1))
            if not key or not value:
                raise ParseError("expected 'key = value'", path, lineno)
            if key in pairs:
                raise ParseError(f"duplicate key {key!r}", path, lineno)
            pairs[key] = (value, lineno)
    return pairs


_INT_FIELDS = {
    "p", "iterations", "batch_size", "k_max", "seed",
    "sinkhorn_max_iter", "convergence_window",
}
_FLOAT_FIELDS = {
    "alpha", "learning_rate", "adam_beta1", "adam_beta2", "adam_eps",
    "sinkhorn_tol", "convergence_rel_tol",
}


def read_config(path: str | Path) -> CrotConfig:
    pairs = _read_kv(path)
    kwargs: dict[str, Any] = {}
    for key, (value, lineno) in pairs.items():
        if key not in CONFIG_FIELDS:
            raise ParseError(f"unknown config key {key!r}", path, lineno)
        try:
            if key in ("epsilon", "k"):
                kwargs[key] = value if value == AUTO else (
                    float(value) if key == "epsilon" else int(value)
                )
            elif key in _INT_FIELDS:
                kwargs[key] = int(value)
            elif key in _FLOAT_FIELDS:
                kwargs[key] = float(value)
            else:  # pragma: no cover - every field is classified above
                raise AssertionError(key)
        except ValueError:
            raise ParseError(f"invalid value for {key}: {value!r}", path, lineno) from None
    try:
        return CrotConfig(**kwargs)
    except ValidationError as exc:
        raise ParseError(str(exc), path) from exc


_SPEC_INT_FIELDS = {"k_true", "n", "m_per_batch", "seed"}
_SPEC_FLOAT_FIELDS = {"separation", "sigma"}


def read_mixture_spec(path: str | Path) -> tuple[MixtureSpec, tuple[int, ...]]:
    """Mixture spec plus the column set to mask (key ``mask_cols``, default auto)."""
    pairs = _read_kv(path)
    kwargs: dict[str, Any] = {}
    mask_cols: tuple[int, ...] | None = None
    for key, (value, lineno) in pairs.items():
        try:
            if key in _SPEC_INT_FIELDS:
                kwargs[key] = int(value)
            elif key in _SPEC_FLOAT_FIELDS:
                kwargs[key] = float(value)
            elif key == "mask_cols":
                if value != AUTO:
                    mask_cols = tuple(int(tok) for tok in value.split(",") if tok.strip())
            else:
                raise ParseError(f"unknown spec key {key!r}", path, lineno)
        except ValueError:
            raise ParseError(f"invalid value for {key}: {value!r}", path, lineno) from None
    try:
        spec = MixtureSpec(**kwargs)
    except ValidationError as exc:
        raise ParseError(str(exc), path) from exc
    if mask_cols is None:
        mask_cols = default_mask_cols(spec.n)
    if not mask_cols or any(c < 0 or c >= spec.n for c in mask_cols):
        raise ParseError(f"mask_cols out of range for n={spec.n}", path)
    return spec, mask_cols


def write_labels_csv(path: str | Path, labels: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("label\n")
        for lab in labels:
            fh.write(f"{lab}\n")


def read_labels_csv(path: str | Path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh]
    if not lines or lines[0] != "label":
        raise ParseError("expected a 'label' header", path, 1)
    labels = [line for line in lines[1:] if line != ""]
    if not labels:
        raise ParseError("no labels", path, 2)
    return np.asarray(labels)


def report_dict(run: ImputationRun, aborted: bool = False) -> dict[str, Any]:
    cfg = dataclasses.asdict(run.config_echo)
    doc: dict[str, Any] = {
        "tool_version": __version__,
        "k_used": run.k_used,
        "epsilon_used": run.epsilon_used,
        "converged_at": run.converged_at,
        "wall_clock_ms": run.wall_clock_ms,
        "config": cfg,
        "loss_history": [
            {
                "iteration": rec.iteration,
                "data_term": rec.data_term,
                "cluster_term": rec.cluster_term,
                "total": rec.total,
            }
            for rec in run.loss_history
        ],
    }
    if aborted:
        doc["aborted"] = True
    return doc


def write_report(path: str | Path, run: ImputationRun, aborted: bool = False) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report_dict(run, aborted), fh, indent=2)
        fh.write("\n")
