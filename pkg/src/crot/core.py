"""Shared building blocks: dense matrices, patch masks, run configuration, seeded RNG streams."""
from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass, field, fields
from typing import Sequence

import numpy as np

AUTO = "auto"

_SEED_MASK = (1 << 64) - 1


class ValidationError(ValueError):
    """An input violates a documented precondition or invariant."""


class NumericError(RuntimeError):
    """A computation produced non-finite values and was aborted."""


class CrotWarning(UserWarning):
    """Non-fatal adjustment made at run start (clamped batch size, row coverage, ...)."""


def warn(message: str) -> None:
    warnings.warn(message, CrotWarning, stacklevel=3)


@dataclass(frozen=True)
class RngStream:
    """Named deterministic random source.

    The same (seed, stream_id) pair always replays the same draw sequence, so
    every stochastic step of a run can be tied to a stable label. Independent
    uses get independent substreams instead of sharing one generator.
    """

    seed: int
    stream_id: str = "root"

    def generator(self) -> np.random.Generator:
        """Fresh generator for this stream; repeated calls restart the sequence."""
        digest = hashlib.sha256(self.stream_id.encode("utf-8")).digest()
        words = [int.from_bytes(digest[i : i + 8], "little") for i in range(0, 32, 8)]
        return np.random.default_rng(np.random.SeedSequence([self.seed & _SEED_MASK, *words]))

    def substream(self, label: str) -> "RngStream":
        return RngStream(self.seed, f"{self.stream_id}/{label}")


def _generator_of(rng: RngStream | np.random.Generator) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    return rng


@dataclass
class DataMatrix:
    """Dense real matrix; rows are samples, columns are features.

    Values are stored row-major as float64 and must be finite. Column names,
    when present, are unique.
    """

    values: np.ndarray
    col_names: tuple[str, ...] | None = None
    row_ids: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        vals = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if vals.ndim != 2:
            raise ValidationError(f"matrix values must be 2-d, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValidationError("matrix contains non-finite values")
        self.values = vals
        if self.col_names is not None:
            names = tuple(str(c) for c in self.col_names)
            if len(names) != vals.shape[1]:
                raise ValidationError(
                    f"{len(names)} column names for {vals.shape[1]} columns"
                )
            if len(set(names)) != len(names):
                raise ValidationError("column names are not unique")
            self.col_names = names
        if self.row_ids is not None:
            ids = tuple(str(r) for r in self.row_ids)
            if len(ids) != vals.shape[0]:
                raise ValidationError(f"{len(ids)} row ids for {vals.shape[0]} rows")
            self.row_ids = ids

    @property
    def rows(self) -> int:
        return int(self.values.shape[0])

    @property
    def cols(self) -> int:
        return int(self.values.shape[1])

    def copy(self) -> "DataMatrix":
        return DataMatrix(self.values.copy(), self.col_names, self.row_ids)


@dataclass(frozen=True)
class MaskSpec:
    """Patch mask: the set of missing columns and the affected row range.

    ``scope`` is a half-open (start, stop) row range; None means all rows.
    Column indices are normalized to a sorted unique tuple.
    """

    missing_cols: tuple[int, ...]
    scope: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        cols = tuple(sorted({int(c) for c in self.missing_cols}))
        if cols and cols[0] < 0:
            raise ValidationError("mask column indices must be non-negative")
        object.__setattr__(self, "missing_cols", cols)
        if self.scope is not None:
            start, stop = int(self.scope[0]), int(self.scope[1])
            if start < 0 or stop < start:
                raise ValidationError(f"invalid mask row scope ({start}, {stop})")
            object.__setattr__(self, "scope", (start, stop))

    @property
    def is_empty(self) -> bool:
        return not self.missing_cols

    def cols_array(self) -> np.ndarray:
        return np.asarray(self.missing_cols, dtype=np.intp)

    def scope_rows(self, n_rows: int) -> np.ndarray:
        if self.scope is None:
            return np.arange(n_rows, dtype=np.intp)
        start, stop = self.scope
        return np.arange(start, min(stop, n_rows), dtype=np.intp)

    def validate_for(self, matrix: DataMatrix, require_nonempty: bool = True) -> None:
        if require_nonempty and self.is_empty:
            raise ValidationError("mask lists no missing columns")
        if self.missing_cols and self.missing_cols[-1] >= matrix.cols:
            raise ValidationError(
                f"mask column {self.missing_cols[-1]} out of range for {matrix.cols} columns"
            )
        if self.scope is not None and self.scope[1] > matrix.rows:
            raise ValidationError(
                f"mask row scope {self.scope} exceeds {matrix.rows} rows"
            )


@dataclass(frozen=True)
class CrotConfig:
    """All hyperparameters of an imputation run.

    ``epsilon`` and ``k`` accept the sentinel ``"auto"``: epsilon is then
    derived from the cost scale of the reference data and k via the elbow
    rule on the complete batch.
    """

    epsilon: float | str = AUTO
    p: int = 2
    alpha: float = 1.0
    iterations: int = 200
    batch_size: int = 512
    k: int | str = AUTO
    k_max: int = 10
    learning_rate: float = 0.1
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    sinkhorn_max_iter: int = 200
    sinkhorn_tol: float = 1e-6
    convergence_window: int = 20
    convergence_rel_tol: float = 1e-4

    def __post_init__(self) -> None:
        if isinstance(self.epsilon, str):
            if self.epsilon != AUTO:
                raise ValidationError(f"epsilon must be a positive number or '{AUTO}'")
        elif not self.epsilon > 0:
            raise ValidationError("epsilon must be > 0")
        if isinstance(self.k, str):
            if self.k != AUTO:
                raise ValidationError(f"k must be a positive integer or '{AUTO}'")
        elif self.k < 1:
            raise ValidationError("k must be >= 1")
        if self.p < 1:
            raise ValidationError("p must be >= 1")
        if self.alpha < 0:
            raise ValidationError("alpha must be >= 0")
        if self.iterations < 1:
            raise ValidationError("iterations must be >= 1")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")
        if self.k_max < 3:
            raise ValidationError("k_max must be >= 3")
        if not self.learning_rate > 0:
            raise ValidationError("learning_rate must be > 0")
        for name in ("adam_beta1", "adam_beta2"):
            beta = getattr(self, name)
            if not 0 < beta < 1:
                raise ValidationError(f"{name} must be in (0, 1)")
        if not self.adam_eps > 0:
            raise ValidationError("adam_eps must be > 0")
        if self.sinkhorn_max_iter < 1:
            raise ValidationError("sinkhorn_max_iter must be >= 1")
        if not self.sinkhorn_tol > 0:
            raise ValidationError("sinkhorn_tol must be > 0")
        if self.convergence_window < 1:
            raise ValidationError("convergence_window must be >= 1")
        if not self.convergence_rel_tol > 0:
            raise ValidationError("convergence_rel_tol must be > 0")

    def stream(self, label: str) -> RngStream:
        return RngStream(self.seed, label)


CONFIG_FIELDS: tuple[str, ...] = tuple(f.name for f in fields(CrotConfig))


def column_mean(X: DataMatrix, j: int) -> float:
    """Arithmetic mean of column j."""
    if X.rows == 0:
        raise ValidationError("cannot take a column mean of an empty matrix")
    if not 0 <= j < X.cols:
        raise IndexError(f"column {j} out of range for {X.cols} columns")
    return float(X.values[:, j].mean())


def sample_indices(m: int, l: int, rng: RngStream | np.random.Generator) -> np.ndarray:
    """Draw l distinct indices from range(m) uniformly without replacement."""
    if l > m:
        raise ValidationError(f"cannot sample {l} distinct indices from {m}")
    gen = _generator_of(rng)
    return gen.choice(m, size=l, replace=False)
